"""Dense complex matrix helpers shared by the engines.

Operators are plain ``numpy`` complex128 arrays of shape ``(dim, dim)`` in
C (row-major) order. Composite system-detector indices follow ``np.kron``:
the composite index of ``(i_s, i_d)`` is ``i_s * dim_d + i_d``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NotHermitianError


@dataclass(frozen=True)
class Tolerances:
    structural: float = 1e-10
    algebraic: float = 1e-12
    completeness: float = 1e-8
    truncated_completeness: float = 1e-6
    floor: float = 1e-12
    noise_floor: float = 1e-13


TOL = Tolerances()


def as_operator(m) -> np.ndarray:
    a = np.ascontiguousarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"operator must be square, got shape {a.shape}")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.complex128)


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(as_operator(a), as_operator(b))


def _split(m: np.ndarray, dim_s: int, dim_d: int) -> np.ndarray:
    m = as_operator(m)
    if m.shape[0] != dim_s * dim_d:
        raise DimensionError(
            f"operator of dim {m.shape[0]} cannot split into {dim_s} x {dim_d}")
    return m.reshape(dim_s, dim_d, dim_s, dim_d)


def partial_trace_system(m: np.ndarray, dim_s: int, dim_d: int) -> np.ndarray:
    """Trace out the system factor, leaving a ``dim_d x dim_d`` operator."""
    return np.einsum("aiaj->ij", _split(m, dim_s, dim_d))


def partial_trace_detector(m: np.ndarray, dim_s: int, dim_d: int) -> np.ndarray:
    """Trace out the detector factor, leaving a ``dim_s x dim_s`` operator."""
    return np.einsum("iaja->ij", _split(m, dim_s, dim_d))


def is_hermitian(m: np.ndarray, tol: float = TOL.structural) -> bool:
    m = np.asarray(m)
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def is_psd(m: np.ndarray, tol: float = TOL.structural) -> bool:
    if not is_hermitian(m, tol):
        return False
    h = 0.5 * (m + dagger(m))
    return bool(np.linalg.eigvalsh(h).min() >= -tol)


def is_unitary(m: np.ndarray, tol: float = TOL.structural) -> bool:
    return unitarity_defect(m) <= tol


def unitarity_defect(u: np.ndarray) -> float:
    """``max |U^dagger U - I|`` entrywise."""
    u = np.asarray(u)
    return float(np.max(np.abs(dagger(u) @ u - np.eye(u.shape[0]))))


def eigh_hermitian(h: np.ndarray, tol: float = TOL.structural):
    h = as_operator(h)
    if not is_hermitian(h, tol):
        raise NotHermitianError(
            f"generator deviates from Hermitian by {np.max(np.abs(h - dagger(h))):.3e}")
    return np.linalg.eigh(0.5 * (h + dagger(h)))


def hermitian_exp(h: np.ndarray, s: float) -> np.ndarray:
    """Return ``exp(-i s h)`` for Hermitian ``h`` via its eigendecomposition."""
    w, v = eigh_hermitian(h)
    return (v * np.exp(-1j * s * w)) @ dagger(v)


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + dagger(m)))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ dagger(v)


def inv_sqrtm_pd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + dagger(m)))
    if w.min() <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return (v / np.sqrt(w)) @ dagger(v)


def expectation(op: np.ndarray, rho: np.ndarray) -> complex:
    """``Tr[op rho]`` without forming the product."""
    return complex(np.sum(op * rho.T))
