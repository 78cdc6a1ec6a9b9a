"""Hot loops: time-ordered products and Heisenberg-picture trajectories.

Each kernel has a numba ``@njit`` body and a pure-numpy twin with identical
semantics. The numba path is used when numba imports and the environment
variable ``WEAKKUBO_NUMBA`` is not set to ``0``; the numpy path is always
available as ``*_numpy`` for cross-checking and benchmarking.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba = None


def numba_enabled() -> bool:
    return numba is not None and os.environ.get("WEAKKUBO_NUMBA", "1") != "0"


# -- numpy twins --------------------------------------------------------------

def time_ordered_product_numpy(h0, coupling, strengths, durations):
    """``prod_r exp(-i (h0 - c_r C) T_r)`` with later runs on the left."""
    dim = h0.shape[0]
    gens = h0[None, :, :] - strengths[:, None, None] * coupling[None, :, :]
    w, v = np.linalg.eigh(gens)
    steps = (v * np.exp(-1j * w * durations[:, None])[:, None, :]) @ np.conj(
        np.swapaxes(v, -1, -2))
    u = np.eye(dim, dtype=np.complex128)
    for step in steps:
        u = step @ u
    return u


def heisenberg_trajectory_numpy(w, v, op, times):
    """``exp(iHt) op exp(-iHt)`` for each ``t`` given ``H = v diag(w) v^dagger``."""
    op_eig = np.conj(v.T) @ op @ v
    phase = np.exp(1j * np.subtract.outer(w, w)[None, :, :] * times[:, None, None])
    return v[None] @ (phase * op_eig[None]) @ np.conj(v.T)[None]


# -- numba bodies -------------------------------------------------------------

def _time_ordered_product_nb(h0, coupling, strengths, durations):
    dim = h0.shape[0]
    u = np.eye(dim, dtype=np.complex128)
    for r in range(strengths.shape[0]):
        gen = h0 - strengths[r] * coupling
        w, v = np.linalg.eigh(gen)
        ph = np.exp(-1j * w * durations[r])
        vp = v * ph
        step = vp @ np.conj(v.T)
        u = step @ u
    return u


def _heisenberg_trajectory_nb(w, v, op, times):
    dim = w.shape[0]
    vh = np.ascontiguousarray(np.conj(v.T))
    op_eig = vh @ op @ v
    out = np.empty((times.shape[0], dim, dim), dtype=np.complex128)
    rotated = np.empty((dim, dim), dtype=np.complex128)
    for k in range(times.shape[0]):
        t = times[k]
        for m in range(dim):
            for n in range(dim):
                rotated[m, n] = np.exp(1j * (w[m] - w[n]) * t) * op_eig[m, n]
        out[k] = v @ rotated @ vh
    return out


if numba is not None:
    _time_ordered_product_jit = numba.njit(cache=True)(_time_ordered_product_nb)
    _heisenberg_trajectory_jit = numba.njit(cache=True)(_heisenberg_trajectory_nb)
else:  # pragma: no cover
    _time_ordered_product_jit = None
    _heisenberg_trajectory_jit = None


def time_ordered_product_numba(h0, coupling, strengths, durations):
    return _time_ordered_product_jit(
        np.ascontiguousarray(h0, dtype=np.complex128),
        np.ascontiguousarray(coupling, dtype=np.complex128),
        np.ascontiguousarray(strengths, dtype=np.float64),
        np.ascontiguousarray(durations, dtype=np.float64))


def heisenberg_trajectory_numba(w, v, op, times):
    return _heisenberg_trajectory_jit(
        np.ascontiguousarray(w, dtype=np.float64),
        np.ascontiguousarray(v, dtype=np.complex128),
        np.ascontiguousarray(op, dtype=np.complex128),
        np.ascontiguousarray(times, dtype=np.float64))


def time_ordered_product(h0, coupling, strengths, durations):
    if numba_enabled():
        return time_ordered_product_numba(h0, coupling, strengths, durations)
    return time_ordered_product_numpy(h0, coupling, strengths, durations)


def heisenberg_trajectory(w, v, op, times):
    if numba_enabled():
        return heisenberg_trajectory_numba(w, v, op, times)
    return heisenberg_trajectory_numpy(w, v, op, times)
