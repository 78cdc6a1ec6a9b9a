"""Reference engine: exact-to-grid time-ordered evolution on the composite space."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import PostselectionFloorError
from .linalg import TOL, dagger, identity
from .model import Scenario, require_valid

log = logging.getLogger(__name__)


def _runs(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Collapse consecutive equal samples into (value, count) runs."""
    edges = np.flatnonzero(np.diff(samples) != 0) + 1
    starts = np.concatenate(([0], edges))
    counts = np.diff(np.concatenate((starts, [samples.size])))
    return samples[starts], counts


def composite_generators(s: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Free Hamiltonian ``H_S x 1 + 1 x H_D`` and coupling operator ``A x X``."""
    h0 = np.kron(s.h_s, identity(s.dim_d)) + np.kron(identity(s.dim_s), s.h_d)
    c = np.kron(s.a_obs, s.x_obs)
    return 0.5 * (h0 + dagger(h0)), 0.5 * (c + dagger(c))


def full_propagator(s: Scenario) -> np.ndarray:
    """Midpoint product formula ``prod_k exp(-i H(t_k) dt)``, later steps on the left.

    ``H(t) = H_S x 1 + 1 x H_D - lam g(t) A x X``. Consecutive steps with the
    same ``g`` share a generator and are merged into one exponential.
    """
    require_valid(s)
    h0, c = composite_generators(s)
    values, counts = _runs(s.coupling.samples)
    return _kernels.time_ordered_product(h0, c, s.lam * values, counts * s.coupling.dt)


def final_state(s: Scenario, u: np.ndarray | None = None) -> np.ndarray:
    u = full_propagator(s) if u is None else u
    rho = np.kron(s.rho_i, s.rho_0)
    out = u @ rho @ dagger(u)
    return 0.5 * (out + dagger(out))


def weighted_born_table(e, e_weights, f, f_weights, rho, dim_s, dim_d) -> np.ndarray:
    """``P[k, j] = w_j w_k Tr[(E_j x F_k) rho]`` for a composite operator ``rho``."""
    r = rho.reshape(dim_s, dim_d, dim_s, dim_d)
    table = np.einsum("jba,kdc,acbd->kj", e, f, r, optimize=True)
    return table.real * np.outer(f_weights, e_weights)


def born_table(s: Scenario, rho: np.ndarray) -> np.ndarray:
    return weighted_born_table(s.sys_povm.effects, s.sys_povm.weights, s.det_povm.effects,
                               s.det_povm.weights, rho, s.dim_s, s.dim_d)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability table indexed ``[detector outcome k, system outcome j]``.

    Entries already include both measure weights.
    """

    p: np.ndarray
    det_labels: list
    det_values: np.ndarray
    sys_labels: list

    @property
    def total(self) -> float:
        return float(self.p.sum())

    def sys_marginal(self) -> np.ndarray:
        return self.p.sum(axis=0)

    def det_marginal(self) -> np.ndarray:
        return self.p.sum(axis=1)

    def postselection_probability(self, f_label: str) -> float:
        return float(self.p[:, self.sys_labels.index(f_label)].sum())

    def conditional(self, f_label: str, floor: float = TOL.floor) -> np.ndarray:
        """``P(R_k | f)`` by Bayes' rule."""
        pf = self.postselection_probability(f_label)
        if not pf > floor:
            raise PostselectionFloorError(
                f"P({f_label}) = {pf:.3e} is below the floor {floor:.1e}")
        return self.p[:, self.sys_labels.index(f_label)] / pf

    def conditional_mean(self, f_label: str, floor: float = TOL.floor) -> float:
        return float(self.det_values @ self.conditional(f_label, floor))


def _clamp(p: np.ndarray) -> np.ndarray:
    tiny = (p < 0) & (p >= -TOL.algebraic)
    if tiny.any():
        log.debug("clamped %d roundoff-negative probabilities (min %.2e)", tiny.sum(), p.min())
        p = np.where(tiny, 0.0, p)
    if (p < -TOL.algebraic).any():
        log.warning("probability table has entries down to %.3e", p.min())
    return p


def exact_joint(s: Scenario, u: np.ndarray | None = None) -> JointDistribution:
    p = _clamp(born_table(s, final_state(s, u)))
    return JointDistribution(p, s.det_povm.labels, s.det_povm.values, s.sys_povm.labels)


def exact_conditional_average(s: Scenario, f_label: str, floor: float = TOL.floor) -> float:
    return exact_joint(s).conditional_mean(f_label, floor)
