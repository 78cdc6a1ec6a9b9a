"""Second-order rational approximation of the postselected pointer statistics.

All time integrals are midpoint sums on the coupling grid, the same grid the
exact engine steps on. The production probability table is the quadratic form
``Tr[(E_j(-tau) x F_k(-tau)) M rho M^dagger]`` with ``M = 1 + i lam V`` and
``V = sum_k dt g_k A(t_k) x X(t_k)``; it is evaluated as a squared Frobenius
norm so every entry is nonnegative by construction. The weak-value assembly
of the same table is kept as an independent cross-check.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NonperturbativeWarning, PostselectionFloorError, RegimeBreakdownError
from .exact import weighted_born_table
from .linalg import TOL, dagger, eigh_hermitian, expectation, identity, sqrtm_psd
from .model import Scenario, pointer_operator, require_valid

# Magnitude of the second-order denominator term above which rational
# results are flagged as outside the perturbative regime.
BREAKDOWN_THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class InteractionPicture:
    """Free-evolution (interaction-representation) operators on the midpoint grid.

    ``a_t[k] = U_S(t_k)^+ A U_S(t_k)``; ``e_back[j] = U_S(tau)^+ E_j U_S(tau)``
    and likewise ``f_back`` for the detector effects; ``r_tau`` is the readout
    operator at the end of the window.
    """

    times: np.ndarray
    g: np.ndarray
    dt: float
    lam: float
    a_t: np.ndarray
    x_t: np.ndarray
    e_back: np.ndarray
    f_back: np.ndarray
    r_tau: np.ndarray
    rho_i: np.ndarray
    rho_0: np.ndarray
    sys_weights: np.ndarray
    det_weights: np.ndarray
    det_values: np.ndarray
    sys_labels: list
    det_labels: list

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.g)

    def x_mean(self) -> np.ndarray:
        """``<X(t_k)>_0`` (real)."""
        return np.einsum("kij,ji->k", self.x_t, self.rho_0).real

    def sys_index(self, f_label: str) -> int:
        try:
            return self.sys_labels.index(f_label)
        except ValueError:
            raise KeyError(f"no system outcome {f_label!r}; have {self.sys_labels}") from None


def _trajectory(h, op, times):
    w, v = eigh_hermitian(h)
    return _kernels.heisenberg_trajectory(w, v, op, times)


def interaction_picture(s: Scenario) -> InteractionPicture:
    require_valid(s)
    c = s.coupling
    tau = np.array([c.tau])
    e_back = np.stack([_trajectory(s.h_s, e, tau)[0] for e in s.sys_povm.effects])
    f_back = np.stack([_trajectory(s.h_d, f, tau)[0] for f in s.det_povm.effects])
    r_tau = _trajectory(s.h_d, pointer_operator(s.det_povm, s.completeness_tol()), tau)[0]
    return InteractionPicture(
        times=c.times, g=c.samples, dt=c.dt, lam=c.lam,
        a_t=_trajectory(s.h_s, s.a_obs, c.times),
        x_t=_trajectory(s.h_d, s.x_obs, c.times),
        e_back=e_back, f_back=f_back, r_tau=0.5 * (r_tau + dagger(r_tau)),
        rho_i=s.rho_i, rho_0=s.rho_0,
        sys_weights=s.sys_povm.weights, det_weights=s.det_povm.weights,
        det_values=s.det_povm.values,
        sys_labels=s.sys_povm.labels, det_labels=s.det_povm.labels)


def _ip(s, ip):
    return interaction_picture(s) if ip is None else ip


# -- weak values --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WeakValueTrace:
    """Time-dependent weak values on the grid; both include their ``lam g`` factors."""

    label: str
    times: np.ndarray
    a_w: np.ndarray
    b_w: np.ndarray
    denom: float

    @property
    def a_real(self) -> np.ndarray:
        return self.a_w.real

    @property
    def a_imag(self) -> np.ndarray:
        return self.a_w.imag


def _system_numerators(ip: InteractionPicture, j: int):
    """Unnormalised ``lam g Tr[E A(t) rho]`` and ``lam^2 g g' Tr[E A(t) rho A(t')]``."""
    n, d = ip.a_t.shape[:2]
    e = ip.e_back[j]
    lg = ip.lam * ip.g
    ea_rho = e[None] @ ip.a_t @ ip.rho_i[None]
    first = lg * np.einsum("kii->k", ea_rho)
    pairs = ea_rho.reshape(n, d * d) @ np.swapaxes(ip.a_t, 1, 2).reshape(n, d * d).T
    second = np.outer(lg, lg) * pairs
    return first, second


def _denominator(ip: InteractionPicture, j: int) -> float:
    return expectation(ip.e_back[j], ip.rho_i).real


def weak_value_trace(s: Scenario, f_label: str, floor: float = TOL.floor,
                     ip: InteractionPicture | None = None) -> WeakValueTrace:
    ip = _ip(s, ip)
    j = ip.sys_index(f_label)
    den = _denominator(ip, j)
    if not abs(den) > floor:
        raise PostselectionFloorError(
            f"Tr[E_{f_label}(-tau) rho_i] = {den:.3e} is below the floor {floor:.1e}")
    first, second = _system_numerators(ip, j)
    return WeakValueTrace(f_label, ip.times, first / den, second / den, den)


# -- rational distribution ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class PerturbativeDistribution:
    """Numerators ``q[k, j]`` and their total ``n_lambda``; probabilities are ``q / n_lambda``."""

    q: np.ndarray
    det_labels: list
    det_values: np.ndarray
    sys_labels: list

    @property
    def n_lambda(self) -> float:
        return float(self.q.sum())

    @property
    def p(self) -> np.ndarray:
        return self.q / self.n_lambda

    def postselection_probability(self, f_label: str) -> float:
        return float(self.q[:, self.sys_labels.index(f_label)].sum() / self.n_lambda)

    def conditional(self, f_label: str) -> np.ndarray:
        col = self.q[:, self.sys_labels.index(f_label)]
        return col / col.sum()

    def conditional_mean(self, f_label: str) -> float:
        return float(self.det_values @ self.conditional(f_label))


def interaction_operator(ip: InteractionPicture) -> np.ndarray:
    """``V = sum_k dt g_k A(t_k) x X(t_k)`` on the composite space."""
    sup = ip.support
    w = ip.dt * ip.g[sup]
    v = np.einsum("k,kab,kcd->acbd", w, ip.a_t[sup], ip.x_t[sup], optimize=True)
    ds, dd = ip.a_t.shape[1], ip.x_t.shape[1]
    v = v.reshape(ds * dd, ds * dd)
    return 0.5 * (v + dagger(v))


def _sum_of_squares_table(ip: InteractionPicture, t: np.ndarray) -> np.ndarray:
    """``sum |(sqrt(E_j) x sqrt(F_k)) T|^2`` over all entries, for each ``(k, j)``."""
    ds, dd = ip.a_t.shape[1], ip.x_t.shape[1]
    t = t.reshape(ds, dd, -1)
    sq_e = np.stack([sqrtm_psd(e) for e in ip.e_back])
    sq_f = np.stack([sqrtm_psd(f) for f in ip.f_back])
    half = np.einsum("jab,bdx->jadx", sq_e, t, optimize=True)
    full = np.einsum("kcd,jadx->kjacx", sq_f, half, optimize=True)
    table = np.sum(full.real ** 2 + full.imag ** 2, axis=(2, 3, 4))
    return table * np.outer(ip.det_weights, ip.sys_weights)


def _dist(ip, q) -> PerturbativeDistribution:
    return PerturbativeDistribution(q, ip.det_labels, ip.det_values, ip.sys_labels)


def perturbative_joint(s: Scenario, ip: InteractionPicture | None = None) -> PerturbativeDistribution:
    ip = _ip(s, ip)
    dim = ip.rho_i.shape[0] * ip.rho_0.shape[0]
    m = identity(dim) + 1j * ip.lam * interaction_operator(ip)
    root_rho = np.kron(sqrtm_psd(ip.rho_i), sqrtm_psd(ip.rho_0))
    return _dist(ip, _sum_of_squares_table(ip, m @ root_rho))


def _detector_first(ip: InteractionPicture, a: np.ndarray) -> np.ndarray:
    """``sum_t dt a(t) X(t) rho_0``."""
    sup = ip.support
    return ip.dt * np.einsum("k,kij->ij", a[sup], ip.x_t[sup]) @ ip.rho_0


def _detector_second(ip: InteractionPicture, b: np.ndarray, swap: bool = False) -> np.ndarray:
    """``sum_{t,t'} dt^2 b(t,t') X(t) rho_0 X(t')``.

    ``swap`` sums over ``t`` first instead of ``t'``; the two orders agree.
    """
    sup = ip.support
    x = ip.x_t[sup]
    n, d = x.shape[:2]
    bb = b[np.ix_(sup, sup)] * ip.dt ** 2
    if swap:
        left = (bb.T @ x.reshape(n, d * d)).reshape(n, d, d)  # sum_t b(t, t') X(t)
        return np.einsum("sij,jk,skl->il", left, ip.rho_0, x, optimize=True)
    right = (bb @ x.reshape(n, d * d)).reshape(n, d, d)  # sum_t' b(t, t') X(t')
    return np.einsum("tij,jk,tkl->il", x, ip.rho_0, right, optimize=True)


def _traces(ops: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.einsum("kij,ji->k", ops, y)


def perturbative_joint_weakvalue_form(s: Scenario, floor: float = TOL.floor,
                                      ip: InteractionPicture | None = None,
                                      swap: bool = False) -> PerturbativeDistribution:
    """Same table as :func:`perturbative_joint`, assembled from weak values and
    detector-only traces."""
    ip = _ip(s, ip)
    zeroth = _traces(ip.f_back, ip.rho_0).real
    q = np.empty((len(ip.det_labels), len(ip.sys_labels)))
    for j, label in enumerate(ip.sys_labels):
        wv = weak_value_trace(s, label, floor, ip)
        c1 = _traces(ip.f_back, _detector_first(ip, wv.a_w))
        c2 = _traces(ip.f_back, _detector_second(ip, wv.b_w, swap))
        brace = zeroth + (1j * c1 + np.conj(1j * c1)).real + c2.real
        q[:, j] = ip.sys_weights[j] * wv.denom * ip.det_weights * brace
    return _dist(ip, q)


def _brace_total(ip: InteractionPicture, first: np.ndarray, second: np.ndarray) -> float:
    """Unnormalised ``den * (1 - 2 int <X> A'' + iint <X'X> B)`` from numerators."""
    x_mean = ip.x_mean()
    sup = ip.support
    lin = -2.0 * ip.dt * np.sum(x_mean[sup] * first[sup].imag)
    quad = np.trace(_detector_second(ip, second)).real
    return lin + quad


def normalization(s: Scenario, ip: InteractionPicture | None = None) -> float:
    """``N(lam)``: the postselection braces summed over every system outcome."""
    ip = _ip(s, ip)
    total = 0.0
    for j in range(len(ip.sys_labels)):
        first, second = _system_numerators(ip, j)
        total += ip.sys_weights[j] * (_denominator(ip, j) + _brace_total(ip, first, second))
    return total


def postselection_probability(s: Scenario, f_label: str, floor: float = TOL.floor,
                              ip: InteractionPicture | None = None) -> float:
    ip = _ip(s, ip)
    j = ip.sys_index(f_label)
    wv = weak_value_trace(s, f_label, floor, ip)
    sup = ip.support
    brace = (1.0 - 2.0 * ip.dt * np.sum(ip.x_mean()[sup] * wv.a_imag[sup])
             + np.trace(_detector_second(ip, wv.b_w)).real)
    return float(ip.sys_weights[j] * wv.denom * brace / normalization(s, ip))


# -- conditional averages -----------------------------------------------------

@dataclass(frozen=True)
class RationalAverageTerms:
    """Pieces of the rational conditional average; ``value = numerator / denominator``."""

    r0: float
    first_numerator: float
    second_numerator: float
    first_denominator: float
    second_denominator: float
    denominator_imag: float

    @property
    def numerator(self) -> float:
        return self.r0 + self.first_numerator + self.second_numerator

    @property
    def denominator(self) -> float:
        return 1.0 + self.first_denominator + self.second_denominator

    @property
    def value(self) -> float:
        return self.numerator / self.denominator

    @property
    def nonperturbative(self) -> bool:
        return self.denominator <= 0 or abs(self.second_denominator) > BREAKDOWN_THRESHOLD


def conditional_average_terms(s: Scenario, f_label: str, floor: float = TOL.floor,
                              ip: InteractionPicture | None = None) -> RationalAverageTerms:
    ip = _ip(s, ip)
    wv = weak_value_trace(s, f_label, floor, ip)
    sup = ip.support
    x, r, rho0 = ip.x_t[sup], ip.r_tau, ip.rho_0
    rx = np.einsum("ij,kjl,li->k", r, x, rho0)  # <R X(t)>
    xr = np.einsum("kij,jl,li->k", x, r, rho0)  # <X(t) R>
    comm, anti = rx - xr, rx + xr
    a1, a2 = wv.a_real[sup], wv.a_imag[sup]
    first_num = ip.dt * np.sum(1j * a1 * comm - a2 * anti)
    y2 = _detector_second(ip, wv.b_w)
    first_den = -2.0 * ip.dt * np.sum(ip.x_mean()[sup] * a2)
    second_den = np.trace(y2)
    return RationalAverageTerms(
        r0=expectation(r, rho0).real,
        first_numerator=float(first_num.real),
        second_numerator=float(expectation(r, y2).real),
        first_denominator=float(first_den),
        second_denominator=float(second_den.real),
        denominator_imag=float(second_den.imag),
    )


def conditional_average_main(s: Scenario, f_label: str, floor: float = TOL.floor,
                             ip: InteractionPicture | None = None) -> float:
    """Conditional pointer average from the rational second-order expansion.

    Raises :class:`RegimeBreakdownError` if the denominator is not positive and
    warns with :class:`NonperturbativeWarning` when the second-order term of
    the denominator exceeds ``BREAKDOWN_THRESHOLD``.
    """
    terms = conditional_average_terms(s, f_label, floor, ip)
    if terms.denominator <= 0:
        raise RegimeBreakdownError(f"denominator {terms.denominator:.3e} is not positive")
    if terms.nonperturbative:
        warnings.warn(
            f"second-order denominator term {terms.second_denominator:.3g} exceeds "
            f"{BREAKDOWN_THRESHOLD}; result is outside the perturbative regime",
            NonperturbativeWarning, stacklevel=2)
    return terms.value


def force_term(s: Scenario, f_label: str, k: int, floor: float = TOL.floor,
               ip: InteractionPicture | None = None) -> np.ndarray:
    """``A_w(t_k) (X(t_k) - <X(t_k)>_0)``; Hermitian only when ``A_w(t_k)`` is real."""
    ip = _ip(s, ip)
    wv = weak_value_trace(s, f_label, floor, ip)
    x = ip.x_t[k]
    centred = x - expectation(x, ip.rho_0).real * identity(x.shape[0])
    return wv.a_w[k] * centred


def linear_response(ip: InteractionPicture, source: np.ndarray) -> float:
    """``<R(tau)>_0 + i int dt <R W(t) - W^+(t) R>_0`` with ``W = source (X - <X>)``."""
    sup = ip.support
    x, r, rho0 = ip.x_t[sup], ip.r_tau, ip.rho_0
    d = x.shape[1]
    centred = x - ip.x_mean()[sup][:, None, None] * identity(d)[None]
    rw = np.einsum("ij,kjl,li->k", r, centred, rho0)  # <R Xc(t)>
    wr = np.einsum("kij,jl,li->k", centred, r, rho0)  # <Xc(t) R>
    a = source[sup]
    delta = 1j * ip.dt * np.sum(a * rw - np.conj(a) * wr)
    return float(expectation(r, rho0).real + delta.real)


def modified_kubo(s: Scenario, f_label: str, floor: float = TOL.floor,
                  ip: InteractionPicture | None = None) -> float:
    ip = _ip(s, ip)
    return linear_response(ip, weak_value_trace(s, f_label, floor, ip).a_w)


def ordinary_kubo(s: Scenario, ip: InteractionPicture | None = None) -> float:
    """Linear response to the unconditioned source ``lam g(t) Tr[A(t) rho_i]``."""
    ip = _ip(s, ip)
    source = ip.lam * ip.g * np.einsum("kij,ji->k", ip.a_t, ip.rho_i).real
    return linear_response(ip, source.astype(np.complex128))


# -- naive Taylor comparator --------------------------------------------------

@dataclass(frozen=True, eq=False)
class TaylorDistribution:
    """Second-order Taylor polynomials of the rational probabilities; may go negative.

    ``joint`` expands ``q / N``; ``conditional`` expands each column ``q / sum_k q``.
    """

    joint: np.ndarray
    conditional: np.ndarray
    rational_joint: np.ndarray
    rational_conditional: np.ndarray

    @property
    def min_entry(self) -> float:
        return float(min(self.joint.min(), self.conditional.min()))

    @property
    def min_rational(self) -> float:
        return float(min(self.rational_joint.min(), self.rational_conditional.min()))

    def has_negative(self, threshold: float = 0.0) -> bool:
        return self.min_entry < -threshold


def _taylor_ratio(q0, q1, q2, n0, n1, n2, lam):
    c0 = q0 / n0
    c1 = (q1 - c0 * n1) / n0
    c2 = (q2 - c1 * n1 - c0 * n2) / n0
    return c0 + lam * c1 + lam ** 2 * c2


def polynomial_coefficients(s: Scenario, ip: InteractionPicture | None = None):
    """``(q0, q1, q2)`` with ``q(lam) = q0 + lam q1 + lam^2 q2`` (signed, expanded form)."""
    ip = _ip(s, ip)
    v = interaction_operator(ip)
    rho = np.kron(ip.rho_i, ip.rho_0)
    ds, dd = ip.rho_i.shape[0], ip.rho_0.shape[0]

    def table(op):
        return weighted_born_table(ip.e_back, ip.sys_weights, ip.f_back, ip.det_weights,
                                   op, ds, dd)

    return table(rho), table(1j * (v @ rho - rho @ v)), table(v @ rho @ v)


def naive_taylor_probability(s: Scenario, ip: InteractionPicture | None = None) -> TaylorDistribution:
    ip = _ip(s, ip)
    lam = ip.lam
    q0, q1, q2 = polynomial_coefficients(s, ip)
    joint = _taylor_ratio(q0, q1, q2, q0.sum(), q1.sum(), q2.sum(), lam)
    cond = _taylor_ratio(q0, q1, q2, q0.sum(axis=0), q1.sum(axis=0), q2.sum(axis=0), lam)
    rational = perturbative_joint(s, ip)
    return TaylorDistribution(joint, cond, rational.p, rational.q / rational.q.sum(axis=0))
