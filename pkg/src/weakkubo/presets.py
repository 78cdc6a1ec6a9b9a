"""Canonical scenarios.

``aav_gaussian``
    Qubit system measured by a truncated harmonic-oscillator pointer in its
    ground state. Coupling is ``sigma_z`` times the position quadrature
    during a single grid cell (the delta-kick limit); the readout is the
    momentum quadrature, measured projectively in the eigenbasis of its
    truncated matrix. Pre- and postselected states are real qubit states at
    overlap ``sin(eps)``, so ``eps = pi/2`` selects the preparation itself
    and small ``eps`` gives a nearly orthogonal pair. Both states are real by
    default, so the weak value is real; ``phi_f`` adds a relative phase.

``qubit_qubit``
    Two qubits with free precession. ``A = sigma_x`` does not commute with
    ``H_S = omega_s sigma_z / 2``; the readout ``R = sigma_z`` does not
    commute with ``H_D = omega_d sigma_x / 2``. ``X = sigma_x`` is conserved
    and squares to the identity.

``random_seeded``
    Reproducible random scenario from one integer seed. Every Hermitian
    operator is ``U diag(d) U^dagger`` with ``U`` a Haar unitary (QR of a
    complex Ginibre matrix, phases fixed by the diagonal of ``R``) and ``d``
    drawn uniformly; states use Dirichlet spectra; POVM effects are
    ``S^{-1/2} G_k S^{-1/2} / w_k`` with random PSD ``G_k``, ``S = sum G_k``
    and random measure weights ``w_k``.

``taylor_negativity``
    The ``random_seeded`` scenario and coupling strength pinned by
    :func:`weakkubo.harness.negativity_search`, where the second-order Taylor
    polynomial of the probabilities goes negative.
"""

from __future__ import annotations

import inspect

import numpy as np

from .errors import ConfigError
from .linalg import dagger, inv_sqrtm_pd
from .model import CouplingProfile, Povm, PovmOutcome, Scenario

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

# First hit of ``harness.negativity_search(seed=0, trials=200)``; replayed in the tests.
TAYLOR_NEGATIVITY_SEED = 0
TAYLOR_NEGATIVITY_LAM = 2.0


def bloch_state(theta: float, phi: float = 0.0) -> np.ndarray:
    psi = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    return np.outer(psi, psi.conj())


def qubit_basis_povm(theta: float, phi: float = 0.0, labels=("+", "-"),
                     values=(1.0, -1.0)) -> Povm:
    e = bloch_state(theta, phi)
    return Povm((PovmOutcome(labels[0], values[0], e),
                 PovmOutcome(labels[1], values[1], np.eye(2) - e)))


def oscillator_quadratures(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated position and momentum, ``x = (a + a^+)/sqrt2``, ``p = i(a^+ - a)/sqrt2``."""
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(np.complex128)
    x = (a + dagger(a)) / np.sqrt(2)
    p = 1j * (dagger(a) - a) / np.sqrt(2)
    return x, p


def aav_gaussian(eps: float = 0.1, lam: float = 0.01, dim_d: int = 60, n_t: int = 1024,
                 tau: float = 1.0, theta_i: float = np.pi / 4, phi_f: float = 0.0) -> Scenario:
    """``phi_f`` puts a relative phase on the postselected state, making ``A_w`` complex."""
    if dim_d < 40:
        raise ConfigError("aav_gaussian needs dim_d >= 40 for the truncated pointer")
    if not 0 < eps <= np.pi / 2:
        raise ConfigError("eps must lie in (0, pi/2]")
    theta_f = theta_i - (np.pi / 2 - eps)
    ket_i = np.array([np.cos(theta_i), np.sin(theta_i)], dtype=np.complex128)
    ket_f = np.array([np.cos(theta_f), np.exp(1j * phi_f) * np.sin(theta_f)])
    e_f = np.outer(ket_f, ket_f.conj())
    sys_povm = Povm((PovmOutcome("+", 1.0, e_f), PovmOutcome("-", -1.0, np.eye(2) - e_f)))

    x, p = oscillator_quadratures(dim_d)
    w, v = np.linalg.eigh(p)
    det_povm = Povm.projective(v, w, [f"p{k:02d}" for k in range(dim_d)])
    rho_0 = np.zeros((dim_d, dim_d), dtype=np.complex128)
    rho_0[0, 0] = 1.0
    return Scenario(
        dim_s=2, dim_d=dim_d,
        h_s=np.zeros((2, 2)), h_d=np.zeros((dim_d, dim_d)),
        a_obs=SIGMA_Z, x_obs=x,
        rho_i=np.outer(ket_i, ket_i.conj()), rho_0=rho_0,
        sys_povm=sys_povm, det_povm=det_povm,
        coupling=CouplingProfile.from_shape("pulse", n_t, tau, lam, first_cell=0, n_cells=1),
        metadata={
            "preset": "aav_gaussian",
            "completeness_tol": 1e-6,
            "description": f"delta-like kick of width tau/n_t = {tau / n_t:g}; "
                           f"truncated pointer of dimension {dim_d}",
        },
    )


def qubit_qubit(lam: float = 0.05, n_t: int = 1024, tau: float = 1.0,
                omega_s: float = 1.3, omega_d: float = 0.9, theta_f: float = 1.4,
                phi_f: float = -3.0, shape: str = "boxcar") -> Scenario:
    return Scenario(
        dim_s=2, dim_d=2,
        h_s=0.5 * omega_s * SIGMA_Z, h_d=0.5 * omega_d * SIGMA_X,
        a_obs=SIGMA_X, x_obs=SIGMA_X,
        rho_i=bloch_state(1.1, 0.4), rho_0=bloch_state(0.6, 0.3),
        sys_povm=qubit_basis_povm(theta_f, phi_f),
        det_povm=qubit_basis_povm(0.0, 0.0, labels=("up", "down")),
        coupling=CouplingProfile.from_shape(shape, n_t, tau, lam),
        metadata={"preset": "qubit_qubit"},
    )


def haar_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(rng, dim, scale=1.0) -> np.ndarray:
    u = haar_unitary(rng, dim)
    h = (u * rng.uniform(-scale, scale, dim)) @ dagger(u)
    return 0.5 * (h + dagger(h))


def random_density(rng, dim, pure=False) -> np.ndarray:
    u = haar_unitary(rng, dim)
    spectrum = np.eye(dim)[0] if pure else rng.dirichlet(np.ones(dim))
    rho = (u * spectrum) @ dagger(u)
    return 0.5 * (rho + dagger(rho))


def random_povm(rng, dim, n_out, prefix, sharp=False) -> Povm:
    """Random POVM; ``sharp`` gives rank-1 projectors onto a Haar basis (``n_out = dim``)."""
    if sharp:
        u = haar_unitary(rng, dim)
        gs = [np.outer(u[:, k], u[:, k].conj()) for k in range(dim)]
        n_out = dim
        s_inv = np.eye(dim)
    else:
        gs = []
        for _ in range(n_out):
            u = haar_unitary(rng, dim)
            gs.append((u * rng.uniform(0.05, 1.0, dim)) @ dagger(u))
        s_inv = inv_sqrtm_pd(sum(gs))
    weights = rng.uniform(0.5, 2.0, n_out)
    values = rng.uniform(-1.0, 1.0, n_out)
    outcomes = []
    for k, g in enumerate(gs):
        e = s_inv @ g @ s_inv / weights[k]
        outcomes.append(PovmOutcome(f"{prefix}{k}", values[k], 0.5 * (e + dagger(e)), weights[k]))
    return Povm(tuple(outcomes))


def random_seeded(seed: int = 0, lam: float = 0.1, n_t: int = 64, tau: float = 1.0,
                  kind: str = "mixed") -> Scenario:
    """``kind="sharp"`` uses pure states and rank-1 projective POVMs."""
    if kind not in ("mixed", "sharp"):
        raise ConfigError(f"kind must be 'mixed' or 'sharp', got {kind!r}")
    sharp = kind == "sharp"
    rng = np.random.default_rng(seed)
    dim_s = int(rng.integers(2, 4))
    dim_d = int(rng.integers(2, 4))
    n_bumps = int(rng.integers(1, 4))
    coupling = CouplingProfile.from_shape(
        "bumps", n_t, tau, lam,
        centers=rng.uniform(0.2, 0.8, n_bumps).tolist(),
        widths=rng.uniform(0.08, 0.3, n_bumps).tolist(),
        amplitudes=rng.uniform(0.2, 1.0, n_bumps).tolist())
    return Scenario(
        dim_s=dim_s, dim_d=dim_d,
        h_s=random_hermitian(rng, dim_s, 2.0), h_d=random_hermitian(rng, dim_d, 2.0),
        a_obs=random_hermitian(rng, dim_s), x_obs=random_hermitian(rng, dim_d),
        rho_i=random_density(rng, dim_s, sharp), rho_0=random_density(rng, dim_d, sharp),
        sys_povm=random_povm(rng, dim_s, int(rng.integers(2, 4)), "f", sharp),
        det_povm=random_povm(rng, dim_d, int(rng.integers(2, 5)), "r", sharp),
        coupling=coupling,
        metadata={"preset": "random_seeded", "seed": int(seed), "kind": kind},
    )


def taylor_negativity(n_t: int = 64) -> Scenario:
    s = random_seeded(TAYLOR_NEGATIVITY_SEED, TAYLOR_NEGATIVITY_LAM, n_t, kind="sharp")
    s.metadata["preset"] = "taylor_negativity"
    return s


PRESETS = {
    "aav_gaussian": aav_gaussian,
    "qubit_qubit": qubit_qubit,
    "random_seeded": random_seeded,
    "taylor_negativity": taylor_negativity,
}


def preset_params(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    sig = inspect.signature(PRESETS[name])
    return {k: p.default for k, p in sig.parameters.items()}


def preset(name: str, **params) -> Scenario:
    defaults = preset_params(name)
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigError(f"preset {name!r} has no parameter(s) {sorted(unknown)}")
    try:
        return PRESETS[name](**params)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid parameters for preset {name!r}: {exc}") from exc
