"""Scenario types: POVMs, coupling profiles, and the full system-detector setup.

Units: hbar = 1, so Hamiltonians are angular frequencies and the coupling
strength ``lam`` is dimensionless. Continuous readouts are represented by a
finite list of outcomes, each carrying a measure weight that plays the role
of the integration measure; completeness means ``sum_k weight_k * effect_k = I``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import ConfigError, InvalidScenarioError
from .linalg import TOL, as_operator, dagger, is_hermitian, is_psd


@dataclass(frozen=True, eq=False)
class PovmOutcome:
    label: str
    value: float
    effect: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "effect", as_operator(self.effect))
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "weight", float(self.weight))


@dataclass(frozen=True, eq=False)
class Povm:
    outcomes: tuple[PovmOutcome, ...]

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(self.outcomes))

    def __len__(self):
        return len(self.outcomes)

    def __iter__(self):
        return iter(self.outcomes)

    @property
    def dim(self) -> int:
        return self.outcomes[0].effect.shape[0]

    @property
    def labels(self) -> list[str]:
        return [o.label for o in self.outcomes]

    @property
    def values(self) -> np.ndarray:
        return np.array([o.value for o in self.outcomes])

    @property
    def weights(self) -> np.ndarray:
        return np.array([o.weight for o in self.outcomes])

    @property
    def effects(self) -> np.ndarray:
        return np.stack([o.effect for o in self.outcomes])

    def index(self, label: str) -> int:
        for i, o in enumerate(self.outcomes):
            if o.label == label:
                return i
        raise KeyError(f"no outcome labelled {label!r}; have {self.labels}")

    def __getitem__(self, label: str) -> PovmOutcome:
        return self.outcomes[self.index(label)]

    def completeness_defect(self) -> float:
        total = np.einsum("k,kij->ij", self.weights, self.effects)
        return float(np.max(np.abs(total - np.eye(self.dim))))

    @classmethod
    def projective(cls, vectors, values, labels=None) -> "Povm":
        """Projectors onto the columns of ``vectors`` (orthonormal basis)."""
        vectors = np.asarray(vectors, dtype=np.complex128)
        n = vectors.shape[1]
        labels = labels if labels is not None else [f"r{k}" for k in range(n)]
        return cls(tuple(
            PovmOutcome(labels[k], values[k], np.outer(vectors[:, k], vectors[:, k].conj()))
            for k in range(n)))

    @classmethod
    def trivial(cls, dim: int, label: str = "any") -> "Povm":
        """Single identity effect: no postselection."""
        return cls((PovmOutcome(label, 1.0, np.eye(dim)),))


def _normalised(samples: np.ndarray, dt: float) -> np.ndarray:
    total = samples.sum() * dt
    if total == 0:
        raise ConfigError("coupling profile integrates to zero")
    return samples / total


def _shape_samples(name: str, n_t: int, tau: float, params: dict) -> np.ndarray:
    dt = tau / n_t
    t = (np.arange(n_t) + 0.5) * dt
    if name == "boxcar":
        raw = np.ones(n_t)
    elif name == "pulse":
        start = int(params.get("first_cell", 0))
        width = int(params.get("n_cells", 1))
        if not (0 <= start and width >= 1 and start + width <= n_t):
            raise ConfigError(f"pulse cells [{start}, {start + width}) outside grid of {n_t}")
        raw = np.zeros(n_t)
        raw[start:start + width] = 1.0
    elif name == "hann":
        raw = np.sin(np.pi * t / tau) ** 2
    elif name == "bumps":
        centers = np.asarray(params["centers"], dtype=float)
        widths = np.asarray(params["widths"], dtype=float)
        amps = np.asarray(params["amplitudes"], dtype=float)
        raw = np.exp(-0.5 * ((t[:, None] - centers * tau) / (widths * tau)) ** 2) @ amps
    else:
        raise ConfigError(f"unknown coupling shape {name!r}")
    return _normalised(raw, dt)


@dataclass(frozen=True, eq=False)
class CouplingProfile:
    """Time profile ``g`` sampled at the ``n_t`` midpoints of ``[0, tau]``.

    ``shape``/``shape_params`` are kept when the profile came from a named
    shape, so it can be regenerated at another resolution.
    """

    tau: float
    samples: np.ndarray
    lam: float = 0.0
    shape: str | None = None
    shape_params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float).copy())
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "lam", float(self.lam))

    @classmethod
    def from_shape(cls, shape: str, n_t: int, tau: float = 1.0, lam: float = 0.0,
                   **params) -> "CouplingProfile":
        if n_t < 1 or tau <= 0:
            raise ConfigError("coupling needs n_t >= 1 and tau > 0")
        return cls(tau, _shape_samples(shape, n_t, tau, params), lam, shape, dict(params))

    @property
    def n_t(self) -> int:
        return self.samples.shape[0]

    @property
    def dt(self) -> float:
        return self.tau / self.n_t

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.n_t) + 0.5) * self.dt

    @property
    def integral(self) -> float:
        return float(self.samples.sum() * self.dt)

    def with_resolution(self, n_t: int) -> "CouplingProfile":
        if self.shape is None:
            raise ConfigError("cannot resample a coupling given as explicit samples")
        return CouplingProfile.from_shape(self.shape, n_t, self.tau, self.lam,
                                          **self.shape_params)


@dataclass(frozen=True, eq=False)
class Scenario:
    dim_s: int
    dim_d: int
    h_s: np.ndarray
    h_d: np.ndarray
    a_obs: np.ndarray
    x_obs: np.ndarray
    rho_i: np.ndarray
    rho_0: np.ndarray
    sys_povm: Povm
    det_povm: Povm
    coupling: CouplingProfile
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("h_s", "h_d", "a_obs", "x_obs", "rho_i", "rho_0"):
            object.__setattr__(self, name, as_operator(getattr(self, name)))

    @property
    def n_t(self) -> int:
        return self.coupling.n_t

    @property
    def lam(self) -> float:
        return self.coupling.lam

    def with_lambda(self, lam: float) -> "Scenario":
        return replace(self, coupling=replace(self.coupling, lam=float(lam)))

    def with_resolution(self, n_t: int) -> "Scenario":
        return replace(self, coupling=self.coupling.with_resolution(n_t))

    def with_sys_povm(self, povm: Povm) -> "Scenario":
        return replace(self, sys_povm=povm)

    def completeness_tol(self) -> float:
        return float(self.metadata.get("completeness_tol", TOL.completeness))


@dataclass(frozen=True)
class Finding:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


def density_findings(name: str, rho: np.ndarray, dim: int) -> list[Finding]:
    out = []
    if rho.shape != (dim, dim):
        return [Finding(f"{name}.dim", f"shape {rho.shape}, expected {(dim, dim)}")]
    if not is_hermitian(rho):
        out.append(Finding(f"{name}.hermitian", "state is not Hermitian"))
        return out
    w = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))
    if w.min() < -TOL.structural:
        out.append(Finding(f"{name}.psd", f"minimum eigenvalue {w.min():.3e}"))
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) >= TOL.structural:
        out.append(Finding(f"{name}.trace", f"trace {tr:.12g} != 1"))
    return out


def povm_findings(name: str, povm: Povm, dim: int, tol: float) -> list[Finding]:
    out = []
    if len(povm) == 0:
        return [Finding(f"{name}.empty", "POVM has no outcomes")]
    labels = povm.labels
    if len(set(labels)) != len(labels):
        out.append(Finding(f"{name}.labels", "outcome labels are not unique"))
    for o in povm:
        if o.effect.shape != (dim, dim):
            out.append(Finding(f"{name}.dim", f"effect {o.label!r} has shape {o.effect.shape}"))
            return out
        if not is_psd(o.effect):
            out.append(Finding(f"{name}.psd", f"effect {o.label!r} is not positive semidefinite"))
        if not (o.weight >= 0 and np.isfinite(o.weight)):
            out.append(Finding(f"{name}.weight", f"effect {o.label!r} has weight {o.weight}"))
        if not np.isfinite(o.value):
            out.append(Finding(f"{name}.value", f"effect {o.label!r} has value {o.value}"))
    defect = povm.completeness_defect()
    if not defect < tol:
        out.append(Finding(f"{name}.completeness",
                           f"weighted sum of effects deviates from identity by {defect:.3e}"))
    return out


def validate_scenario(s: Scenario) -> list[Finding]:
    """Every violated scenario invariant, as a list (empty means valid)."""
    out: list[Finding] = []
    if s.dim_s < 1 or s.dim_d < 1:
        return [Finding("dims", f"nonpositive dims ({s.dim_s}, {s.dim_d})")]
    for name, dim in (("h_s", s.dim_s), ("a_obs", s.dim_s), ("h_d", s.dim_d), ("x_obs", s.dim_d)):
        op = getattr(s, name)
        if op.shape != (dim, dim):
            out.append(Finding(f"{name}.dim", f"shape {op.shape}, expected {(dim, dim)}"))
        elif not is_hermitian(op):
            out.append(Finding(f"{name}.hermitian", "operator is not Hermitian"))
    out += density_findings("rho_i", s.rho_i, s.dim_s)
    out += density_findings("rho_0", s.rho_0, s.dim_d)
    out += povm_findings("sys_povm", s.sys_povm, s.dim_s, TOL.completeness)
    out += povm_findings("det_povm", s.det_povm, s.dim_d, s.completeness_tol())
    c = s.coupling
    if not (c.tau > 0 and c.n_t >= 1):
        out.append(Finding("coupling.grid", f"tau={c.tau}, n_t={c.n_t}"))
    elif not np.all(np.isfinite(c.samples)):
        out.append(Finding("coupling.samples", "non-finite samples"))
    elif abs(c.integral - 1.0) >= TOL.completeness:
        out.append(Finding("coupling.integral", f"integral of g is {c.integral:.12g} != 1"))
    if not np.isfinite(c.lam):
        out.append(Finding("coupling.lam", f"lambda is {c.lam}"))
    return out


def require_valid(s: Scenario) -> None:
    findings = validate_scenario(s)
    if findings:
        raise InvalidScenarioError(findings)


def pointer_operator(p: Povm, tol: float = TOL.completeness) -> np.ndarray:
    """Readout operator ``sum_k weight_k value_k effect_k``."""
    findings = povm_findings("povm", p, p.dim, tol)
    if findings:
        raise InvalidScenarioError(findings)
    r = np.einsum("k,kij->ij", p.weights * p.values, p.effects)
    return 0.5 * (r + dagger(r))


def retrodiction_state(e: PovmOutcome) -> np.ndarray:
    tr = float(np.trace(e.effect).real)
    if tr <= TOL.floor:
        raise ValueError(f"effect {e.label!r} has trace {tr:.3e}; no retrodiction state")
    return e.effect / tr
