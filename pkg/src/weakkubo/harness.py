"""Experiment drivers: lambda sweeps, convergence slopes, negativity search, campaigns."""

from __future__ import annotations

import io
import csv
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import exact, perturbation as pt
from .errors import NonperturbativeWarning, WeakKuboError
from .linalg import TOL, partial_trace_system, unitarity_defect
from .model import Povm, Scenario, retrodiction_state, validate_scenario, density_findings
from .presets import random_seeded

ESTIMATORS = ("main", "modified_kubo", "ordinary_kubo", "taylor")
MAX_SLOPE_RESIDUAL = 0.15

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SlopeFit:
    slope: float | None
    intercept: float | None
    residual: float | None
    n_used: int
    reason: str = ""

    @property
    def reported(self) -> bool:
        return self.slope is not None


def fit_slope(x, err, noise_floor: float = TOL.noise_floor,
              max_residual: float = MAX_SLOPE_RESIDUAL) -> SlopeFit:
    """OLS fit of ``log err`` against ``log x``; residual is the RMS in natural-log units.

    Rows with ``err < noise_floor`` (or non-finite) are dropped. The slope is
    withheld (``None``) when fewer than three rows survive or when the residual
    reaches ``max_residual``.
    """
    x = np.asarray(x, dtype=float)
    err = np.asarray(err, dtype=float)
    keep = np.isfinite(err) & (err >= noise_floor) & (x > 0)
    n = int(keep.sum())
    if n < 3:
        return SlopeFit(None, None, None, n, "fewer than 3 rows above the noise floor")
    lx, ly = np.log(x[keep]), np.log(err[keep])
    design = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    residual = float(np.sqrt(np.mean((design @ coef - ly) ** 2)))
    if residual >= max_residual:
        return SlopeFit(None, None, residual, n, f"fit residual {residual:.3f} too large")
    return SlopeFit(float(coef[0]), float(coef[1]), residual, n)


def taylor_conditional_mean(s: Scenario, f_label: str, ip=None) -> float:
    """First moment of the (possibly negative) Taylor-expanded conditional distribution."""
    ip = pt.interaction_picture(s) if ip is None else ip
    td = pt.naive_taylor_probability(s, ip)
    return float(ip.det_values @ td.conditional[:, ip.sys_index(f_label)])


@dataclass
class SweepRow:
    lam: float
    exact: float = np.nan
    values: dict = field(default_factory=dict)
    shift: float = np.nan
    amplified: bool = False
    flags: list = field(default_factory=list)

    def error(self, name: str) -> float:
        return abs(self.values.get(name, np.nan) - self.exact)


def _sweep_cell(s: Scenario, f_label: str, lam: float) -> SweepRow:
    row = SweepRow(lam)
    sl = s.with_lambda(lam)
    try:
        row.exact = exact.exact_conditional_average(sl, f_label)
        ip = pt.interaction_picture(sl)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", NonperturbativeWarning)
            row.values["main"] = pt.conditional_average_main(sl, f_label, ip=ip)
        if caught:
            row.flags.append("nonperturbative")
        row.values["modified_kubo"] = pt.modified_kubo(sl, f_label, ip=ip)
        row.values["ordinary_kubo"] = pt.ordinary_kubo(sl, ip=ip)
        row.values["taylor"] = taylor_conditional_mean(sl, f_label, ip)
        r0 = pt.expectation(ip.r_tau, ip.rho_0).real
        row.shift = row.exact - r0
        a_max = np.max(np.abs(np.linalg.eigvalsh(sl.a_obs)))
        row.amplified = bool(abs(row.shift) > abs(lam) * a_max)
    except WeakKuboError as exc:
        row.flags.append(f"{type(exc).__name__}: {exc}")
    return row


@dataclass
class SweepResult:
    axis_name: str
    f_label: str
    rows: list
    slopes: dict

    @property
    def axis(self) -> np.ndarray:
        return np.array([r.lam for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        if name == "exact":
            return np.array([r.exact for r in self.rows])
        return np.array([r.values.get(name, np.nan) for r in self.rows])

    def errors(self, name: str) -> np.ndarray:
        return np.array([r.error(name) for r in self.rows])

    def slope(self, name: str) -> float | None:
        return self.slopes[name].slope

    columns = (["lam", "exact"] + [f"{e}" for e in ESTIMATORS]
               + [f"err_{e}" for e in ESTIMATORS] + ["shift", "amplified", "flags"])

    def table(self) -> list[list]:
        out = []
        for r in self.rows:
            out.append([r.lam, r.exact] + [r.values.get(e, np.nan) for e in ESTIMATORS]
                       + [r.error(e) for e in ESTIMATORS]
                       + [r.shift, int(r.amplified), ";".join(r.flags)])
        return out

    def slope_table(self) -> list[list]:
        return [[name, fit.slope, fit.residual, fit.n_used, fit.reason]
                for name, fit in self.slopes.items()]


def lambda_sweep(s: Scenario, f_label: str, lambdas, workers: int | None = None) -> SweepResult:
    """Evaluate every estimator against the exact engine at each coupling strength.

    Per-lambda engine failures become row flags. Cells are independent, so
    ``workers > 1`` evaluates them on a thread pool; row order follows ``lambdas``.
    """
    lambdas = [float(x) for x in lambdas]
    if len(lambdas) < 3 or any(not x > 0 for x in lambdas):
        raise ValueError("lambda_sweep needs at least 3 positive coupling strengths")
    if max(lambdas) / min(lambdas) < 10.0:
        log.warning("lambda axis spans %.3g < one decade; slopes are less reliable",
                    max(lambdas) / min(lambdas))
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda lam: _sweep_cell(s, f_label, lam), lambdas))
    else:
        rows = [_sweep_cell(s, f_label, lam) for lam in lambdas]
    x = np.array(lambdas)
    slopes = {name: fit_slope(x, [r.error(name) for r in rows]) for name in ESTIMATORS}
    return SweepResult("lam", f_label, rows, slopes)


# -- negativity search --------------------------------------------------------

NEGATIVITY_THRESHOLD = 1e-3


@dataclass(frozen=True)
class NegativityHit:
    seed: int
    lam: float
    trial: int
    min_taylor: float
    min_rational: float

    def scenario(self, n_t: int = 64) -> Scenario:
        return random_seeded(self.seed, self.lam, n_t, kind="sharp")


def negativity_search(seed: int, trials: int, n_t: int = 64,
                      threshold: float = NEGATIVITY_THRESHOLD) -> NegativityHit | None:
    """Random search for a scenario whose Taylor-expanded probabilities dip below
    ``-threshold`` while the rational table stays nonnegative.

    Trial ``i`` uses ``random_seeded(seed + i, kind="sharp")`` (pure states,
    projective POVMs, so some zeroth-order probabilities are small) and a
    coupling strength drawn from a generator seeded with ``seed``. Returns
    ``None`` if nothing is found.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    lams = rng.choice([0.25, 0.5, 1.0, 2.0], size=trials)
    for i in range(trials):
        s = random_seeded(seed + i, float(lams[i]), n_t, kind="sharp")
        td = pt.naive_taylor_probability(s)
        if td.min_entry < -threshold and td.min_rational >= -TOL.algebraic:
            return NegativityHit(seed + i, float(lams[i]), i, td.min_entry, td.min_rational)
    return None


# -- property campaign --------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    seed: int
    check: str
    passed: bool
    detail: str = ""


@dataclass
class CampaignReport:
    results: list

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.passed]

    @property
    def failing_seeds(self) -> list:
        return sorted({r.seed for r in self.failures})

    @property
    def ok(self) -> bool:
        return not self.failures


def _check(results, seed, name, fn):
    try:
        ok, detail = fn()
    except Exception as exc:  # an invariant check that crashes is a failure
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    results.append(CheckResult(seed, name, bool(ok), detail))


def scenario_invariants(s: Scenario, seed: int, big_lam: float = 2.0) -> list[CheckResult]:
    """Run the module invariants on one scenario.

    A scenario that fails validation yields a single failed ``validate`` check.
    """
    findings = validate_scenario(s)
    if findings:
        return [CheckResult(seed, "validate", False, "; ".join(map(str, findings)))]
    out = [CheckResult(seed, "validate", True)]
    ip = pt.interaction_picture(s)
    u = exact.full_propagator(s)
    joint = exact.exact_joint(s, u)

    def unitary():
        d = unitarity_defect(u)
        return d < 1e-9, f"{d:.2e}"

    def exact_total():
        dev = abs(joint.total - 1.0)
        return dev < TOL.structural and joint.p.min() >= -TOL.algebraic, f"{dev:.2e}"

    def partial_trace():
        rho = exact.final_state(s, u)
        dev = abs(np.trace(partial_trace_system(rho, s.dim_s, s.dim_d)) - np.trace(rho))
        return dev < TOL.algebraic, f"{dev:.2e}"

    def positivity():
        worst = min(pt.perturbative_joint(s.with_lambda(lam)).q.min()
                    for lam in (s.lam, big_lam))
        return worst >= -TOL.algebraic, f"min {worst:.2e}"

    def factorization():
        a = pt.perturbative_joint(s, ip).q
        b = pt.perturbative_joint_weakvalue_form(s, ip=ip).q
        dev = float(np.max(np.abs(a - b)))
        return dev < TOL.structural, f"{dev:.2e}"

    def moments():
        dist = pt.perturbative_joint(s, ip)
        worst = 0.0
        for f in s.sys_povm.labels:
            terms = pt.conditional_average_terms(s, f, ip=ip)
            worst = max(worst, abs(terms.value - dist.conditional_mean(f)))
        return worst < 1e-9, f"{worst:.2e}"

    def b_symmetry():
        worst = 0.0
        for f in s.sys_povm.labels:
            b = pt.weak_value_trace(s, f, ip=ip).b_w
            worst = max(worst, float(np.max(np.abs(b.conj() - b.T))))
        return worst < TOL.structural, f"{worst:.2e}"

    def denominators():
        worst_imag, worst_den = 0.0, np.inf
        for f in s.sys_povm.labels:
            terms = pt.conditional_average_terms(s, f, ip=ip)
            worst_imag = max(worst_imag, abs(terms.denominator_imag))
            worst_den = min(worst_den, terms.denominator)
        return worst_imag < TOL.structural and worst_den >= 0, \
            f"imag {worst_imag:.2e}, min {worst_den:.3g}"

    def no_postselection():
        st = s.with_sys_povm(Povm.trivial(s.dim_s))
        ipt = pt.interaction_picture(st)
        wv = pt.weak_value_trace(st, "any", ip=ipt)
        im = float(np.max(np.abs(wv.a_imag)))
        herm = max(float(np.max(np.abs(w - w.conj().T)))
                   for w in (pt.force_term(st, "any", k, ip=ipt) for k in ipt.support[:4]))
        dk = abs(pt.modified_kubo(st, "any", ip=ipt) - pt.ordinary_kubo(st, ip=ipt))
        return im < TOL.algebraic and herm < TOL.algebraic and dk < TOL.algebraic, \
            f"Im A_w {im:.1e}, W-W^+ {herm:.1e}, kubo gap {dk:.1e}"

    def retrodiction():
        bad = [str(f) for o in s.sys_povm
               for f in density_findings(o.label, retrodiction_state(o), s.dim_s)]
        return not bad, "; ".join(bad)

    for name, fn in [("unitarity", unitary), ("exact_total", exact_total),
                     ("partial_trace", partial_trace), ("positivity", positivity),
                     ("factorization", factorization), ("moment_identity", moments),
                     ("b_symmetry", b_symmetry), ("denominator", denominators),
                     ("no_postselection", no_postselection), ("retrodiction", retrodiction)]:
        _check(out, seed, name, fn)
    return out


def property_campaign(seed: int, n_scenarios: int, inject: Scenario | None = None,
                      n_t: int = 64, lam: float = 0.1) -> CampaignReport:
    """Invariants over ``random_seeded(seed + i)`` for ``i < n_scenarios``.

    ``inject`` appends one extra scenario (reported with seed ``-1``) for
    fault-injection runs.
    """
    if n_scenarios < 1:
        raise ValueError("n_scenarios must be >= 1")
    results = []
    for i in range(n_scenarios):
        results += scenario_invariants(random_seeded(seed + i, lam, n_t), seed + i)
    if inject is not None:
        results += scenario_invariants(inject, -1)
    return CampaignReport(results)


def format_float(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(x)
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return "" if x is None else str(x)


def to_csv(columns, rows, header: str = "") -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\r\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_float(v) for v in row])
    return buf.getvalue()
