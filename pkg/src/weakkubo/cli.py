"""Command-line front end.

Data (CSV or YAML records) goes to ``--output`` or stdout; findings, warnings
and progress go to stderr. Exit codes: 0 success, 2 bad config, 3 invalid
scenario, 4 postselection floor or nonpositive denominator, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, config, exact, harness, perturbation as pt
from .errors import (ConfigError, InvalidScenarioError, PostselectionFloorError,
                     RegimeBreakdownError)
from .linalg import TOL, unitarity_defect
from .model import Scenario, require_valid, validate_scenario
from .presets import PRESETS

log = logging.getLogger("weakkubo")

EXIT_OK, EXIT_CONFIG, EXIT_INVALID, EXIT_FLOOR, EXIT_IO = 0, 2, 3, 4, 5

SCENARIO_COMMANDS = ("validate", "exact", "weakvalues", "average", "kubo", "sweep")
COMMANDS = SCENARIO_COMMANDS + ("search-negativity", "campaign")


@dataclass
class RunConfig:
    command: str
    scenario_file: str | None = None
    preset: str | None = None
    params: dict = field(default_factory=dict)
    lam: float | None = None
    eps: float | None = None
    n_t: int | None = None
    f_label: str | None = None
    lambdas: list | None = None
    seed: int = 0
    trials: int = 200
    n_scenarios: int = 20
    floor: float = TOL.floor
    fmt: str = "csv"
    output: str | None = None
    workers: int | None = None

    def check(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command in SCENARIO_COMMANDS:
            if (self.scenario_file is None) == (self.preset is None):
                raise ConfigError("give exactly one of --scenario FILE or --preset NAME")
        elif self.scenario_file or self.preset:
            raise ConfigError(f"{self.command} generates its own scenarios; "
                              "--scenario/--preset are not accepted")
        if self.command in ("weakvalues", "average", "kubo", "sweep") and not self.f_label:
            raise ConfigError(f"{self.command} needs a postselection outcome (-f LABEL)")
        if self.fmt not in ("csv", "records"):
            raise ConfigError(f"unknown output format {self.fmt!r}")
        if self.scenario_file and (self.params or self.eps is not None):
            raise ConfigError("--param/--eps apply to presets only")


def build_scenario(cfg: RunConfig) -> Scenario:
    if cfg.preset is not None:
        params = dict(cfg.params)
        for key in ("lam", "eps", "n_t"):
            value = getattr(cfg, key)
            if value is not None:
                params[key] = value
        doc = {"format": config.FORMAT, "version": config.VERSION,
               "preset": cfg.preset, "params": params}
        return config.scenario_from_dict(doc)
    s = config.load(cfg.scenario_file)
    if cfg.n_t is not None:
        s = s.with_resolution(cfg.n_t)
    if cfg.lam is not None:
        s = s.with_lambda(cfg.lam)
    return s


@dataclass
class Table:
    columns: list
    rows: list
    scenario_hash: str
    n_t: int | str
    extra: dict = field(default_factory=dict)


def _header(cfg: RunConfig, table: Table) -> str:
    return (f"weakkubo {__version__} command={cfg.command} "
            f"scenario={table.scenario_hash} n_t={table.n_t}")


def render(cfg: RunConfig, table: Table) -> str:
    if cfg.fmt == "csv":
        return harness.to_csv(table.columns, table.rows, _header(cfg, table))
    doc = {"format": "weakkubo-result", "version": 1, "tool": f"weakkubo {__version__}",
           "command": cfg.command, "scenario_hash": table.scenario_hash, "n_t": table.n_t,
           "columns": list(table.columns),
           "rows": [_plain(list(r)) for r in table.rows]}
    doc.update({k: _plain(v) for k, v in table.extra.items()})
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)


def _plain(v):
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, np.generic):
        return v.item()
    return v


# -- commands -----------------------------------------------------------------

def cmd_validate(cfg, s):
    findings = validate_scenario(s)
    for f in findings:
        log.error("finding %s", f)
    table = Table(["code", "message"], [[f.code, f.message] for f in findings],
                  config.scenario_hash(s), s.n_t)
    return table, (EXIT_INVALID if findings else EXIT_OK)


def cmd_exact(cfg, s):
    require_valid(s)
    u = exact.full_propagator(s)
    joint = exact.exact_joint(s, u)
    rows = []
    for k, (dl, dv) in enumerate(zip(s.det_povm.labels, s.det_povm.values)):
        for j, (sl, sv) in enumerate(zip(s.sys_povm.labels, s.sys_povm.values)):
            rows.append([dl, dv, sl, sv, joint.p[k, j]])
    log.info("unitarity defect %.2e, total probability %.17g",
             unitarity_defect(u), joint.total)
    return Table(["det_label", "det_value", "sys_label", "sys_value", "probability"], rows,
                 config.scenario_hash(s), s.n_t), EXIT_OK


def cmd_weakvalues(cfg, s):
    wv = pt.weak_value_trace(s, cfg.f_label, cfg.floor)
    rows = [[t, g, a.real, a.imag] for t, g, a in zip(wv.times, s.coupling.samples, wv.a_w)]
    return Table(["t", "g", "a_w_re", "a_w_im"], rows, config.scenario_hash(s), s.n_t,
                 {"denom": wv.denom}), EXIT_OK


def _require_label(cfg, s):
    if cfg.f_label not in s.sys_povm.labels:
        raise ConfigError(f"unknown outcome {cfg.f_label!r}; known: {list(s.sys_povm.labels)}")


def _estimates(cfg, s):
    ip = pt.interaction_picture(s)
    joint = exact.exact_joint(s)
    ex = joint.conditional_mean(cfg.f_label, cfg.floor)
    main = pt.conditional_average_main(s, cfg.f_label, cfg.floor, ip)
    mk = pt.modified_kubo(s, cfg.f_label, cfg.floor, ip)
    ok = pt.ordinary_kubo(s, ip)
    return ex, main, mk, ok


def cmd_average(cfg, s):
    ex, main, mk, ok = _estimates(cfg, s)
    return Table(["lam", "f", "exact", "main", "modified_kubo", "ordinary_kubo"],
                 [[s.lam, cfg.f_label, ex, main, mk, ok]], config.scenario_hash(s), s.n_t), EXIT_OK


def cmd_kubo(cfg, s):
    ip = pt.interaction_picture(s)
    mk = pt.modified_kubo(s, cfg.f_label, cfg.floor, ip)
    return Table(["lam", "f", "modified_kubo", "ordinary_kubo"],
                 [[s.lam, cfg.f_label, mk, pt.ordinary_kubo(s, ip)]],
                 config.scenario_hash(s), s.n_t), EXIT_OK


def cmd_sweep(cfg, s):
    lambdas = cfg.lambdas or [0.16, 0.08, 0.04, 0.02]
    res = harness.lambda_sweep(s, cfg.f_label, lambdas, cfg.workers)
    slopes = {}
    for name, fit in res.slopes.items():
        if fit.reported:
            log.info("slope %s = %.4f (residual %.3f)", name, fit.slope, fit.residual)
        else:
            log.info("slope %s withheld: %s", name, fit.reason)
        slopes[name] = {"slope": fit.slope, "residual": fit.residual, "n_used": fit.n_used,
                        "reason": fit.reason}
    for r in res.rows:
        for flag in r.flags:
            log.warning("lam=%g: %s", r.lam, flag)
    return Table(list(res.columns), res.table(), config.scenario_hash(s), s.n_t,
                 {"slopes": slopes}), EXIT_OK


def cmd_search(cfg):
    hit = harness.negativity_search(cfg.seed, cfg.trials)
    tag = f"search(seed={cfg.seed},trials={cfg.trials})"
    if hit is None:
        log.warning("no Taylor negativity found in %d trials", cfg.trials)
        rows = [[0, "", "", "", "", ""]]
    else:
        log.info("negativity at scenario seed %d, lam %g", hit.seed, hit.lam)
        rows = [[1, hit.seed, hit.lam, hit.trial, hit.min_taylor, hit.min_rational]]
    return Table(["found", "seed", "lam", "trial", "min_taylor", "min_rational"], rows,
                 tag, 64), EXIT_OK


def cmd_campaign(cfg):
    rep = harness.property_campaign(cfg.seed, cfg.n_scenarios)
    for r in rep.failures:
        log.error("seed %d failed %s: %s", r.seed, r.check, r.detail)
    rows = [[r.seed, r.check, int(r.passed), r.detail] for r in rep.results]
    tag = f"campaign(seed={cfg.seed},n={cfg.n_scenarios})"
    return Table(["seed", "check", "passed", "detail"], rows, tag, 64), \
        (EXIT_OK if rep.ok else EXIT_INVALID)


HANDLERS = {"validate": cmd_validate, "exact": cmd_exact, "weakvalues": cmd_weakvalues,
            "average": cmd_average, "kubo": cmd_kubo, "sweep": cmd_sweep}


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    try:
        cfg.check()
        if cfg.command == "search-negativity":
            table, status = cmd_search(cfg)
        elif cfg.command == "campaign":
            table, status = cmd_campaign(cfg)
        else:
            s = build_scenario(cfg)
            if cfg.f_label is not None:
                _require_label(cfg, s)
            table, status = HANDLERS[cfg.command](cfg, s)
        text = render(cfg, table)
        if cfg.output:
            Path(cfg.output).write_text(text, newline="")
        else:
            stdout.write(text)
        return status
    except ConfigError as exc:
        log.error("bad config: %s", exc)
        return EXIT_CONFIG
    except InvalidScenarioError as exc:
        for f in exc.findings:
            log.error("finding %s", f)
        return EXIT_INVALID
    except (PostselectionFloorError, RegimeBreakdownError) as exc:
        log.error("%s", exc)
        return EXIT_FLOOR
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO


def _key_value(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key, value


def _float_list(text: str):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weakkubo",
        description="Postselected weak measurement: exact evolution vs rational expansion.")
    parser.add_argument("--version", action="version", version=f"weakkubo {__version__}")

    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--format", dest="fmt", choices=["csv", "records"], default="csv")
    out.add_argument("-o", "--output", help="data file (default stdout)")
    out.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    src = argparse.ArgumentParser(add_help=False)
    group = src.add_mutually_exclusive_group(required=True)
    group.add_argument("--scenario", dest="scenario_file", metavar="FILE",
                       help="scenario config (YAML, schema weakkubo/scenario-v1)")
    group.add_argument("--preset", choices=sorted(PRESETS))
    src.add_argument("--param", action="append", type=_key_value, default=[],
                     metavar="KEY=VALUE", help="preset parameter override (repeatable)")
    src.add_argument("--lam", type=float, help="coupling strength override")
    src.add_argument("--eps", type=float, help="pre/postselection overlap angle (aav_gaussian)")
    src.add_argument("--n-t", dest="n_t", type=int, help="time-grid resolution override")
    src.add_argument("--floor", type=float, default=TOL.floor,
                     help="postselection probability floor (default %(default)g)")

    post = argparse.ArgumentParser(add_help=False)
    post.add_argument("-f", dest="f_label", required=True, metavar="LABEL",
                      help="postselected system outcome label")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[src, out], help="check scenario invariants")
    sub.add_parser("exact", parents=[src, out], help="exact joint distribution P(R, f)")
    sub.add_parser("weakvalues", parents=[src, post, out], help="time-dependent weak values")
    sub.add_parser("average", parents=[src, post, out],
                   help="exact vs rational conditional average vs Kubo forms")
    sub.add_parser("kubo", parents=[src, post, out], help="modified and ordinary Kubo")
    sw = sub.add_parser("sweep", parents=[src, post, out], help="lambda sweep with slope fits")
    sw.add_argument("--lambdas", type=_float_list, help="comma-separated coupling strengths")
    sw.add_argument("--workers", type=int, help="thread-pool size for sweep cells")
    sn = sub.add_parser("search-negativity", parents=[out],
                        help="search for negative Taylor-expanded probabilities")
    sn.add_argument("--seed", type=int, default=0)
    sn.add_argument("--trials", type=int, default=200)
    cp = sub.add_parser("campaign", parents=[out], help="invariant campaign on random scenarios")
    cp.add_argument("--seed", type=int, default=0)
    cp.add_argument("--n", dest="n_scenarios", type=int, default=20)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=ns.command, fmt=ns.fmt, output=ns.output)
    for name in ("scenario_file", "preset", "lam", "eps", "n_t", "f_label", "lambdas",
                 "seed", "trials", "n_scenarios", "floor", "workers"):
        if hasattr(ns, name) and getattr(ns, name) is not None:
            setattr(cfg, name, getattr(ns, name))
    params = dict(getattr(ns, "param", []) or [])
    if len(params) != len(getattr(ns, "param", []) or []):
        raise ConfigError("duplicate --param keys")
    cfg.params = params
    return cfg


def _configure_logging(verbose: bool) -> None:
    """Send package logs and captured warnings to the current stderr."""
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    logging.captureWarnings(True)
    for name in ("weakkubo", "py.warnings"):
        logger = logging.getLogger(name)
        for old in [h for h in logger.handlers if getattr(h, "_weakkubo_cli", False)]:
            logger.removeHandler(old)
        handler._weakkubo_cli = True
        logger.addHandler(handler)
        logger.setLevel(logging.INFO if verbose else logging.WARNING)
        logger.propagate = False


def main(argv=None) -> int:
    parser = make_parser()
    ns = parser.parse_args(argv)
    _configure_logging(ns.verbose)
    warnings.simplefilter("default")
    try:
        cfg = config_from_args(ns)
    except ConfigError as exc:
        log.error("bad config: %s", exc)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
