"""Scenario config files (YAML, schema ``weakkubo/scenario-v1``).

Floats are written with ``repr`` precision, so parse -> emit -> parse is
lossless. The schema document ships with the package as
``schema/scenario-v1.schema.json``.
"""

from __future__ import annotations

import hashlib
import json
import re
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .errors import ConfigError
from .model import CouplingProfile, Povm, PovmOutcome, Scenario
from .presets import preset, preset_params

FORMAT = "weakkubo-scenario"
VERSION = 1


_BaseLoader = getattr(yaml, "CSafeLoader", yaml.SafeLoader)
_Dumper = getattr(yaml, "CSafeDumper", yaml.SafeDumper)


class _Loader(_BaseLoader):
    """Safe loader that also reads ``1e-5`` (no decimal point) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                 |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                 |\.[0-9_]+(?:[eE][-+][0-9]+)?
                 |[-+]?\.(?:inf|Inf|INF)
                 |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


@lru_cache(maxsize=None)
def schema() -> dict:
    text = resources.files("weakkubo").joinpath("schema/scenario-v1.schema.json").read_text()
    return json.loads(text)


@lru_cache(maxsize=None)
def _validator():
    cls = jsonschema.validators.validator_for(schema())
    cls.check_schema(schema())
    return cls(schema())


def _op_to_list(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _op_from_list(rows) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    if a.ndim != 3 or a.shape[2] != 2 or a.shape[0] != a.shape[1]:
        raise ConfigError(f"operator must be a square array of [re, im] pairs, got {a.shape}")
    out = np.empty(a.shape[:2], dtype=np.complex128)
    out.real, out.imag = a[..., 0], a[..., 1]
    return out


def _povm_to_list(p: Povm) -> list:
    return [{"label": o.label, "value": o.value, "weight": o.weight,
             "effect": _op_to_list(o.effect)} for o in p]


def _povm_from_list(items) -> Povm:
    return Povm(tuple(PovmOutcome(str(it["label"]), it["value"], _op_from_list(it["effect"]),
                                  it.get("weight", 1.0)) for it in items))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def scenario_to_dict(s: Scenario) -> dict:
    c = s.coupling
    coupling = {"tau": c.tau, "lam": c.lam, "samples": [float(x) for x in c.samples]}
    if c.shape is not None:
        coupling.update(shape=c.shape, shape_params=_plain(c.shape_params), n_t=c.n_t)
    body = {
        "dim_s": s.dim_s, "dim_d": s.dim_d,
        "h_s": _op_to_list(s.h_s), "h_d": _op_to_list(s.h_d),
        "a_obs": _op_to_list(s.a_obs), "x_obs": _op_to_list(s.x_obs),
        "rho_i": _op_to_list(s.rho_i), "rho_0": _op_to_list(s.rho_0),
        "sys_povm": _povm_to_list(s.sys_povm), "det_povm": _povm_to_list(s.det_povm),
        "coupling": coupling,
    }
    if s.metadata:
        body["metadata"] = _plain(s.metadata)
    return {"format": FORMAT, "version": VERSION, "scenario": body}


def _coupling_from_dict(d: dict) -> CouplingProfile:
    if "samples" in d:
        return CouplingProfile(d["tau"], d["samples"], d["lam"], d.get("shape"),
                               dict(d.get("shape_params", {})))
    return CouplingProfile.from_shape(d["shape"], d["n_t"], d["tau"], d["lam"],
                                      **d.get("shape_params", {}))


def coerce_params(name: str, params: dict) -> dict:
    """Cast preset parameters (possibly strings from a command line) to the default's type."""
    defaults = preset_params(name)
    out = {}
    for key, value in params.items():
        if key not in defaults:
            raise ConfigError(f"preset {name!r} has no parameter {key!r}; "
                              f"known: {sorted(defaults)}")
        kind = type(defaults[key])
        try:
            if kind is int:
                f = float(value)
                if not f.is_integer():
                    raise ValueError(value)
                out[key] = int(f)
            else:
                out[key] = kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"parameter {key!r} expects {kind.__name__}, got {value!r}") from None
    return out


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        exc = jsonschema.exceptions.best_match(_validator().iter_errors(doc))
    except TypeError:  # keys that are not strings
        raise ConfigError("config keys must be strings") from None
    if exc is not None:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config does not match scenario-v1 at {where}: {exc.message}")
    if "preset" in doc:
        return preset(doc["preset"], **coerce_params(doc["preset"], doc.get("params", {})))
    b = doc["scenario"]
    return Scenario(
        dim_s=b["dim_s"], dim_d=b["dim_d"],
        h_s=_op_from_list(b["h_s"]), h_d=_op_from_list(b["h_d"]),
        a_obs=_op_from_list(b["a_obs"]), x_obs=_op_from_list(b["x_obs"]),
        rho_i=_op_from_list(b["rho_i"]), rho_0=_op_from_list(b["rho_0"]),
        sys_povm=_povm_from_list(b["sys_povm"]), det_povm=_povm_from_list(b["det_povm"]),
        coupling=_coupling_from_dict(b["coupling"]),
        metadata=dict(b.get("metadata", {})),
    )


def loads(text: str) -> Scenario:
    try:
        doc = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"unparsable config: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    return scenario_from_dict(doc)


def load(path: str | Path) -> Scenario:
    return loads(Path(path).read_text())


def dumps(s: Scenario) -> str:
    return yaml.dump(scenario_to_dict(s), Dumper=_Dumper, sort_keys=False,
                     default_flow_style=None, width=100)


def dump(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps(s))


def scenario_hash(s: Scenario) -> str:
    canonical = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
