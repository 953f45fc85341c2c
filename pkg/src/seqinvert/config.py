"""JSON experiment configs and the shipped presets.

A config is one JSON object (schema version 1)::

    {
      "schema_version": 1,
      "experiment": "contraction",            # contraction | coverage | bands | validate
      "operator": {"kind": "Volterra"},       # Heat takes "heat_time"; Synthetic* take "p" (and "s")
      "prior": {"decay": "Polynomial", "alpha": 1.0, "rho": 1.0},
      "truth": {"name": "VolterraTruth"},     # optional "beta" and "length"
      "n_list": [128, 256, 512],
      "replicates": 50
    }

Optional keys: ``description``, ``alphas``, ``gamma``, ``seed``, ``mc_draws``,
``noise_sd``, ``grid_family``, ``bands`` (``count``, ``keep_fraction``,
``x_points``). Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import json
from importlib import resources
from typing import Any

from .credible import DEFAULT_MC_DRAWS
from .experiments import ExperimentConfig, default_truth_length
from .prior_posterior import PriorSpec
from .svd_operators import DEFAULT_HEAT_TIME, OperatorKind, OperatorSpec, catalog_signal

SCHEMA_VERSION = 1
EXPERIMENTS = ("contraction", "coverage", "bands", "validate")


class ConfigError(ValueError):
    """The config document is malformed (as opposed to violating a constraint)."""


_TOP_KEYS = {
    "schema_version": True,
    "experiment": True,
    "operator": True,
    "prior": True,
    "truth": True,
    "n_list": True,
    "description": False,
    "alphas": False,
    "replicates": False,
    "gamma": False,
    "seed": False,
    "mc_draws": False,
    "noise_sd": False,
    "grid_family": False,
    "bands": False,
}
_OPERATOR_KEYS = {"kind", "p", "s", "heat_time"}
_PRIOR_KEYS = {"decay", "alpha", "rho", "s"}
_TRUTH_KEYS = {"name", "beta", "length"}
_BAND_KEYS = {"count", "keep_fraction", "x_points"}


def _check_keys(obj, allowed, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _number(obj: dict, key: str, where: str, default=None, integer: bool = False):
    if key not in obj:
        if default is None:
            raise ConfigError(f"missing key {where}.{key}")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int)):
        kind = "an integer" if integer else "a number"
        raise ConfigError(f"{where}.{key} must be {kind}, got {v!r}")
    return v


def validate_document(doc: Any) -> dict:
    """Structural validation; returns the document unchanged."""
    _check_keys(doc, _TOP_KEYS, "config")
    missing = [k for k, req in _TOP_KEYS.items() if req and k not in doc]
    if missing:
        raise ConfigError(f"missing key(s): {', '.join(missing)}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {doc['schema_version']!r}")
    if doc["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {doc['experiment']!r}")
    _check_keys(doc["operator"], _OPERATOR_KEYS, "operator")
    _check_keys(doc["prior"], _PRIOR_KEYS, "prior")
    _check_keys(doc["truth"], _TRUTH_KEYS, "truth")
    if "bands" in doc:
        _check_keys(doc["bands"], _BAND_KEYS, "bands")
    n_list = doc["n_list"]
    if not isinstance(n_list, list) or not n_list or not all(
        isinstance(n, int) and not isinstance(n, bool) for n in n_list
    ):
        raise ConfigError("n_list must be a nonempty list of integers")
    if "alphas" in doc and (
        not isinstance(doc["alphas"], list)
        or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in doc["alphas"])
    ):
        raise ConfigError("alphas must be a list of numbers")
    return doc


def build_operator(spec: dict) -> OperatorSpec:
    kind = spec.get("kind")
    try:
        kind = OperatorKind(kind)
    except ValueError:
        raise ConfigError(f"unknown operator kind {kind!r}") from None
    if kind is OperatorKind.VOLTERRA:
        return OperatorSpec.volterra()
    if kind is OperatorKind.HEAT:
        return OperatorSpec.heat(_number(spec, "heat_time", "operator", DEFAULT_HEAT_TIME))
    if kind is OperatorKind.SYNTHETIC_MILD:
        return OperatorSpec.mild(_number(spec, "p", "operator"))
    return OperatorSpec.extreme(_number(spec, "p", "operator"), _number(spec, "s", "operator", 1.0))


def build_config(doc: dict, seed: int | None = None, threads: int = 1) -> ExperimentConfig:
    """Turn a validated document into an :class:`ExperimentConfig`.

    ``seed`` overrides the document's ``seed`` key (default 0). Raises
    :class:`ConfigError` for malformed values and the library's domain errors
    for values that parse but are not admissible.
    """
    validate_document(doc)
    if seed is None:
        seed = _number(doc, "seed", "config", 0, integer=True)
    op = build_operator(doc["operator"])
    p = doc["prior"]
    if "decay" not in p:
        raise ConfigError("missing key prior.decay")
    if p["decay"] not in ("Polynomial", "Exponential"):
        raise ConfigError(f"unknown prior decay {p['decay']!r}")
    prior = PriorSpec(
        p["decay"],
        _number(p, "alpha", "prior"),
        _number(p, "rho", "prior", 1.0),
        _number(p, "s", "prior", 1.0),
        truncation=2,
    )
    t = doc["truth"]
    if t.get("name") not in ("VolterraTruth", "HeatTruth"):
        raise ConfigError(f"unknown truth {t.get('name')!r}")
    n_list = doc["n_list"]
    length = _number(t, "length", "truth", default_truth_length(op, max(n_list)), integer=True)
    beta = _number(t, "beta", "truth") if "beta" in t else None
    truth = catalog_signal(t["name"], length, beta)
    bands = doc.get("bands", {})
    family = doc.get("grid_family")
    if family is not None and family not in ("IntegerGrid", "HalfIntegerGrid"):
        raise ConfigError(f"unknown grid_family {family!r}")
    return ExperimentConfig(
        operator=op,
        prior=prior,
        truth=truth,
        n_list=tuple(n_list),
        replicates=_number(doc, "replicates", "config", 1, integer=True),
        gamma=_number(doc, "gamma", "config", 0.05),
        seed=seed,
        mc_draws=_number(doc, "mc_draws", "config", DEFAULT_MC_DRAWS, integer=True),
        noise_sd=_number(doc, "noise_sd", "config", 1.0),
        alphas=tuple(doc.get("alphas", ())),
        grid_family=family,
        band_count=_number(bands, "count", "bands", 1000, integer=True),
        keep_fraction=_number(bands, "keep_fraction", "bands", 0.95),
        x_points=_number(bands, "x_points", "bands", 201, integer=True),
        threads=threads,
    )


def load_document(path) -> dict:
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return validate_document(doc)


def preset_names() -> list[str]:
    files = resources.files("seqinvert").joinpath("presets").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def load_preset(name: str) -> dict:
    if name not in preset_names():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    text = resources.files("seqinvert").joinpath("presets", f"{name}.json").read_text()
    return validate_document(json.loads(text))


def presets() -> dict[str, dict]:
    """All shipped presets, keyed by name."""
    return {name: load_preset(name) for name in preset_names()}


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``key=JSON`` overrides; dotted keys reach into nested objects."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        target = doc
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"override {key!r} does not address an object")
        target[parts[-1]] = value
    return validate_document(doc)
