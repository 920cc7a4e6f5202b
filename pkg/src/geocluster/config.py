"""Run configuration: schema, resolution and hashing.

A configuration document (YAML or JSON) holds global keys at the top level
and one mapping per subcommand::

    seed: 20201031
    replicates: 500
    optimize:
      family: exponential
      r: 10
      ...

Values are resolved as command-line flags > file > defaults. Unknown keys are
rejected with their key path, and every value is checked against the
invariant it must satisfy before any computation starts.
"""

import copy
import hashlib
import json
import math
import numbers

import yaml

from ._validation import (
    FAMILIES,
    SAMPLINGS,
    SHAPES,
    ValidationError,
    check_choice,
    check_count,
    check_nonnegative,
    check_positive,
    check_unit_interval,
)
from .approx import DEFAULT_SEED, FORMS

__all__ = ["ConfigError", "SCHEMA", "GLOBAL_KEYS", "load_file", "resolve", "config_hash", "REQUIRED"]


class ConfigError(ValidationError):
    """A configuration document does not match the schema."""


class _Required:
    def __repr__(self):
        return "REQUIRED"


REQUIRED = _Required()


# -- value parsers ----------------------------------------------------------
# Each parser takes (value, name) and returns the normalised value or raises
# ValidationError naming the violated invariant.

def _number(v, name):
    if isinstance(v, str):
        try:
            v = float(v)
        except ValueError:
            raise ValidationError(f"{name} must be a number, got {v!r}") from None
    if isinstance(v, bool) or not isinstance(v, numbers.Real) or not math.isfinite(v):
        raise ValidationError(f"{name} must be a finite number, got {v!r}")
    return float(v)


def _int(v, name):
    if isinstance(v, str):
        try:
            v = int(v)
        except ValueError:
            raise ValidationError(f"{name} must be an integer, got {v!r}") from None
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    return check_count(v, name, minimum=0)


def positive(v, name):
    return check_positive(_number(v, name), name)


def nonnegative(v, name):
    return check_nonnegative(_number(v, name), name)


def unit(v, name):
    return check_unit_interval(_number(v, name), name)


def proportion(v, name):
    return check_unit_interval(_number(v, name), name, open_low=True)


def count(v, name):
    return check_count(_int(v, name), name)


def probability(v, name):
    v = _number(v, name)
    if not 0 < v < 1:
        raise ValidationError(f"{name} must satisfy 0 < {name} < 1, got {v!r}")
    return v


def boolean(v, name):
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "false", "yes", "no", "1", "0"):
        return v.lower() in ("true", "yes", "1")
    raise ValidationError(f"{name} must be true or false, got {v!r}")


def text(v, name):
    if not isinstance(v, str) or not v:
        raise ValidationError(f"{name} must be a non-empty string, got {v!r}")
    return v


def choice(choices):
    def parse(v, name):
        return check_choice(v, choices, name)
    return parse


def optional(parser):
    def parse(v, name):
        return None if v is None else parser(v, name)
    return parse


def list_of(parser):
    def parse(v, name):
        if isinstance(v, str) and "," in v:
            v = [s.strip() for s in v.split(",")]
        if not isinstance(v, (list, tuple)):
            v = [v]
        if not v:
            raise ValidationError(f"{name} must not be empty")
        return [parser(x, f"{name}[{i}]") for i, x in enumerate(v)]
    return parse


def int_range(v, name):
    """A list of counts, or an inclusive range written ``"a..b"``."""
    if isinstance(v, str) and ".." in v:
        lo, _, hi = v.partition("..")
        lo, hi = count(lo.strip(), name), count(hi.strip(), name)
        if hi < lo:
            raise ValidationError(f"{name}: empty range {v!r}")
        return list(range(lo, hi + 1))
    return list_of(count)(v, name)


def interval(v, name):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ValidationError(f"{name} must be a pair [lo, hi], got {v!r}")
    lo, hi = _number(v[0], f"{name}[0]"), _number(v[1], f"{name}[1]")
    if not lo < hi:
        raise ValidationError(f"{name} must satisfy lo < hi, got {v!r}")
    return [lo, hi]


def rho_value(v, name):
    """``rho`` as a number in [0, 1] or as elicited ``{p, p_cond}`` probabilities."""
    if isinstance(v, dict):
        _reject_unknown(v, {"p", "p_cond"}, name)
        for key in ("p", "p_cond"):
            if key not in v:
                raise ValidationError(f"{name}.{key} is required")
        return {"p": probability(v["p"], f"{name}.p"), "p_cond": unit(v["p_cond"], f"{name}.p_cond")}
    return unit(v, name)


def density(v, name):
    if not isinstance(v, dict):
        raise ValidationError(f"{name} must be a mapping {{kind, params}}, got {v!r}")
    _reject_unknown(v, {"kind", "params"}, name)
    kind = check_choice(v.get("kind"), ("pointmass", "uniform", "triangular"), f"{name}.kind")
    params = list_of(_number)(v.get("params"), f"{name}.params")
    return {"kind": kind, "params": params}


def averaged_block(v, name):
    if v is None:
        return None
    if not isinstance(v, dict):
        raise ValidationError(f"{name} must be a mapping")
    spec = {
        "family": (choice(FAMILIES), "exponential"),
        "sampling": (choice(SAMPLINGS), "simple"),
        "R": (positive, REQUIRED),
        "J": (positive, REQUIRED),
        "n": (positive, REQUIRED),
        "h_r": (density, REQUIRED),
        "h_rho": (density, REQUIRED),
        "order": (count, 64),
    }
    try:
        return _resolve_section(spec, v, {}, "")
    except ConfigError as exc:
        raise ValidationError(str(exc)) from None


# -- schema -----------------------------------------------------------------

GLOBAL_KEYS = {
    "seed": (lambda v, name: _int(v, name), DEFAULT_SEED),
    "replicates": (count, 500),
    "n_jobs": (count, 1),
    "format": (choice(("csv", "json", "both")), "both"),
    "out": (optional(text), None),
}

_MODEL = {
    "family": (choice(FAMILIES), REQUIRED),
    "sampling": (choice(SAMPLINGS), "simple"),
    "rho": (rho_value, REQUIRED),
    "r": (positive, REQUIRED),
}

SCHEMA = {
    "ess": {
        "points": (text, REQUIRED),
        "family": (choice(FAMILIES), REQUIRED),
        "rho": (rho_value, REQUIRED),
        "r": (positive, REQUIRED),
    },
    "stilde": {
        "family": (choice(FAMILIES), REQUIRED),
        "sampling": (choice(SAMPLINGS), "simple"),
        "shape": (choice(SHAPES), "disc"),
        "r": (positive, REQUIRED),
        "R": (positive, REQUIRED),
        "n": (optional(positive), None),
    },
    "fit": {
        "family": (choice(FAMILIES), "exponential"),
        "sampling": (choice(SAMPLINGS), "simple"),
        "shape": (choice(SHAPES), "disc"),
        "forms": (list_of(choice(tuple(FORMS))), list(FORMS)),
        "data": (optional(text), None),
    },
    "regen-table1": {
        "forms": (list_of(choice(tuple(FORMS))), list(FORMS)),
    },
    "simulate": {
        "scenario": (choice(("fixed-mp", "fixed-m")), "fixed-mp"),
        "N": (count, 200),
        "j_values": (int_range, [1, 2, 4, 5, 10, 20, 25, 40, 50]),
        "rhos": (list_of(unit), [0.01, 0.1, 0.5, 0.9]),
        "rs": (list_of(positive), [0.1, 0.5]),
        "families": (list_of(choice(FAMILIES)), list(FAMILIES)),
        "schemes": (list_of(choice(SAMPLINGS)), list(SAMPLINGS)),
        "p": (proportion, 0.5),
        "m": (count, 400),
        "r0": (positive, 0.1),
    },
    "compare": {
        **_MODEL,
        "r0": (positive, REQUIRED),
        "N": (count, REQUIRED),
        "j_values": (int_range, REQUIRED),
        "base_p": (proportion, 1.0),
        "alt_p": (proportion, 0.5),
    },
    "optimize": {
        **_MODEL,
        "r0": (positive, REQUIRED),
        "cm": (nonnegative, REQUIRED),
        "cn": (nonnegative, REQUIRED),
        "C": (positive, REQUIRED),
        "j_min": (count, 1),
        "j_max": (count, REQUIRED),
        "budget_scope": (choice(("total", "survey-only")), "total"),
        "m_cap": (optional(count), None),
    },
    "rho-dichot": {
        "p": (probability, REQUIRED),
        "p_cond": (unit, REQUIRED),
        "allow_above_one": (boolean, False),
    },
    "elicit": {
        "p": (optional(probability), None),
        "p_cond": (optional(unit), None),
        "sd_ratio": (optional(unit), None),
        "neighbour": (optional(interval), None),
        "population": (optional(interval), None),
        "b": (optional(probability), None),
        "r": (optional(positive), None),
        "allow_above_one": (boolean, False),
        "averaged": (averaged_block, None),
    },
}


def _reject_unknown(doc, known, path):
    unknown = sorted(set(doc) - set(known))
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"unknown key {where}{unknown[0]} (allowed: {', '.join(sorted(known))})")


def _resolve_section(spec, file_values, flag_values, path):
    _reject_unknown(file_values, spec, path)
    out = {}
    for key, (parser, default) in spec.items():
        name = f"{path}.{key}" if path else key
        if key in flag_values:
            raw = flag_values[key]
        elif key in file_values:
            raw = file_values[key]
        else:
            raw = default
        if raw is REQUIRED:
            raise ConfigError(f"{name} is required (set it in the config file or by flag)")
        if raw is default and raw is not REQUIRED:
            raw = copy.deepcopy(default)
        try:
            out[key] = parser(raw, key) if raw is not None else None
        except ValidationError as exc:
            raise ConfigError(f"{name}: {exc}") from None
    return out


def load_file(path):
    """Read a YAML or JSON document; an empty file is an empty mapping."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML/JSON: {exc}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return doc


def resolve(command, file_doc=None, global_flags=None, flags=None):
    """Resolve the configuration of one subcommand.

    Returns ``{**global_keys, command: {...}}``. The whole document is
    checked for unknown keys, including sections of other subcommands.
    """
    if command not in SCHEMA:
        raise ConfigError(f"unknown subcommand {command!r}")
    doc = dict(file_doc or {})
    _reject_unknown(doc, set(GLOBAL_KEYS) | set(SCHEMA), "")
    for section in SCHEMA:
        if section in doc and doc[section] is not None and not isinstance(doc[section], dict):
            raise ConfigError(f"{section} must be a mapping of keys")
        _reject_unknown(doc.get(section) or {}, SCHEMA[section], section)
    top = {k: v for k, v in doc.items() if k in GLOBAL_KEYS}
    resolved = _resolve_section(GLOBAL_KEYS, top, global_flags or {}, "")
    resolved[command] = _resolve_section(SCHEMA[command], doc.get(command) or {}, flags or {}, command)
    return resolved


# runtime settings that do not change results
RUNTIME_KEYS = ("out", "n_jobs")


def reproducible_part(resolved):
    return {k: v for k, v in resolved.items() if k not in RUNTIME_KEYS}


def config_hash(resolved):
    """Short SHA-256 of the resolved configuration, runtime settings excluded."""
    payload = reproducible_part(resolved)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
