"""Experiment configuration files.

INI-style sections with ``key = value`` lines::

    [model]
    preset = laplace-contractive

    [experiment]
    replicas = 200

Only ``[model]`` with ``preset`` is required. Unknown sections and keys are
errors, since a typo silently falling back to a default would change what
an experiment measures.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import fields

from .errors import ParseError, ValidationError
from .experiments import ExperimentConfig, initial_measure
from .measure import GridSpec
from .model import PRESETS

# section -> key -> (ExperimentConfig field, type)
SCHEMA = {
    "model": {
        "preset": ("preset", str),
        "h_amplitude": ("h_amplitude", float),
        "signal_scale": ("signal_scale", float),
        "obs_scale": ("obs_scale", float),
    },
    "grid": {
        "lower": ("grid.lower", float),
        "upper": ("grid.upper", float),
        "points": ("grid.points", int),
    },
    "perturbation": {
        "drift": ("perturbation", float),
        "radius": ("perturbation_radius", float),
        "obs": ("obs_perturbation", float),
        "signal_scale": ("wrong_signal_scale", float),
        "obs_scale": ("wrong_obs_scale", float),
    },
    "experiment": {
        "horizon": ("horizon", int),
        "replicas": ("replicas", int),
        "seed": ("seed", int),
        "c": ("c", "c"),
        "radius": ("R", float),
        "initial": ("initial", str),
        "initial_alt": ("initial_alt", str),
        "sweep": ("sweep", "factors"),
    },
}

DEFAULT_GRID = (-20.0, 20.0, 401)


def _line_of(text: str, section: str, key: str | None = None) -> int:
    in_section = False
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            in_section = m.group(1).strip() == section
            if key is None and in_section:
                return n
            continue
        if in_section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return n
    return 0


def _convert(raw: str, kind, where: str):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        raw = raw[1:-1]
    try:
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            return float(raw)
        if kind == "c":
            return None if raw.lower() == "auto" else float(raw)
        if kind == "factors":
            return tuple(float(v) for v in re.split(r"[,\s]+", raw) if v)
        return raw
    except ValueError:
        name = getattr(kind, "__name__", kind)
        raise ParseError(f"{where}: cannot read {raw!r} as {name}") from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a configuration document; defaults fill the gaps."""
    cp = configparser.ConfigParser(interpolation=None, strict=True, empty_lines_in_values=False,
                                   inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParseError(f"malformed config: {exc}".replace("\n", " ")) from None

    values: dict = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ParseError(f"line {_line_of(text, section)}: unknown section [{section}]")
        for key, raw in cp.items(section):
            where = f"line {_line_of(text, section, key)}: [{section}] {key}"
            if key not in SCHEMA[section]:
                raise ParseError(f"{where}: unknown key {key!r}")
            target, kind = SCHEMA[section][key]
            values[target] = _convert(raw, kind, where)

    if "preset" not in values:
        raise ParseError("missing required key [model] preset")
    return build_config(values)


def build_config(values: dict) -> ExperimentConfig:
    """Validate flat field values (grid given as ``grid.lower`` etc.) into a config."""
    values = dict(values)
    lower = values.pop("grid.lower", DEFAULT_GRID[0])
    upper = values.pop("grid.upper", DEFAULT_GRID[1])
    points = values.pop("grid.points", DEFAULT_GRID[2])
    if not lower < upper:
        raise ValidationError("grid lower < upper")
    if points < 2:
        raise ValidationError("grid points ≥ 2")
    grid = GridSpec(lower, upper, points)

    if values.get("preset") not in PRESETS:
        raise ValidationError(f"preset must be one of {', '.join(PRESETS)}")
    if values.get("replicas", 1) < 1:
        raise ValidationError("replicas ≥ 1")
    if values.get("horizon", 2) < 2:
        raise ValidationError("horizon ≥ 2")
    for key in ("h_amplitude",):
        if key in values and values[key] < 0:
            raise ValidationError(f"{key} ≥ 0")
    for key in ("signal_scale", "obs_scale", "wrong_signal_scale", "wrong_obs_scale", "R",
                "perturbation_radius"):
        if key in values and not values[key] > 0:
            raise ValidationError(f"{key} > 0")
    if values.get("c") is not None and not values["c"] > 0:
        raise ValidationError("c > 0")
    if "sweep" in values and (not values["sweep"] or min(values["sweep"]) <= 0):
        raise ValidationError("sweep factors > 0")
    for key in ("initial", "initial_alt"):
        if key in values:
            try:
                initial_measure(values[key], grid)
            except ValueError as exc:
                raise ValidationError(str(exc)) from None

    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValidationError(f"unknown fields {sorted(unknown)}")
    return ExperimentConfig(grid=grid, **values)
