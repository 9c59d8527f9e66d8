"""
Experiment configuration files.

One INI file per experiment::

    [experiment]
    name = table2-standard

    [run]
    scheme = standard
    r = 4
    N = 160
    domain = -40, 40
    profile = peakon
    T = 1
    dt = 0.05

    [profile]
    c = 1.0

    [diagnostics]
    invariants = yes
    record_every = 1.0

    [converge]
    levels = 160, 320, 640
    dt_over_h = 0.1
    norms = L2, H1
    normalized = yes

    [stability]
    grid = 0.5, 1.0, 1.5

Only ``[run]`` is required.  Values are plain numbers, comma separated
lists, ``yes``/``no`` or words.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields, replace

from .galerkin_periodic import SchemeError
from .spline_core import SplineError
from .time_integration import RunConfig


class ConfigError(ValueError):
    """Invalid configuration; ``where`` names the section, key and line."""

    def __init__(self, msg, where=""):
        super().__init__(f"{where}: {msg}" if where else msg)
        self.where = where


@dataclass
class DiagnosticsOptions:
    invariants: bool = True
    indicators: bool = False
    tau: float = 1.0
    record_every: float = None
    shape_times: tuple = ()
    phase_window: tuple = ()
    dump_times: tuple = ()
    dump_m: bool = False
    points_per_element: int = 10


@dataclass
class ConvergeOptions:
    levels: tuple = ()
    dt_over_h: float = None
    steps: tuple = ()
    norms: tuple = ("L2", "H1")
    normalized: bool = True
    fields: tuple = ("u",)


@dataclass
class StabilityOptions:
    grid: tuple = ()
    resolution: float = 0.01


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    run: RunConfig = None
    diagnostics: DiagnosticsOptions = field(default_factory=DiagnosticsOptions)
    converge: ConvergeOptions = field(default_factory=ConvergeOptions)
    stability: StabilityOptions = field(default_factory=StabilityOptions)


# ---------------------------------------------------------------------------
# value conversion

_RUN_TYPES = {
    "scheme": str, "r": int, "N": int, "domain": "floats", "mesh": str, "profile": str,
    "T": float, "dt": float, "courant": float, "speed": float, "checkpoints": "floats",
    "k": float, "projection": str, "quad_n": int, "forcing": str, "check_every": int,
}
_DIAG_TYPES = {
    "invariants": bool, "indicators": bool, "tau": float, "record_every": float,
    "shape_times": "floats", "phase_window": "floats", "dump_times": "floats",
    "dump_m": bool, "points_per_element": int,
}
_CONV_TYPES = {
    "levels": "ints", "dt_over_h": float, "steps": "ints", "norms": "words",
    "normalized": bool, "fields": "words",
}
_STAB_TYPES = {"grid": "floats", "resolution": float}
_BOOL = {"yes": True, "true": True, "on": True, "1": True,
         "no": False, "false": False, "off": False, "0": False}


def _convert(text, kind):
    text = text.strip()
    if kind == "floats":
        return tuple(float(v) for v in _split(text))
    if kind == "ints":
        return tuple(int(v) for v in _split(text))
    if kind == "words":
        return tuple(_split(text))
    if kind is bool:
        try:
            return _BOOL[text.lower()]
        except KeyError:
            raise ValueError(f"expected yes/no, got {text!r}") from None
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def _split(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _param_value(text):
    """Profile parameter: a float, a list of floats, or a word."""
    parts = _split(text)
    try:
        vals = [float(v) for v in parts]
    except ValueError:
        return text.strip()
    return vals[0] if len(vals) == 1 and "," not in text else vals


def _fmt(v):
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


# ---------------------------------------------------------------------------
# parsing


def _line_of(text, section, key):
    sec = None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            sec = m.group(1).strip()
            continue
        if sec == section and re.match(rf"\s*{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
            return i
    return None


def _where(text, section, key=None):
    if key is None:
        return f"[{section}]"
    line = _line_of(text, section, key)
    return f"[{section}] {key}" + (f" (line {line})" if line else "")


def _read_section(cp, text, section, types, target_cls):
    if not cp.has_section(section):
        return target_cls()
    values = {}
    for key, raw in cp.items(section):
        if key not in types:
            raise ConfigError(f"unknown key {key!r}", _where(text, section, key))
        try:
            values[key] = _convert(raw, types[key])
        except ValueError as exc:
            raise ConfigError(str(exc), _where(text, section, key)) from None
    return target_cls(**values)


def parse_config(text):
    """Parse INI text into an :class:`ExperimentConfig`."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    known = {"experiment", "run", "profile", "diagnostics", "converge", "stability"}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"unknown section [{sec}]")
    if not cp.has_section("run"):
        raise ConfigError("missing [run] section")

    name = cp.get("experiment", "name", fallback="experiment")
    run_vals = {}
    for key, raw in cp.items("run"):
        if key not in _RUN_TYPES:
            raise ConfigError(f"unknown key {key!r}", _where(text, "run", key))
        try:
            run_vals[key] = _convert(raw, _RUN_TYPES[key])
        except ValueError as exc:
            raise ConfigError(str(exc), _where(text, "run", key)) from None
    if cp.has_section("profile"):
        run_vals["profile_params"] = {k: _param_value(v) for k, v in cp.items("profile")}
    try:
        run = RunConfig(**run_vals)
    except (SchemeError, SplineError, TypeError) as exc:
        raise ConfigError(str(exc), "[run]") from None

    diag = _read_section(cp, text, "diagnostics", _DIAG_TYPES, DiagnosticsOptions)
    conv = _read_section(cp, text, "converge", _CONV_TYPES, ConvergeOptions)
    stab = _read_section(cp, text, "stability", _STAB_TYPES, StabilityOptions)
    cfg = ExperimentConfig(name, run, diag, conv, stab)
    validate(cfg)
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def validate(cfg):
    run = cfg.run
    if cfg.converge.levels:
        lv = cfg.converge.levels
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ConfigError("refinement levels must increase (h strictly decreasing)",
                              "[converge] levels")
        if cfg.converge.steps and len(cfg.converge.steps) != len(lv):
            raise ConfigError("steps must match levels in length", "[converge] steps")
        for nrm in cfg.converge.norms:
            if nrm not in ("L2", "H1", "Linf"):
                raise ConfigError(f"unknown norm {nrm!r}", "[converge] norms")
    if cfg.stability.grid:
        g = cfg.stability.grid
        if any(b <= a for a, b in zip(g, g[1:])):
            raise ConfigError("courant grid must increase", "[stability] grid")
    if run.scheme == "ibvp" and run.forcing not in ("none", "manufactured"):
        raise ConfigError(f"unknown forcing {run.forcing!r}", "[run] forcing")
    if run.projection not in ("h1", "l2", "interp"):
        raise ConfigError(f"unknown projection {run.projection!r}", "[run] projection")
    if len(run.domain) != 2 or not run.domain[1] > run.domain[0]:
        raise ConfigError("domain must be two increasing numbers", "[run] domain")


# ---------------------------------------------------------------------------
# serialization


def to_ini(cfg):
    """INI text that :func:`parse_config` maps back to ``cfg``."""
    out = ["[experiment]", f"name = {cfg.name}", "", "[run]"]
    defaults = RunConfig(dt=1.0)
    for f in fields(RunConfig):
        if f.name == "profile_params":
            continue
        v = getattr(cfg.run, f.name)
        if v is None:
            continue
        if f.name != "dt" and v == getattr(defaults, f.name) and f.name not in ("scheme", "r", "N", "T"):
            continue
        out.append(f"{f.name} = {_fmt(v)}")
    if cfg.run.profile_params:
        out += ["", "[profile]"]
        out += [f"{k} = {_fmt(v)}" for k, v in cfg.run.profile_params.items()]
    for sec, obj in (("diagnostics", cfg.diagnostics), ("converge", cfg.converge),
                     ("stability", cfg.stability)):
        base = type(obj)()
        lines = [f"{f.name} = {_fmt(getattr(obj, f.name))}" for f in fields(obj)
                 if getattr(obj, f.name) != getattr(base, f.name)
                 and getattr(obj, f.name) is not None]
        if lines:
            out += ["", f"[{sec}]"] + lines
    return "\n".join(out) + "\n"


def with_run(cfg, **changes):
    return replace(cfg, run=replace(cfg.run, **changes))
