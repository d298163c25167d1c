"""Experiment configuration: an INI file with typed keys.

Schema (every key optional unless marked required)::

    [grid]
    dimension = 1                 ; 1, 2 or 3
    extents = 1.0                 ; one value, or one per axis
    resolutions = 128             ; one value, or one per axis

    [problem]
    k = 2                         ; required; a comma list makes a sweep
    scheme = v_form               ; v_form | u_form
    r = inf                       ; space integrability class (list allowed)
    s = inf                       ; time integrability class (list allowed)

    [source]
    profile = cos_mode            ; cos_mode | zero | file
    modes = 1                     ; cosine mode index per axis
    amplitude = 1.0
    time_profile = constant       ; constant | exp_decay
    rate = 1.0                    ; exp_decay rate
    file = f.csv                  ; tabulated source (profile = file)

    [initial]                     ; exactly one of constant / perturbation / file
    constant = 1.0
    perturbation = 0.01           ; v_inf(mass) + perturbation * cosine mode
    modes = 1
    mass = 1.0                    ; mass used to build v_inf for the perturbation
    file = v0.csv                 ; snapshot CSV (cell_index, coordinates, v)

    [run]
    T = 1.0
    dt0 = 1e-3
    record_every = 0.01
    entropy_p = 4                 ; comma list
    fit_floor = 1e-6
    fit_t_min = 0.0

    [output]
    directory = out
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

SCHEMA = {
    "grid": {"dimension", "extents", "resolutions"},
    "problem": {"k", "scheme", "r", "s"},
    "source": {"profile", "modes", "amplitude", "time_profile", "rate", "file"},
    "initial": {"constant", "perturbation", "modes", "mass", "file"},
    "run": {"t", "dt0", "record_every", "entropy_p", "fit_floor", "fit_t_min"},
    "output": {"directory"},
}


class ConfigError(ValueError):
    """Raised with every validation problem found, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int = 1
    extents: tuple = (1.0,)
    resolutions: tuple = (64,)
    k_values: tuple = (2.0,)
    scheme: str = "v_form"
    r_values: tuple = (math.inf,)
    s_values: tuple = (math.inf,)
    source_profile: str = "cos_mode"
    source_modes: tuple = (1,)
    source_amplitude: float = 1.0
    time_profile: str = "constant"
    time_rate: float = 1.0
    source_file: Optional[str] = None
    v0_kind: str = "constant"
    v0_constant: float = 1.0
    v0_perturbation: float = 0.01
    v0_modes: tuple = (1,)
    v0_mass: float = 1.0
    v0_file: Optional[str] = None
    T: float = 1.0
    dt0: float = 1e-3
    record_every: float = 0.01
    entropy_p: tuple = ()
    fit_floor: float = 1e-6
    fit_t_min: Optional[float] = None
    output_dir: str = "out"
    base_dir: str = "."

    @property
    def k(self) -> float:
        return self.k_values[0]

    @property
    def r(self) -> float:
        return self.r_values[0]

    @property
    def s(self) -> float:
        return self.s_values[0]

    @property
    def is_sweep(self) -> bool:
        return len(self.k_values) * len(self.r_values) * len(self.s_values) > 1

    def point(self, k: float, r: float, s: float) -> "ExperimentConfig":
        return replace(self, k_values=(k,), r_values=(r,), s_values=(s,))

    def echo(self) -> dict:
        out = {}
        for key, val in self.__dict__.items():
            if key == "base_dir":
                continue
            if isinstance(val, tuple):
                val = [_jsonable(x) for x in val]
            out[key] = _jsonable(val)
        return out


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def _floats(text: str) -> tuple:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def _ints(text: str) -> tuple:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ValueError(f"expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _per_axis(vals: tuple, ndim: int, name: str, errors: list) -> tuple:
    if len(vals) == 1:
        return vals * ndim
    if len(vals) != ndim:
        errors.append(f"{name} needs 1 or {ndim} values, got {len(vals)}")
    return vals


def parse_config_text(text: str, base_dir: str = ".") -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"malformed config: {exc}"]) from exc
    return _build(parser, base_dir)


def parse_config(path) -> ExperimentConfig:
    """Read and validate a config file, reporting all problems at once."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    return parse_config_text(path.read_text(), base_dir=str(path.parent))


def _build(parser: configparser.ConfigParser, base_dir: str) -> ExperimentConfig:
    errors = []
    for section in parser.sections():
        if section not in SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key in parser[section]:
            if key not in SCHEMA[section]:
                errors.append(f"unknown key '{key}' in [{section}]")

    def get(section, key, conv, default):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError):
            errors.append(f"[{section}] {key} = {raw!r} is not valid")
            return default

    kw = {}
    ndim = get("grid", "dimension", int, 1)
    if ndim not in (1, 2, 3):
        errors.append(f"dimension must be 1, 2 or 3, got {ndim}")
        ndim = 1
    kw["dimension"] = ndim
    extents = _per_axis(get("grid", "extents", _floats, (1.0,)), ndim, "extents", errors)
    resolutions = _per_axis(get("grid", "resolutions", _ints, (64,)), ndim, "resolutions", errors)
    if any(not (L > 0) for L in extents):
        errors.append("extents must be positive")
    if any(n <= 0 for n in resolutions):
        errors.append("resolutions must be positive")
    kw["extents"], kw["resolutions"] = extents, resolutions

    if not parser.has_option("problem", "k"):
        errors.append("[problem] k is required")
    ks = get("problem", "k", _floats, (2.0,))
    if not ks:
        errors.append("k sweep list is empty")
    elif any(not k > 1 for k in ks):
        errors.append("k must exceed 1")
    kw["k_values"] = ks
    scheme = get("problem", "scheme", str.strip, "v_form")
    if scheme not in ("v_form", "u_form"):
        errors.append(f"scheme must be v_form or u_form, got {scheme!r}")
    kw["scheme"] = scheme
    rs = get("problem", "r", _floats, (math.inf,))
    ss = get("problem", "s", _floats, (math.inf,))
    if not rs or not ss:
        errors.append("r and s sweep lists must be nonempty")
    if any(not r > 1 for r in rs):
        errors.append("r must exceed 1")
    if any(not s >= 1 for s in ss):
        errors.append("s must be at least 1")
    kw["r_values"], kw["s_values"] = rs, ss

    profile = get("source", "profile", str.strip, "cos_mode")
    if profile not in ("cos_mode", "zero", "file"):
        errors.append(f"source profile must be cos_mode, zero or file, got {profile!r}")
    kw["source_profile"] = profile
    kw["source_modes"] = _per_axis(get("source", "modes", _ints, (1,)), ndim, "source modes", errors)
    kw["source_amplitude"] = get("source", "amplitude", float, 1.0)
    tp = get("source", "time_profile", str.strip, "constant")
    if tp not in ("constant", "exp_decay"):
        errors.append(f"time_profile must be constant or exp_decay, got {tp!r}")
    kw["time_profile"] = tp
    kw["time_rate"] = get("source", "rate", float, 1.0)
    kw["source_file"] = get("source", "file", str.strip, None)
    if profile == "file" and not kw["source_file"]:
        errors.append("source profile 'file' needs [source] file")

    v0_keys = [key for key in ("constant", "perturbation", "file") if parser.has_option("initial", key)]
    if len(v0_keys) > 1:
        errors.append(f"exactly one v0 spec allowed in [initial], got {', '.join(v0_keys)}")
    kind = v0_keys[0] if v0_keys else "constant"
    kw["v0_kind"] = {"perturbation": "steady_plus_perturbation"}.get(kind, kind)
    kw["v0_constant"] = get("initial", "constant", float, 1.0)
    if kind == "constant" and not kw["v0_constant"] > 0:
        errors.append("initial constant must be positive")
    kw["v0_perturbation"] = get("initial", "perturbation", float, 0.01)
    kw["v0_modes"] = _per_axis(get("initial", "modes", _ints, (1,)), ndim, "initial modes", errors)
    kw["v0_mass"] = get("initial", "mass", float, 1.0)
    if not kw["v0_mass"] > 0:
        errors.append("initial mass must be positive")
    kw["v0_file"] = get("initial", "file", str.strip, None)

    kw["T"] = get("run", "t", float, 1.0)
    if not kw["T"] > 0:
        errors.append("T must be positive")
    kw["dt0"] = get("run", "dt0", float, 1e-3)
    if not kw["dt0"] > 0:
        errors.append("dt0 must be positive")
    kw["record_every"] = get("run", "record_every", float, 0.01)
    if not kw["record_every"] > 0:
        errors.append("record_every must be positive")
    kw["entropy_p"] = get("run", "entropy_p", _floats, ())
    kw["fit_floor"] = get("run", "fit_floor", float, 1e-6)
    if not 0 < kw["fit_floor"] < 1:
        errors.append("fit_floor must lie in (0, 1)")
    kw["fit_t_min"] = get("run", "fit_t_min", float, None)
    for p in kw["entropy_p"]:
        for k in ks:
            if not p > k - 1 or p == k:
                errors.append(f"entropy exponent p={p:g} needs p > k-1 and p != k (k={k:g})")
    kw["output_dir"] = get("output", "directory", str.strip, "out")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(base_dir=base_dir, **kw)
