"""Run configuration: JSON schema with defaults, validation and a content hash."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Iterable

from .functionals import ModelSpec

SCHEMA_VERSION = 1

SUBCOMMANDS = (
    "simulate",
    "groundstate",
    "stability",
    "instability",
    "virial-check",
    "inequalities",
    "landscape",
    "modified-energy",
)

DEFAULTS: dict[str, Any] = {
    "subcommand": None,
    "model": None,
    "n": None,
    "p": None,
    "grid": {"N": 256, "L": 40.0, "auto": False},
    "stepper": {
        "dt": 1e-3,
        "t_end": 1.0,
        "observe_every": 10,
        "snapshot_stride": 0,
        "resolution_tol": 1e-4,
    },
    "constraint": {"r": 1.0, "rho_max": None},
    "experiment": {
        "lambda": 1.1,
        "delta": 1e-2,
        "horizon": 10.0,
        "R_virial": [4.0, 8.0, 16.0],
        "perturbation": "generic",
        "bound_factor": 5.0,
        "override": False,
        "ground_state": None,
        "probe_count": 1000,
        "rel_tol": 1e-3,
    },
    "initial": {
        "preset": "gaussian",
        "amplitude": 1.0,
        "width": 1.0,
        "velocity": 0.0,
        "mode": 1,
        "path": None,
    },
    "seeds": {"perturbation": 0, "probe": 0},
    "output_dir": None,
}

PRESETS = ("gaussian", "plane_wave", "snapshot")
REQUIRED = ("model", "n", "p")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    data: dict

    @property
    def subcommand(self) -> str:
        return self.data["subcommand"]

    @property
    def model(self) -> ModelSpec:
        return ModelSpec(self.data["model"], float(self.data["p"]), int(self.data["n"]))

    def section(self, name: str) -> dict:
        return self.data[name]

    def canonical(self) -> str:
        """Sorted compact JSON of everything except the output location."""
        body = {k: v for k, v in self.data.items() if k != "output_dir"}
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    def run_name(self) -> str:
        return f"{self.subcommand}-{self.hash}"

    def as_dict(self) -> dict:
        return copy.deepcopy(self.data)


def _merge(defaults: dict, given: dict, prefix: str, errors: list[str]) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        where = f"{prefix}{key}"
        if key not in defaults:
            errors.append(f"unknown key '{where}'")
            continue
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                errors.append(f"'{where}' must be an object")
                continue
            out[key] = _merge(defaults[key], value, where + ".", errors)
        else:
            out[key] = value
    return out


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _validate(cfg: dict, errors: list[str]) -> None:
    for key in REQUIRED:
        if cfg[key] is None:
            errors.append(f"missing required key '{key}'")
    sub = cfg["subcommand"]
    if sub is not None and sub not in SUBCOMMANDS:
        errors.append(f"unknown subcommand '{sub}'; choose from {', '.join(SUBCOMMANDS)}")
    if cfg["model"] is not None and cfg["model"] not in ("hw", "snls"):
        errors.append(f"model must be 'hw' or 'snls', got {cfg['model']!r}")
    if cfg["n"] is not None and cfg["n"] not in (1, 2, 3):
        errors.append(f"n must be 1, 2 or 3, got {cfg['n']!r}")
    if cfg["p"] is not None and not (_is_number(cfg["p"]) and cfg["p"] > 1):
        errors.append(f"p must be a finite number > 1, got {cfg['p']!r}")

    g = cfg["grid"]
    if not (_is_int(g["N"]) and g["N"] >= 16 and g["N"] & (g["N"] - 1) == 0):
        errors.append(f"grid.N must be a power of two >= 16, got {g['N']!r}")
    if not (_is_number(g["L"]) and g["L"] > 0):
        errors.append(f"grid.L must be positive, got {g['L']!r}")
    if not isinstance(g["auto"], bool):
        errors.append("grid.auto must be true or false")

    st = cfg["stepper"]
    for key in ("dt", "t_end"):
        if not (_is_number(st[key]) and st[key] > 0):
            errors.append(f"stepper.{key} must be positive, got {st[key]!r}")
    if not (_is_int(st["observe_every"]) and st["observe_every"] >= 1):
        errors.append(f"stepper.observe_every must be an integer >= 1, got {st['observe_every']!r}")
    if not (_is_int(st["snapshot_stride"]) and st["snapshot_stride"] >= 0):
        errors.append(f"stepper.snapshot_stride must be an integer >= 0, got {st['snapshot_stride']!r}")
    if st["resolution_tol"] is not None and not (_is_number(st["resolution_tol"]) and st["resolution_tol"] > 0):
        errors.append("stepper.resolution_tol must be positive or null")

    c = cfg["constraint"]
    if not (_is_number(c["r"]) and c["r"] > 0):
        errors.append(f"constraint.r must be positive, got {c['r']!r}")
    elif c["rho_max"] is not None and not (_is_number(c["rho_max"]) and c["rho_max"] > math.sqrt(c["r"])):
        errors.append(f"constraint.rho_max must exceed sqrt(r) = {math.sqrt(c['r']):.6g}")

    e = cfg["experiment"]
    if not (_is_number(e["lambda"]) and e["lambda"] > 0):
        errors.append(f"experiment.lambda must be positive, got {e['lambda']!r}")
    if not (_is_number(e["delta"]) and e["delta"] >= 0):
        errors.append(f"experiment.delta must be nonnegative, got {e['delta']!r}")
    if not (_is_number(e["horizon"]) and e["horizon"] > 0):
        errors.append(f"experiment.horizon must be positive, got {e['horizon']!r}")
    Rs = e["R_virial"]
    if not (isinstance(Rs, list) and Rs and all(_is_number(R) and R > 0 for R in Rs)):
        errors.append("experiment.R_virial must be a nonempty list of positive radii")
    if e["perturbation"] not in ("generic", "radial"):
        errors.append("experiment.perturbation must be 'generic' or 'radial'")
    if not (_is_int(e["probe_count"]) and e["probe_count"] >= 1):
        errors.append("experiment.probe_count must be a positive integer")

    ini = cfg["initial"]
    if ini["preset"] not in PRESETS:
        errors.append(f"initial.preset must be one of {', '.join(PRESETS)}")
    elif ini["preset"] == "snapshot" and not ini["path"]:
        errors.append("initial.path is required for the snapshot preset")
    if not (_is_number(ini["width"]) and ini["width"] > 0):
        errors.append("initial.width must be positive")
    if not _is_int(ini["mode"]):
        errors.append("initial.mode must be an integer mode number")
    for key in ("perturbation", "probe"):
        if not _is_int(cfg["seeds"][key]):
            errors.append(f"seeds.{key} must be an integer")

    if errors or sub is None:
        return
    model = ModelSpec(cfg["model"], float(cfg["p"]), int(cfg["n"]))
    _validate_window(sub, model, cfg, errors)


def _validate_window(sub: str, model: ModelSpec, cfg: dict, errors: list[str]) -> None:
    cls = model.classification()
    if sub == "simulate":
        return
    if model.is_critical:
        errors.append(f"{cls}; the critical boundary p = 1 + 2/n is excluded (the windows are open intervals)")
        return
    eq = model.equation.value
    if sub == "instability":
        if eq != "hw":
            errors.append("'instability' is posed for the model hw")
        if not model.is_supercritical_window:
            errors.append(f"{cls}; 'instability' requires supercritical window")
    elif sub == "stability":
        if eq != "snls":
            errors.append("'stability' is posed for the model snls")
        if not (model.is_subcritical or model.is_supercritical_window):
            errors.append(f"{cls}; 'stability' requires a subcritical p or the supercritical window")
    elif sub == "groundstate":
        if not (model.is_subcritical or model.is_supercritical_window):
            errors.append(f"{cls}; 'groundstate' requires a subcritical p or the supercritical window")
    elif sub == "modified-energy":
        if (eq, model.n, model.p) != ("snls", 1, 4.0):
            errors.append("'modified-energy' is defined for snls with n = 1 and p = 4")
    elif sub == "landscape":
        if eq != "snls" or not model.is_supercritical_window:
            errors.append(f"{cls}; 'landscape' requires snls in the supercritical window")
    elif sub == "virial-check":
        if eq != "hw":
            errors.append("'virial-check' is posed for the model hw")
    elif sub == "inequalities":
        if model.n < 2 or not model.is_supercritical_window:
            errors.append(f"{cls}; 'inequalities' requires n >= 2 and the supercritical window")


def build_config(raw: dict, subcommand: str | None = None) -> RunConfig:
    """Merge defaults into a parsed JSON object and validate it."""
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["configuration must be a JSON object"])
    cfg = _merge(DEFAULTS, raw, "", errors)
    if subcommand is not None:
        if cfg["subcommand"] not in (None, subcommand):
            errors.append(f"config subcommand '{cfg['subcommand']}' differs from the requested '{subcommand}'")
        cfg["subcommand"] = subcommand
    if cfg["subcommand"] is None:
        errors.append("no subcommand given")
    _validate(cfg, errors)
    if errors:
        raise ConfigError(errors)
    cfg["p"] = float(cfg["p"])
    cfg["grid"]["L"] = float(cfg["grid"]["L"])
    return RunConfig(cfg)


def parse_config(text: str, subcommand: str | None = None, overrides: Iterable[str] = ()) -> RunConfig:
    """Parse JSON text, apply ``key.path=value`` overrides and validate."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"not valid JSON: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["configuration must be a JSON object"])
    apply_overrides(raw, overrides)
    return build_config(raw, subcommand)


def apply_overrides(raw: dict, overrides: Iterable[str]) -> dict:
    """Set dotted keys in place; values are parsed as JSON and fall back to strings."""
    errors = []
    for item in overrides:
        if "=" not in item:
            errors.append(f"override '{item}' is not of the form key=value")
            continue
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        parts = key.strip().split(".")
        node = raw
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                errors.append(f"override '{key}' descends into a non-object")
                break
        else:
            node[parts[-1]] = value
    if errors:
        raise ConfigError(errors)
    return raw
