"""Run configuration: a flat JSON key set, validated fail-closed.

Precedence: built-in defaults < config file (--config) < direct flags
(--scenario, --out) < repeatable --set key=value overrides. Unknown keys
are rejected with the offending key named. A copy of the resolved
configuration is written next to every command's outputs.
"""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

from .errors import ConfigError

_num = (int, float)

# key -> (expected type(s), default, short description)
KEY_SPEC: dict[str, tuple] = {
    "scenario": (str, "example1", "scenario name: example1|example2|example3"),
    "a": (_num, None, "left endpoint override"),
    "b": (_num, None, "right endpoint override"),
    "M": (int, None, "collocation point count override"),
    "N": (int, None, "layer count override"),
    "T": (_num, None, "final time override"),
    "dt": (_num, None, "time step override (alternative to T)"),
    "lambda": (_num, None, "L1 weight"),
    "l1_units": (str, "raw", "L1 weight units: raw|normalized"),
    "lr_init": (_num, None, "initial learning rate"),
    "lr_decay_factor": (_num, None, "periodic decay factor"),
    "lr_decay_period": (int, None, "epochs per decay step"),
    "lr_post_tol_factor": (_num, None, "per-epoch factor after tolerance trigger"),
    "tau": (_num, None, "misfit tolerance triggering the post-tol decay"),
    "max_epochs": (int, None, "training epoch budget"),
    "seed": (int, 0, "seed for randomized options"),
    "c_init": (str, "zero", "coefficient init: zero|random"),
    "targets": (str, None, "observed-data mode: self|analytic"),
    "library": (list, None, "subset of default library names"),
    "custom_library": (list, None, "list of [name, expression] pairs"),
    "normalize_columns": (bool, False, "unit-norm dictionary columns"),
    "halve_on_increase": (bool, False, "halve lr when the loss increases"),
    "stop_loss": (_num, None, "early stop when J falls below this"),
    "out": (str, "out", "output directory"),
    "mode": (str, "spectral", "linear step mode: spectral|direct"),
    "scale": (str, "desk", "problem size: desk|paper"),
    "zeta_init": (list, None, "initial [zeta1, zeta2]"),
    "zeta1_range": (list, None, "landscape range [lo, hi] for zeta1"),
    "zeta2_range": (list, None, "landscape range [lo, hi] for zeta2"),
    "n1": (int, None, "landscape grid points along zeta1"),
    "n2": (int, None, "landscape grid points along zeta2"),
    "vary": (str, "N", "convergence sweep axis: M|N"),
    "values": (list, None, "convergence sweep values"),
    "scheme": (str, "strang", "splitting scheme: strang|lie"),
    "gates": (list, None, "verify gates subset"),
    "threads": (int, None, "parallel cells (default: NLS_THREADS or 1)"),
    "debug_flip_phase": (bool, False, "flip the nonlinear phase sign (validation hook)"),
}

_CHOICES = {
    "scenario": {"example1", "example2", "example3"},
    "l1_units": {"raw", "normalized"},
    "c_init": {"zero", "random"},
    "targets": {"self", "analytic"},
    "mode": {"spectral", "direct"},
    "scale": {"desk", "paper"},
    "vary": {"M", "N"},
    "scheme": {"strang", "lie"},
}


class RunConfig:
    """Validated flat configuration mapping."""

    def __init__(self, values: dict[str, Any] | None = None):
        self._values: dict[str, Any] = {k: spec[1] for k, spec in KEY_SPEC.items()}
        if values:
            self.update(values)

    def update(self, values: dict[str, Any]) -> "RunConfig":
        for key, val in values.items():
            self.set(key, val)
        return self

    def set(self, key: str, val: Any) -> None:
        if key not in KEY_SPEC:
            raise ConfigError(f"unknown config key {key!r}")
        want = KEY_SPEC[key][0]
        if val is not None:
            if want is int and isinstance(val, bool):
                raise ConfigError(f"key {key!r} expects an integer, got {val!r}")
            if want is int and isinstance(val, float) and val.is_integer():
                val = int(val)
            if not isinstance(val, want):
                raise ConfigError(
                    f"key {key!r} expects {getattr(want, '__name__', want)}, got {val!r}")
            if key in _CHOICES and val not in _CHOICES[key]:
                raise ConfigError(
                    f"key {key!r} must be one of {sorted(_CHOICES[key])}, got {val!r}")
        self._values[key] = val

    def __getitem__(self, key: str) -> Any:
        if key not in KEY_SPEC:
            raise ConfigError(f"unknown config key {key!r}")
        return self._values[key]

    def get(self, key: str, fallback: Any = None) -> Any:
        val = self[key]
        return fallback if val is None else val

    def threads(self) -> int:
        if self["threads"] is not None:
            return max(1, self["threads"])
        env = os.environ.get("NLS_THREADS", "")
        try:
            return max(1, int(env)) if env else 1
        except ValueError:
            raise ConfigError(f"NLS_THREADS must be an integer, got {env!r}")

    def as_dict(self) -> dict[str, Any]:
        return dict(self._values)

    def write(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(self._values, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def load_config_file(path: str | Path) -> dict[str, Any]:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def parse_set_override(text: str) -> tuple[str, Any]:
    """Parse one --set key=value override; values are JSON when possible."""
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return key.strip(), val


def resolve_config(file_path: str | None, scenario: str | None, out: str | None,
                   sets: list[str]) -> RunConfig:
    cfg = RunConfig()
    if file_path:
        cfg.update(load_config_file(file_path))
    if scenario:
        cfg.set("scenario", scenario)
    if out:
        cfg.set("out", out)
    for item in sets or []:
        key, val = parse_set_override(item)
        cfg.set(key, val)
    if cfg["T"] is not None and cfg["dt"] is not None and cfg["N"] is not None:
        if abs(cfg["T"] - cfg["dt"] * cfg["N"]) > 1e-12 * max(1.0, abs(cfg["T"])):
            raise ConfigError(
                f"inconsistent T={cfg['T']}, dt={cfg['dt']}, N={cfg['N']} (need T = N*dt)")
    return cfg
