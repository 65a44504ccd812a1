"""Experiment configuration: JSON schema, defaults, strict validation.

A config document is a flat JSON object. Unknown keys are rejected,
missing keys fall back to the defaults below, and the merge order is
defaults < config file < explicit flag overrides. The fully merged
(effective) config is echoed into every run's output directory, and
re-running from that echo reproduces the run byte for byte.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .models import ModelSpec
from .params import HyperParams

_HYPER_KEYS = tuple(HyperParams().to_dict())

DEFAULTS: dict = {
    # model
    "model": "linear",
    "d_w": 32,
    "d_e": 32,
    "hidden": 64,
    "model_seed": 0,
    # run
    "seed": 0,
    "sigma_init": 1.0,
    "w_avg": None,
    "n_id": 64,
    "n_var": 64,
    "n_tr": 0,
    # dynamics (see HyperParams for meanings)
    **{k: getattr(HyperParams(), k) for k in _HYPER_KEYS},
    # sampling / erosion / fitting / stats
    "ict": None,
    "max_attempts": None,
    "d0_factor": None,
    "ridge": 1e-6,
    "bins": 64,
    # inputs
    "input": None,
    "training": None,
    "covariates": None,
    "variations": None,
    "labeled": None,
    # execution
    "workers": None,
}

_INT_KEYS = {"d_w", "d_e", "hidden", "model_seed", "seed", "n_id", "n_var",
             "n_tr", "n_iter", "n_iter_disp", "bins"}
_OPT_INT_KEYS = {"max_attempts", "workers"}
_FLOAT_KEYS = {"sigma_init", "ridge"} | (set(_HYPER_KEYS) - {"n_iter", "n_iter_disp"})
_OPT_FLOAT_KEYS = {"ict", "d0_factor"}
_STR_KEYS = {"model"}
_OPT_STR_KEYS = {"input", "training", "covariates", "variations", "labeled"}


def _check_types(data: dict, origin: str) -> dict:
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config key(s) in {origin}: {sorted(unknown)}")
    out = {}
    for key, value in data.items():
        if key in _INT_KEYS or key in _OPT_INT_KEYS:
            if value is None and key in _OPT_INT_KEYS:
                pass
            elif isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{origin}: key {key!r} must be an integer, got {value!r}")
        elif key in _FLOAT_KEYS or key in _OPT_FLOAT_KEYS:
            if value is None and key in _OPT_FLOAT_KEYS:
                pass
            elif isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{origin}: key {key!r} must be a number, got {value!r}")
            else:
                value = float(value)
        elif key in _STR_KEYS or key in _OPT_STR_KEYS:
            if value is None and key in _OPT_STR_KEYS:
                pass
            elif not isinstance(value, str):
                raise ConfigError(f"{origin}: key {key!r} must be a string, got {value!r}")
        elif key == "w_avg":
            if value is not None:
                if not isinstance(value, list) or not all(
                    isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
                ):
                    raise ConfigError(f"{origin}: w_avg must be null or a list of numbers")
                value = [float(x) for x in value]
        out[key] = value
    return out


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = dict(DEFAULTS)
        merged.update(self.values)
        self.values = merged
        self.validate()

    def __getattr__(self, name):
        values = object.__getattribute__(self, "__dict__").get("values", {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    def validate(self) -> None:
        v = self.values
        self.model_spec()       # raises ConfigError on a bad model block
        self.hyperparams()      # raises ConfigError on a bad dynamics block
        for key, minimum in (("n_id", 1), ("n_var", 1), ("n_tr", 0), ("bins", 1)):
            if v[key] < minimum:
                raise ConfigError(f"{key} must be >= {minimum}, got {v[key]}")
        for key in ("seed", "model_seed"):
            if not 0 <= v[key] < 2 ** 64:
                raise ConfigError(f"{key} must be an unsigned 64-bit integer, got {v[key]}")
        if v["sigma_init"] < 0 or not math.isfinite(v["sigma_init"]):
            raise ConfigError(f"sigma_init must be finite and >= 0, got {v['sigma_init']}")
        if v["ict"] is not None and (v["ict"] < 0 or not math.isfinite(v["ict"])):
            raise ConfigError(f"ict must be finite and >= 0, got {v['ict']}")
        if v["d0_factor"] is not None and not v["d0_factor"] > 0:
            raise ConfigError(f"d0_factor must be > 0, got {v['d0_factor']}")
        if not v["ridge"] > 0:
            raise ConfigError(f"ridge must be > 0, got {v['ridge']}")
        if v["max_attempts"] is not None and v["max_attempts"] < 1:
            raise ConfigError(f"max_attempts must be >= 1, got {v['max_attempts']}")
        if v["workers"] is not None and v["workers"] < 1:
            raise ConfigError(f"workers must be >= 1, got {v['workers']}")
        if v["w_avg"] is not None and len(v["w_avg"]) != v["d_w"]:
            raise ConfigError(
                f"w_avg has {len(v['w_avg'])} components, d_w is {v['d_w']}"
            )

    # -- typed views ---------------------------------------------------

    def model_spec(self) -> ModelSpec:
        v = self.values
        return ModelSpec(
            kind=v["model"], d_w=v["d_w"], d_e=v["d_e"], seed=v["model_seed"],
            hidden=v["hidden"] if v["model"] == "mlp" else None,
        )

    def hyperparams(self) -> HyperParams:
        return HyperParams.from_dict({k: self.values[k] for k in _HYPER_KEYS})

    def w_avg_vector(self) -> np.ndarray | None:
        if self.values["w_avg"] is None:
            return None
        return np.asarray(self.values["w_avg"], dtype=np.float64)

    def effective_workers(self) -> int:
        if self.values["workers"] is not None:
            return self.values["workers"]
        env = os.environ.get("BROWNPACK_WORKERS")
        if env:
            try:
                n = int(env)
            except ValueError as exc:
                raise ConfigError(f"BROWNPACK_WORKERS must be an integer, got {env!r}") from exc
            if n < 1:
                raise ConfigError(f"BROWNPACK_WORKERS must be >= 1, got {n}")
            return n
        return 1

    def to_dict(self) -> dict:
        return dict(self.values)


def parse_config(source=None, overrides: dict | None = None) -> ExperimentConfig:
    """Build the effective config: defaults, then `source`, then `overrides`.

    `source` may be a dict, a JSON document string, or a path to one.
    """
    data: dict = {}
    if source is not None:
        if isinstance(source, dict):
            raw = source
            origin = "config"
        else:
            text = str(source)
            if text.lstrip().startswith("{"):
                origin = "config text"
            else:
                origin = str(source)
                with open(source, "r", encoding="utf-8") as fh:
                    text = fh.read()
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{origin}: invalid JSON: {exc}") from exc
            if not isinstance(raw, dict):
                raise ConfigError(f"{origin}: config must be a JSON object")
        data.update(_check_types(raw, origin))
    if overrides:
        data.update(_check_types(
            {k: v for k, v in overrides.items() if v is not None}, "flags"))
    return ExperimentConfig(data)
