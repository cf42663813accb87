"""Experiment configuration: JSON schema, validation, and object builders."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .weights import Weight

KNOWN_GROUPS = ("weights", "geometry", "solve", "audit", "levelset", "flatten")


@dataclass
class ExperimentConfig:
    """Parsed experiment file: data specs, audit selection, budgets."""

    name: str
    seed: int
    weight_spec: dict
    coefficient: dict
    forcing: dict
    grid: dict
    audits: dict
    selection: list[str]
    out_dir: str | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be an object")
        try:
            name = str(raw["name"])
            seed = int(raw["seed"])
        except KeyError as exc:
            raise ConfigError(f"missing required config key: {exc}") from exc
        weight_spec = raw.get("weight", {"kind": "constant", "value": 1.0,
                                         "domain": [0.0, 1.0]})
        selection = raw.get("selection", list(KNOWN_GROUPS))
        for group in selection:
            if group not in KNOWN_GROUPS:
                raise ConfigError(f"unknown audit group {group!r}")
        cfg = cls(
            name=name, seed=seed, weight_spec=weight_spec,
            coefficient=raw.get("coefficient", {"base": 1.0, "oscillation": 0.0}),
            forcing=raw.get("forcing", {"kind": "manufactured"}),
            grid=raw.get("grid", {"nx": 64, "nt": 1024, "t_final": 0.25}),
            audits=raw.get("audits", {}),
            selection=list(selection),
            out_dir=raw.get("out_dir"),
            raw=raw,
        )
        cfg.build_weight()  # validate the weight spec eagerly
        return cfg

    def audit_params(self, group: str) -> dict:
        params = self.audits.get(group, {})
        if not isinstance(params, dict):
            raise ConfigError(f"audit section {group!r} must be an object")
        return params

    def build_weight(self) -> Weight:
        spec = self.weight_spec
        kind = spec.get("kind", "constant")
        domain = spec.get("domain", [0.0, 1.0])
        try:
            if kind == "constant":
                return Weight.constant(float(spec.get("value", 1.0)), domain)
            if kind == "power":
                return Weight.power(float(spec["alpha"]),
                                    spec.get("center", 0.5), domain,
                                    scale=float(spec.get("scale", 1.0)))
            if kind == "sampled":
                return Weight.sampled(np.asarray(spec["samples"], dtype=float),
                                      domain,
                                      quadrature=spec.get("quadrature", "midpoint"))
        except ConfigError:
            raise
        except KeyError as exc:
            raise ConfigError(f"weight spec missing key {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid weight spec: {exc}") from exc
        raise ConfigError(f"unknown weight kind {kind!r}")

    def coefficient_fn(self):
        base = float(self.coefficient.get("base", 1.0))
        osc = float(self.coefficient.get("oscillation", 0.0))
        freq = float(self.coefficient.get("frequency", 8.0))
        if base <= 0.0:
            raise ConfigError("coefficient base must be positive")
        if abs(osc) >= base:
            raise ConfigError("oscillation amplitude must stay below the base")

        def a_fun(x, t):
            return base + osc * math.sin(freq * math.pi * x)

        return a_fun
