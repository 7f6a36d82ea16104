"""JSON experiment configuration.  Unknown keys are errors."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import planner, states
from .errors import ConfigError, ShadowsError

SECTIONS = {
    "seed": None,
    "instance": {"d", "eta", "tail", "principal", "rotate_tail"},
    "observable": {"target_B", "matrix"},
    "protocol": {"k", "n", "b", "auto", "eps", "B", "eta", "r", "cutoff", "consumption"},
    "repetitions": None,
    "constants": set(planner.ConstantsProfile.__dataclass_fields__),
    "outputs": {"csv", "json"},
    "record_wall_time": None,
    "moments": {"n"},
    "sample": {"n", "count"},
    "delta_curve": {"etas", "n_rule", "n"},
}


@dataclass
class ExperimentConfig:
    seed: int = 0
    instance: dict = field(default_factory=lambda: {"d": 2, "eta": 0.1})
    observable: dict = field(default_factory=lambda: {"target_B": 1.0})
    protocol: dict = field(default_factory=lambda: {"auto": True, "eps": 0.1})
    repetitions: int = 1
    constants: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    record_wall_time: bool = False
    moments: dict = field(default_factory=lambda: {"n": 4})
    sample: dict = field(default_factory=lambda: {"n": 4, "count": 100})
    delta_curve: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {name: getattr(self, name) for name in SECTIONS}

    def digest(self) -> str:
        text = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    # builders -----------------------------------------------------------

    @property
    def profile(self) -> planner.ConstantsProfile:
        try:
            return planner.ConstantsProfile.from_json(self.constants)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"constants: {exc}") from exc

    def build_state(self, rng: np.random.Generator | None = None) -> states.SpectralState:
        spec = self.instance
        principal = spec.get("principal")
        if principal is not None:
            principal = np.array([complex(re, im) for re, im in principal])
        try:
            return states.planted_instance(
                int(spec["d"]), float(spec["eta"]), principal=principal,
                tail_spectrum=spec.get("tail"),
                rng=rng if spec.get("rotate_tail") else None)
        except KeyError as exc:
            raise ConfigError(f"instance: missing field {exc.args[0]}") from exc
        except (ValueError, ShadowsError) as exc:
            raise ConfigError(f"instance: {exc}") from exc

    def build_observable(self, d: int, rng: np.random.Generator) -> states.Observable:
        spec = self.observable
        try:
            if "matrix" in spec:
                mat = np.array([[complex(re, im) for re, im in row] for row in spec["matrix"]])
                return states.Observable(mat)
            return states.random_observable(d, float(spec["target_B"]), rng)
        except KeyError as exc:
            raise ConfigError(f"observable: missing field {exc.args[0]}") from exc
        except (ValueError, ShadowsError) as exc:
            raise ConfigError(f"observable: {exc}") from exc


def _check_keys(doc: dict) -> None:
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for name, allowed in SECTIONS.items():
        if allowed is None or name not in doc:
            continue
        if not isinstance(doc[name], dict):
            raise ConfigError(f"{name}: expected an object")
        extra = set(doc[name]) - allowed
        if extra:
            raise ConfigError(f"unknown keys in {name}: {sorted(extra)}")


def _check_values(cfg: ExperimentConfig) -> None:
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed: must be an integer in [0, 2^64)")
    if not isinstance(cfg.repetitions, int) or cfg.repetitions < 0:
        raise ConfigError("repetitions: must be a non-negative integer")
    proto = cfg.protocol
    if not proto.get("auto"):
        for key in ("k", "n", "b"):
            if not isinstance(proto.get(key), int) or proto[key] < 1:
                raise ConfigError(f"protocol.{key}: must be a positive integer when auto is off")
    elif not 0 < float(proto.get("eps", 0)) < 1:
        raise ConfigError("protocol.eps: must lie in (0, 1) when auto is on")
    if proto.get("consumption", "deterministic") not in ("deterministic", "stochastic"):
        raise ConfigError("protocol.consumption: must be deterministic or stochastic")
    cfg.profile  # validates constants
    cfg.build_state()  # validates the instance before any sampling


def load_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(doc)
    cfg = ExperimentConfig(**doc)
    _check_values(cfg)
    return cfg


def read_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return load_config({})
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return load_config(doc)
