"""Experiment configuration: a dataclass loaded from YAML or JSON plus flag overrides."""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

OPERATIONS = (
    "verify-structure",
    "rho-phi",
    "first-variation",
    "second-variation",
    "stability-spectrum",
    "convexity",
    "angle",
    "calibration",
    "moduli-walk",
    "flow",
)

DEFAULT_TOLERANCES = {
    "structure": 1e-7,
    "structure_closed_form": 1e-9,
    "eta_einstein_sphere": 1e-8,
    "eta_einstein_heisenberg": 1e-6,
    "rho_oracle": 1e-12,
    "rho_legendrian": 1e-10,
    "first_variation": 1e-6,
    "second_variation": 1e-4,
    "density": 1e-4,
    "stability": 1e-6,
    "convexity": 1e-6,
    "psi_modulus": 1e-8,
    "angle_relation": 1e-5,
    "calibration": 1e-10,
    "special": 1e-10,
    "moduli_defect": 1e-9,
    "commutator": 1e-6,
}


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    operation: str = "verify-structure"
    model: str = "sphere"
    n: int = 1
    family: str = None
    params: dict = field(default_factory=dict)
    N: int = None
    seed: int = 0
    samples: int = None
    steps: int = 5
    step_size: float = 0.02
    T: float = 0.5
    tolerances: dict = field(default_factory=dict)
    output: str = None
    plots: str = None
    wall_time: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.operation not in OPERATIONS:
            raise ConfigError(f"unknown operation {self.operation!r}")
        if self.model not in ("sphere", "heisenberg"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.n not in (1, 2):
            raise ConfigError("n must be 1 or 2")
        if self.N is not None and self.N < 4:
            raise ConfigError("N must be at least 4")
        if not isinstance(self.params, dict) or not isinstance(self.tolerances, dict):
            raise ConfigError("params and tolerances must be mappings")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")
        for key, value in self.tolerances.items():
            if not float(value) > 0:
                raise ConfigError(f"tolerance {key} must be positive")
        if self.steps < 1 or self.step_size <= 0 or self.T <= 0:
            raise ConfigError("steps, step_size and T must be positive")

    def tol(self, key):
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def as_dict(self):
        return asdict(self)


def _field_names():
    return {f.name for f in fields(ExperimentConfig)}


def from_mapping(data):
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - _field_names()
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    """Read a YAML or JSON file into a plain mapping."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return data or {}


def merge(base, overrides):
    """Flag overrides win over file values; None means 'not given'."""
    out = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("params", "tolerances"):
            merged = dict(out.get(key) or {})
            merged.update(value)
            out[key] = merged
        else:
            out[key] = value
    return out
