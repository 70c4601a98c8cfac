"""Experiment configuration: YAML in, validated dataclass out."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .geometry import DEFAULT_KAPPA
from .kernels import MediumSpec, demo_medium

EXPERIMENTS = ("spectra", "forward", "converge", "linearize", "reconstruct")


class ConfigError(ValueError):
    pass


@dataclass
class MediumConfig:
    """``kind`` is ``demo`` (band-2 field of given contrast), ``constant`` or ``custom``.

    ``custom`` takes ``modes`` as ``[i, j, k, value]`` cosine coefficients.
    """

    kind: str = "demo"
    contrast: float = 0.5
    offset: float = 1.0
    modes: list = field(default_factory=list)

    def build(self) -> MediumSpec:
        if self.kind == "demo":
            return demo_medium(self.contrast, self.offset)
        if self.kind == "constant":
            return MediumSpec.constant(self.offset)
        if self.kind == "custom":
            band = max((max(int(m[0]), int(m[1]), int(m[2])) for m in self.modes), default=0)
            return MediumSpec.from_dict({"offset": self.offset, "band": band, "modes": self.modes, "min_bound": 0.1 * self.offset})
        raise ConfigError(f"medium.kind must be demo, constant or custom (got {self.kind!r})")


@dataclass
class ExperimentConfig:
    """All numeric knobs of the five experiments; unused ones are ignored."""

    experiment: str
    N: int = 12
    a_list: list = field(default_factory=lambda: [1 / 8, 1 / 16, 1 / 32])
    h: float = 0.0
    P_list: list = field(default_factory=lambda: [4.0, 8.0, 16.0, 32.0])
    varsigma: float = 1.0
    L: int = 2
    n0: int = 0
    c_n0: float = -1.0
    k0: float = 0.25
    rho1: float = 10.0
    kappa: float = DEFAULT_KAPPA
    fit: str = "tile"
    droplets: bool = True
    n_pairs: int = 6
    mode: str = "oracle"
    medium: MediumConfig = field(default_factory=MediumConfig)
    output_dir: str = "results"
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment' key")
        med = data.pop("medium", None) or {}
        if not isinstance(med, dict):
            raise ConfigError("medium must be a mapping")
        try:
            medium = MediumConfig(**med)
        except TypeError as exc:
            raise ConfigError(f"bad medium block: {exc}") from None
        cfg = cls(medium=medium, **data)
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def tolerance(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS} (got {self.experiment!r})")
        if not isinstance(self.N, int) or self.N < 2:
            raise ConfigError(f"N must be an integer >= 2 (got {self.N!r})")
        if not self.c_n0 < 0.0:
            raise ConfigError(
                f"c_n0 = {self.c_n0} rejected: the detuning constant must be negative, "
                "otherwise P^2 = -k0 <1, e_n0>^2 / (lambda_n0 c_n0) is not positive"
            )
        if not (0.0 <= self.h < 1.0):
            raise ConfigError(f"h must lie in [0, 1) (got {self.h})")
        if self.k0 <= 0 or self.rho1 <= 0:
            raise ConfigError("k0 and rho1 must be positive")
        if self.kappa <= 0:
            raise ConfigError("kappa must be positive")
        if any(not (a > 0) for a in self.a_list):
            raise ConfigError(f"every a in a_list must be positive (got {self.a_list})")
        if any(not (P > 0) for P in self.P_list):
            raise ConfigError(f"every P in P_list must be positive (got {self.P_list})")
        if not self.varsigma > 0:
            raise ConfigError("varsigma must be positive")
        if not isinstance(self.L, int) or self.L < 1:
            raise ConfigError("L must be an integer >= 1")
        if self.mode not in ("oracle", "measurement"):
            raise ConfigError("mode must be 'oracle' or 'measurement'")
        if self.fit not in ("tile", "floor"):
            raise ConfigError("fit must be 'tile' or 'floor'")
        if not 1 <= self.n_pairs <= 6:
            raise ConfigError("n_pairs must be between 1 and 6")
        if self.n0 < 0:
            raise ConfigError("n0 must be non-negative")
        medium = self.medium.build()
        try:
            medium.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not math.isfinite(self.kappa):
            raise ConfigError("kappa must be finite")
