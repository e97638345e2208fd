from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional

from .errors import ConfigError


@dataclass(frozen=True)
class GenerationParams:
    """User parameters for automatic generation."""

    d: int = 5
    num_communities: int = 1
    max_indegree: int = 2
    link_communities: bool = False
    nb_links: int = 1
    train_length: int = 1000
    test_length: int = 1000
    contamination_ratio: float = 0.05
    num_anomalies: Optional[int] = None
    max_lag: int = 5
    n_const: int = 2
    propagation_prob: float = 0.5
    noise_sigma: float = 0.0
    enable_window_agg: bool = False
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("d", "num_communities", "max_indegree", "train_length", "test_length",
                     "max_lag", "nb_links"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(name, f"must be an integer >= 1, got {value!r}")
        if isinstance(self.n_const, bool) or not isinstance(self.n_const, int) or self.n_const < 0:
            raise ConfigError("n_const", f"must be an integer >= 0, got {self.n_const!r}")
        if self.num_communities > self.d:
            raise ConfigError("num_communities", f"{self.num_communities} exceeds d={self.d}")
        if not 0.0 <= self.contamination_ratio < 1.0:
            raise ConfigError("contamination_ratio", f"out of range [0, 1): {self.contamination_ratio}")
        if not 0.0 <= self.propagation_prob <= 1.0:
            raise ConfigError("propagation_prob", f"out of range [0, 1]: {self.propagation_prob}")
        if not self.noise_sigma >= 0.0:
            raise ConfigError("noise_sigma", f"must be >= 0, got {self.noise_sigma}")
        if self.num_anomalies is not None and (
            isinstance(self.num_anomalies, bool) or not isinstance(self.num_anomalies, int)
            or self.num_anomalies < 1
        ):
            raise ConfigError("num_anomalies", f"must be an integer >= 1, got {self.num_anomalies!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", f"must be an integer in [0, 2**64), got {self.seed!r}")

    @property
    def n_anomalous(self) -> int:
        return round(self.contamination_ratio * self.test_length)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class ManualAnomaly:
    var: int
    start: int
    end: int
    equation: str
    strategy: str = "manual"


@dataclass(frozen=True)
class ManualSpec:
    """User-written equations (one per variable) and optional anomalous replacements."""

    d: int
    equations: tuple[str, ...]
    anomalies: tuple[ManualAnomaly, ...] = ()
    train_length: int = 100
    test_length: int = 400
    # explicit (src, dst) -> propagates; unlisted edges are drawn with propagation_prob
    propagation: tuple[tuple[int, int, bool], ...] = ()
    propagation_prob: float = 0.5
    noise_sigma: float = 0.0
    seed: int = 0

    @property
    def total_length(self) -> int:
        return self.train_length + self.test_length

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "equations": list(self.equations),
            "anomalies": [
                {"var": a.var, "start": a.start, "end": a.end, "equation": a.equation,
                 "strategy": a.strategy}
                for a in self.anomalies
            ],
            "train_length": self.train_length,
            "test_length": self.test_length,
            "propagation": [{"src": s, "dst": t, "propagates": p} for s, t, p in self.propagation],
            "propagation_prob": self.propagation_prob,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }
