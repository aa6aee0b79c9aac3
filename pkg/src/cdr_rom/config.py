"""Experiment configuration files (YAML) and the two built-in presets."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from .assembly import CDRProblem, grid_peclet


@dataclass(frozen=True)
class ForcingSpec:
    """A constant, or an axis-aligned box indicator ``inside`` on the box and ``outside`` elsewhere."""

    kind: str = "constant"
    value: float = 1.0
    bounds: tuple[tuple[float, float], tuple[float, float]] | None = None
    inside: float = 1.0
    outside: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "box"):
            raise ValueError(f"unknown forcing type {self.kind!r}; expected 'constant' or 'box'")
        if self.kind == "box":
            if self.bounds is None:
                raise ValueError("box forcing needs bounds [[x0, x1], [y0, y1]]")
            (x0, x1), (y0, y1) = self.bounds
            if not (x0 <= x1 and y0 <= y1):
                raise ValueError("box bounds must be ordered")
            object.__setattr__(self, "bounds", ((float(x0), float(x1)), (float(y0), float(y1))))

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "constant":
            return np.full(np.broadcast(x, y).shape, float(self.value))
        (x0, x1), (y0, y1) = self.bounds
        inside = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        return np.where(inside, float(self.inside), float(self.outside))

    @property
    def is_zero(self) -> bool:
        if self.kind == "constant":
            return self.value == 0
        return self.inside == 0 and self.outside == 0

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"type": "constant", "value": float(self.value)}
        return {"type": "box", "bounds": [list(b) for b in self.bounds],
                "inside": float(self.inside), "outside": float(self.outside)}

    @classmethod
    def from_dict(cls, d) -> "ForcingSpec":
        if isinstance(d, (int, float)):
            return cls("constant", float(d))
        kind = d.get("type", "constant")
        if kind == "constant":
            return cls("constant", float(d.get("value", 0.0)))
        bounds = tuple(tuple(b) for b in d["bounds"])
        return cls("box", bounds=bounds, inside=float(d.get("inside", 1.0)), outside=float(d.get("outside", 0.0)))


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    epsilon: float
    b: tuple[float, float]
    sigma: float
    forcing: ForcingSpec
    T: float
    truth_n: int
    truth_p: int
    fom_n: int
    fom_p: int
    truth_dt: float
    energy_cutoff: float | None = None
    R_values: tuple[int, ...] = (5,)
    sweep: dict = field(default_factory=dict)  # optional tau / dt / tau_apg lists
    apg_dt: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "b", (float(self.b[0]), float(self.b[1])))
        object.__setattr__(self, "R_values", tuple(int(r) for r in self.R_values))
        if self.truth_n % self.fom_n != 0:
            raise ValueError(f"truth_n={self.truth_n} must be an integer multiple of fom_n={self.fom_n}")
        if not self.truth_dt > 0:
            raise ValueError("truth_dt must be positive")
        n_steps = round(self.T / self.truth_dt)
        if not math.isclose(n_steps * self.truth_dt, self.T, rel_tol=1e-9):
            raise ValueError("T must be an integer multiple of truth_dt")
        if self.energy_cutoff is not None and not 0 < self.energy_cutoff <= 1:
            raise ValueError("energy_cutoff must lie in (0, 1]")
        for p in (self.truth_p, self.fom_p):
            if p not in (1, 2):
                raise ValueError("polynomial degrees must be 1 or 2")
        unknown = set(self.sweep) - {"tau", "dt", "tau_apg"}
        if unknown:
            raise ValueError(f"unknown sweep keys: {sorted(unknown)}")

    @property
    def n_truth_steps(self) -> int:
        return int(round(self.T / self.truth_dt))

    def problem(self) -> CDRProblem:
        return CDRProblem(self.epsilon, self.b, self.sigma, self.forcing, self.T)

    def peclet_numbers(self) -> tuple[float, float]:
        """Grid Peclet numbers of the truth and FOM spaces with ``h = 1 / (n p)``."""
        bn = float(np.hypot(*self.b))
        return (grid_peclet(bn, 1.0 / (self.truth_n * self.truth_p), self.epsilon),
                grid_peclet(bn, 1.0 / (self.fom_n * self.fom_p), self.epsilon))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["b"] = list(self.b)
        d["forcing"] = self.forcing.to_dict()
        d["R_values"] = list(self.R_values)
        d["sweep"] = {k: [float(x) for x in v] for k, v in self.sweep.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["forcing"] = ForcingSpec.from_dict(d["forcing"])
        d["b"] = tuple(d["b"])
        d["sweep"] = {k: tuple(float(x) for x in v) for k, v in (d.get("sweep") or {}).items()}
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown configuration keys: {sorted(extra)}")
        return cls(**d)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        data = yaml.safe_load(text)
        if not isinstance(data, dict):
            raise ValueError("configuration must be a mapping")
        return cls.from_dict(data)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.loads(fh.read())


_B = (0.5 * math.cos(math.pi / 3), 0.5 * math.sin(math.pi / 3))

PRESETS = {
    "example1": ExperimentConfig(
        name="example1", epsilon=1e-3, b=_B, sigma=1.0, forcing=ForcingSpec("constant", 1.0), T=5.0,
        truth_n=128, truth_p=2, fom_n=32, fom_p=2, truth_dt=1e-3,
    ),
    "example2": ExperimentConfig(
        name="example2", epsilon=1e-4, b=_B, sigma=1.0,
        forcing=ForcingSpec("box", bounds=((0.0, 0.5), (0.0, 0.25)), inside=1.0, outside=0.0), T=2.0,
        truth_n=256, truth_p=2, fom_n=32, fom_p=2, truth_dt=1e-3,
    ),
}


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}") from None
