"""Friction law, rain and infiltration."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class FrictionParams:
    """Interaction strengths: ``alpha_p`` water-plant (1/m), ``alpha_s`` water-soil."""

    alpha_p: float = 0.0
    alpha_s: float = 0.0

    def __post_init__(self):
        if self.alpha_p < 0 or self.alpha_s < 0:
            raise ValueError("friction coefficients must be nonnegative")


def friction_K(h, theta, params: FrictionParams):
    """K(h, theta) = alpha_p * h * (1 - theta) + theta * alpha_s."""
    return params.alpha_p * h * (1.0 - theta) + theta * params.alpha_s


# -- rain -------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantRain:
    rate: float = 0.0

    def __call__(self, t):
        return self.rate


@dataclass(frozen=True)
class Hyetograph:
    """Piecewise-constant, left-continuous rain rate.

    ``rates[k]`` holds on ``(times[k], times[k+1]]``; the last rate holds for
    every later time and the rate is zero up to and including ``times[0]``.
    """

    times: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.rates) or not self.times:
            raise ValueError("hyetograph needs matching, nonempty time and rate lists")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("hyetograph times must be strictly increasing")

    def __call__(self, t):
        k = np.searchsorted(self.times, t, side="left") - 1
        rates = np.asarray(self.rates)
        return np.where(k < 0, 0.0, rates[np.clip(k, 0, None)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Hyetograph":
        times, rates = [], []
        with open(path, newline="") as f:
            for lineno, row in enumerate(csv.reader(f), 1):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    t, r = float(row[0]), float(row[1])
                except (ValueError, IndexError):
                    if lineno == 1:
                        continue  # header
                    raise ValueError(f"{path}:{lineno}: expected 't, r' pair") from None
                times.append(t)
                rates.append(r)
        return cls(tuple(times), tuple(rates))


# -- infiltration -----------------------------------------------------------

def _gate(h, gate_depth: float):
    if gate_depth <= 0:
        return 1.0
    return np.minimum(1.0, np.maximum(h, 0.0) / gate_depth)


@dataclass(frozen=True)
class NoInfiltration:
    bound: float = 0.0
    depth_dependent = False

    def __call__(self, t, h):
        return 0.0 * np.asarray(h, dtype=float)


@dataclass(frozen=True)
class ConstantInfiltration:
    """Constant rate, optionally ramped to zero on depths below ``gate_depth``."""

    rate: float
    gate_depth: float = 0.0

    @property
    def bound(self) -> float:
        return abs(self.rate)

    @property
    def depth_dependent(self) -> bool:
        return self.gate_depth > 0

    def __call__(self, t, h):
        return self.rate * _gate(np.asarray(h, dtype=float), self.gate_depth)


@dataclass(frozen=True)
class HortonInfiltration:
    """f_c + (f_0 - f_c) exp(-k t), optionally gated by depth like above."""

    f0: float
    fc: float
    k: float
    gate_depth: float = 0.0

    @property
    def bound(self) -> float:
        return max(abs(self.f0), abs(self.fc))

    @property
    def depth_dependent(self) -> bool:
        return self.gate_depth > 0

    def capacity(self, t):
        return self.fc + (self.f0 - self.fc) * np.exp(-self.k * np.asarray(t, dtype=float))

    def __call__(self, t, h):
        return self.capacity(t) * _gate(np.asarray(h, dtype=float), self.gate_depth)


@dataclass(frozen=True)
class SourceModel:
    rain: ConstantRain | Hyetograph = field(default_factory=ConstantRain)
    infiltration: NoInfiltration | ConstantInfiltration | HortonInfiltration = field(default_factory=NoInfiltration)

    @property
    def is_null(self) -> bool:
        return (isinstance(self.rain, ConstantRain) and self.rain.rate == 0.0
                and isinstance(self.infiltration, NoInfiltration))

    @property
    def infiltration_bound(self) -> float:
        return self.infiltration.bound


def mass_source(t, h, model: SourceModel, theta):
    """M = r(t) - theta * iota(t, h), in m/s."""
    return model.rain(t) - theta * model.infiltration(t, h)


def hyetograph_to_csv(hg: Hyetograph, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "r"])
        for t, r in zip(hg.times, hg.rates):
            w.writerow([repr(t), repr(r)])


__all__ = [
    "FrictionParams", "friction_K", "ConstantRain", "Hyetograph", "NoInfiltration",
    "ConstantInfiltration", "HortonInfiltration", "SourceModel", "mass_source", "hyetograph_to_csv",
]
