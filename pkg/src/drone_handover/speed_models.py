"""Speed laws for the drone base stations.

Three variants are supported, all parameterised by their mean speed in m/s:

* ``degenerate``: every drone moves at exactly ``v`` (same-speed model).
* ``rayleigh_mean``: Rayleigh with scale ``sigma = v * sqrt(2 / pi)``.
* ``uniform_mean``: uniform on ``[low, high]``; by default ``[0, 2 v]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpeedDistribution",
    "DegenerateSpeedError",
    "degenerate",
    "rayleigh_mean",
    "uniform_mean",
    "from_config",
]

VARIANTS = ("degenerate", "rayleigh_mean", "uniform_mean")


class DegenerateSpeedError(ValueError):
    """A density was requested for a point-mass speed law."""


@dataclass(frozen=True)
class SpeedDistribution:
    """Immutable speed random variable ``V``.

    Use the :func:`degenerate`, :func:`rayleigh_mean` and :func:`uniform_mean`
    constructors rather than building instances directly.
    """

    variant: str
    mean: float
    low: float = 0.0
    high: float = 0.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown speed variant {self.variant!r}; expected one of {VARIANTS}")
        if not (math.isfinite(self.mean) and self.mean >= 0):
            raise ValueError(f"speed parameter must be finite and >= 0, got {self.mean}")
        if self.variant == "uniform_mean":
            if not (0 <= self.low <= self.high):
                raise ValueError(f"uniform interval must satisfy 0 <= low <= high, got [{self.low}, {self.high}]")

    @property
    def is_degenerate(self) -> bool:
        return self.variant == "degenerate" or (
            self.variant == "uniform_mean" and self.low == self.high
        ) or (self.variant == "rayleigh_mean" and self.mean == 0)

    @property
    def atom(self) -> float:
        """Location of the point mass of a degenerate law."""
        if self.variant == "uniform_mean":
            return self.low
        return self.mean

    @property
    def sigma(self) -> float:
        """Rayleigh scale parameter."""
        return self.mean * math.sqrt(2.0 / math.pi)

    def cdf(self, v):
        """Cumulative distribution function ``F_V``; zero for negative speeds."""
        v = np.asarray(v, dtype=float)
        if self.is_degenerate:
            out = np.where(v >= self.atom, 1.0, 0.0)
        elif self.variant == "rayleigh_mean":
            vp = np.maximum(v, 0.0)
            out = -np.expm1(-0.5 * (vp / self.sigma) ** 2)
        else:
            out = np.clip((v - self.low) / (self.high - self.low), 0.0, 1.0)
        return out[()] if out.ndim == 0 else out

    def pdf(self, v):
        """Probability density ``f_V``; raises for degenerate laws."""
        if self.is_degenerate:
            raise DegenerateSpeedError(
                "degenerate speed law has no density; use the atom-aware code path"
            )
        v = np.asarray(v, dtype=float)
        if self.variant == "rayleigh_mean":
            s2 = self.sigma ** 2
            vp = np.maximum(v, 0.0)
            out = np.where(v >= 0, vp / s2 * np.exp(-0.5 * vp * vp / s2), 0.0)
        else:
            inside = (v >= self.low) & (v <= self.high)
            out = np.where(inside, 1.0 / (self.high - self.low), 0.0)
        return out[()] if out.ndim == 0 else out

    def sample(self, rng: np.random.Generator, size=None):
        """Draw i.i.d. speeds from ``rng``."""
        if self.is_degenerate:
            if size is None:
                return float(self.atom)
            return np.full(size, float(self.atom))
        if self.variant == "rayleigh_mean":
            return rng.rayleigh(self.sigma, size)
        return rng.uniform(self.low, self.high, size)

    def upper_quantile(self, p: float) -> float:
        """Smallest ``v`` with ``cdf(v) >= p``."""
        if not 0 < p < 1:
            raise ValueError(f"quantile level must lie in (0, 1), got {p}")
        if self.is_degenerate:
            return float(self.atom)
        if self.variant == "rayleigh_mean":
            return float(self.sigma * math.sqrt(-2.0 * math.log1p(-p)))
        return float(self.low + p * (self.high - self.low))

    def support(self, tail_mass: float = 1e-12) -> tuple[float, float]:
        """Interval carrying all but ``tail_mass`` of the probability."""
        if self.is_degenerate:
            return float(self.atom), float(self.atom)
        if self.variant == "rayleigh_mean":
            return 0.0, self.upper_quantile(1.0 - tail_mass)
        return float(self.low), float(self.high)

    def describe(self) -> str:
        if self.variant == "uniform_mean":
            return f"uniform_mean({self.mean:g} m/s on [{self.low:g}, {self.high:g}])"
        return f"{self.variant}({self.mean:g} m/s)"


def degenerate(v: float) -> SpeedDistribution:
    return SpeedDistribution("degenerate", float(v))


def rayleigh_mean(v_mean: float) -> SpeedDistribution:
    return SpeedDistribution("rayleigh_mean", float(v_mean))


def uniform_mean(v_mean: float, low: float | None = None, high: float | None = None) -> SpeedDistribution:
    """Uniform law with mean ``v_mean``.

    With no endpoints given this is ``U[0, 2 v_mean]``.  Passing one endpoint
    fixes the other so that the mean is preserved.
    """
    v_mean = float(v_mean)
    if low is None and high is None:
        low, high = 0.0, 2.0 * v_mean
    elif high is None:
        high = 2.0 * v_mean - low
    elif low is None:
        low = 2.0 * v_mean - high
    if not math.isclose(0.5 * (low + high), v_mean, rel_tol=1e-12, abs_tol=1e-12):
        raise ValueError(f"interval [{low}, {high}] does not have mean {v_mean}")
    return SpeedDistribution("uniform_mean", v_mean, float(low), float(high))


def from_config(name: str, value: float, unit: str = "m_s") -> SpeedDistribution:
    """Build a speed law from its config-file name and a value in ``unit``.

    ``unit`` is ``"m_s"`` or ``"km_h"``.
    """
    if unit == "km_h":
        value = value / 3.6
    elif unit != "m_s":
        raise ValueError(f"unknown speed unit {unit!r}; expected 'm_s' or 'km_h'")
    builders = {"degenerate": degenerate, "rayleigh_mean": rayleigh_mean, "uniform_mean": uniform_mean}
    try:
        return builders[name](value)
    except KeyError:
        raise ValueError(f"unknown speed variant {name!r}; expected one of {VARIANTS}") from None
