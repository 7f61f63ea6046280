"""Planar geometry and Poisson point process sampling in the drone plane.

Everything lives in two dimensions: the drone altitude never affects which
drone is nearest to the user, so it is not represented here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PlanarPoint",
    "DroneState",
    "position_at",
    "sample_ppp_annulus",
    "displace",
    "lens_area",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PlanarPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    @property
    def norm(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class DroneState:
    """A drone moving on a straight line at constant speed."""

    initial_position: PlanarPoint
    direction: float
    speed: float

    def __post_init__(self):
        if not self.speed >= 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        if not 0 <= self.direction < TWO_PI:
            raise ValueError(f"direction must lie in [0, 2pi), got {self.direction}")

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.speed * math.cos(self.direction), self.speed * math.sin(self.direction))


def position_at(state: DroneState, t: float) -> PlanarPoint:
    """Position of ``state`` after ``t`` seconds."""
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    vx, vy = state.velocity
    p = state.initial_position
    return PlanarPoint(p.x + vx * t, p.y + vy * t)


def sample_ppp_annulus(density, r_in, r_out, rng: np.random.Generator) -> np.ndarray:
    """Sample a homogeneous PPP on the annulus ``r_in <= |x| < r_out``.

    Returns an ``(n, 2)`` array.  Radii are drawn by inverting the area cdf
    ``(r^2 - r_in^2) / (r_out^2 - r_in^2)``; ``r_in = 0`` gives a disc.
    """
    if not 0 <= r_in < r_out:
        raise ValueError(f"invalid annulus radii r_in={r_in}, r_out={r_out}")
    if density < 0:
        raise ValueError(f"density must be >= 0, got {density}")
    area = math.pi * (r_out * r_out - r_in * r_in)
    n = rng.poisson(density * area)
    u = rng.random(n)
    r = np.sqrt(r_in * r_in + u * (r_out * r_out - r_in * r_in))
    phi = rng.uniform(0.0, TWO_PI, n)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def displace(points, distance, rng: np.random.Generator) -> np.ndarray:
    """Move every point by ``distance`` in an independent uniform direction."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    phi = rng.uniform(0.0, TWO_PI, len(points))
    step = np.broadcast_to(np.asarray(distance, dtype=float), phi.shape)
    return points + np.column_stack([step * np.cos(phi), step * np.sin(phi)])


def lens_area(r, R, d):
    """Area of the intersection of two discs of radii ``r`` and ``R``.

    ``d`` is the distance between the centres.  Uses
    ``r^2 (phi1 - sin(2 phi1)/2) + R^2 (phi2 - sin(2 phi2)/2)`` where
    ``phi1`` and ``phi2`` are the half-angles subtended by the common chord;
    containment and disjoint configurations are resolved before the formula.
    Broadcasts over array inputs.
    """
    r, R, d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (r, R, d)))
    small = np.minimum(r, R)
    # Offsets below ~1e-15 of the smaller radius change the area by less than
    # rounding, and would underflow the chord formula's denominators.
    contained = d <= np.maximum(np.abs(R - r), 1e-15 * small)
    disjoint = d >= r + R
    general = ~(contained | disjoint)

    # Safe placeholders keep the vectorised formula finite in the other regimes.
    area = _lens_general(
        np.where(general, r, 1.0), np.where(general, R, 1.0), np.where(general, d, 1.0)
    )

    out = np.where(general, area, np.where(contained, math.pi * small * small, 0.0))
    return out[()] if out.ndim == 0 else out


def _lens_general(r, R, d):
    # Chord half-angle formula; valid for |R - r| <= d <= r + R with d, r, R > 0.
    phi1 = np.arccos(np.clip((d * d + r * r - R * R) / (2 * d * r), -1.0, 1.0))
    phi2 = np.arccos(np.clip((d * d + R * R - r * r) / (2 * d * R), -1.0, 1.0))
    return r * r * (phi1 - 0.5 * np.sin(2 * phi1)) + R * R * (phi2 - 0.5 * np.sin(2 * phi2))
