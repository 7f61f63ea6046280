"""Monte Carlo estimation of handover probabilities and non-serving densities.

The first handover of a realisation is found exactly.  Until the first
handover the serving drone is the one nearest at ``t = 0``, so the first
change of nearest drone is the earliest instant at which any other drone
becomes strictly closer than it.  For straight-line motion the squared
distance difference

    q(t) = |x_o(t)|^2 - |x_s(t)|^2 = a t^2 + 2 b t + c

is a polynomial of degree at most two (degree one when speeds are equal),
so each competitor's first crossing is a closed-form root.

Random streams are counter based: trials are grouped in fixed-size blocks
and block ``k`` draws from ``Philox(key=(master_seed, stream_tag | k))``.
The block layout does not depend on the number of workers, so results are
bit-identical for any degree of parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import TWO_PI, DroneState, PlanarPoint
from .speed_models import SpeedDistribution

__all__ = [
    "SimConfig",
    "Realization",
    "HandoverCurve",
    "DensityProfile",
    "WindowTooSmallError",
    "first_crossing_time",
    "first_handover_time",
    "sample_realization",
    "window_radius",
    "block_rng",
    "simulate_first_handover_times",
    "estimate_handover_curve",
    "estimate_handover_curve_moving_ue",
    "estimate_nonserving_density",
    "binomial_interval",
]

# Stream tags keep the different estimators on disjoint random streams.
STREAM_AERIAL = 0
STREAM_MOVING_UE = 1
STREAM_DENSITY = 2
STREAM_REALIZATION = 3

MAX_EMPTY_FRACTION = 1e-3


class WindowTooSmallError(RuntimeError):
    """Too many sampled fields were empty; the simulation window is mis-sized."""


@dataclass(frozen=True)
class SimConfig:
    """Parameters of a Monte Carlo run.

    The window radius is ``window_base_radius_factor / sqrt(pi lambda0)``
    plus the distance a drone at the ``window_margin_quantile`` speed covers
    in ``t_max``.
    """

    lambda0: float
    speed: SpeedDistribution
    t_max: float
    window_margin_quantile: float = 1 - 1e-5
    window_base_radius_factor: float = 5.0
    master_seed: int = 0
    block_size: int = 1000
    workers: int = 1
    z: float = 3.0

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise ValueError(f"lambda0 must be > 0, got {self.lambda0}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be > 0, got {self.t_max}")
        if not 0 < self.window_margin_quantile < 1:
            raise ValueError("window_margin_quantile must lie in (0, 1)")
        if self.block_size < 1 or self.workers < 1:
            raise ValueError("block_size and workers must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a non-negative 64-bit integer")


def window_radius(cfg: SimConfig) -> float:
    base = cfg.window_base_radius_factor / math.sqrt(cfg.lambda0 * math.pi)
    return base + cfg.speed.upper_quantile(cfg.window_margin_quantile) * cfg.t_max


def block_rng(master_seed: int, stream: int, block: int) -> np.random.Generator:
    """Counter-based generator for one block of trials."""
    key = np.array([master_seed, (stream << 48) | block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# Exact first crossing
# ---------------------------------------------------------------------------


def _crossing_coefficients(p_o, w_o, v_o, p_s, w_s, v_s):
    # q(t) = a t^2 + 2 b t + c for competitor o against serving drone s.
    a = v_o * v_o - v_s * v_s
    b = np.sum(p_o * w_o, axis=-1) - np.sum(p_s * w_s, axis=-1)
    c = np.sum(p_o * p_o, axis=-1) - np.sum(p_s * p_s, axis=-1)
    return a, b, c


def _first_root(a, b, c, t_max):
    """Smallest t in (0, t_max] where q changes sign from positive to negative.

    Assumes ``c > 0``.  Returns ``inf`` where there is no crossing.  Double
    roots (tangential contact) are not crossings.
    """
    a, b, c = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, c)))
    with np.errstate(over="ignore"):
        return _first_root_unchecked(a, b, c, t_max)


def _first_root_unchecked(a, b, c, t_max):
    # A vanishing leading coefficient may overflow to +inf, which reads as "no crossing".
    disc = b * b - a * c
    root = np.full(a.shape, np.inf)
    sq = np.sqrt(np.maximum(disc, 0.0))
    ok = disc > 0
    # b < 0: the smaller positive root is c / (-b + sqrt(disc)) whatever the sign of a.
    neg = ok & (b < 0)
    root = np.where(neg, c / np.where(neg, sq - b, 1.0), root)
    # b >= 0 only crosses when the parabola opens downwards.
    down = ok & (b >= 0) & (a < 0)
    root = np.where(down, (b + sq) / np.where(down, -a, 1.0), root)
    return np.where((root > 0) & (root <= t_max), root, np.inf)


def first_crossing_time(serving: DroneState, other: DroneState, t_max: float):
    """First time in ``(0, t_max]`` at which ``other`` is strictly closer to the origin.

    Returns ``None`` when no crossing happens.  ``other`` must start strictly
    farther away than ``serving``.
    """
    p_s = np.array([serving.initial_position.x, serving.initial_position.y])
    p_o = np.array([other.initial_position.x, other.initial_position.y])
    a, b, c = _crossing_coefficients(p_o, np.array(other.velocity), other.speed,
                                     p_s, np.array(serving.velocity), serving.speed)
    if not c > 0:
        raise ValueError("competitor must start strictly farther than the serving drone")
    root = float(_first_root(a, b, c, t_max))
    return None if math.isinf(root) else root


# ---------------------------------------------------------------------------
# Realizations
# ---------------------------------------------------------------------------


@dataclass
class Realization:
    """One sampled field of drones.

    Stored column-wise: ``positions`` is ``(n, 2)`` and ``directions`` and
    ``speeds`` are length ``n``.
    """

    positions: np.ndarray
    directions: np.ndarray
    speeds: np.ndarray
    window_radius: float
    serving_index: int = field(init=False)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.directions = np.asarray(self.directions, dtype=float)
        self.speeds = np.asarray(self.speeds, dtype=float)
        if len(self.positions) == 0:
            raise ValueError("a realization needs at least one drone")
        # argmin keeps the lowest index on ties.
        self.serving_index = int(np.argmin(np.einsum("ij,ij->i", self.positions, self.positions)))

    def __len__(self):
        return len(self.positions)

    @property
    def velocities(self) -> np.ndarray:
        return self.speeds[:, None] * np.column_stack([np.cos(self.directions), np.sin(self.directions)])

    @property
    def drones(self) -> list[DroneState]:
        return [
            DroneState(PlanarPoint(*p), float(th), float(v))
            for p, th, v in zip(self.positions, self.directions, self.speeds)
        ]

    def positions_at(self, t: float) -> np.ndarray:
        return self.positions + self.velocities * t


def sample_realization(cfg: SimConfig, rng: np.random.Generator, radius: float | None = None) -> Realization:
    """Draw a non-empty field of drones in the disc of the configured window radius."""
    radius = window_radius(cfg) if radius is None else radius
    mean = cfg.lambda0 * math.pi * radius * radius
    n = 0
    while n == 0:
        n = rng.poisson(mean)
    r = radius * np.sqrt(rng.random(n))
    phi = rng.uniform(0.0, TWO_PI, n)
    directions = rng.uniform(0.0, TWO_PI, n)
    speeds = cfg.speed.sample(rng, n)
    return Realization(np.column_stack([r * np.cos(phi), r * np.sin(phi)]), directions, speeds, radius)


def first_handover_time(r: Realization, t_max: float):
    """Time of the first change of nearest drone, or ``None`` if none by ``t_max``."""
    s = r.serving_index
    others = np.arange(len(r)) != s
    if not others.any():
        return None
    w = r.velocities
    a, b, c = _crossing_coefficients(r.positions[others], w[others], r.speeds[others],
                                     r.positions[s], w[s], r.speeds[s])
    # Equidistant competitors (c == 0) never become strictly closer first.
    times = np.where(c > 0, _first_root(a, b, np.where(c > 0, c, 1.0), t_max), np.inf)
    tau = float(times.min())
    return None if math.isinf(tau) else tau


# ---------------------------------------------------------------------------
# Vectorised engine
# ---------------------------------------------------------------------------


def _segment_first_argmin(values, starts, counts):
    # Index (into values) of the first minimum of each contiguous segment.
    mins = np.minimum.reduceat(values, starts)
    seg = np.repeat(np.arange(len(starts)), counts)
    hits = np.flatnonzero(values == mins[seg])
    _, first = np.unique(seg[hits], return_index=True)
    return hits[first]


def _simulate_block(args):
    cfg, block, n_trials, mode, radius = args
    stream = STREAM_MOVING_UE if mode == "moving_ue" else STREAM_AERIAL
    rng = block_rng(cfg.master_seed, stream, block)
    mean = cfg.lambda0 * math.pi * radius * radius
    counts = rng.poisson(mean, n_trials)
    empty = 0
    while True:
        zero = counts == 0
        if not zero.any():
            break
        empty += int(zero.sum())
        counts[zero] = rng.poisson(mean, int(zero.sum()))

    total = int(counts.sum())
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    trial = np.repeat(np.arange(n_trials), counts)
    r = radius * np.sqrt(rng.random(total))
    phi = rng.uniform(0.0, TWO_PI, total)
    pos = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    if mode == "moving_ue":
        # A user moving with velocity u sees every station move with -u.
        heading = rng.uniform(0.0, TWO_PI, n_trials)
        directions = np.mod(heading + math.pi, TWO_PI)[trial]
        speeds = np.full(total, cfg.speed.atom)
    else:
        directions = rng.uniform(0.0, TWO_PI, total)
        speeds = cfg.speed.sample(rng, total)
    vel = speeds[:, None] * np.column_stack([np.cos(directions), np.sin(directions)])

    dist2 = np.einsum("ij,ij->i", pos, pos)
    serving = _segment_first_argmin(dist2, starts, counts)
    s_of = serving[trial]
    a, b, c = _crossing_coefficients(pos, vel, speeds, pos[s_of], vel[s_of], speeds[s_of])
    competitor = (np.arange(total) != s_of) & (c > 0)
    times = np.full(total, np.inf)
    times[competitor] = _first_root(a[competitor], b[competitor], c[competitor], cfg.t_max)
    return np.minimum.reduceat(times, starts), empty


def _run_blocks(cfg: SimConfig, n_trials: int, mode: str, radius: float):
    n_blocks = -(-n_trials // cfg.block_size)
    jobs = [
        (cfg, k, min(cfg.block_size, n_trials - k * cfg.block_size), mode, radius)
        for k in range(n_blocks)
    ]
    if cfg.workers == 1 or n_blocks == 1:
        results = [_simulate_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_simulate_block, jobs, chunksize=max(1, n_blocks // (4 * cfg.workers))))
    times = np.concatenate([r[0] for r in results])
    empty = sum(r[1] for r in results)
    if empty > MAX_EMPTY_FRACTION * n_trials:
        raise WindowTooSmallError(
            f"{empty} empty fields in {n_trials} trials (window radius {radius:.1f} m)"
        )
    return times, empty


def simulate_first_handover_times(cfg: SimConfig, n_trials: int, mode: str = "aerial") -> np.ndarray:
    """First-handover time of every trial (``inf`` when none occurs by ``t_max``).

    ``mode="aerial"`` moves every drone independently; ``mode="moving_ue"``
    keeps the field static and moves the user instead (degenerate speeds only).
    """
    if mode not in ("aerial", "moving_ue"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "moving_ue" and not cfg.speed.is_degenerate:
        raise ValueError("the moving-user model needs a degenerate speed law")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    times, _ = _run_blocks(cfg, n_trials, mode, window_radius(cfg))
    return times


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


def binomial_interval(k, n, z):
    """Normal-approximation interval, switching to Wilson when a count is small."""
    k = np.asarray(k, dtype=float)
    p = k / n
    half = z * np.sqrt(p * (1 - p) / n)
    low, high = p - half, p + half
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    w_half = z / (1 + z * z / n) * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    wilson = np.minimum(k, n - k) < 5
    low = np.where(wilson, centre - w_half, low)
    high = np.where(wilson, centre + w_half, high)
    return np.clip(low, 0.0, 1.0), np.clip(high, 0.0, 1.0)


@dataclass
class HandoverCurve:
    """Empirical cdf of the first-handover time on a time grid."""

    t_grid: np.ndarray
    estimates: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    n_trials: int
    z: float = 3.0
    metadata: dict = field(default_factory=dict)

    @property
    def ci_half_widths(self) -> np.ndarray:
        return np.maximum(self.estimates - self.ci_low, self.ci_high - self.estimates)

    @property
    def standard_errors(self) -> np.ndarray:
        p = self.estimates
        return np.sqrt(p * (1 - p) / self.n_trials)


def _curve_from_times(times, t_grid, cfg: SimConfig, meta) -> HandoverCurve:
    n = len(times)
    ordered = np.sort(times)
    k = np.searchsorted(ordered, t_grid, side="right")
    low, high = binomial_interval(k, n, cfg.z)
    return HandoverCurve(np.asarray(t_grid, float), k / n, low, high, n, cfg.z, meta)


def _check_grid(cfg, t_grid):
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(t_grid) < 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be ascending and non-negative")
    if t_grid[-1] > cfg.t_max:
        raise ValueError(f"t_grid extends past t_max={cfg.t_max}")
    return t_grid


def _estimate(cfg, t_grid, n_trials, mode):
    t_grid = _check_grid(cfg, t_grid)
    radius = window_radius(cfg)
    times, empty = _run_blocks(cfg, n_trials, mode, radius)
    q = cfg.window_margin_quantile
    meta = {
        "mode": mode,
        "window_radius_m": radius,
        "empty_fields_resampled": empty,
        # Drones faster than the margin quantile can enter from outside the window.
        "speed_tail_mass_ignored": 0.0 if cfg.speed.variant == "uniform_mean" or cfg.speed.is_degenerate else 1 - q,
    }
    return _curve_from_times(times, t_grid, cfg, meta)


def estimate_handover_curve(cfg: SimConfig, t_grid, n_trials: int) -> HandoverCurve:
    """Handover probability curve for independently moving drones."""
    return _estimate(cfg, t_grid, n_trials, "aerial")


def estimate_handover_curve_moving_ue(cfg: SimConfig, t_grid, n_trials: int) -> HandoverCurve:
    """Handover probability curve for a static field and a user moving at the drone speed."""
    if not cfg.speed.is_degenerate:
        raise ValueError("the moving-user model needs a degenerate speed law")
    return _estimate(cfg, t_grid, n_trials, "moving_ue")


# ---------------------------------------------------------------------------
# Non-serving density
# ---------------------------------------------------------------------------


@dataclass
class DensityProfile:
    """Radial density histogram of the non-serving drones."""

    bin_centers: np.ndarray
    densities: np.ndarray
    standard_errors: np.ndarray
    n_realizations: int
    t: float
    u_star: float
    metadata: dict = field(default_factory=dict)


def _density_block(args):
    cfg, block, n, t, u_star, bin_width, n_bins, radius = args
    rng = block_rng(cfg.master_seed, STREAM_DENSITY, block)
    mean = cfg.lambda0 * math.pi * (radius * radius - u_star * u_star)
    counts = rng.poisson(mean, n)
    total = int(counts.sum())
    trial = np.repeat(np.arange(n), counts)
    # Non-serving drones start outside the exclusion disc b(o', u_star).
    r = np.sqrt(u_star * u_star + rng.random(total) * (radius * radius - u_star * u_star))
    phi = rng.uniform(0.0, TWO_PI, total)
    step = cfg.speed.sample(rng, total) * t
    heading = rng.uniform(0.0, TWO_PI, total)
    x = r * np.cos(phi) + step * np.cos(heading)
    y = r * np.sin(phi) + step * np.sin(heading)
    bins = np.floor(np.hypot(x, y) / bin_width).astype(np.int64)
    keep = bins < n_bins
    per = np.bincount(trial[keep] * n_bins + bins[keep], minlength=n * n_bins).reshape(n, n_bins)
    return per.sum(axis=0).astype(float), (per.astype(float) ** 2).sum(axis=0)


def estimate_nonserving_density(cfg: SimConfig, t: float, u_star: float, n_realizations: int,
                                bin_width: float, r_max: float) -> DensityProfile:
    """Histogram estimate of the density of non-serving drones around the user.

    The serving drone is fixed at distance ``u_star``; its own motion does
    not affect the non-serving process.  Non-serving drones start as a PPP on
    the annulus from ``u_star`` out to ``r_max`` plus the margin-quantile
    displacement, are each displaced by ``speed * t`` in a uniform direction,
    and their final distances are binned on ``[0, r_max)``.
    """
    if not t > 0 or not u_star > 0 or not bin_width > 0:
        raise ValueError("need t > 0, u_star > 0 and bin_width > 0")
    n_bins = int(round(r_max / bin_width))
    radius = max(r_max, u_star) + cfg.speed.upper_quantile(cfg.window_margin_quantile) * t
    n_blocks = -(-n_realizations // cfg.block_size)
    jobs = [
        (cfg, k, min(cfg.block_size, n_realizations - k * cfg.block_size), t, u_star, bin_width, n_bins, radius)
        for k in range(n_blocks)
    ]
    if cfg.workers == 1 or n_blocks == 1:
        results = [_density_block(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_density_block, jobs))
    s1 = np.sum([r[0] for r in results], axis=0)
    s2 = np.sum([r[1] for r in results], axis=0)
    n = n_realizations
    mean = s1 / n
    var = np.maximum(s2 - n * mean * mean, 0.0) / max(n - 1, 1)
    centers = (np.arange(n_bins) + 0.5) * bin_width
    area = 2 * math.pi * centers * bin_width
    return DensityProfile(
        centers, mean / area, np.sqrt(var / n) / area, n, t, u_star,
        {"window_radius_m": radius},
    )
