"""Numerical evaluation of the closed-form handover expressions.

Lengths are rescaled by ``sqrt(lambda0)`` before integrating, so every
integral below runs on a unit-density process and the answers depend on
speed and time only through the dimensionless displacement
``d = v t sqrt(lambda0)``.  Handover probabilities are integrated in the
complementary form ``E[1 - exp(-X)]`` (via ``expm1``) rather than as
``1 - E[exp(-X)]``, which keeps relative accuracy when the probability is
small.

The angle of motion only enters through ``cos(theta)``, so every
``(1/2pi) * integral over [0, 2pi)`` is evaluated as ``(1/pi) * integral
over [0, pi]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import lens_area
from .quadrature import QuadratureSpec, cosine_substitution, integrate, integrate_piecewise
from .speed_models import SpeedDistribution

__all__ = [
    "AnalyticInputs",
    "initial_nonserving_density",
    "nonserving_density",
    "lambda1_density",
    "nonserving_mass",
    "handover_prob_ssm_thm2",
    "handover_prob_ssm_cor1",
    "handover_prob_dsm_lower_bound",
    "handover_curve",
]

PI = math.pi


@dataclass(frozen=True)
class AnalyticInputs:
    """Density ``lambda0`` (1/m^2), time ``t`` (s) and speed law of the drones."""

    lambda0: float
    t: float
    speed: SpeedDistribution
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise ValueError(f"lambda0 must be > 0, got {self.lambda0}")
        if not self.t >= 0:
            raise ValueError(f"t must be >= 0, got {self.t}")


def _scalar(out):
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def _truncation_radius(quad: QuadratureSpec) -> float:
    # Unit-density nearest-neighbour tail: exp(-pi r^2) = epsilon.
    return math.sqrt(-math.log(quad.tail_mass_epsilon) / PI)


def _clipped_acos(x):
    return np.arccos(np.clip(x, -1.0, 1.0))


# ---------------------------------------------------------------------------
# Densities of the non-serving drones
# ---------------------------------------------------------------------------


def initial_nonserving_density(u_x, u_star, lambda0):
    """Density of non-serving drones at ``t = 0``: zero inside ``b(o', u_star)``."""
    u_x = np.asarray(u_x, dtype=float)
    return _scalar(np.where(u_x > u_star, lambda0, 0.0))


def _excluded_fraction(t, u_x, u_star, speed: SpeedDistribution, quad: QuadratureSpec):
    """Fraction of ``lambda0`` at distance ``u_x`` made of drones that started inside the exclusion zone."""
    if not t > 0:
        raise ValueError(f"density at time t requires t > 0, got {t}; use initial_nonserving_density")
    u_x, u_star = np.broadcast_arrays(np.asarray(u_x, dtype=float), np.asarray(u_star, dtype=float))
    shape = u_x.shape
    u_x = u_x.ravel()
    u_star = u_star.ravel()
    if np.any(u_x < 0) or np.any(u_star < 0):
        raise ValueError("distances must be >= 0")

    if speed.is_degenerate:
        d = speed.atom * t
        inside = d <= u_star - u_x
        crossing = (np.abs(u_star - u_x) < d) & (d < u_star + u_x)
        ux = np.where(crossing, u_x, 1.0)
        arc = _clipped_acos((d * d + ux * ux - u_star * u_star) / (2 * d * ux if d > 0 else 1.0)) / PI
        frac = np.where(inside, 1.0, np.where(crossing, arc, 0.0))
        return frac.reshape(shape)

    frac = speed.cdf((u_star - u_x) / t)
    s_lo, s_hi = speed.support(quad.tail_mass_epsilon)
    lo = np.maximum(np.abs(u_star - u_x) / t, s_lo)
    hi = np.minimum((u_star + u_x) / t, s_hi)
    hi = np.where(u_x > 0, hi, lo)  # empty range at u_x = 0 (continuity value)

    def integrand(s, idx):
        v, jac = cosine_substitution(s, lo[idx, None], hi[idx, None])
        ux = u_x[idx, None]
        us = u_star[idx, None]
        arg = (v * v * t * t + ux * ux - us * us) / (2 * v * t * ux)
        return speed.pdf(v) * _clipped_acos(arg) * jac

    val, _ = integrate(integrand, 0.0, np.where(hi > lo, PI, 0.0), quad.rel_tol, quad.abs_tol,
                       quad.max_subdivisions)
    return (frac + val / PI).reshape(shape)


def nonserving_density(t, u_x, u_star, inputs: AnalyticInputs):
    """Density (1/m^2) of non-serving drones at distance ``u_x`` from the user at time ``t``.

    Conditioned on the serving drone having started at distance ``u_star``.
    Vectorised over ``u_x`` and ``u_star``.
    """
    frac = _excluded_fraction(t, u_x, u_star, inputs.speed, inputs.quad)
    return _scalar(inputs.lambda0 * (1.0 - frac))


def lambda1_density(t, u_x, u_star, inputs: AnalyticInputs):
    """Density contributed by drones that started inside the exclusion zone.

    Complements :func:`nonserving_density`: the two always sum to ``lambda0``.
    """
    frac = _excluded_fraction(t, u_x, u_star, inputs.speed, inputs.quad)
    return _scalar(inputs.lambda0 * frac)


def _expected_lens(radius, u_star, t_scaled, speed, quad):
    # E over the speed law of |b(o', radius) & b(V t e, u_star)| (unit density lengths).
    radius, u_star = np.broadcast_arrays(np.asarray(radius, float), np.asarray(u_star, float))
    shape = radius.shape
    radius = radius.ravel()
    u_star = u_star.ravel()
    gap = np.abs(radius - u_star)
    small = np.minimum(radius, u_star)
    if speed.is_degenerate:
        return lens_area(radius, u_star, speed.atom * t_scaled).reshape(shape)

    s_lo, s_hi = speed.support(quad.tail_mass_epsilon)
    lo = np.maximum(gap / t_scaled, s_lo)
    hi = np.minimum((radius + u_star) / t_scaled, s_hi)

    def integrand(s, idx):
        v, jac = cosine_substitution(s, lo[idx, None], hi[idx, None])
        return speed.pdf(v) * lens_area(radius[idx, None], u_star[idx, None], v * t_scaled) * jac

    val, _ = integrate(integrand, 0.0, np.where(hi > lo, PI, 0.0), quad.rel_tol, quad.abs_tol,
                       quad.max_subdivisions)
    contained = PI * small * small * speed.cdf(gap / t_scaled)
    return (contained + val).reshape(shape)


def nonserving_mass(t, radius, u_star, inputs: AnalyticInputs, method="lens"):
    """Expected number of non-serving drones inside ``b(o', radius)`` at time ``t``.

    This is the radial integral of :func:`nonserving_density` times ``2 pi u``.
    ``method="density"`` integrates that density directly; ``method="lens"``
    uses the equivalent expected-overlap form ``lambda0 (pi radius^2 -
    E[lens(radius, u_star, V t)])``, which avoids one level of nesting.
    """
    radius, u_star = np.broadcast_arrays(np.asarray(radius, float), np.asarray(u_star, float))
    lam = inputs.lambda0
    if method == "lens":
        s = math.sqrt(lam)
        excl = _expected_lens(radius * s, u_star * s, inputs.t * s, inputs.speed, inputs.quad)
        return _scalar(PI * lam * radius * radius - excl)
    if method != "density":
        raise ValueError(f"unknown method {method!r}")
    rad = radius.ravel()
    us = u_star.ravel()
    inner = inputs.quad.inner()

    def integrand(s, idx):
        ux, jac = cosine_substitution(s, 0.0, rad[idx, None])
        frac = _excluded_fraction(inputs.t, ux, us[idx, None], inputs.speed, inner)
        return 2 * PI * ux * lam * (1.0 - frac) * jac

    val, _ = integrate(integrand, 0.0, np.where(rad > 0, PI, 0.0), inputs.quad.rel_tol,
                       inputs.quad.abs_tol, inputs.quad.max_subdivisions)
    return _scalar(val.reshape(radius.shape))


# ---------------------------------------------------------------------------
# Handover probabilities
# ---------------------------------------------------------------------------


def _clip_prob(val, err, return_error):
    p = float(min(max(val.sum(), 0.0), 1.0))
    return (p, float(err.sum())) if return_error else p


def _nn_weight(r):
    # Unit-density nearest-neighbour distance pdf.
    return 2 * PI * r * np.exp(-PI * r * r)


def _displaced_radius(r, d, theta):
    return np.sqrt(np.maximum(r * r + d * d - 2 * r * d * np.cos(theta), 0.0))


def _uncovered_area(r, d, theta):
    # |b(x2, R) \ b(x1, r)| for a UE moving a distance d at angle theta.
    R = _displaced_radius(r, d, theta)
    R2 = R * R
    r2 = r * r
    phi1 = _clipped_acos((d * d + r2 - R2) / (2 * d * r))
    safe_R = np.where(R > 0, R, 1.0)
    phi2 = np.where(R > 0, _clipped_acos((d * d + R2 - r2) / (2 * d * safe_R)), 0.5 * PI)
    return R2 * (PI - phi2 + 0.5 * np.sin(2 * phi2)) - r2 * (phi1 - 0.5 * np.sin(2 * phi1))


def handover_prob_ssm_thm2(lambda0, v, t, quad: QuadratureSpec | None = None, return_error=False):
    """Exact same-speed handover probability from the uncovered-lens form.

    Integrates ``1 - exp(-lambda0 |C2 \\ C1|)`` against the nearest-neighbour
    distance law and a uniform direction of motion.  With ``return_error``
    the outer quadrature error estimate is returned as a second value.
    """
    quad = quad or QuadratureSpec()
    if not lambda0 > 0 or v < 0 or t < 0:
        raise ValueError("need lambda0 > 0, v >= 0, t >= 0")
    d = v * t * math.sqrt(lambda0)
    if d == 0:
        return (0.0, 0.0) if return_error else 0.0
    r_max = _truncation_radius(quad)
    split = min(d, r_max)
    inner = quad.inner()

    def over_r(x, idx):
        r = x.ravel()

        def over_theta(theta, j):
            rr = r[j, None]
            return -np.expm1(-_uncovered_area(rr, d, theta))

        val, _ = integrate(over_theta, 0.0, np.full(r.size, PI), inner.rel_tol, inner.abs_tol,
                           inner.max_subdivisions)
        return (_nn_weight(r) * val / PI).reshape(x.shape)

    val, err = integrate(over_r, [0.0, split], [split, r_max], quad.rel_tol, quad.abs_tol,
                         quad.max_subdivisions)
    return _clip_prob(val, err, return_error)


def _q_area(u, d, quad):
    """The ``Q`` integral of the exclusion-zone form, batched over ``(u, theta)`` rows."""

    def build(theta):
        R = _displaced_radius(u, d, theta)
        lo = np.broadcast_to(np.abs(d - u), R.shape)
        hi = np.maximum(R, lo)
        lo_f = lo.ravel()
        hi_f = hi.ravel()
        u_f = np.broadcast_to(u, R.shape).ravel()

        def integrand(s, idx):
            x, jac = cosine_substitution(s, lo_f[idx, None], hi_f[idx, None])
            uu = u_f[idx, None]
            safe_x = np.where(x > 0, x, 1.0)
            arg = (uu * uu - x * x - d * d) / (2 * safe_x * d)
            return 2 * x * _clipped_acos(arg) * jac

        val, _ = integrate(integrand, 0.0, np.where(hi_f > lo_f, PI, 0.0), quad.rel_tol,
                           quad.abs_tol, quad.max_subdivisions)
        return val.reshape(R.shape)

    return build


def handover_prob_ssm_cor1(lambda0, v, t, quad: QuadratureSpec | None = None, return_error=False):
    """Same-speed handover probability from the moving-drone (exclusion zone) form.

    Splits the serving distance at ``v t`` and integrates the inner ``Q``
    area numerically.  Agrees with :func:`handover_prob_ssm_thm2`;
    ``return_error`` works the same way.
    """
    quad = quad or QuadratureSpec()
    if not lambda0 > 0 or v < 0 or t < 0:
        raise ValueError("need lambda0 > 0, v >= 0, t >= 0")
    d = v * t * math.sqrt(lambda0)
    if d == 0:
        return (0.0, 0.0) if return_error else 0.0
    r_max = _truncation_radius(quad)
    split = min(d, r_max)
    mid = quad.inner()
    deep = mid.inner()

    def over_u(x, idx):
        u = x.ravel()
        beyond = np.repeat(idx, x.shape[1]) == 0  # serving distance above v t

        def over_theta(theta, j):
            uu = u[j, None]
            q = _q_area(uu, d, deep)(theta)
            extra = np.where(beyond[j, None], 0.0, PI * (d - uu) ** 2)
            return -np.expm1(-(extra + q))

        val, _ = integrate(over_theta, 0.0, np.full(u.size, PI), mid.rel_tol, mid.abs_tol,
                           mid.max_subdivisions)
        return (_nn_weight(u) * val / PI).reshape(x.shape)

    val, err = integrate(over_u, [split, 0.0], [r_max, split], quad.rel_tol, quad.abs_tol,
                         quad.max_subdivisions)
    return _clip_prob(val, err, return_error)


def handover_prob_dsm_lower_bound(inputs: AnalyticInputs) -> float:
    """Lower bound on the handover probability when drone speeds differ.

    The bound is ``E[1 - exp(-N(C2))]`` where ``N(C2)`` is the expected
    number of non-serving drones inside the disc whose radius is the serving
    drone's distance at time ``t``.  For a degenerate speed law the bound is
    exact and the exclusion-zone form is returned unchanged.
    """
    speed = inputs.speed
    if speed.is_degenerate:
        return handover_prob_ssm_cor1(inputs.lambda0, speed.atom, inputs.t, inputs.quad)
    if inputs.t == 0:
        return 0.0
    quad = inputs.quad
    s = math.sqrt(inputs.lambda0)
    t_scaled = inputs.t * s
    r_max = _truncation_radius(quad)
    v_lo, v_hi = speed.support(quad.tail_mass_epsilon)
    # Every nested level shares the inner budget rel_tol/10.
    l2 = l3 = l4 = quad.inner()

    # Speeds where the expected-overlap integrand changes form; kinks in R,
    # u and theta follow from these (only matters for bounded supports).
    bounded = speed.variant == "uniform_mean"
    edge_disp = np.array([v_lo, v_hi] if bounded else [v_lo]) * t_scaled

    def over_v(xv, iv):
        v = xv.ravel()
        d = v * t_scaled
        e = edge_disp[None, :]
        dd = d[:, None]
        u_kinks = np.concatenate(
            [dd, 0.5 * dd, 0.5 * (e - dd), 0.5 * (e + dd), 0.5 * (dd - e)], axis=1
        )

        def over_u(xu, iu):
            u = xu.ravel()
            du = np.repeat(d[iu], xu.shape[1])
            uc = u[:, None]
            # Displaced radii at which the overlap expectation has a kink, mapped to angles.
            r_kinks = np.concatenate([uc, e - uc, uc + e, uc - e], axis=1)
            dc = du[:, None]
            cos_k = (uc * uc + dc * dc - r_kinks ** 2) / np.maximum(2 * uc * dc, 1e-300)
            th_kinks = np.where(np.abs(cos_k) < 1, np.arccos(np.clip(cos_k, -1, 1)), np.nan)

            def over_theta(theta, j):
                uu = u[j, None]
                R = _displaced_radius(uu, du[j, None], theta)
                excl = _expected_lens(R, np.broadcast_to(uu, R.shape), t_scaled, speed, l4)
                mass = PI * R * R - excl
                return -np.expm1(-np.maximum(mass, 0.0))

            val, _ = integrate_piecewise(over_theta, np.zeros(u.size), np.full(u.size, PI),
                                         th_kinks, l3.rel_tol, l3.abs_tol, l3.max_subdivisions)
            return (_nn_weight(u) * val / PI).reshape(xu.shape)

        val, _ = integrate_piecewise(over_u, np.zeros(v.size), np.full(v.size, r_max), u_kinks,
                                     l2.rel_tol, l2.abs_tol, l2.max_subdivisions)
        return (speed.pdf(v) * val).reshape(xv.shape)

    val, _ = integrate(over_v, v_lo, v_hi, quad.rel_tol, quad.abs_tol, quad.max_subdivisions)
    return float(min(max(val.sum(), 0.0), 1.0))


def handover_curve(lambda0, speed: SpeedDistribution, t_grid, quad: QuadratureSpec | None = None,
                   exact_ssm=True) -> np.ndarray:
    """Evaluate the analytic handover probability on a grid of times.

    Degenerate speed laws use the exact same-speed result (the lens form when
    ``exact_ssm`` is true, the exclusion-zone form otherwise); other laws use the
    lower bound.
    """
    quad = quad or QuadratureSpec()
    out = []
    for t in np.asarray(t_grid, dtype=float):
        if speed.is_degenerate and exact_ssm:
            out.append(handover_prob_ssm_thm2(lambda0, speed.atom, t, quad))
        else:
            out.append(handover_prob_dsm_lower_bound(AnalyticInputs(lambda0, float(t), speed, quad)))
    return np.array(out)
