"""Handover probability of a static user served by moving drone base stations.

Drones form a homogeneous Poisson field in a plane above the user and fly
straight lines at constant speed; the user is served by the nearest one.
The package provides closed-form integrals for the probability that the
serving drone changes within ``t`` seconds, a Monte Carlo engine that
simulates the same process, and the tooling to compare them.
"""

__version__ = "0.1.0"

from .speed_models import SpeedDistribution, degenerate, rayleigh_mean, uniform_mean  # noqa: E402
from .quadrature import QuadratureSpec  # noqa: E402
from .analytic import (  # noqa: E402
    AnalyticInputs,
    handover_curve,
    handover_prob_dsm_lower_bound,
    handover_prob_ssm_cor1,
    handover_prob_ssm_thm2,
    lambda1_density,
    nonserving_density,
    nonserving_mass,
)
from .montecarlo import (  # noqa: E402
    SimConfig,
    estimate_handover_curve,
    estimate_handover_curve_moving_ue,
    estimate_nonserving_density,
    first_crossing_time,
)

__all__ = [
    "__version__",
    "SpeedDistribution",
    "degenerate",
    "rayleigh_mean",
    "uniform_mean",
    "QuadratureSpec",
    "AnalyticInputs",
    "handover_curve",
    "handover_prob_dsm_lower_bound",
    "handover_prob_ssm_cor1",
    "handover_prob_ssm_thm2",
    "lambda1_density",
    "nonserving_density",
    "nonserving_mass",
    "SimConfig",
    "estimate_handover_curve",
    "estimate_handover_curve_moving_ue",
    "estimate_nonserving_density",
    "first_crossing_time",
]
