"""Estimation of the l2 norm of a sparse vector observed in correlated Gaussian noise."""

__version__ = "0.1.0"

from .adaptive import (AdaptiveConfig, estimate_norm_star, estimate_norm_star_eta,
                       estimate_norm_star_eta_rho, estimate_norm_star_rho, estimate_norm_star_star,
                       estimate_Q_star, estimate_Q_star_eta)
from .detection import estimate_risk, radius_sweep, run_test, separation_radius
from .known_sigma import (estimate_norm_known, estimate_norm_known_rho, estimate_Q_known, rate_phi,
                          rate_phi_star)
from .models import CovarianceModel, make_covariance, make_signal, observe, parse_family
from .noise import NormalizedSample, sigma_sq_D, sigma_sq_eta, sigma_sq_S
from .special import chi1_cdf, chi1_quantile, truncated_moments

__all__ = [
    "AdaptiveConfig", "CovarianceModel", "NormalizedSample",
    "chi1_cdf", "chi1_quantile", "truncated_moments",
    "make_covariance", "make_signal", "observe", "parse_family",
    "rate_phi", "rate_phi_star",
    "estimate_Q_known", "estimate_norm_known", "estimate_norm_known_rho",
    "sigma_sq_S", "sigma_sq_D", "sigma_sq_eta",
    "estimate_Q_star", "estimate_Q_star_eta", "estimate_norm_star", "estimate_norm_star_eta",
    "estimate_norm_star_star", "estimate_norm_star_rho", "estimate_norm_star_eta_rho",
    "run_test", "separation_radius", "estimate_risk", "radius_sweep",
]
