"""Estimators of ||theta||_2 that do not know the noise level sigma.

The noise level is estimated from the same observation vector (no sample
splitting): the sparse regime ``s <= frob`` plugs in ``sigma_sq_S``, the
dense regime plugs in ``sigma_sq_D``.  Because the noise threshold lives on
the dyadic grid, scaling the data by ``2**(k/2)`` scales ``Q`` by ``2**k``
with no approximation beyond floating-point rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .known_sigma import rate_phi_star, threshold_tau
from .noise import NormalizedSample, sigma_sq_D, sigma_sq_eta, sigma_sq_S
from .special import chi1_quantile, truncated_moments

__all__ = [
    "AdaptiveConfig",
    "SentinelNoiseError",
    "tau_eta",
    "estimate_Q_star",
    "estimate_norm_star",
    "estimate_Q_star_eta",
    "estimate_norm_star_eta",
    "estimate_norm_star_star",
    "estimate_norm_star_rho",
    "estimate_norm_star_eta_rho",
    "rate_psi_star",
]


class SentinelNoiseError(ValueError):
    """The sparse-regime noise estimate came back infinite."""


@dataclass(frozen=True, eq=False)
class AdaptiveConfig:
    """Inputs shared by the unknown-sigma estimators.

    ``frob`` is ||Sigma||_F or an upper bound rho on it.  ``frob_corr``
    (||Sigma~||_F, used only in the dense regime) defaults to ``frob``, which
    is the intended choice when the variances are bounded above and below.
    """

    s: int
    diag: np.ndarray
    frob: float
    frob_corr: float | None = None
    eta: float | None = None

    def __post_init__(self):
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if not self.frob > 0:
            raise ValueError(f"frob must be positive, got {self.frob}")
        if self.eta is not None and not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must be in (0, 1), got {self.eta}")
        object.__setattr__(self, "diag", np.asarray(self.diag, dtype=float))

    @property
    def sparse(self) -> bool:
        return self.s <= self.frob

    @property
    def corr_norm(self) -> float:
        return self.frob if self.frob_corr is None else self.frob_corr

    def with_bound(self, rho: float) -> "AdaptiveConfig":
        return AdaptiveConfig(self.s, self.diag, rho, self.frob_corr, self.eta)


def _prepare(y, config: AdaptiveConfig):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("y must be a vector")
    diag = np.broadcast_to(config.diag, y.shape)
    return y, diag, NormalizedSample.from_observation(y, diag)


def _q_star_sparse_formula(y, diag, sigma2, scale, tau, alpha):
    # sum Y_i^2 1{|Y_i| > scale sigma_i tau} - sigma2 alpha sum sigma_i^2
    keep = np.abs(y) > (scale * np.sqrt(diag)) * tau
    yk = y[keep]
    return math.fsum(yk * yk) - (sigma2 * alpha) * math.fsum(diag)


def _q_star_dense_formula(y, diag, sigma2):
    return math.fsum(y * y - sigma2 * diag)


def tau_eta(s: float, frob: float, eta: float) -> float:
    """3 * sqrt((q_{1-eta/20} / q_{eta/20}) * log(1 + frob^2/s^2))."""
    ratio = chi1_quantile(1.0 - eta / 20.0) / chi1_quantile(eta / 20.0)
    return 3.0 * math.sqrt(ratio * math.log1p(frob * frob / (s * s)))


def estimate_Q_star(y, config: AdaptiveConfig, *, full_output: bool = False):
    """Estimate ||theta||_2^2 with the noise level estimated from ``y``.

    Raises
    ------
    DegenerateSampleError
        If the empirical median of the normalized squares is zero.
    SentinelNoiseError
        If the sparse-regime noise estimate is infinite.
    """
    y, diag, sample = _prepare(y, config)
    if config.sparse:
        est = sigma_sq_S(sample)
        if est.sentinel:
            raise SentinelNoiseError("noise estimate is +inf; Q* is undefined")
        sigma2 = est.value
        tau = threshold_tau(config.s, config.frob)
        alpha = truncated_moments(tau).alpha
        value = _q_star_sparse_formula(y, diag, sigma2, math.sqrt(sigma2), tau, alpha)
        info = {"branch": "sparse", "sigma_sq": sigma2, "sigma_method": "S", "t_hat": est.t_hat,
                "tau": tau, "alpha": alpha}
    else:
        est = sigma_sq_D(sample, config.s, config.corr_norm)
        sigma2 = est.value
        value = _q_star_dense_formula(y, diag, sigma2)
        info = {"branch": "dense", "sigma_sq": sigma2, "sigma_method": "D", "t_hat": est.t_hat,
                "lambda": est.extra["lambda"]}
    if full_output:
        return value, info
    return value


def estimate_norm_star(y, config: AdaptiveConfig, *, full_output: bool = False):
    q, info = estimate_Q_star(y, config, full_output=True)
    value = math.sqrt(abs(q))
    return (value, dict(info, q=q)) if full_output else value


def estimate_Q_star_eta(y, config: AdaptiveConfig, *, full_output: bool = False):
    """Sparse-regime estimate of ||theta||_2^2 with an inflated, eta-dependent threshold.

    The threshold scale is the larger of the two noise estimates
    ``sigma_sq_S`` and ``sigma_sq_eta``.  Only defined for ``s <= frob``.
    """
    if config.eta is None:
        raise ValueError("the eta-variant needs config.eta")
    if not config.sparse:
        raise ValueError(f"Q*_eta is only defined for s <= frob (s={config.s}, frob={config.frob})")
    y, diag, sample = _prepare(y, config)
    est_s = sigma_sq_S(sample)
    if est_s.sentinel:
        raise SentinelNoiseError("noise estimate is +inf; Q*_eta is undefined")
    est_eta = sigma_sq_eta(sample, config.eta)
    scale = max(math.sqrt(est_s.value), math.sqrt(est_eta.value))
    t_eta = tau_eta(config.s, config.frob, config.eta)
    alpha = truncated_moments(t_eta).alpha
    value = _q_star_sparse_formula(y, diag, est_s.value, scale, t_eta, alpha)
    if full_output:
        return value, {"branch": "sparse", "sigma_sq": est_s.value, "sigma_sq_eta": est_eta.value,
                       "t_hat": est_s.t_hat, "tau": t_eta, "alpha": alpha, "eta": config.eta}
    return value


def estimate_norm_star_eta(y, config: AdaptiveConfig, *, full_output: bool = False):
    q, info = estimate_Q_star_eta(y, config, full_output=True)
    value = math.sqrt(abs(q))
    return (value, dict(info, q=q)) if full_output else value


def estimate_norm_star_star(y, config: AdaptiveConfig, *, full_output: bool = False):
    """N* in the dense regime (s > frob), N*_eta otherwise (equality included)."""
    if config.s > config.frob:
        value, info = estimate_norm_star(y, config, full_output=True)
        info["selected"] = "star"
    else:
        value, info = estimate_norm_star_eta(y, config, full_output=True)
        info["selected"] = "star-eta"
    return (value, info) if full_output else value


def estimate_norm_star_rho(y, config: AdaptiveConfig, rho: float, *, full_output: bool = False):
    """N* with the Frobenius norm replaced by the bound ``rho``."""
    return estimate_norm_star(y, config.with_bound(rho), full_output=full_output)


def estimate_norm_star_eta_rho(y, config: AdaptiveConfig, rho: float, *, full_output: bool = False):
    return estimate_norm_star_eta(y, config.with_bound(rho), full_output=full_output)


def rate_psi_star(s: int, frob: float) -> float:
    return rate_phi_star(s, frob * frob)
