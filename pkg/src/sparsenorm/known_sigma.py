"""Estimators of Q(theta) = ||theta||_2^2 and ||theta||_2 when sigma is known.

Sums are taken with :func:`math.fsum`, which is correctly rounded and so
independent of summation order: permuting coordinates leaves every
estimator bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import truncated_moments

__all__ = [
    "RateInputs",
    "rate_phi",
    "rate_phi_star",
    "rate_psi",
    "rate_psi_bar",
    "threshold_tau",
    "estimate_Q_known",
    "estimate_norm_known",
    "estimate_norm_known_rho",
]


@dataclass(frozen=True)
class RateInputs:
    s: int
    d: int
    frob: float
    frob_corr: float | None = None
    lambda_max: float | None = None

    def __post_init__(self):
        if self.s < 1:
            raise ValueError(f"sparsity must be >= 1, got {self.s}")
        if not self.frob > 0:
            raise ValueError(f"Frobenius norm (or bound) must be positive, got {self.frob}")

    @classmethod
    def from_model(cls, s: int, model) -> "RateInputs":
        return cls(s, model.dim, model.frobenius, model.frobenius_corr, model.lambda_max)


def _check_rate_args(s, t):
    if s < 1:
        raise ValueError(f"rate needs s >= 1, got {s}")
    if not t > 0:
        raise ValueError(f"rate needs t > 0, got {t}")


def rate_phi(s: float, t: float) -> float:
    """s*log(1 + t/s^2) if s <= sqrt(t), else sqrt(t)."""
    _check_rate_args(s, t)
    root = math.sqrt(t)
    if s <= root:
        return s * math.log1p(t / (s * s))
    return root


def rate_phi_star(s: float, t: float) -> float:
    """Unknown-noise analogue of :func:`rate_phi`: s / max(1, log(s/sqrt(t))) past the elbow."""
    _check_rate_args(s, t)
    root = math.sqrt(t)
    if s <= root:
        return s * math.log1p(t / (s * s))
    return s / max(1.0, math.log(s / root))


def rate_psi(inputs: RateInputs) -> float:
    return rate_phi(inputs.s, inputs.frob ** 2)


def rate_psi_bar(inputs: RateInputs) -> float:
    if inputs.lambda_max is None:
        raise ValueError("rate_psi_bar needs lambda_max")
    return min(inputs.lambda_max, inputs.s)


def threshold_tau(s: float, frob: float) -> float:
    """tau = 3 * sqrt(log(1 + frob^2 / s^2))."""
    return 3.0 * math.sqrt(math.log1p(frob * frob / (s * s)))


def _validate(y, diag, sigma, s, frob):
    y = np.asarray(y, dtype=float)
    diag = np.broadcast_to(np.asarray(diag, dtype=float), y.shape)
    if y.ndim != 1:
        raise ValueError("y must be a vector")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    if not frob > 0:
        raise ValueError(f"frob must be positive, got {frob}")
    if np.any(diag < 0):
        raise ValueError("diag entries (variances) must be nonnegative")
    return y, diag


def _q_sparse(y, diag, sigma, tau, beta):
    # (Y_i^2 - sigma^2 sigma_i^2 beta) 1{|Y_i| > sigma sigma_i tau}
    keep = np.abs(y) > (sigma * np.sqrt(diag)) * tau
    yk = y[keep]
    return math.fsum(yk * yk - ((sigma * sigma) * diag[keep]) * beta)


def _q_dense(y, diag, sigma2):
    return math.fsum(y * y - sigma2 * diag)


def estimate_Q_known(y, diag, sigma: float, s: int, frob: float, *, full_output: bool = False):
    """Thresholded estimator of ||theta||_2^2 with known noise level.

    Parameters
    ----------
    y : array_like, shape (d,)
    diag : array_like or float
        Variances sigma_i^2 of the noise coordinates.
    sigma : float
        Noise level.
    s : int
        Declared sparsity bound.
    frob : float
        ||Sigma||_F, or an upper bound on it.
    full_output : bool
        Also return a dict with the branch and the constants used.

    Notes
    -----
    In the sparse regime ``s <= frob`` coordinates with ``|y_i| > sigma
    sigma_i tau`` contribute ``y_i^2 - sigma^2 sigma_i^2 beta_s``.  The
    comparison is strict, so a coordinate with ``sigma_i = 0`` is kept
    exactly when ``y_i != 0``.  Otherwise all coordinates contribute
    ``y_i^2 - sigma^2 sigma_i^2``.
    """
    y, diag = _validate(y, diag, sigma, s, frob)
    if s <= frob:
        tau = threshold_tau(s, frob)
        beta = truncated_moments(tau).beta
        value = _q_sparse(y, diag, sigma, tau, beta)
        info = {"branch": "sparse", "tau": tau, "beta": beta}
    else:
        value = _q_dense(y, diag, sigma * sigma)
        info = {"branch": "dense"}
    if full_output:
        return value, info
    return value


def estimate_norm_known(y, diag, sigma: float, s: int, frob: float, *, full_output: bool = False):
    """sqrt(|Q_hat|), the known-sigma estimator of ||theta||_2."""
    q, info = estimate_Q_known(y, diag, sigma, s, frob, full_output=True)
    value = math.sqrt(abs(q))
    if full_output:
        return value, dict(info, q=q)
    return value


def estimate_norm_known_rho(y, diag, sigma: float, s: int, rho: float, *, full_output: bool = False):
    """Same as :func:`estimate_norm_known` with the Frobenius norm replaced by a bound rho."""
    return estimate_norm_known(y, diag, sigma, s, rho, full_output=full_output)
