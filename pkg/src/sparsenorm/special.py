"""Scalar special functions used by the estimators.

Gaussian and chi-square(1) distribution functions, their inverses, and the
truncated second moments of a standard normal variable

    alpha(tau) = E[Z^2 1{|Z| >= tau}],   beta(tau) = E[Z^2 | |Z| >= tau].

All functions are pure and accept Python floats.  Domain violations raise
:class:`DomainError`; nothing here returns NaN for an in-domain argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate, special

__all__ = [
    "DomainError",
    "TruncatedMoments",
    "std_normal_pdf",
    "std_normal_cdf",
    "std_normal_quantile",
    "chi1_cdf",
    "chi1_quantile",
    "truncated_moments",
    "quadrature_oracle_truncated_second_moment",
]

_SQRT_2 = math.sqrt(2.0)
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def std_normal_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def std_normal_cdf(x: float) -> float:
    """Standard Gaussian CDF, accurate in both tails."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"std_normal_cdf needs a finite argument, got {x!r}")
    if x < -30.0:
        # ndtr flushes subnormal results to zero; exp(log_ndtr) keeps them
        return math.exp(float(special.log_ndtr(x)))
    return float(special.ndtr(x))


def std_normal_quantile(p: float) -> float:
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1)."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"std_normal_quantile needs p in (0, 1), got {p!r}")
    x = float(special.ndtri(p))
    # One Newton step on the CDF; ndtri is already close to full precision.
    dens = std_normal_pdf(x)
    if dens > 0.0:
        x -= (std_normal_cdf(x) - p) / dens
    return x


def chi1_cdf(x: float) -> float:
    """CDF of the chi-square law with one degree of freedom, 2*Phi(sqrt(x)) - 1."""
    x = float(x)
    if not x >= 0.0:
        raise DomainError(f"chi1_cdf needs x >= 0, got {x!r}")
    # erf(sqrt(x/2)) equals 2*Phi(sqrt(x)) - 1 without the cancellation near 0.
    return float(special.erf(math.sqrt(0.5 * x)))


def chi1_quantile(p: float) -> float:
    """Inverse of :func:`chi1_cdf` on [0, 1).

    The lower half uses ``erfinv`` and the upper half ``erfcinv`` of the
    exact complement, so neither end loses relative accuracy.
    """
    p = float(p)
    if not 0.0 <= p < 1.0:
        raise DomainError(f"chi1_quantile needs p in [0, 1), got {p!r}")
    if p == 0.0:
        return 0.0
    if p < 0.5:
        z = float(special.erfinv(p))
    else:
        z = float(special.erfcinv(1.0 - p))
    return 2.0 * z * z


@dataclass(frozen=True)
class TruncatedMoments:
    """Second moments of a standard normal variable truncated at ``|Z| >= tau``.

    ``alpha`` is the unconditional truncated moment and ``beta`` the
    conditional one; ``beta = alpha / P(|Z| >= tau)``.  For ``tau`` beyond
    roughly 38 ``alpha`` underflows to zero while ``beta`` stays finite.
    """

    tau: float
    alpha: float
    beta: float

    @property
    def tail_probability(self) -> float:
        """P(|Z| >= tau)."""
        return float(special.erfc(self.tau / _SQRT_2))


def truncated_moments(tau: float) -> TruncatedMoments:
    tau = float(tau)
    if not (tau >= 0.0 and math.isfinite(tau)):
        raise DomainError(f"truncated_moments needs finite tau >= 0, got {tau!r}")
    # upper tail 1 - Phi(tau) = erfc(tau/sqrt2)/2
    upper = 0.5 * float(special.erfc(tau / _SQRT_2))
    alpha = 2.0 * (tau * std_normal_pdf(tau) + upper)
    # pdf/upper-tail ratio through the scaled erfc: finite for every tau
    mills_inv = _SQRT_2_OVER_PI / float(special.erfcx(tau / _SQRT_2))
    beta = 1.0 + tau * mills_inv
    return TruncatedMoments(tau=tau, alpha=alpha, beta=beta)


def quadrature_oracle_truncated_second_moment(tau: float) -> float:
    """2 * int_tau^inf x^2 phi(x) dx by adaptive quadrature.

    Independent of :func:`truncated_moments`; meant for tests.
    """
    tau = float(tau)
    if not 0.0 <= tau <= 40.0:
        raise DomainError(f"quadrature oracle supports tau in [0, 40], got {tau!r}")

    def integrand(x: float) -> float:
        return x * x * _INV_SQRT_2PI * math.exp(-0.5 * x * x)

    # Split at tau + 10: beyond that the integrand is below 1e-20 relative.
    value, _ = integrate.quad(integrand, tau, tau + 10.0, epsabs=1e-13, epsrel=1e-13, limit=200)
    tail, _ = integrate.quad(integrand, tau + 10.0, math.inf, epsabs=1e-15, limit=200)
    return max(0.0, 2.0 * (value + tail))
