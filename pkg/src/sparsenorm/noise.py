"""Estimators of the noise level sigma^2 from normalized observations Y_i / sigma_i.

``sigma_sq_S`` inverts the chi-square(1) CDF at a threshold chosen on the
dyadic grid {2^l}; ``sigma_sq_D`` inverts the Gaussian characteristic
function at a frequency tied to that same threshold; ``sigma_sq_eta`` is a
deliberately conservative median-based scale used by the eta-variants of the
adaptive norm estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .special import chi1_quantile

__all__ = [
    "DegenerateSampleError",
    "NormalizedSample",
    "NoiseEstimate",
    "empirical_cdf_sq",
    "median_order_statistic",
    "dyadic_threshold",
    "sigma_sq_S_at",
    "sigma_sq_S",
    "cosine_moment",
    "sigma_tilde_sq_D",
    "sigma_sq_D",
    "sigma_sq_eta",
    "rate_psi_tilde",
]

DEFAULT_LEVEL = 0.5


class DegenerateSampleError(ValueError):
    """The empirical median of the squared observations is zero."""


@dataclass(frozen=True, eq=False)
class NormalizedSample:
    y_tilde: np.ndarray
    y_tilde_sq_sorted: np.ndarray

    @property
    def d(self) -> int:
        return int(self.y_tilde.size)

    @classmethod
    def from_normalized(cls, y_tilde) -> "NormalizedSample":
        yt = np.array(y_tilde, dtype=float).reshape(-1)
        if yt.size == 0:
            raise ValueError("empty sample")
        if not np.all(np.isfinite(yt)):
            raise ValueError("sample contains non-finite values")
        return cls(yt, np.sort(yt * yt))

    @classmethod
    def from_observation(cls, y, diag=1.0) -> "NormalizedSample":
        """Normalize ``y`` by the noise standard deviations sqrt(diag).

        Every variance must be strictly positive.
        """
        y = np.asarray(y, dtype=float).reshape(-1)
        diag = np.broadcast_to(np.asarray(diag, dtype=float), y.shape)
        if np.any(diag <= 0):
            raise ValueError("normalization needs every sigma_i^2 > 0")
        return cls.from_normalized(y / np.sqrt(diag))


@dataclass(frozen=True)
class NoiseEstimate:
    """A sigma^2 estimate with the quantities that produced it.

    ``value`` is ``inf`` when the estimator hits its undefined case.
    """

    value: float
    method: Literal["S", "D", "eta"]
    t_hat: float | None = None
    f_hat_at_t: float | None = None
    extra: dict | None = None

    @property
    def sentinel(self) -> bool:
        return math.isinf(self.value)

    def as_dict(self) -> dict:
        out = {"value": self.value, "method": self.method, "t_hat": self.t_hat,
               "f_hat_at_t": self.f_hat_at_t, "sentinel": self.sentinel}
        if self.extra:
            out.update(self.extra)
        return out


def empirical_cdf_sq(sample: NormalizedSample, t: float) -> float:
    """Fraction of squared observations that are <= t."""
    count = int(np.searchsorted(sample.y_tilde_sq_sorted, t, side="right"))
    return count / sample.d


def median_order_statistic(sample: NormalizedSample, level: float = DEFAULT_LEVEL) -> float:
    """Smallest t with F_hat(t) >= level: the ceil(level*d)-th smallest square."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    k = max(1, math.ceil(level * sample.d))
    return float(sample.y_tilde_sq_sorted[k - 1])


def dyadic_threshold(sample: NormalizedSample, level: float = DEFAULT_LEVEL) -> float:
    """Smallest power of two t with F_hat(t) >= level."""
    m = median_order_statistic(sample, level)
    if m <= 0.0:
        raise DegenerateSampleError("degenerate sample: empirical median of the squares is zero")
    mant, exp = math.frexp(m)  # m = mant * 2**exp, 0.5 <= mant < 1
    if mant == 0.5:
        return m
    return math.ldexp(1.0, exp)


def sigma_sq_S_at(sample: NormalizedSample, t: float) -> NoiseEstimate:
    """t / F^{-1}(F_hat(t)) for a fixed threshold t > 0.

    Returns ``inf`` when no square is below ``t`` and 0 when all are (the
    limit F^{-1}(1) = inf).
    """
    if not t > 0:
        raise ValueError(f"threshold must be positive, got {t}")
    p = empirical_cdf_sq(sample, t)
    if p == 0.0:
        value = math.inf
    elif p == 1.0:
        value = 0.0
    else:
        value = t / chi1_quantile(p)
    return NoiseEstimate(value, "S", t_hat=t, f_hat_at_t=p)


def sigma_sq_S(sample: NormalizedSample, level: float = DEFAULT_LEVEL) -> NoiseEstimate:
    """Robust sigma^2 estimate at the dyadic threshold."""
    return sigma_sq_S_at(sample, dyadic_threshold(sample, level))


def cosine_moment(sample: NormalizedSample, u: float) -> float:
    """Empirical characteristic function (real part) of the normalized sample at u."""
    if not (u > 0 and math.isfinite(u)):
        raise ValueError(f"frequency must be positive and finite, got {u}")
    return math.fsum(np.cos(u * sample.y_tilde)) / sample.d


def sigma_tilde_sq_D(t_hat: float, lam: float, phi_hat: float) -> float:
    """-(2 t_hat / lam) * log|phi_hat|, with phi_hat = 0 mapped to +inf."""
    a = abs(phi_hat)
    if a == 0.0:
        return math.inf
    # + 0.0 turns the -0.0 produced at |phi_hat| = 1 into +0.0
    return -(2.0 * t_hat / lam) * math.log(a) + 0.0


def sigma_sq_D(sample: NormalizedSample, s: int, frob_corr: float,
               level: float = DEFAULT_LEVEL) -> NoiseEstimate:
    """Characteristic-function sigma^2 estimate, capped at twice :func:`sigma_sq_S`.

    ``frob_corr`` is the Frobenius norm of the correlation matrix; under
    bounded, non-vanishing variances ||Sigma||_F may be passed instead.
    """
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    if not frob_corr > 0:
        raise ValueError(f"frob_corr must be positive, got {frob_corr}")
    est_s = sigma_sq_S(sample, level)
    t_hat = est_s.t_hat
    lam = max(1.0, math.log(s / frob_corr)) / 6.0
    u = math.sqrt(lam / t_hat)
    phi_hat = cosine_moment(sample, u)
    tilde = sigma_tilde_sq_D(t_hat, lam, phi_hat)
    value = min(tilde, 2.0 * est_s.value)
    return NoiseEstimate(value, "D", t_hat=t_hat, f_hat_at_t=est_s.f_hat_at_t,
                         extra={"lambda": lam, "u": u, "phi_hat": phi_hat,
                                "sigma_tilde_sq_D": tilde, "sigma_sq_S": est_s.value})


def sigma_sq_eta(sample: NormalizedSample, eta: float, level: float = DEFAULT_LEVEL) -> NoiseEstimate:
    """Empirical median of the squares divided by the (1 - eta/20) chi-square(1) quantile."""
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0, 1), got {eta}")
    m = median_order_statistic(sample, level)
    q = chi1_quantile(1.0 - eta / 20.0)
    return NoiseEstimate(m / q, "eta", f_hat_at_t=empirical_cdf_sq(sample, m),
                         extra={"median": m, "quantile": q, "eta": eta})


def rate_psi_tilde(s: int, d: int, frob_corr: float) -> float:
    """Minimax rate for the relative error of a sigma^2 estimate."""
    if s < 1 or d < 1:
        raise ValueError("rate_psi_tilde needs s >= 1 and d >= 1")
    if not frob_corr > 0:
        raise ValueError("rate_psi_tilde needs frob_corr > 0")
    if s <= frob_corr:
        return frob_corr / d
    return s / (d * max(1.0, math.log(s / frob_corr)))
