"""Test of H0: theta = 0 against s-sparse alternatives, and its Monte Carlo risk.

The test rejects when the known-sigma norm estimator (built with the
Frobenius bound rho) exceeds ``gamma * sigma * sqrt(phi(s, rho^2))``.

The risk of a test is a supremum over infinite classes of covariance
matrices and signals.  :func:`estimate_risk` can only take maxima over the
finite families it is handed, so every reported risk is a lower estimate of
the true supremum ("max over tested family").
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

from .known_sigma import estimate_norm_known_rho, rate_phi
from .models import CovarianceModel, SignalSpec, make_signal, sample_noise
from .parallel import chunked, pmap

logger = logging.getLogger(__name__)

__all__ = [
    "TestOutcome",
    "RiskEstimate",
    "SweepRow",
    "run_test",
    "separation_radius",
    "estimate_risk",
    "radius_sweep",
    "calibrate_gamma",
]

_CHUNK = 64


@dataclass(frozen=True)
class TestOutcome:
    reject: bool
    statistic: float
    threshold: float

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class RiskEstimate:
    """Monte Carlo estimate of type I + type II error.

    ``type1`` and ``type2`` are maxima over the tested null models and
    alternative instances; ``std_err`` holds the binomial standard errors of
    the two maximizing configurations.
    """

    type1: float
    type2: float
    replications: int
    std_err: tuple[float, float]
    vacuous_type2: bool = False
    type1_by_model: tuple[float, ...] = field(default=(), repr=False)
    type2_by_instance: tuple[float, ...] = field(default=(), repr=False)
    scope: str = "max over tested family"

    @property
    def total(self) -> float:
        return self.type1 + self.type2


@dataclass(frozen=True)
class SweepRow:
    radius: float
    gamma: float
    risk: RiskEstimate


def separation_radius(gamma: float, sigma: float, s: int, rho: float) -> float:
    """2 * gamma * sigma * sqrt(phi(s, rho^2))."""
    if not (gamma > 0 and sigma > 0 and rho > 0):
        raise ValueError("separation_radius needs positive gamma, sigma and rho")
    return 2.0 * gamma * sigma * math.sqrt(rate_phi(s, rho * rho))


def run_test(y, diag, sigma: float, s: int, rho: float, gamma: float) -> TestOutcome:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    stat = estimate_norm_known_rho(y, diag, sigma, s, rho)
    thr = gamma * sigma * math.sqrt(rate_phi(s, rho * rho))
    return TestOutcome(stat > thr, stat, thr)


def _rejections(model: CovarianceModel, signal: SignalSpec | None, sigma, s, rho, gamma,
                seed: int, reps: range) -> int:
    count = 0
    for r in reps:
        y = sigma * sample_noise(model, (seed, r))
        if signal is not None:
            y[signal.support] += signal.values
        count += run_test(y, model.diag, sigma, s, rho, gamma).reject
    return count


def _rejection_rate(model, signal, sigma, s, rho, gamma, replications, seed, threads) -> float:
    parts = pmap(lambda reps: _rejections(model, signal, sigma, s, rho, gamma, seed, reps),
                 chunked(replications, _CHUNK), threads)
    return sum(parts) / replications


def _binom_se(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)


def estimate_risk(null_models: Sequence[CovarianceModel],
                  alt_instances: Sequence[tuple[SignalSpec, CovarianceModel]],
                  sigma: float, s: int, rho: float, gamma: float, replications: int,
                  seed: int, *, radius: float | None = None,
                  threads: int | None = None) -> RiskEstimate:
    """Estimate the sum of the worst type I and worst type II error over finite families.

    Every alternative must have ``||Sigma||_F <= rho`` and, when ``radius`` is
    given, ``||theta||_2 >= radius``.  Null models outside the Frobenius
    bound are evaluated but logged, since they sit outside the null class.
    All configurations reuse the same replicate seeds.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    tol = 1e-12 * rho
    for sig, model in alt_instances:
        if model.frobenius > rho + tol:
            raise ValueError(f"alternative covariance {model.family} has ||Sigma||_F="
                             f"{model.frobenius:.6g} > rho={rho:.6g}")
        if radius is not None and sig.norm2 < radius * (1.0 - 1e-12):
            raise ValueError(f"alternative has ||theta||_2={sig.norm2:.6g} below radius {radius:.6g}")
        if sig.sparsity > s:
            raise ValueError(f"alternative has {sig.sparsity} nonzeros, more than s={s}")
    for model in null_models:
        if model.frobenius > rho + tol:
            logger.warning("null model %s has ||Sigma||_F=%.6g > rho=%.6g (outside the null class)",
                           model.family, model.frobenius, rho)

    type1 = tuple(_rejection_rate(m, None, sigma, s, rho, gamma, replications, seed, threads)
                  for m in null_models)
    type2 = tuple(1.0 - _rejection_rate(m, sig, sigma, s, rho, gamma, replications, seed, threads)
                  for sig, m in alt_instances)
    t1 = max(type1, default=0.0)
    t2 = max(type2, default=0.0)
    return RiskEstimate(t1, t2, replications, (_binom_se(t1, replications), _binom_se(t2, replications)),
                        vacuous_type2=not alt_instances, type1_by_model=type1,
                        type2_by_instance=type2)


def _alternatives(models, d, s, radius, shape, seed):
    sig = make_signal(d, s, shape, radius, (seed, 0))
    return [(sig, m) for m in models]


def radius_sweep(models: Sequence[CovarianceModel], sigma: float, s: int, rho: float,
                 replications: int, seed: int, *, gamma: float | None = None,
                 radius_grid: Sequence[float] | None = None,
                 gamma_grid: Sequence[float] | None = None, shape: str = "flat",
                 threads: int | None = None) -> list[SweepRow]:
    """Risk of the test along a grid of separation radii.

    Either fix ``gamma`` and vary ``radius_grid``, or give ``gamma_grid`` and
    test each gamma at its own radius ``2 gamma sigma sqrt(phi(s, rho^2))``.
    Alternatives are flat (or ``shape``) signals on every model whose
    Frobenius norm is within ``rho``; all models serve as nulls.
    """
    if not models:
        raise ValueError("radius_sweep needs at least one covariance model")
    d = models[0].dim
    if gamma_grid is not None:
        points = [(separation_radius(g, sigma, s, rho), g) for g in gamma_grid]
    elif radius_grid is not None and gamma is not None:
        points = [(float(r), gamma) for r in radius_grid]
    else:
        raise ValueError("give either gamma_grid, or gamma together with radius_grid")
    if not points:
        raise ValueError("empty grid")
    alt_models = [m for m in models if m.frobenius <= rho * (1 + 1e-12)]
    rows = []
    for radius, g in points:
        alts = _alternatives(alt_models, d, s, radius, shape, seed) if radius > 0 else []
        risk = estimate_risk(models, alts, sigma, s, rho, g, replications, seed, threads=threads)
        rows.append(SweepRow(radius, g, risk))
    return rows


def _sq_errors(model, signal, sigma, s, rho, seed, reps):
    target = signal.norm2
    out = []
    for r in reps:
        y = sigma * sample_noise(model, (seed, r))
        y[signal.support] += signal.values
        out.append((estimate_norm_known_rho(y, model.diag, sigma, s, rho) - target) ** 2)
    return out


def calibrate_gamma(models: Sequence[CovarianceModel], sigma: float, s: int, rho: float,
                    replications: int, seed: int, *, level: float = 0.05,
                    norm_scales: Sequence[float] = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0),
                    shape: str = "flat", threads: int | None = None) -> tuple[float, float]:
    """Choose gamma through the Chebyshev bound ``risk <= C* / gamma^2``.

    ``C*`` is measured as twice the largest scaled mean squared error
    ``E[(N - ||theta||)^2] / (sigma^2 phi(s, rho^2))`` over the given models
    (those within the Frobenius bound) and signals of norm
    ``scale * sigma * sqrt(phi(s, rho^2))``.  Returns ``(gamma, C*)`` with
    ``gamma = sqrt(C* / level)``.
    """
    phi = rate_phi(s, rho * rho)
    d = models[0].dim
    worst = 0.0
    for model in models:
        if model.frobenius > rho * (1 + 1e-12):
            continue
        for scale in norm_scales:
            sig = make_signal(d, s, shape, scale * sigma * math.sqrt(phi), (seed, 0))
            parts = pmap(lambda reps: _sq_errors(model, sig, sigma, s, rho, seed, reps),
                         chunked(replications, _CHUNK), threads)
            mse = math.fsum(x for part in parts for x in part) / replications
            worst = max(worst, mse / (sigma * sigma * phi))
    c_star = 2.0 * worst
    if c_star == 0.0:
        raise ValueError("measured C* is zero; widen norm_scales")
    return math.sqrt(c_star / level), c_star
