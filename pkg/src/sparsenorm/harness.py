"""Replicated risk estimation over experiment grids, with CSV/JSON/SVG output.

Every cell of the grid reuses the same noise draws: replicate ``r`` of every
cell is keyed by ``(seed, r)``, and the signal by ``(seed, 0)`` on its own
stream.  Squared errors are reduced with :func:`math.fsum` in replicate
order, so results do not depend on the thread count.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

from .adaptive import (AdaptiveConfig, estimate_norm_star, estimate_norm_star_eta,
                       estimate_norm_star_eta_rho, estimate_norm_star_rho,
                       estimate_norm_star_star)
from .config import ESTIMATORS, ExperimentConfig
from .known_sigma import estimate_norm_known, estimate_norm_known_rho, rate_phi, rate_phi_star
from .models import CovarianceModel, make_signal, parse_family, sample_noise
from .parallel import chunked, pmap
from .svgplot import Series, loglog_svg

__all__ = ["RiskSummary", "CSV_COLUMNS", "cell_rate", "make_estimator", "run_experiment",
           "summaries_to_csv", "summaries_to_json", "RateCurveRow", "rate_curve",
           "rate_curve_svg"]

CSV_COLUMNS = ("experiment_id", "estimator", "d", "s", "sigma", "family", "family_params",
               "norm2_target", "replications", "mean_sq_err", "scaled_risk", "rate_name",
               "rate_value", "std_err", "seed")

_CHUNK = 32


@dataclass(frozen=True)
class RiskSummary:
    """Monte Carlo estimate of E[(T - ||theta||_2)^2] for one grid cell."""

    experiment_id: str
    estimator: str
    d: int
    s: int
    sigma: float
    family: str
    family_params: str
    norm2_target: float
    replications: int
    mean_sq_err: float
    scaled_risk: float
    rate_name: str
    rate_value: float
    std_err: float
    seed: int
    shape: str = "flat"


def _rho_for(config: ExperimentConfig, model: CovarianceModel) -> float:
    if config.rho is not None:
        return float(config.rho)
    if config.rho_over_frob is not None:
        return config.rho_over_frob * model.frobenius
    return model.frobenius


def cell_rate(estimator: str, s: int, model: CovarianceModel, rho: float | None = None) -> tuple[str, float]:
    """Name and value of the rate that normalizes ``estimator``'s risk."""
    name = ESTIMATORS[estimator]
    frob2 = model.frobenius * model.frobenius
    if name == "psi":
        return name, rate_phi(s, frob2)
    if name == "psi_star":
        return name, rate_phi_star(s, frob2)
    if rho is None:
        raise ValueError(f"{estimator} needs a Frobenius bound rho")
    if name == "phi_rho":
        return name, rate_phi(s, rho * rho)
    return name, rate_phi_star(s, rho * rho)


def make_estimator(estimator: str, model: CovarianceModel, sigma: float, s: int, *,
                   eta: float | None = None, rho: float | None = None) -> Callable:
    """``y -> estimate of ||theta||_2`` for one named estimator and cell.

    The adaptive estimators receive ``sigma`` only through the data.
    """
    diag, frob = model.diag, model.frobenius
    if estimator == "n-hat":
        return lambda y: estimate_norm_known(y, diag, sigma, s, frob)
    if estimator == "n-tilde":
        return lambda y: estimate_norm_known_rho(y, diag, sigma, s, rho)
    cfg = AdaptiveConfig(s, diag, frob, model.frobenius_corr, eta)
    table = {
        "n-star": lambda y: estimate_norm_star(y, cfg),
        "n-star-eta": lambda y: estimate_norm_star_eta(y, cfg),
        "n-star-star": lambda y: estimate_norm_star_star(y, cfg),
        "n-star-rho": lambda y: estimate_norm_star_rho(y, cfg, rho),
        "n-star-eta-rho": lambda y: estimate_norm_star_eta_rho(y, cfg, rho),
    }
    if estimator not in table:
        raise ValueError(f"unknown estimator {estimator!r}")
    if estimator in ("n-star-eta", "n-star-star", "n-star-eta-rho") and eta is None:
        raise ValueError(f"{estimator} needs eta")
    return table[estimator]


def _sq_errors(fn, model, signal, sigma, seed, reps):
    target = signal.norm2
    out = []
    for r in reps:
        y = sigma * sample_noise(model, (seed, r))
        y[signal.support] += signal.values
        out.append((fn(y) - target) ** 2)
    return out


def _cells(config: ExperimentConfig):
    targets = config.norm2 if config.norm2_scale is None else config.norm2_scale
    return itertools.product(config.family, config.d, config.s, config.sigma, config.shape, targets)


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> list[RiskSummary]:
    """One :class:`RiskSummary` per grid cell, in grid order.

    Grid order is family, d, s, sigma, shape, norm target (last varies
    fastest).  With ``grid.norm2_scale`` the target is
    ``scale * sigma * sqrt(rate)``.
    """
    config.validate()
    out = []
    models: dict[tuple[str, int], CovarianceModel] = {}
    for family, d, s, sigma, shape, target in _cells(config):
        if s > d:
            raise ValueError(f"s={s} exceeds d={d}")
        key = (family, d)
        if key not in models:
            models[key] = parse_family(family, d)
        model = models[key]
        rho = _rho_for(config, model)
        rate_name, rate = cell_rate(config.estimator, s, model, rho)
        norm2 = target * sigma * math.sqrt(rate) if config.norm2_scale is not None else target
        signal = make_signal(d, s, shape, norm2, (config.seed, 0))
        fn = make_estimator(config.estimator, model, sigma, s, eta=config.eta, rho=rho)
        n = config.replications
        parts = pmap(lambda reps: _sq_errors(fn, model, signal, sigma, config.seed, reps),
                     chunked(n, _CHUNK), threads)
        errs = [e for part in parts for e in part]
        mse = math.fsum(errs) / n
        se = math.sqrt(math.fsum((e - mse) ** 2 for e in errs) / (n - 1) / n) if n > 1 else 0.0
        out.append(RiskSummary(config.experiment_id, config.estimator, d, s, float(sigma), family,
                               model.params_label, float(norm2), n, mse, mse / (sigma * sigma * rate),
                               rate_name, rate, se, config.seed, shape))
    return out


def _csv_value(v):
    return repr(v) if isinstance(v, float) else str(v)


def summaries_to_csv(summaries: list[RiskSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in summaries:
        writer.writerow([_csv_value(getattr(row, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def summaries_to_json(summaries: list, config: ExperimentConfig, extra: dict | None = None) -> str:
    """Records (dataclasses) plus the resolved configuration, as JSON text."""
    doc = {"config": config.echo(), "results": [asdict(r) for r in summaries]}
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"


@dataclass(frozen=True)
class RateCurveRow:
    """Worst case over the norm grid at one (family, d, sigma, s)."""

    family: str
    d: int
    sigma: float
    s: int
    rate_name: str
    rate_value: float
    worst_mean_sq_err: float
    worst_scaled_risk: float


def rate_curve(config: ExperimentConfig, threads: int | None = None) -> tuple[list[RateCurveRow], list[RiskSummary]]:
    """Run the grid and reduce each (family, d, sigma, s) to its worst norm target."""
    summaries = run_experiment(config, threads)
    rows: dict[tuple, RateCurveRow] = {}
    for r in summaries:
        key = (r.family, r.d, r.sigma, r.s)
        cur = rows.get(key)
        if cur is None or r.scaled_risk > cur.worst_scaled_risk:
            rows[key] = RateCurveRow(r.family, r.d, r.sigma, r.s, r.rate_name, r.rate_value,
                                     r.mean_sq_err, r.scaled_risk)
    return list(rows.values()), summaries


def rate_curve_svg(rows: list[RateCurveRow], title: str = "worst-case risk vs s") -> str:
    """Log-log plot of the empirical worst-case MSE and sigma^2 * rate against s."""
    series = []
    groups: dict[tuple, list[RateCurveRow]] = {}
    for row in rows:
        groups.setdefault((row.family, row.d, row.sigma), []).append(row)
    for i, ((family, d, sigma), grp) in enumerate(groups.items()):
        grp = sorted(grp, key=lambda r: r.s)
        label = f"{family} d={d} sigma={sigma:g}"
        series.append(Series(f"{label} theory", [r.s for r in grp],
                             [sigma * sigma * r.rate_value for r in grp], i, line=True))
        pts = [(r.s, r.worst_mean_sq_err) for r in grp if r.worst_mean_sq_err > 0]
        series.append(Series(f"{label} empirical", [p[0] for p in pts], [p[1] for p in pts], i,
                             line=False))
    return loglog_svg(series, title=title, xlabel="s", ylabel="E[(T - ||theta||)^2]")
