"""Monte Carlo checks of covariance identities and variance bounds for Gaussian vectors.

Pairwise items use two standard normals ``zeta`` and ``eta`` with
correlation ``nu``; vector items use ``eps ~ N(0, Sigma)`` at ``d = 50``.
Equalities pass within 4 standard errors; one-sided bounds pass when the
empirical absolute covariance (or variance) is at most ``SLACK`` times the
envelope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .models import CovarianceModel, make_covariance, rng_for
from .parallel import chunked, pmap
from .special import truncated_moments

__all__ = ["Check", "IdentityRow", "SLACK", "default_families", "lemma_square", "lemma_truncated",
           "lemma_cdf", "lemma_cosine", "prop_square", "prop_truncated", "prop_cdf",
           "prop_cosine", "verify_identities"]

SLACK = 100.0
N_SE = 4.0
TAUS = (1.0, 2.0, 3.0)
NUS_BOUND = (0.3, 0.7)
_CHUNK = 20_000


@dataclass(frozen=True)
class Check:
    """One Monte Carlo comparison.

    ``kind`` is ``"equal"`` (``|estimate - target| <= 4 std_err``),
    ``"relative"`` (``|estimate/target - 1| <= tol``) or ``"bound"``
    (``|estimate| <= SLACK * target``).
    """

    setting: str
    kind: str
    estimate: float
    std_err: float
    target: float
    tol: float = 0.0

    @property
    def passed(self) -> bool:
        if self.kind == "equal":
            return abs(self.estimate - self.target) <= N_SE * self.std_err
        if self.kind == "relative":
            return abs(self.estimate / self.target - 1.0) <= self.tol
        return abs(self.estimate) <= SLACK * self.target


@dataclass(frozen=True)
class IdentityRow:
    label: str
    statement: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def worst(self) -> Check:
        """The check closest to failing."""
        def margin(c):
            if c.kind == "equal":
                return abs(c.estimate - c.target) / (N_SE * c.std_err) if c.std_err > 0 else math.inf
            if c.kind == "relative":
                return abs(c.estimate / c.target - 1.0) / c.tol
            return abs(c.estimate) / (SLACK * c.target) if c.target > 0 else math.inf
        return max(self.checks, key=margin)


def _cov_stats(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    prod = (a - a.mean()) * (b - b.mean())
    return float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(a.size))


def _var_stats(x: np.ndarray) -> tuple[float, float]:
    sq = (x - x.mean()) ** 2
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(x.size))


def _pairs(seed: int, n: int, nu: float, stream: int) -> tuple[np.ndarray, np.ndarray]:
    rng = rng_for((seed, 0), stream)
    zeta = rng.standard_normal(n)
    z = rng.standard_normal(n)
    return zeta, nu * zeta + math.sqrt(1.0 - nu * nu) * z


# ----------------------------------------------------------------------------- pairwise items

def lemma_square(seed: int, n: int) -> IdentityRow:
    checks = []
    for k, nu in enumerate((0.0, 0.3, 0.7, 1.0)):
        zeta, eta = _pairs(seed, n, nu, 100 + k)
        est, se = _cov_stats(zeta ** 2, eta ** 2)
        checks.append(Check(f"nu={nu}", "equal", est, se, 2.0 * nu * nu))
    return IdentityRow("pair-square", "Cov[zeta^2, eta^2] = 2 nu^2", checks)


def lemma_truncated(seed: int, n: int) -> IdentityRow:
    checks = []
    for k, nu in enumerate((0.0,) + NUS_BOUND):
        zeta, eta = _pairs(seed, n, nu, 200 + k)
        for tau in TAUS:
            beta = truncated_moments(tau).beta
            a = (zeta ** 2 - beta) * (np.abs(zeta) > tau)
            b = (eta ** 2 - beta) * (np.abs(eta) > tau)
            est, se = _cov_stats(a, b)
            env = nu * nu * tau ** 4 * math.exp(-tau * tau / 2.0)
            kind = "equal" if nu == 0.0 else "bound"
            checks.append(Check(f"nu={nu}, tau={tau}", kind, est, se, env))
    return IdentityRow("pair-truncated",
                       "Cov[(zeta^2-beta)1(|zeta|>tau), (eta^2-beta)1(|eta|>tau)] <= C nu^2 tau^4 e^{-tau^2/2}",
                       checks)


def lemma_cdf(seed: int, n: int) -> IdentityRow:
    checks = []
    for k, nu in enumerate((0.0,) + NUS_BOUND):
        zeta, eta = _pairs(seed, n, nu, 300 + k)
        for tau in TAUS:
            est, se = _cov_stats((zeta ** 2 <= tau).astype(float), (eta ** 2 <= tau).astype(float))
            env = nu * nu * (tau * tau + 1.0) * math.exp(-tau / 3.0)
            kind = "equal" if nu == 0.0 else "bound"
            checks.append(Check(f"nu={nu}, tau={tau}", kind, est, se, env))
    return IdentityRow("pair-indicator", "|Cov[1(zeta^2<=tau), 1(eta^2<=tau)]| <= C nu^2 (tau^2+1) e^{-tau/3}",
                       checks)


def cosine_covariance_exact(t: float, mu1: float, mu2: float, s1: float, s2: float, nu: float) -> float:
    """Closed form of Cov[cos(t(mu1 + s1 zeta)), cos(t(mu2 + s2 eta))]."""
    b = t * t * (s1 * s1 + s2 * s2) / 2.0
    delta = nu * 2.0 * s1 * s2 / (s1 * s1 + s2 * s2)
    ep, em, e0 = math.exp(-b * (1 + delta)), math.exp(-b * (1 - delta)), math.exp(-b)
    cc = math.cos(t * mu1) * math.cos(t * mu2)
    ss = math.sin(t * mu1) * math.sin(t * mu2)
    return 0.5 * cc * (ep + em - 2.0 * e0) - 0.5 * ss * (ep - em)


def lemma_cosine(seed: int, n: int, mu1: float = 0.7, mu2: float = 0.4,
                 s1: float = 1.0, s2: float = 0.8) -> IdentityRow:
    """Bound check, plus agreement with the closed-form covariance."""
    checks = []
    for k, nu in enumerate((0.0,) + NUS_BOUND):
        zeta, eta = _pairs(seed, n, nu, 400 + k)
        for t in TAUS:
            est, se = _cov_stats(np.cos(t * (mu1 + s1 * zeta)), np.cos(t * (mu2 + s2 * eta)))
            env = (abs(nu * nu * math.cos(t * mu1) * math.cos(t * mu2))
                   + abs(nu * math.sin(t * mu1) * math.sin(t * mu2)))
            exact = cosine_covariance_exact(t, mu1, mu2, s1, s2, nu)
            checks.append(Check(f"nu={nu}, t={t}, closed form", "equal", est, se, exact))
            if nu != 0.0:
                checks.append(Check(f"nu={nu}, t={t}", "bound", est, se, env))
    return IdentityRow("pair-cosine",
                       "|Cov[cos(t(mu1+s1 zeta)), cos(t(mu2+s2 eta))]| <= C(|nu^2 cos cos| + |nu sin sin|)",
                       checks)


# ----------------------------------------------------------------------------- vector items

def default_families(d: int = 50) -> list[CovarianceModel]:
    return [make_covariance("identity", d),
            make_covariance("equicorrelation", d, gamma=0.5),
            make_covariance("ar1", d, rho=0.9),
            make_covariance("blockones", d, r=5, p=8)]


def _simulate(model: CovarianceModel, seed: int, n: int, stream: int, stat, threads):
    """Stack ``stat(eps_block)`` over ``n`` draws, chunk by chunk in a fixed order."""
    def run(reps):
        rng = rng_for((seed, reps.start), stream)
        return stat(model.sample(rng, len(reps)))
    return np.concatenate(pmap(run, chunked(n, _CHUNK), threads), axis=-1)


def prop_square(seed: int, n: int, families=None, rel_tol: float = 0.03, threads=None) -> IdentityRow:
    checks = []
    for k, model in enumerate(families or default_families()):
        sq = _simulate(model, seed, n, 500 + k, lambda e: np.sum(e * e, axis=1), threads)
        est, se = _var_stats(sq)
        checks.append(Check(model.family, "relative", est, se, 2.0 * model.frobenius ** 2, rel_tol))
    return IdentityRow("vector-square", "Var(||eps||^2) = 2 ||Sigma||_F^2", checks)


def prop_truncated(seed: int, n: int, families=None, threads=None) -> IdentityRow:
    checks = []
    for k, model in enumerate(families or default_families()):
        sd = np.sqrt(model.diag)

        def stat(e):
            rows = []
            for tau in TAUS:
                beta = truncated_moments(tau).beta
                keep = np.abs(e) > sd * tau
                rows.append(np.sum((e * e - model.diag * beta) * keep, axis=1))
                rows.append(np.sum(e * e * keep, axis=1))
            return np.stack(rows)

        out = _simulate(model, seed, n, 600 + k, stat, threads)
        f2 = model.frobenius ** 2
        for j, tau in enumerate(TAUS):
            est, se = _var_stats(out[2 * j])
            checks.append(Check(f"{model.family}, tau={tau}, centered", "bound", est, se,
                                f2 * tau ** 4 * math.exp(-tau * tau / 2.0)))
            est, se = _var_stats(out[2 * j + 1])
            checks.append(Check(f"{model.family}, tau={tau}, raw", "bound", est, se,
                                f2 * tau ** 8 * math.exp(-tau * tau / 3.0)))
    return IdentityRow("vector-truncated",
                       "Var[sum (eps_i^2 - sigma_i^2 beta) 1(|eps_i| > sigma_i tau)] <= C ||Sigma||_F^2 tau^4 e^{-tau^2/2}",
                       checks)


def prop_cdf(seed: int, n: int, families=None, threads=None) -> IdentityRow:
    checks = []
    for k, model in enumerate(families or default_families()):
        def stat(e):
            return np.stack([np.sum(e * e <= model.diag * tau, axis=1).astype(float) for tau in TAUS])

        out = _simulate(model, seed, n, 700 + k, stat, threads)
        fc2 = model.frobenius_corr ** 2
        for j, tau in enumerate(TAUS):
            est, se = _var_stats(out[j])
            checks.append(Check(f"{model.family}, tau={tau}", "bound", est, se,
                                fc2 * (tau * tau + 1.0) * math.exp(-tau / 3.0)))
    return IdentityRow("vector-indicator",
                       "Var[sum 1(eps_i^2 <= sigma_i^2 tau)] <= C ||Sigma~||_F^2 (tau^2+1) e^{-tau/3}", checks)


def prop_cosine(seed: int, n: int, families=None, s: int = 5, spike: float = 1.0,
                threads=None) -> IdentityRow:
    checks = []
    for k, model in enumerate(families or default_families()):
        mu = np.zeros(model.dim)
        mu[:s] = spike

        def stat(e):
            return np.stack([np.sum(np.cos(t * (mu + e)), axis=1) for t in TAUS])

        out = _simulate(model, seed, n, 800 + k, stat, threads)
        fc = model.frobenius_corr
        for j, t in enumerate(TAUS):
            est, se = _var_stats(out[j])
            checks.append(Check(f"{model.family}, t={t}, s={s}", "bound", est, se, fc * fc + s * fc))
    return IdentityRow("vector-cosine",
                       "Var[sum cos(t(mu_i + eps_i))] <= C(||Sigma~||_F^2 + s ||Sigma~||_F)", checks)


def verify_identities(seed: int, replications: int = 1_000_000, threads=None) -> list[IdentityRow]:
    """All eight rows, each at ``replications`` Monte Carlo draws."""
    if replications < 100_000:
        raise ValueError("verify_identities needs replications >= 1e5")
    n = int(replications)
    return [lemma_square(seed, n), lemma_truncated(seed, n), lemma_cdf(seed, n), lemma_cosine(seed, n),
            prop_square(seed, n, threads=threads), prop_truncated(seed, n, threads=threads),
            prop_cdf(seed, n, threads=threads), prop_cosine(seed, n, threads=threads)]
