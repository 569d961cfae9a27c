"""Covariance families, sparse signals and reproducible draws of Y = theta + sigma*eps.

Every structured family samples ``eps ~ N(0, Sigma)`` without an O(d^3)
factorization, which also covers the rank-deficient families (all-ones
blocks, equicorrelation with gamma = 1) a Cholesky factorization rejects.

Randomness is keyed by a :class:`SeedPath` ``(seed, replicate)`` plus a
stream id, through a counter-based Philox generator, so a replicate's draw
does not depend on which thread produced it or in what order.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg, signal

__all__ = [
    "SeedPath",
    "NOISE_STREAM",
    "SIGNAL_STREAM",
    "rng_for",
    "CovarianceModel",
    "SignalSpec",
    "Observation",
    "make_covariance",
    "parse_family",
    "lower_bound_block_geometry",
    "sample_noise",
    "make_signal",
    "observe",
    "SIGNAL_SHAPES",
]

NOISE_STREAM = 0
SIGNAL_STREAM = 1

FAMILIES = ("identity", "equicorrelation", "blockones", "ar1", "diagonal", "dense")
SIGNAL_SHAPES = ("flat", "single-spike", "geometric")

# DenseExplicit: eigenvalues below -_PSD_REJECT * lambda_max are an error,
# anything between that and zero is clipped.
_PSD_REJECT = 1e-8
_MATERIALIZE_LIMIT = 5000


class SeedPath(NamedTuple):
    seed: int
    replicate: int


def rng_for(seed_path: SeedPath | tuple[int, int], stream: int = NOISE_STREAM) -> np.random.Generator:
    """Counter-based generator for one ``(seed, replicate, stream)`` key."""
    seed, replicate = seed_path
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(replicate), int(stream)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """A structured d x d covariance matrix with cached scalar summaries.

    Attributes
    ----------
    family : str
        One of ``identity``, ``equicorrelation``, ``blockones``, ``ar1``,
        ``diagonal``, ``dense``.
    params : dict
        Family parameters (``gamma``; ``r`` and ``p``; ``rho``; ``weights``).
    dim : int
    diag : ndarray
        Per-coordinate variances sigma_i^2.
    frobenius, frobenius_corr : float
        Frobenius norms of Sigma and of its correlation matrix.
    lambda_max : float
        Largest eigenvalue of Sigma.
    """

    family: str
    params: dict
    dim: int
    diag: np.ndarray = field(repr=False)
    frobenius: float
    frobenius_corr: float
    lambda_max: float
    matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def min_variance(self) -> float:
        return float(self.diag.min())

    @property
    def max_variance(self) -> float:
        return float(self.diag.max())

    def satisfies_normalization(self) -> bool:
        """max_i sigma_i^2 <= 1."""
        return self.max_variance <= 1.0

    def satisfies_floor(self, c_star: float) -> bool:
        """min_i sigma_i^2 >= c_star."""
        return self.min_variance >= c_star

    @property
    def label(self) -> str:
        return self.family

    @property
    def params_label(self) -> str:
        """Comma-free rendering of the parameters, for CSV output."""
        parts = []
        for key, val in self.params.items():
            if isinstance(val, np.ndarray):
                val = f"array[{val.size}]"
            parts.append(f"{key}={val}")
        return ";".join(parts)

    def materialize(self) -> np.ndarray:
        """Dense d x d matrix; only for d <= 5000."""
        d = self.dim
        if self.matrix is not None:
            return self.matrix.copy()
        if d > _MATERIALIZE_LIMIT:
            raise ValueError(f"refusing to materialize a {d} x {d} covariance")
        if self.family == "identity":
            return np.eye(d)
        if self.family == "diagonal":
            return np.diag(self.diag)
        if self.family == "equicorrelation":
            g = self.params["gamma"]
            return (1.0 - g) * np.eye(d) + g * np.ones((d, d))
        if self.family == "blockones":
            r, p = self.params["r"], self.params["p"]
            mat = np.eye(d)
            for b in range(p):
                mat[b * r:(b + 1) * r, b * r:(b + 1) * r] = 1.0
            return mat
        if self.family == "ar1":
            rho = self.params["rho"]
            idx = np.arange(d)
            return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)
        raise AssertionError(self.family)

    @cached_property
    def _dense_factor(self) -> np.ndarray:
        mat = self.materialize()
        vals, vecs = np.linalg.eigh(mat)
        top = max(float(vals[-1]), 0.0)
        if vals[0] < -_PSD_REJECT * max(top, 1e-300):
            raise ValueError(
                f"covariance is not positive semidefinite (min eigenvalue {vals[0]:.3e})")
        vals = np.clip(vals, 0.0, None)
        return vecs * np.sqrt(vals)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Draw ``size`` independent rows of N(0, Sigma); a vector if size is None."""
        n = 1 if size is None else int(size)
        d = self.dim
        fam = self.family
        if fam in ("identity", "diagonal"):
            eps = rng.standard_normal((n, d))
            if fam == "diagonal":
                eps *= np.sqrt(self.diag)
        elif fam == "equicorrelation":
            g = self.params["gamma"]
            z = rng.standard_normal((n, d))
            w = rng.standard_normal((n, 1))
            eps = math.sqrt(1.0 - g) * z + math.sqrt(g) * w
        elif fam == "blockones":
            r, p = self.params["r"], self.params["p"]
            eps = np.empty((n, d))
            shared = rng.standard_normal((n, p))
            eps[:, :r * p] = np.repeat(shared, r, axis=1)
            if d > r * p:
                eps[:, r * p:] = rng.standard_normal((n, d - r * p))
        elif fam == "ar1":
            rho = self.params["rho"]
            z = rng.standard_normal((n, d))
            z[:, 1:] *= math.sqrt(1.0 - rho * rho)
            # eps_1 = z_1, eps_i = rho*eps_{i-1} + sqrt(1-rho^2) z_i
            eps = signal.lfilter([1.0], [1.0, -rho], z, axis=1)
        elif fam == "dense":
            z = rng.standard_normal((n, d))
            eps = z @ self._dense_factor.T
        else:
            raise AssertionError(fam)
        return eps[0] if size is None else eps


def _identity(d: int) -> CovarianceModel:
    root = math.sqrt(d)
    return CovarianceModel("identity", {}, d, np.ones(d), root, root, 1.0)


def _equicorrelation(d: int, gamma: float) -> CovarianceModel:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"equicorrelation needs gamma in [0, 1], got {gamma}")
    frob = math.sqrt(d + gamma * gamma * d * (d - 1))
    lam = 1.0 - gamma + gamma * d
    return CovarianceModel("equicorrelation", {"gamma": gamma}, d, np.ones(d), frob, frob, lam)


def _blockones(d: int, r: int, p: int) -> CovarianceModel:
    if r < 1 or p < 0:
        raise ValueError(f"blockones needs r >= 1 and p >= 0, got r={r}, p={p}")
    if r * p > d:
        raise ValueError(f"blockones needs r*p <= d, got r*p={r * p} > d={d}")
    frob = math.sqrt(p * r * r + (d - r * p))
    lam = float(max(r if p > 0 else 1, 1 if d > r * p else 0))
    return CovarianceModel("blockones", {"r": r, "p": p}, d, np.ones(d), frob, frob, lam)


def _ar1(d: int, rho: float) -> CovarianceModel:
    if not -1.0 < rho < 1.0:
        raise ValueError(f"ar1 needs rho in (-1, 1), got {rho}")
    k = np.arange(1, d)
    frob2 = d + 2.0 * math.fsum((d - k) * rho ** (2 * k))
    if d == 1 or rho == 0.0:
        lam = 1.0
    else:
        # The inverse of an AR(1) correlation matrix is tridiagonal.
        main = np.full(d, 1.0 + rho * rho)
        main[0] = main[-1] = 1.0
        off = np.full(d - 1, -rho)
        low = linalg.eigvalsh_tridiagonal(main, off, select="i", select_range=(0, 0))[0]
        lam = (1.0 - rho * rho) / low
    frob = math.sqrt(frob2)
    return CovarianceModel("ar1", {"rho": rho}, d, np.ones(d), frob, frob, lam)


def _diagonal(d: int, weights) -> CovarianceModel:
    w = np.broadcast_to(np.asarray(weights, dtype=float), (d,)).copy()
    if np.any(w <= 0.0) or np.any(w > 1.0):
        raise ValueError("diagonal weights (variances) must lie in (0, 1]")
    frob = float(np.sqrt(math.fsum(w * w)))
    return CovarianceModel("diagonal", {"weights": w}, d, w, frob, math.sqrt(d), float(w.max()))


def _dense(matrix) -> CovarianceModel:
    mat = np.array(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("dense covariance must be a square matrix")
    d = mat.shape[0]
    if d > _MATERIALIZE_LIMIT:
        raise ValueError(f"dense covariance limited to d <= {_MATERIALIZE_LIMIT}")
    if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(mat).max())):
        raise ValueError("dense covariance must be symmetric")
    mat = 0.5 * (mat + mat.T)
    diag = np.diag(mat).copy()
    if np.any(diag < 0.0):
        raise ValueError("dense covariance has a negative diagonal entry")
    vals = np.linalg.eigvalsh(mat)
    lam = float(vals[-1])
    if vals[0] < -_PSD_REJECT * max(lam, 1e-300):
        raise ValueError(f"covariance is not positive semidefinite (min eigenvalue {vals[0]:.3e})")
    sd = np.sqrt(diag)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = mat / np.outer(sd, sd)
    corr[~np.isfinite(corr)] = 0.0  # rows with sigma_i = 0 carry no correlation
    return CovarianceModel("dense", {"d": d}, d, diag, float(np.linalg.norm(mat)),
                           float(np.linalg.norm(corr)), lam, matrix=mat)


def make_covariance(family: str, d: int | None = None, **params) -> CovarianceModel:
    """Build a :class:`CovarianceModel`.

    Examples
    --------
    >>> make_covariance("equicorrelation", 4, gamma=0.5).frobenius ** 2
    7.0
    >>> make_covariance("blockones", 8, r=3, p=2).frobenius ** 2
    20.0
    """
    family = family.lower()
    if family == "dense":
        return _dense(params["matrix"])
    if d is None or int(d) < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    d = int(d)
    if family == "identity":
        return _identity(d)
    if family == "equicorrelation":
        return _equicorrelation(d, float(params["gamma"]))
    if family == "blockones":
        return _blockones(d, int(params["r"]), int(params["p"]))
    if family == "ar1":
        return _ar1(d, float(params["rho"]))
    if family == "diagonal":
        return _diagonal(d, params["weights"])
    raise ValueError(f"unknown covariance family {family!r}; expected one of {FAMILIES}")


_DESCRIPTOR = re.compile(r"^\s*([a-z0-9_-]+)\s*(?:\((.*)\))?\s*$", re.IGNORECASE)


def parse_family(descriptor: str, d: int) -> CovarianceModel:
    """Build a model from a text descriptor.

    ``identity``, ``equicorrelation(0.5)``, ``blockones(5,8)``, ``ar1(0.9)``,
    ``diagonal(0.5)`` (constant), ``diagonal(0.25..1)`` (linearly spaced) or
    ``dense(path)`` (a ``.npy`` or whitespace-separated text matrix).
    """
    m = _DESCRIPTOR.match(descriptor)
    if not m:
        raise ValueError(f"cannot parse covariance descriptor {descriptor!r}")
    name = m.group(1).lower().replace("-", "").replace("_", "")
    args = (m.group(2) or "").strip()
    aliases = {"equicorr": "equicorrelation", "blocks": "blockones", "diag": "diagonal"}
    name = aliases.get(name, name)
    try:
        if name == "identity":
            return make_covariance("identity", d)
        if name == "equicorrelation":
            return make_covariance("equicorrelation", d, gamma=float(args))
        if name == "blockones":
            r, p = (int(a) for a in args.split(","))
            return make_covariance("blockones", d, r=r, p=p)
        if name == "ar1":
            return make_covariance("ar1", d, rho=float(args))
        if name == "diagonal":
            if ".." in args:
                lo, hi = (float(a) for a in args.split(".."))
                return make_covariance("diagonal", d, weights=np.linspace(lo, hi, d))
            return make_covariance("diagonal", d, weights=float(args))
        if name == "dense":
            mat = np.load(args) if args.endswith(".npy") else np.loadtxt(args, ndmin=2)
            model = make_covariance("dense", matrix=mat)
            if model.dim != d:
                raise ValueError(f"dense matrix has dimension {model.dim}, expected {d}")
            return model
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad covariance descriptor {descriptor!r}: {exc}") from exc
    raise ValueError(f"unknown covariance family in {descriptor!r}")


def lower_bound_block_geometry(d: int, rho: float) -> tuple[int, int]:
    """Block size and count of the all-ones lower-bound construction at Frobenius bound rho.

    ``r = floor(rho^2 / (2 d))`` (at least 1) and the largest ``p`` with
    ``r p <= d`` and ``p r^2 + d - r p <= rho^2``.
    """
    r = max(1, int(rho * rho // (2 * d)))
    p = d // r
    if r > 1:
        p = min(p, int((rho * rho - d) // (r * (r - 1))))
    return r, max(p, 0)


def sample_noise(model: CovarianceModel, seed_path: SeedPath | tuple[int, int]) -> np.ndarray:
    """One draw of eps ~ N(0, Sigma) determined entirely by ``seed_path``."""
    return model.sample(rng_for(seed_path, NOISE_STREAM))


@dataclass(frozen=True, eq=False)
class SignalSpec:
    dim: int
    support: np.ndarray
    values: np.ndarray

    @property
    def sparsity(self) -> int:
        return int(self.support.size)

    @property
    def norm2(self) -> float:
        # hypot rescales internally, so tiny or huge entries do not under/overflow
        return math.hypot(*self.values.tolist())

    def dense(self) -> np.ndarray:
        theta = np.zeros(self.dim)
        theta[self.support] = self.values
        return theta


def make_signal(d: int, s: int, shape: str, norm2: float,
                seed_path: SeedPath | tuple[int, int]) -> SignalSpec:
    """Draw an s-sparse vector with Euclidean norm ``norm2``.

    The support is uniform without replacement.  ``flat`` puts equal
    magnitudes with random signs on the support, ``single-spike`` a single
    nonzero entry, ``geometric`` magnitudes proportional to 2^-i.  A zero
    target (or ``s = 0``) returns the zero vector with an empty support.
    """
    if s > d:
        raise ValueError(f"sparsity s={s} exceeds dimension d={d}")
    if s < 0 or norm2 < 0:
        raise ValueError("sparsity and target norm must be nonnegative")
    if shape not in SIGNAL_SHAPES:
        raise ValueError(f"unknown signal shape {shape!r}; expected one of {SIGNAL_SHAPES}")
    if s == 0 or norm2 == 0.0:
        return SignalSpec(d, np.zeros(0, dtype=np.int64), np.zeros(0))
    rng = rng_for(seed_path, SIGNAL_STREAM)
    k = 1 if shape == "single-spike" else s
    support = np.sort(rng.choice(d, size=k, replace=False)).astype(np.int64)
    signs = rng.choice(np.array([-1.0, 1.0]), size=k)
    if shape == "geometric":
        mags = np.ldexp(1.0, -np.arange(k))
    else:
        mags = np.ones(k)
    mags = mags * (norm2 / math.sqrt(math.fsum(mags * mags)))
    return SignalSpec(d, support, signs * mags)


@dataclass(frozen=True, eq=False)
class Observation:
    y: np.ndarray
    signal: SignalSpec
    model: CovarianceModel
    sigma: float
    seed_path: SeedPath


def observe(signal: SignalSpec, model: CovarianceModel, sigma: float,
            seed_path: SeedPath | tuple[int, int]) -> Observation:
    """Y = theta + sigma * eps with eps drawn from ``seed_path``."""
    if signal.dim != model.dim:
        raise ValueError(f"signal dimension {signal.dim} != covariance dimension {model.dim}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    seed_path = SeedPath(*seed_path)
    y = sigma * sample_noise(model, seed_path)
    y[signal.support] += signal.values
    return Observation(y, signal, model, float(sigma), seed_path)


def observe_many(signal: SignalSpec, model: CovarianceModel, sigma: float,
                 seed: int, replicates: Sequence[int]) -> np.ndarray:
    """Stack of observation vectors for several replicate indices of one seed."""
    out = np.empty((len(replicates), model.dim))
    for row, rep in enumerate(replicates):
        out[row] = sigma * sample_noise(model, (seed, rep))
        out[row, signal.support] += signal.values
    return out
