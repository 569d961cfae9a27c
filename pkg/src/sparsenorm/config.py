"""Flat ``key = value`` experiment files.

One assignment per line; ``#`` starts a comment; lists are comma separated
(commas inside parentheses do not split, so ``blockones(5,8)`` is a single
item).  Keys::

    experiment_id = demo
    estimator = n-hat            # see ESTIMATORS
    seed = 20240611
    replications = 300
    grid.d = 10000
    grid.s = 1, 10, 100
    grid.sigma = 1
    grid.family = identity, equicorrelation(0.5)
    grid.shape = flat
    grid.norm2 = 0, 5            # absolute ||theta||_2 targets, or instead
    grid.norm2_scale = 0, 1, 10  # multiples of sigma * sqrt(rate)
    estimator.eta = 0.2
    estimator.rho = 200          # Frobenius bound for the rho variants, or
    estimator.rho_over_frob = 2  # bound as a multiple of ||Sigma||_F
    detection.gamma = 1.5        # test-power only
    detection.radius = 0, 5, 10  # test-power only
    detection.gamma_grid = 0.5, 1
    output.csv = results.csv
    output.json = results.json
    output.svg = rate_curve.svg
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields

__all__ = ["ConfigParseError", "ConfigValidationError", "ExperimentConfig", "ESTIMATORS",
           "parse_config_text", "load_config", "split_list"]

# estimator name -> rate it is normalized by
ESTIMATORS = {
    "n-hat": "psi",
    "n-tilde": "phi_rho",
    "n-star": "psi_star",
    "n-star-eta": "psi_star",
    "n-star-star": "psi_star",
    "n-star-rho": "phi_star_rho",
    "n-star-eta-rho": "phi_star_rho",
}
ETA_ESTIMATORS = {"n-star-eta", "n-star-star", "n-star-eta-rho"}
RHO_ESTIMATORS = {"n-tilde", "n-star-rho", "n-star-eta-rho"}


class ConfigParseError(ValueError):
    """Malformed configuration text."""


class ConfigValidationError(ValueError):
    """Well-formed configuration with invalid values."""


def split_list(text: str) -> list[str]:
    items, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            items.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    items.append("".join(cur).strip())
    return [x for x in items if x]


@dataclass
class ExperimentConfig:
    experiment_id: str = "experiment"
    estimator: str = "n-hat"
    seed: int = 0
    replications: int = 100
    d: list[int] = field(default_factory=lambda: [1000])
    s: list[int] = field(default_factory=lambda: [10])
    sigma: list[float] = field(default_factory=lambda: [1.0])
    family: list[str] = field(default_factory=lambda: ["identity"])
    shape: list[str] = field(default_factory=lambda: ["flat"])
    norm2: list[float] | None = None
    norm2_scale: list[float] | None = None
    eta: float | None = None
    rho: float | None = None
    rho_over_frob: float | None = None
    gamma: float | None = None
    radius: list[float] | None = None
    gamma_grid: list[float] | None = None
    output_csv: str = "results.csv"
    output_json: str = "results.json"
    output_svg: str = "rate_curve.svg"

    def validate(self) -> "ExperimentConfig":
        if self.estimator not in ESTIMATORS:
            raise ConfigValidationError(
                f"estimator: unknown {self.estimator!r}; expected one of {sorted(ESTIMATORS)}")
        if self.replications < 1:
            raise ConfigValidationError("replications: must be >= 1")
        for name in ("d", "s", "sigma", "family", "shape"):
            if not getattr(self, name):
                raise ConfigValidationError(f"grid.{name}: must be nonempty")
        if any(d < 1 for d in self.d):
            raise ConfigValidationError("grid.d: dimensions must be >= 1")
        if any(s < 1 for s in self.s):
            raise ConfigValidationError("grid.s: sparsity must be >= 1")
        if any(not x > 0 for x in self.sigma):
            raise ConfigValidationError("grid.sigma: noise levels must be positive")
        if self.norm2 is not None and self.norm2_scale is not None:
            raise ConfigValidationError("grid.norm2 and grid.norm2_scale are mutually exclusive")
        if self.norm2 is None and self.norm2_scale is None:
            self.norm2 = [0.0]
        targets = self.norm2 if self.norm2 is not None else self.norm2_scale
        if not targets or any(x < 0 for x in targets):
            raise ConfigValidationError("grid.norm2: targets must be a nonempty list of values >= 0")
        if self.estimator in ETA_ESTIMATORS:
            if self.eta is None:
                raise ConfigValidationError(f"estimator.eta: required by {self.estimator}")
            if not 0 < self.eta < 1:
                raise ConfigValidationError("estimator.eta: must be in (0, 1)")
        if self.estimator in RHO_ESTIMATORS and self.rho is None and self.rho_over_frob is None:
            raise ConfigValidationError(
                f"estimator.rho: {self.estimator} needs estimator.rho or estimator.rho_over_frob")
        return self

    def echo(self) -> dict:
        """Resolved configuration, as embedded in JSON outputs."""
        return {f.name: getattr(self, f.name) for f in fields(self)}


_KEYS = {
    "experiment_id": ("experiment_id", str, False),
    "estimator": ("estimator", str, False),
    "seed": ("seed", int, False),
    "replications": ("replications", int, False),
    "grid.d": ("d", int, True),
    "grid.s": ("s", int, True),
    "grid.sigma": ("sigma", float, True),
    "grid.family": ("family", str, True),
    "grid.shape": ("shape", str, True),
    "grid.norm2": ("norm2", float, True),
    "grid.norm2_scale": ("norm2_scale", float, True),
    "estimator.eta": ("eta", float, False),
    "estimator.rho": ("rho", float, False),
    "estimator.rho_over_frob": ("rho_over_frob", float, False),
    "detection.gamma": ("gamma", float, False),
    "detection.radius": ("radius", float, True),
    "detection.gamma_grid": ("gamma_grid", float, True),
    "output.csv": ("output_csv", str, False),
    "output.json": ("output_json", str, False),
    "output.svg": ("output_svg", str, False),
}

_LINE = re.compile(r"^\s*([A-Za-z0-9_.]+)\s*=\s*(.*?)\s*$")


def _convert(kind, text, key, lineno):
    try:
        if kind is int:
            val = float(text)
            if not val.is_integer():
                raise ValueError
            return int(val)
        return kind(text)
    except ValueError:
        raise ConfigParseError(f"line {lineno}: {key}: cannot read {text!r} as {kind.__name__}") from None


def parse_config_text(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigParseError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = m.group(1), m.group(2)
        if key not in _KEYS:
            raise ConfigParseError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigParseError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        attr, kind, is_list = _KEYS[key]
        if is_list:
            items = split_list(value)
            if not items:
                raise ConfigParseError(f"line {lineno}: {key}: empty list")
            setattr(cfg, attr, [_convert(kind, x, key, lineno) for x in items])
        else:
            setattr(cfg, attr, _convert(kind, value, key, lineno))
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())
