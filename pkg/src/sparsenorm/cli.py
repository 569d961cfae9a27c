"""Command-line front end: ``sparsenorm <subcommand> ...``.

Exit codes: 0 success, 2 parse error, 3 validation error, 4 I/O error,
5 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adaptive import (AdaptiveConfig, SentinelNoiseError, estimate_norm_star, estimate_norm_star_eta,
                       estimate_norm_star_eta_rho, estimate_norm_star_rho, estimate_norm_star_star)
from .config import ConfigParseError, ConfigValidationError, ExperimentConfig, load_config
from .detection import calibrate_gamma, radius_sweep, separation_radius
from .harness import rate_curve, rate_curve_svg, run_experiment, summaries_to_csv, summaries_to_json
from .identities import verify_identities
from .known_sigma import estimate_norm_known, estimate_norm_known_rho
from .models import parse_family
from .noise import DegenerateSampleError, NormalizedSample, sigma_sq_D, sigma_sq_eta, sigma_sq_S

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4, 5

METHODS = ("n-hat", "n-tilde", "n-star", "n-star-eta", "n-star-star", "n-star-rho",
           "n-star-eta-rho", "sigma")

ADAPTIVE_ALIASES = {"star": "n-star", "star-eta": "n-star-eta", "star-star": "n-star-star"}

logger = logging.getLogger("sparsenorm")


class UsageError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _parse_error(msg):
    return UsageError(EXIT_PARSE, msg)


def _validation_error(msg):
    return UsageError(EXIT_VALIDATION, msg)


# ----------------------------------------------------------------------------- data input

def _read_vector(args) -> np.ndarray:
    if (args.data is None) == (args.values is None):
        raise _validation_error("--data: give exactly one of --data or --values")
    if args.values is not None:
        try:
            return np.array([float(v) for v in args.values.split(",") if v.strip()], dtype=float)
        except ValueError as exc:
            raise _parse_error(f"--values: {exc}") from None
    try:
        with open(args.data, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(EXIT_IO, f"--data: cannot read {args.data}: {exc.strerror}") from None
    if args.column is None:
        vals = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                vals.append(float(line))
            except ValueError:
                raise _parse_error(f"--data: line {lineno}: not a number: {line!r}") from None
        return np.array(vals, dtype=float)
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise _parse_error("--data: empty CSV file")
    col = args.column
    if col.isdigit():
        idx, body = int(col), rows
    else:
        if col not in rows[0]:
            raise _parse_error(f"--column: no column named {col!r} in header {rows[0]}")
        idx, body = rows[0].index(col), rows[1:]
    vals = []
    for lineno, row in enumerate(body, 1):
        if not row:
            continue
        try:
            vals.append(float(row[idx]))
        except (ValueError, IndexError):
            raise _parse_error(f"--column: row {lineno}: cannot read column {col!r}") from None
    return np.array(vals, dtype=float)


def _read_diag(args, d: int) -> np.ndarray:
    if args.diag == "unit":
        return np.ones(d)
    try:
        diag = np.loadtxt(args.diag, ndmin=1, dtype=float)
    except OSError as exc:
        raise UsageError(EXIT_IO, f"--diag: cannot read {args.diag}: {exc}") from None
    except ValueError as exc:
        raise _parse_error(f"--diag: {exc}") from None
    if diag.shape != (d,):
        raise _validation_error(f"--diag: expected {d} variances, got {diag.size}")
    return diag


# ----------------------------------------------------------------------------- estimate

def _require(args, *names):
    for name in names:
        if getattr(args, name.replace("-", "_")) is None:
            raise _validation_error(f"--{name}: required by --method {args.method}")


def _finite(x):
    return x if not isinstance(x, float) or math.isfinite(x) else repr(x)


def cmd_estimate(args) -> dict:
    if (args.method is None) == (args.adaptive is None):
        raise _validation_error("--method: give exactly one of --method or --adaptive")
    if args.adaptive is not None:
        args.method = ADAPTIVE_ALIASES[args.adaptive]
    y = _read_vector(args)
    if y.size == 0:
        raise _validation_error("--data: no observations")
    if not np.all(np.isfinite(y)):
        raise _validation_error("--data: observations must be finite")
    diag = _read_diag(args, y.size)
    if args.s is not None and args.s < 1:
        raise _validation_error("--s: must be >= 1")
    if args.sigma is not None and not args.sigma > 0:
        raise _validation_error("--sigma: must be positive")
    for name in ("frob", "rho", "frob_corr"):
        val = getattr(args, name)
        if val is not None and not val > 0:
            raise _validation_error(f"--{name.replace('_', '-')}: must be positive")
    if args.eta is not None and not 0 < args.eta < 1:
        raise _validation_error("--eta: must be in (0, 1)")
    method = args.method
    result = {"method": method, "d": int(y.size)}
    try:
        if method == "sigma":
            sample = NormalizedSample.from_observation(y, diag)
            if args.sigma_method == "S":
                est = sigma_sq_S(sample)
            elif args.sigma_method == "D":
                _require(args, "s", "frob")
                est = sigma_sq_D(sample, args.s, args.frob_corr or args.frob)
            else:
                _require(args, "eta")
                est = sigma_sq_eta(sample, args.eta)
            result.update({"method": f"sigma-{args.sigma_method}", "value": est.value,
                           "intermediates": est.as_dict()})
            return result
        _require(args, "s")
        if method in ("n-hat", "n-tilde"):
            _require(args, "sigma")
            if method == "n-hat":
                _require(args, "frob")
                value, info = estimate_norm_known(y, diag, args.sigma, args.s, args.frob, full_output=True)
            else:
                _require(args, "rho")
                value, info = estimate_norm_known_rho(y, diag, args.sigma, args.s, args.rho,
                                                      full_output=True)
        else:
            if method in ("n-star-rho", "n-star-eta-rho"):
                _require(args, "rho")
            else:
                _require(args, "frob")
            if method in ("n-star-eta", "n-star-star", "n-star-eta-rho"):
                _require(args, "eta")
            frob = args.frob if args.frob is not None else args.rho
            cfg = AdaptiveConfig(args.s, diag, frob, args.frob_corr, args.eta)
            fns = {"n-star": lambda: estimate_norm_star(y, cfg, full_output=True),
                   "n-star-eta": lambda: estimate_norm_star_eta(y, cfg, full_output=True),
                   "n-star-star": lambda: estimate_norm_star_star(y, cfg, full_output=True),
                   "n-star-rho": lambda: estimate_norm_star_rho(y, cfg, args.rho, full_output=True),
                   "n-star-eta-rho": lambda: estimate_norm_star_eta_rho(y, cfg, args.rho, full_output=True)}
            value, info = fns[method]()
    except (DegenerateSampleError, SentinelNoiseError) as exc:
        raise _validation_error(f"--data: {exc}") from None
    result.update({"value": value, "branch": info.get("branch"), "intermediates": info})
    return result


def _print_estimate(result, as_json: bool):
    if as_json:
        print(json.dumps(result, indent=2, default=_finite))
        return
    line = f"{result['method']}: {result['value']!r}"
    if result.get("branch"):
        line += f" (branch: {result['branch']})"
    print(line)
    for key, val in result["intermediates"].items():
        if key not in ("branch",):
            print(f"  {key} = {val!r}")


# ----------------------------------------------------------------------------- file writing

class _Outputs:
    """Collects output files and writes them all at the end, removing any partial ones on failure."""

    def __init__(self, out_dir: str | None):
        self.dir = Path(out_dir) if out_dir else None
        self.files: list[tuple[Path, str]] = []

    def add(self, name: str, text: str):
        if self.dir is None:
            return
        path = self.dir / name
        if path.resolve().parent != self.dir.resolve():
            raise _validation_error(f"output file {name!r} must stay inside --out")
        self.files.append((path, text))

    def commit(self) -> list[Path]:
        if self.dir is None:
            return []
        written = []
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
            for path, text in self.files:
                with open(path, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
                written.append(path)
        except OSError as exc:
            for path in written:
                path.unlink(missing_ok=True)
            raise UsageError(EXIT_IO, f"--out: cannot write {exc.filename or self.dir}: {exc.strerror}") from None
        return written


def _load(args) -> ExperimentConfig:
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        raise UsageError(EXIT_IO, f"--config: cannot read {args.config}: {exc.strerror}") from None
    except ConfigParseError as exc:
        raise _parse_error(f"--config: {exc}") from None
    if args.seed is not None:
        cfg.seed = args.seed
    if args.replications is not None:
        cfg.replications = args.replications
    try:
        return cfg.validate()
    except ConfigValidationError as exc:
        raise _validation_error(f"--config: {exc}") from None


def _fmt_summary(r) -> str:
    return (f"{r.estimator} family={r.family} d={r.d} s={r.s} sigma={r.sigma:g} norm2={r.norm2_target:.6g} "
            f"mse={r.mean_sq_err:.6g} scaled_risk={r.scaled_risk:.6g} ({r.rate_name}={r.rate_value:.6g})")


def cmd_simulate(args) -> int:
    cfg = _load(args)
    outputs = _Outputs(args.out)
    summaries = run_experiment(cfg, threads=args.threads)
    for r in summaries:
        print(_fmt_summary(r))
    outputs.add(cfg.output_csv, summaries_to_csv(summaries))
    outputs.add(cfg.output_json, summaries_to_json(summaries, cfg))
    outputs.commit()
    return EXIT_OK


def cmd_rate_curve(args) -> int:
    cfg = _load(args)
    outputs = _Outputs(args.out)
    rows, summaries = rate_curve(cfg, threads=args.threads)
    for row in rows:
        print(f"family={row.family} d={row.d} sigma={row.sigma:g} s={row.s} "
              f"worst_mse={row.worst_mean_sq_err:.6g} sigma2_rate={row.sigma ** 2 * row.rate_value:.6g} "
              f"worst_scaled_risk={row.worst_scaled_risk:.6g}")
    outputs.add(cfg.output_csv, summaries_to_csv(summaries))
    outputs.add(cfg.output_json, summaries_to_json(summaries, cfg, {"rate_curve": [vars(r) for r in rows]}))
    outputs.add(cfg.output_svg, rate_curve_svg(rows, title=f"{cfg.experiment_id}: {cfg.estimator}"))
    outputs.commit()
    return EXIT_OK


def cmd_verify_identities(args) -> int:
    if args.replications < 100_000:
        raise _validation_error("--replications: must be >= 100000")
    rows = verify_identities(args.seed, args.replications, threads=args.threads)
    lines = ["item,passed,checks,worst_setting,worst_estimate,worst_std_err,worst_target,worst_kind"]
    for row in rows:
        w = row.worst
        print(f"{row.label:18s} {'PASS' if row.passed else 'FAIL'}  {row.statement}  "
              f"[closest: {w.setting}: estimate={w.estimate:.4g} se={w.std_err:.2g} target={w.target:.4g}]")
        lines.append(f"{row.label},{row.passed},{len(row.checks)},\"{w.setting}\",{w.estimate!r},"
                     f"{w.std_err!r},{w.target!r},{w.kind}")
    doc = {"seed": args.seed, "replications": args.replications,
           "rows": [{"label": r.label, "statement": r.statement, "passed": r.passed,
                     "checks": [dict(vars(c), passed=c.passed) for c in r.checks]} for r in rows]}
    outputs = _Outputs(args.out)
    outputs.add("identities.csv", "\n".join(lines) + "\n")
    outputs.add("identities.json", json.dumps(doc, indent=2) + "\n")
    outputs.commit()
    return EXIT_OK


SWEEP_COLUMNS = ("radius", "gamma", "type1", "type2", "total", "type1_std_err", "type2_std_err",
                 "replications", "vacuous_type2", "scope")


def cmd_test_power(args) -> int:
    cfg = _load(args)
    if len(cfg.d) != 1 or len(cfg.s) != 1 or len(cfg.sigma) != 1:
        raise _validation_error("--config: test-power takes a single grid.d, grid.s and grid.sigma")
    d, s, sigma = cfg.d[0], cfg.s[0], cfg.sigma[0]
    if cfg.rho is None:
        raise _validation_error("--config: test-power needs estimator.rho")
    try:
        models = [parse_family(f, d) for f in cfg.family]
    except ValueError as exc:
        raise _validation_error(f"--config: grid.family: {exc}") from None
    outputs = _Outputs(args.out)
    extra = {}
    gamma = cfg.gamma
    if cfg.gamma_grid is None and gamma is None:
        gamma, c_star = calibrate_gamma(models, sigma, s, cfg.rho, cfg.replications, cfg.seed,
                                        shape=cfg.shape[0], threads=args.threads)
        extra = {"calibrated_gamma": gamma, "c_star": c_star}
        print(f"calibrated gamma={gamma:.6g} (C*={c_star:.6g})")
    if cfg.gamma_grid is not None:
        rows = radius_sweep(models, sigma, s, cfg.rho, cfg.replications, cfg.seed,
                            gamma_grid=cfg.gamma_grid, shape=cfg.shape[0], threads=args.threads)
    else:
        grid = cfg.radius if cfg.radius is not None else [separation_radius(gamma, sigma, s, cfg.rho)]
        rows = radius_sweep(models, sigma, s, cfg.rho, cfg.replications, cfg.seed, gamma=gamma,
                            radius_grid=grid, shape=cfg.shape[0], threads=args.threads)
    buf = [",".join(SWEEP_COLUMNS)]
    records = []
    for row in rows:
        rk = row.risk
        rec = {"radius": row.radius, "gamma": row.gamma, "type1": rk.type1, "type2": rk.type2,
               "total": rk.total, "type1_std_err": rk.std_err[0], "type2_std_err": rk.std_err[1],
               "replications": rk.replications, "vacuous_type2": rk.vacuous_type2, "scope": rk.scope}
        records.append(rec)
        buf.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in rec.values()))
        print(f"radius={row.radius:.6g} gamma={row.gamma:.6g} type1={rk.type1:.4f} type2={rk.type2:.4f} "
              f"total={rk.total:.4f} ({rk.scope})")
    outputs.add(cfg.output_csv, "\n".join(buf) + "\n")
    outputs.add(cfg.output_json, json.dumps({"config": cfg.echo(), "results": records, **extra},
                                            indent=2) + "\n")
    outputs.commit()
    return EXIT_OK


# ----------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsenorm",
                                     description="Norm and noise-level estimation for sparse vectors "
                                                 "observed in correlated Gaussian noise.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    est = sub.add_parser("estimate", help="apply one estimator to a single observation vector")
    est.add_argument("--method", choices=METHODS)
    est.add_argument("--adaptive", choices=tuple(ADAPTIVE_ALIASES),
                     help="shorthand for --method n-star, n-star-eta or n-star-star")
    est.add_argument("--sigma-method", choices=("S", "D", "eta"), default="S",
                     help="noise estimator used with --method sigma (default: S)")
    est.add_argument("--data", help="file with one value per line, or a CSV file with --column")
    est.add_argument("--values", help="inline comma-separated observations")
    est.add_argument("--column", help="CSV column name (header row) or 0-based index")
    est.add_argument("--diag", default="unit", help="'unit' or a file of d noise variances (default: unit)")
    est.add_argument("--sigma", type=float, help="known noise level (n-hat, n-tilde)")
    est.add_argument("--s", type=int, help="sparsity level")
    est.add_argument("--frob", type=float, help="Frobenius norm of the noise covariance")
    est.add_argument("--rho", type=float, help="upper bound on the Frobenius norm")
    est.add_argument("--frob-corr", type=float, help="Frobenius norm of the correlation matrix")
    est.add_argument("--eta", type=float, help="confidence parameter of the eta-variants, in (0, 1)")
    est.add_argument("--json", action="store_true", help="print the result as JSON")
    est.add_argument("--out", help="directory to write estimate.json into")

    for name, helptext in (("simulate", "Monte Carlo risk over an experiment grid"),
                           ("rate-curve", "worst-case risk against s, with a log-log SVG"),
                           ("test-power", "risk of the detection test along a radius or gamma grid")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="experiment file (key = value lines)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--replications", type=int, help="override the config replication count")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: CPU count)")

    ver = sub.add_parser("verify-identities", help="Monte Carlo checks of the Gaussian covariance identities")
    ver.add_argument("--seed", type=int, default=20240611)
    ver.add_argument("--replications", type=int, default=1_000_000)
    ver.add_argument("--out", help="output directory for identities.csv and identities.json")
    ver.add_argument("--threads", type=int, default=None)
    return parser


def _dispatch(args) -> int:
    if getattr(args, "threads", None) is not None and args.threads < 1:
        raise _validation_error("--threads: must be >= 1")
    if args.command == "estimate":
        result = cmd_estimate(args)
        _print_estimate(result, args.json)
        outputs = _Outputs(args.out)
        outputs.add("estimate.json", json.dumps(result, indent=2, default=_finite) + "\n")
        outputs.commit()
        return EXIT_OK
    handlers = {"simulate": cmd_simulate, "rate-curve": cmd_rate_curve,
                "verify-identities": cmd_verify_identities, "test-power": cmd_test_power}
    return handlers[args.command](args)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits with 2 on bad usage
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, ConfigValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
