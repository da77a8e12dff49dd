"""Command-line interface: ``analyze``, ``simulate``, ``compare`` and ``sweep``.

Curves go to CSV (``T,Z_m,Z_f``), scalar reports to JSON next to the CSV.
Exit codes: 0 on success, 2 for bad input, 3 for numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .analytic_ppp import SinrCurve, default_thresholds
from .config import ConfigError, Deployment, NetworkConfig, default_config
from .rates import Analysis
from .sim import SimSpec, run
from .specfun import AccuracyError

__all__ = ["main", "build_parser", "InputError"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
CURVE_HEADER = ["T", "Z_m", "Z_f"]
SWEEP_HEADER = ["var", "tau_n", "tau_s", "tau_m", "tau_f"]


class InputError(ValueError):
    """Bad command-line input (exit code 2)."""


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) for v in row])
    return buf.getvalue()


def write_curves(path: Path, macro: SinrCurve, femto: SinrCurve) -> None:
    rows = zip(macro.thresholds, macro.cdf, femto.cdf)
    _atomic_write(path, _csv_text(CURVE_HEADER, rows))


def read_curves(path: Path) -> tuple[SinrCurve, SinrCurve]:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != CURVE_HEADER:
                raise InputError(f"{path}: expected header {','.join(CURVE_HEADER)}")
            data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{path}: malformed number ({exc})") from None
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != 3:
        raise InputError(f"{path}: no data rows")
    try:
        return SinrCurve(data[:, 0], data[:, 1], "Z_m"), SinrCurve(data[:, 0], data[:, 2], "Z_f")
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o).__name__)


def _write_json(path: Path, data: dict) -> None:
    _atomic_write(path, json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


# -- argument handling ------------------------------------------------------------


def _load_config(args) -> NetworkConfig:
    if args.config:
        try:
            cfg = NetworkConfig.load(args.config)
        except OSError as exc:
            raise InputError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"config {args.config} is not valid JSON: {exc}") from None
        except TypeError as exc:
            raise InputError(f"config {args.config}: {exc}") from None
    else:
        cfg = default_config(args.deployment or Deployment.PPP)
    if args.deployment:
        cfg = cfg.replace(deployment=Deployment(args.deployment))
    if args.set:
        cfg = cfg.with_overrides(args.set)
    return cfg


def _thresholds(args) -> np.ndarray:
    if args.thresholds:
        try:
            T = np.array([float(v) for v in args.thresholds.split(",") if v.strip()])
        except ValueError:
            raise InputError("--thresholds must be a comma-separated list of numbers") from None
    else:
        if not (0 < args.t_min <= args.t_max) or args.t_points < 1:
            raise InputError("need 0 < --t-min <= --t-max and --t-points >= 1")
        T = default_thresholds(args.t_points, args.t_min, args.t_max)
    if T.size == 0 or np.any(T <= 0) or np.any(np.diff(T) <= 0):
        raise InputError("thresholds must be positive and strictly ascending")
    return T


def _sim_spec(args, **over) -> SimSpec:
    try:
        return SimSpec(
            window_half_width=args.window_half_width,
            snapshots=args.snapshots,
            seed=args.seed,
            boundary=args.boundary,
            margin=args.margin,
            full_geometry=args.full_geometry,
            n_jobs=args.jobs,
            **over,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON file with NetworkConfig fields")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config field (repeatable); P_m_dBm, P_f_dBm, W_dB, sigma2_dBm accepted")
    p.add_argument("--deployment", choices=[d.value for d in Deployment], help="FAP deployment model")


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--t-min", type=float, default=1e-2, help="smallest SINR threshold (linear)")
    p.add_argument("--t-max", type=float, default=1e2, help="largest SINR threshold (linear)")
    p.add_argument("--t-points", type=int, default=60, help="number of log-spaced thresholds")
    p.add_argument("--thresholds", help="explicit comma-separated thresholds (overrides the grid flags)")


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--snapshots", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window-half-width", type=float, default=2000.0, metavar="M")
    p.add_argument("--boundary", choices=["torus", "guard"], default="torus")
    p.add_argument("--margin", type=float, default=500.0, help="guard-zone width in metres")
    p.add_argument("--full-geometry", action="store_true",
                   help="measure femto-UE interference from the UE's true position")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridfemto", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="analytic SINR CDFs and mean rates")
    _add_config_flags(p)
    _add_grid_flags(p)
    p.add_argument("--out", required=True, metavar="PATH", help="CSV path; the rate report goes to PATH.json")
    p.add_argument("--bits", action="store_true", help="report rates in bits/s/Hz")

    p = sub.add_parser("simulate", help="Monte Carlo SINR CDFs, rates and diagnostics")
    _add_config_flags(p)
    _add_grid_flags(p)
    _add_sim_flags(p)
    p.add_argument("--out", required=True, metavar="PATH", help="CSV path; diagnostics go to PATH.json")
    p.add_argument("--bits", action="store_true")

    p = sub.add_parser("compare", help="distances between two curve CSVs")
    p.add_argument("analytic_csv")
    p.add_argument("empirical_csv")
    p.add_argument("--threshold", type=float, default=0.02, help="sup-norm pass threshold")
    p.add_argument("--out", metavar="PATH", help="also write the report as JSON")

    p = sub.add_parser("sweep", help="rates over M_s or lambda_out")
    _add_config_flags(p)
    p.add_argument("--var", choices=["Ms", "lambda_out"], required=True)
    p.add_argument("--values", help="comma-separated values (default: 0..M for Ms, 1e-5..1e-3 for lambda_out)")
    p.add_argument("--engine", choices=["analytic", "simulate", "both"], default="analytic")
    _add_sim_flags(p)
    p.add_argument("--out", required=True, metavar="PATH",
                   help="CSV path; with --engine both the simulated rows go to PATH-sim.csv")
    p.add_argument("--bits", action="store_true")
    return parser


# -- commands ---------------------------------------------------------------------


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    T = _thresholds(args)
    analysis = Analysis(cfg)
    macro, femto = analysis.curves(T)
    report = analysis.report()
    out = Path(args.out)
    write_curves(out, macro, femto)
    _write_json(_sidecar(out, ".json"), {
        "method": analysis.method,
        "config": cfg.to_dict(),
        "report": report.to_dict(bits=args.bits),
    })
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    T = _thresholds(args)
    res = run(cfg, _sim_spec(args), T)
    if res.macro is None or res.femto is None:
        raise InputError("no tagged UE could be sampled for one of the tiers")
    out = Path(args.out)
    write_curves(out, res.macro, res.femto)
    _write_json(_sidecar(out, ".json"), {
        "config": cfg.to_dict(),
        "report": res.report.to_dict(bits=args.bits),
        "diagnostics": res.diagnostics,
    })
    return EXIT_OK


def compare_curves(a: tuple[SinrCurve, SinrCurve], b: tuple[SinrCurve, SinrCurve], threshold: float) -> dict:
    result = {"threshold": threshold, "curves": {}}
    for name, x, y in zip(("Z_m", "Z_f"), a, b):
        try:
            sup = x.sup_distance(y)
            l1 = x.l1_distance(y)
        except ValueError as exc:
            raise InputError(str(exc)) from None
        result["curves"][name] = {"sup": sup, "l1": l1, "pass": sup <= threshold}
    result["pass"] = all(c["pass"] for c in result["curves"].values())
    return result


def cmd_compare(args) -> int:
    if not args.threshold >= 0:
        raise InputError("--threshold must be non-negative")
    result = compare_curves(read_curves(Path(args.analytic_csv)), read_curves(Path(args.empirical_csv)), args.threshold)
    for name, c in result["curves"].items():
        print(f"{name}: sup={c['sup']:.6g} l1={c['l1']:.6g} {'pass' if c['pass'] else 'FAIL'}")
    print("overall:", "pass" if result["pass"] else "FAIL")
    if args.out:
        _write_json(Path(args.out), result)
    return EXIT_OK


def _sweep_values(args, cfg: NetworkConfig) -> list[float]:
    if args.values is None:
        if args.var == "Ms":
            return list(range(cfg.M + 1))
        return list(np.logspace(-5, -3, 9))
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise InputError("--values must be a comma-separated list of numbers") from None
    if not values:
        raise InputError("--values is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise InputError("--values must be strictly ascending")
    if args.var == "Ms":
        if any(not v.is_integer() or not 0 <= v <= cfg.M for v in values):
            raise InputError(f"Ms values must be integers in 0..{cfg.M}")
        return [int(v) for v in values]
    if any(v < 0 for v in values):
        raise InputError("lambda_out values must be non-negative")
    return values


def _apply(cfg: NetworkConfig, var: str, value) -> NetworkConfig:
    return cfg.replace(M_s=int(value)) if var == "Ms" else cfg.replace(lambda_out=float(value))


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    values = _sweep_values(args, cfg)
    scale = 1.0 / math.log(2.0) if args.bits else 1.0
    out = Path(args.out)
    engines = ["analytic", "simulate"] if args.engine == "both" else [args.engine]
    for engine in engines:
        rows = []
        for v in values:
            c = _apply(cfg, args.var, v)
            if engine == "analytic":
                r = Analysis(c).report()
            else:
                r = run(c, _sim_spec(args), default_thresholds(2)).report
            rows.append((v, r.tau_n * scale, r.tau_s * scale, r.tau_m * scale, r.tau_f * scale))
        path = _sidecar(out, "-sim" + out.suffix) if engine == "simulate" and args.engine == "both" else out
        _atomic_write(path, _csv_text(SWEEP_HEADER, rows))
    return EXIT_OK


_COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "compare": cmd_compare, "sweep": cmd_sweep}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage and 0 for --help
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AccuracyError, ArithmeticError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, RuntimeError) as exc:
        # domain errors raised by the evaluators for legal but unusable configs
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
