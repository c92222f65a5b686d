"""Command-line front end: ``schatten-lab <command> [options]``.

Exit codes: 0 success, 1 a check failed, 2 usage error, 3 numerical failure.
JSON results carry a ``manifest`` record; CSV and matrix outputs written with
``--out`` get a ``*.manifest.json`` next to them (on stdout the manifest goes
to stderr as one JSON line).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .equilibrium import EqProblem, solve_equilibrium
from .errors import ConvergenceError, DomainError, UnsupportedError
from .geometry import (
    INF,
    MatShape,
    check_p,
    schatten_inf_log_volume,
    schatten_p_volume_radius_asymptotic,
    scaled_ball_log_volume,
    volume_radius_limit_inf,
)
from .limit_laws import FAMILIES, LimitDensity, b_constant, density_curve_csv
from .sampling import (
    McmcConfig,
    MatrixSample,
    RngStream,
    dump_matrix,
    parse_matrix,
    schatten_inf_ball_batch,
    schatten_p_sample_batch,
    stiefel_uniform_batch,
)
from .schemas import SCHEMA_VERSION
from .special_fn import LogValue, euclidean_ball_log_volume
from .spectral import empirical_spectrum_measure
from .stats_checks import clt_inner_product_check, lln_check, pmb_check, polar_independence_check

log = logging.getLogger("schatten_lab")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get("SCHATTEN_LAB_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"SCHATTEN_LAB_SEED must be an integer, got {raw!r}") from None


def _timestamp(record_time: bool):
    # SOURCE_DATE_EPOCH pins the time for reproducible artifacts
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        return datetime.fromtimestamp(int(epoch), timezone.utc).isoformat()
    if record_time:
        return datetime.now(timezone.utc).isoformat()
    return None


def run_manifest(args) -> dict:
    params = {k: _p_json(v) if isinstance(v, float) else v
              for k, v in sorted(vars(args).items()) if k not in ("func", "record_time", "command")}
    return {
        "command": args.command,
        "parameters": params,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "timestamp": _timestamp(getattr(args, "record_time", False)),
    }


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def _emit_json(args, payload: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "manifest": run_manifest(args), **payload}
    text = _dumps(doc) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_text(args, text: str) -> None:
    manifest = _dumps(run_manifest(args)) + "\n"
    if getattr(args, "out", None):
        out = Path(args.out)
        out.write_text(text)
        Path(str(out) + ".manifest.json").write_text(manifest)
    else:
        sys.stdout.write(text)
        sys.stderr.write(manifest)


def _p_arg(text: str) -> float:
    try:
        return check_p(text)
    except (DomainError, ValueError):
        raise argparse.ArgumentTypeError(f"invalid Schatten index {text!r}") from None


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _p_json(p: float):
    return "inf" if p == INF else p


def _shape(args) -> MatShape:
    try:
        return MatShape(args.m, args.n)
    except DomainError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------- commands


def cmd_volume(args) -> int:
    shape = _shape(args)
    beta, p = args.beta, args.p
    d = shape.real_dim(beta)
    if p == INF:
        log_v = schatten_inf_log_volume(shape, beta).log_mag
    elif p == 2:
        log_v = euclidean_ball_log_volume(d)
    else:
        raise UsageError("volume supports --p inf or --p 2")
    if args.scaled is not None:
        if len(args.scaled) != shape.m:
            raise UsageError(f"--scaled needs {shape.m} singular values")
        # r B for an m x m matrix r: the determinant of x -> r x is |det r|^{beta n}
        log_v = scaled_ball_log_volume(args.scaled, shape, beta).log_mag - \
            schatten_inf_log_volume(shape, beta).log_mag + log_v
    value = LogValue.from_log(log_v).to_real()
    exponent = 0.5 if p == INF else 0.5 + 1 / p
    payload = {
        "log_volume": log_v,
        "volume_if_representable": value if math.isfinite(value) and value > 0 else None,
        "radius": math.exp(exponent * math.log(beta * shape.n) + log_v / d),
    }
    if args.asymptotic:
        c = shape.m / shape.n
        if p == INF:
            payload["asymptotic_radius"] = volume_radius_limit_inf(c, beta)
        else:
            payload["asymptotic_radius"] = schatten_p_volume_radius_asymptotic(c, p, b_constant(c, p), beta)
    _emit_json(args, payload)
    return EXIT_OK


def cmd_sample(args) -> int:
    shape = _shape(args)
    beta, p, mode = args.beta, args.p, args.mode
    rng = RngStream(args.seed)
    cfg = McmcConfig(burn_in=args.mcmc_burnin, thinning=args.mcmc_thin)
    warning = None
    if mode == "stiefel":
        draws = stiefel_uniform_batch(shape.n, shape.m, beta, args.count, rng)
        label = "stiefel"
    elif p == INF:
        draws = schatten_inf_ball_batch(shape, beta, args.count, rng)
        if mode == "cone":
            draws = draws / np.linalg.norm(draws, ord=2, axis=(1, 2))[:, None, None]
        label = f"schatten_inf_{mode}"
    else:
        draws, res = schatten_p_sample_batch(shape, beta, p, mode, args.count, rng, cfg)
        label = f"schatten_{p:g}_{mode}"
        if not res.converged:
            warning = f"MCMC convergence diagnostic failed (split-Rhat {res.rhat})"
            log.warning(warning)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(args.count - 1)))
    for i, x in enumerate(draws):
        sample = MatrixSample(x, beta, label, args.seed)
        (out / f"sample_{i:0{width}d}.txt").write_text(dump_matrix(sample))
    manifest = run_manifest(args)
    manifest["warning"] = warning
    (out / "manifest.json").write_text(_dumps(manifest) + "\n")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    try:
        sample = parse_matrix(Path(args.input).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read matrix dump {args.input}: {exc}") from None
    measure = empirical_spectrum_measure(sample, args.p, args.scaling)
    _emit_text(args, measure.to_csv())
    return EXIT_OK


def cmd_density(args) -> int:
    _emit_text(args, density_curve_csv(LimitDensity(args.family, args.c), args.points))
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    sol = solve_equilibrium(EqProblem(args.c, args.p, args.grid))
    _emit_json(args, json.loads(sol.to_json()))
    return EXIT_OK


_CHECK_DEFAULTS = {
    "pmb": {"m": 2, "k": 1, "n_list": [8, 32, 128], "dist": "stiefel", "samples": 5000, "threshold": 0.03},
    "clt": {"m": 2, "n_list": [16, 64, 256], "dist": "stiefel", "samples": 5000, "threshold": 0.03},
    "lln": {"c": 1.0, "p": INF, "n_list": [50, 100, 200], "dist": "ball", "threshold": None},
    "polar": {"m": 2, "n": 3, "p": INF, "samples": 2000, "law": "ball"},
}


def cmd_check(args) -> int:
    for key, value in _CHECK_DEFAULTS[args.name].items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    rng = RngStream(args.seed)
    if args.name == "pmb":
        report = pmb_check(args.m, args.k, args.n_list, args.beta, args.dist, args.samples, rng,
                           args.threshold, args.threads)
    elif args.name == "clt":
        report = clt_inner_product_check(args.m, args.n_list, args.beta, args.dist, args.samples, rng,
                                         args.threshold, args.threads)
    elif args.name == "lln":
        dist = "ball" if args.dist not in ("ball", "cone") else args.dist
        report = lln_check(args.c, args.p, args.n_list, args.beta, dist, rng,
                           threshold=args.threshold, threads=args.threads)
    else:
        report = polar_independence_check((args.m, args.n), args.beta, args.p, args.samples, rng, args.law)
    line = report.to_json_line() + "\n"
    if args.out:
        Path(args.out).write_text(line)
        Path(str(args.out) + ".manifest.json").write_text(_dumps(run_manifest(args)) + "\n")
    else:
        sys.stdout.write(line)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schatten-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=1, help="cap on worker threads")
    parser.add_argument("--record-time", action="store_true",
                        help="store the wall-clock time in manifests (breaks byte identity)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def shape_flags(p, m=None, n=None):
        p.add_argument("--m", type=int, required=m is None, default=m)
        p.add_argument("--n", type=int, required=n is None, default=n)
        p.add_argument("--beta", type=int, choices=(1, 2), default=1)

    vol = sub.add_parser("volume", help="volume of the Schatten-inf (or Frobenius) unit ball")
    shape_flags(vol)
    vol.add_argument("--p", type=_p_arg, default=INF, help="inf (default) or 2")
    vol.add_argument("--scaled", type=_float_list, help="singular values of r for the body r B")
    vol.add_argument("--asymptotic", action="store_true", help="also report the large-n radius")
    vol.add_argument("--out")
    vol.set_defaults(func=cmd_volume)

    smp = sub.add_parser("sample", help="write matrix dumps from a Schatten ball, sphere or Stiefel manifold")
    shape_flags(smp)
    smp.add_argument("--p", type=_p_arg, default=INF)
    smp.add_argument("--mode", choices=("ball", "cone", "stiefel"), default="ball")
    smp.add_argument("--count", type=int, default=1)
    smp.add_argument("--seed", type=int, default=None)
    smp.add_argument("--mcmc-burnin", type=int, default=1000)
    smp.add_argument("--mcmc-thin", type=int, default=10)
    smp.add_argument("--out", default="samples", help="output directory")
    smp.set_defaults(func=cmd_sample)

    spec = sub.add_parser("spectrum", help="empirical singular-value measure of a matrix dump (CSV)")
    spec.add_argument("--input", required=True)
    spec.add_argument("--p", type=_p_arg, default=INF)
    spec.add_argument("--scaling", choices=("none", "m_pow"), default="none")
    spec.add_argument("--out")
    spec.set_defaults(func=cmd_spectrum)

    den = sub.add_parser("density", help="limiting density curve (CSV)")
    den.add_argument("--family", choices=FAMILIES, required=True)
    den.add_argument("--c", type=float, required=True)
    den.add_argument("--points", type=int, default=1000)
    den.add_argument("--out")
    den.set_defaults(func=cmd_density)

    eq = sub.add_parser("equilibrium", help="numerical minimizer of the log-gas energy (JSON)")
    eq.add_argument("--c", type=float, required=True)
    eq.add_argument("--p", type=_p_arg, required=True)
    eq.add_argument("--grid", type=int, default=400)
    eq.add_argument("--out")
    eq.set_defaults(func=cmd_equilibrium)

    chk = sub.add_parser("check", help="run a statistical check (JSON line; exit 1 on failure)")
    chk.add_argument("--name", choices=tuple(_CHECK_DEFAULTS), required=True)
    chk.add_argument("--m", type=int)
    chk.add_argument("--n", type=int)
    chk.add_argument("--k", type=int)
    chk.add_argument("--beta", type=int, choices=(1, 2), default=1)
    chk.add_argument("--n-list", type=_int_list)
    chk.add_argument("--dist", choices=("ball", "sphere", "stiefel", "cone"))
    chk.add_argument("--law", choices=("ball", "gaussian", "dependent"))
    chk.add_argument("--samples", type=int)
    chk.add_argument("--c", type=float)
    chk.add_argument("--p", type=_p_arg)
    chk.add_argument("--threshold", type=float)
    chk.add_argument("--seed", type=int, default=None)
    chk.add_argument("--out")
    chk.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except (UsageError, DomainError, UnsupportedError) as exc:
        sys.stderr.write(f"schatten-lab {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except (ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"schatten-lab {args.command}: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
