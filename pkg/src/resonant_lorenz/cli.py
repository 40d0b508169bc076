"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(divergence where a bounded orbit was required, solver incompatibility).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import shlex
import sys
from pathlib import Path

from . import __version__
from .analysis import Axis, finite_time_splitting, sweep
from .config import config_hash, parse_config
from .errors import (
    DegenerateScale,
    IncompatibleParity,
    InvariantViolation,
    NoConvergence,
    OrbitDiverged,
    OutOfRange,
    OutsideDomain,
    ParseError,
    PrecisionLoss,
)
from .henon3d import (
    ClassifyOptions,
    HenonParams,
    classify_attractor,
    find_resonant_degeneracy,
    henon_fixed_points,
    limit_to_henon_coords,
    lyapunov_spectrum,
)
from .model_family import Unfolding, default_model
from .rescaling import (
    RescaledParams,
    build_conjugacy,
    residual_c0_c1,
    solve_unfolding,
    theorem_parameters,
)

NUMERICAL_ERRORS = (
    DegenerateScale,
    OrbitDiverged,
    IncompatibleParity,
    PrecisionLoss,
    NoConvergence,
    OutOfRange,
    OutsideDomain,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def render(records: list[dict], fmt: str, header: list[str]) -> str:
    if fmt == "json":
        data = [{k: _json_value(v) for k, v in r.items()} for r in records]
        return json.dumps(data, indent=1) + "\n"
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    if records:
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(records[0].keys())
        for r in records:
            writer.writerow(_fmt(v) for v in r.values())
    return buf.getvalue()


def _triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated reals, got {text!r}")
    return tuple(float(p) for p in parts)


def _int_list(text: str) -> list[int]:
    return [int(p) for p in text.split(",") if p.strip()]


def _axis(text: str) -> Axis:
    try:
        name, rng = text.split("=", 1)
        lo, hi, steps = rng.split(":")
        return Axis(name.strip(), float(lo), float(hi), int(steps))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected name=from:to:steps, got {text!r}") from exc


def _henon_args(p, required=True):
    p.add_argument("--m1", type=float, required=required)
    p.add_argument("--m2", type=float, required=required)
    p.add_argument("--b", type=float, required=required)


def _orbit_args(p, transient=10_000, n=1_000_000):
    p.add_argument("--x0", type=_triple, default=(0.1, 0.1, 0.1))
    p.add_argument("--transient", type=int, default=transient)
    p.add_argument("--n", type=int, default=n)
    p.add_argument("--diverge-at", type=float, default=1e3)


def _model_args(p):
    p.add_argument("--config", type=Path, help="model file; the default model if omitted")
    p.add_argument("--M1", type=float)
    p.add_argument("--M2", type=float)
    p.add_argument("--B", type=float)
    p.add_argument("--exact-mu1", action="store_true", help="keep mu1 in extended precision")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="resonant-lorenz", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    out = _Parser(add_help=False)
    out.add_argument("--out", type=Path, help="output file (stdout if omitted)")
    out.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("iterate", parents=[out], help="record a Henon orbit")
    _henon_args(p)
    _orbit_args(p, transient=0, n=1000)

    p = sub.add_parser("lyapunov", parents=[out], help="Lyapunov spectrum of a Henon orbit")
    _henon_args(p)
    _orbit_args(p)
    p.add_argument("--stderr-tol", type=float, default=1e-2)

    p = sub.add_parser("fixed-points", parents=[out], help="fixed points and multipliers")
    _henon_args(p, required=False)
    p.add_argument("--resonant", action="store_true", help="use the (-1,-1,+1) degeneracy point")

    p = sub.add_parser("classify", parents=[out], help="classify the attractor of an orbit")
    _henon_args(p)
    _orbit_args(p)

    p = sub.add_parser("sweep", parents=[out], help="classify a two-parameter grid")
    _henon_args(p, required=False)
    _orbit_args(p)
    p.add_argument("--p1", type=_axis, required=True, help="name=from:to:steps")
    p.add_argument("--p2", type=_axis, required=True, help="name=from:to:steps")
    p.add_argument("--threads", type=int)

    p = sub.add_parser("return-map", parents=[out], help="iterate the rescaled return map")
    _model_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mu", type=_triple, help="unfolding mu1,mu2,mu3 (instead of a target)")
    _orbit_args(p, transient=1000, n=10_000)
    p.add_argument("--lyapunov", action="store_true", help="report exponents instead of states")

    p = sub.add_parser("verify-rescaling", parents=[out], help="residual table over k")
    _model_args(p)
    p.add_argument("--k", type=_int_list, default=[7, 9, 11, 13])
    p.add_argument("--box", type=float, default=2.0)
    p.add_argument("--step", type=float, default=0.5)

    p = sub.add_parser("delta-k", parents=[out], help="unfolding realizing target parameters")
    _model_args(p)
    p.add_argument("--k", type=int, required=True)

    p = sub.add_parser("splitting", parents=[out], help="finite-time splitting indicators")
    _henon_args(p)
    _orbit_args(p, n=100_000)
    p.add_argument("--window", type=int, default=100)
    return parser


# ---------------------------------------------------------------------------


def _load_model(args):
    if args.config is None:
        return default_model(), None
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    return parse_config(text), text


def _target(args) -> RescaledParams:
    if None in (args.M1, args.M2, args.B):
        raise UsageError("--M1, --M2 and --B are required")
    return RescaledParams(args.M1, args.M2, args.B)


def _henon(args) -> HenonParams:
    return HenonParams(args.m1, args.m2, args.b)


def _lyap_record(res, b=None) -> dict:
    rec = {
        "l1": res.exponents[0],
        "l2": res.exponents[1],
        "l3": res.exponents[2],
        "sum": sum(res.exponents),
    }
    if b is not None:
        rec["ln_abs_b"] = math.log(abs(b)) if b else -math.inf
    rec.update(
        stderr_max=res.stderr_max,
        n=res.n_iterations,
        transient=res.n_transient,
        converged=res.converged,
    )
    return rec


def cmd_iterate(args):
    orbit = _henon(args).as_map().iterate(args.x0, args.transient, args.n, args.diverge_at)
    if orbit.diverged:
        raise OrbitDiverged(orbit.diverged_step, args.diverge_at)
    first = args.transient + 1
    return [
        {"n": first + i, "x": float(s[0]), "y": float(s[1]), "z": float(s[2])}
        for i, s in enumerate(orbit.states)
    ]


def cmd_lyapunov(args):
    p = _henon(args)
    res = lyapunov_spectrum(
        p, args.x0, args.transient, args.n, diverge_at=args.diverge_at, stderr_tol=args.stderr_tol
    )
    return [_lyap_record(res, p.b)]


def cmd_fixed_points(args):
    if args.resonant:
        p, _ = find_resonant_degeneracy()
    elif None in (args.m1, args.m2, args.b):
        raise UsageError("--m1, --m2 and --b are required unless --resonant is given")
    else:
        p = _henon(args)
    rows = []
    for fp in henon_fixed_points(p):
        rec = {"m1": p.m1, "m2": p.m2, "b": p.b, "z": fp.state.z, "multiplicity": fp.multiplicity}
        for i, mu in enumerate(fp.multipliers, start=1):
            rec[f"mu{i}_re"] = float(mu.real)
            rec[f"mu{i}_im"] = float(mu.imag)
        rows.append(rec)
    return rows


def _classify_opts(args) -> ClassifyOptions:
    return ClassifyOptions(args.transient, args.n, args.diverge_at)


def cmd_classify(args):
    res = classify_attractor(_henon(args), args.x0, _classify_opts(args))
    return [
        {
            "class": res.kind.value,
            "lmax": res.lyapunov.leading if res.lyapunov else math.nan,
            "threshold": res.threshold if res.lyapunov else math.nan,
            "escape_step": res.step,
        }
    ]


def cmd_sweep(args):
    names = {args.p1.name, args.p2.name}
    if not names <= {"m1", "m2", "b"} or len(names) != 2:
        raise UsageError("--p1 and --p2 must name two different parameters among m1, m2, b")
    fixed = {}
    for name in {"m1", "m2", "b"} - names:
        val = getattr(args, name)
        if val is None:
            raise UsageError(f"--{name} is required when it is not swept")
        fixed[name] = val
    res = sweep(args.p1, args.p2, fixed, args.x0, _classify_opts(args), threads=args.threads)
    return [
        {
            "p1": c.p1,
            "p2": c.p2,
            "lmax": c.lmax,
            "class": c.kind.value,
            "escape_step": c.escape_step,
        }
        for c in res.cells
    ]


def _unfolding(args, spec, k) -> Unfolding:
    if getattr(args, "mu", None) is not None:
        return Unfolding(*args.mu)
    return solve_unfolding(spec, k, _target(args), exact_mu1=args.exact_mu1)


def cmd_return_map(args):
    spec, _ = _load_model(args)
    u = _unfolding(args, spec, args.k)
    qmap = build_conjugacy(spec, u, args.k).as_map()
    # rescaled coordinates are (X1, X2, Y); the permutation is an involution
    x0 = limit_to_henon_coords(args.x0)
    if args.lyapunov:
        res = qmap.lyapunov(x0, args.transient, args.n, diverge_at=args.diverge_at)
        return [_lyap_record(res)]
    orbit = qmap.iterate(x0, args.transient, args.n, args.diverge_at)
    if orbit.diverged:
        raise OrbitDiverged(orbit.diverged_step, args.diverge_at)
    rows = []
    for i, X in enumerate(orbit.states):
        x, y, z = limit_to_henon_coords(X)
        rows.append({"n": args.transient + 1 + i, "x": float(x), "y": float(y), "z": float(z)})
    return rows


def cmd_verify_rescaling(args):
    spec, _ = _load_model(args)
    target = _target(args)
    rows = []
    for k in args.k:
        u = solve_unfolding(spec, k, target, exact_mu1=args.exact_mu1)
        c0, c1 = residual_c0_c1(spec, u, k, box=args.box, step=args.step)
        P = theorem_parameters(spec, u, k)
        rows.append(
            {
                "k": k,
                "c0": c0,
                "c1": c1,
                "M1": P.M1,
                "M2": P.M2,
                "B": P.B,
                "mu1": float(u.mu1),
                "mu2": u.mu2,
                "mu3": u.mu3,
            }
        )
    return rows


def cmd_delta_k(args):
    spec, _ = _load_model(args)
    target = _target(args)
    u = solve_unfolding(spec, args.k, target, exact_mu1=args.exact_mu1)
    P = theorem_parameters(spec, u, args.k)
    err = max(abs(g - w) / max(abs(w), 1.0) for g, w in zip(P, target))
    lam1 = build_conjugacy(spec, u, args.k).lambda1
    return [
        {
            "k": args.k,
            "mu1": float(u.mu1),
            "mu2": u.mu2,
            "mu3": u.mu3,
            "M1": P.M1,
            "M2": P.M2,
            "B": P.B,
            "roundtrip_error": err,
            "tolerance": 10.0 * lam1**args.k,
        }
    ]


def cmd_splitting(args):
    rep = finite_time_splitting(
        _henon(args).as_map(),
        args.x0,
        args.transient,
        args.n,
        args.window,
        diverge_at=args.diverge_at,
    )
    return [
        {
            "window_length": rep.window_length,
            "n_windows": rep.n_windows,
            "sigma_est": rep.sigma_est,
            "nu_est": rep.nu_est,
            "min_split_gap": rep.min_split_gap,
            "fraction_pass": rep.fraction_pass,
            "mean_volume_log_rate": rep.mean_volume_log_rate,
            "mean_eu_volume_log_rate": rep.mean_eu_volume_log_rate,
        }
    ]


COMMANDS = {
    "iterate": cmd_iterate,
    "lyapunov": cmd_lyapunov,
    "fixed-points": cmd_fixed_points,
    "classify": cmd_classify,
    "sweep": cmd_sweep,
    "return-map": cmd_return_map,
    "verify-rescaling": cmd_verify_rescaling,
    "delta-k": cmd_delta_k,
    "splitting": cmd_splitting,
}


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        records = COMMANDS[args.command](args)
        cfg_text = None
        if getattr(args, "config", None) is not None:
            cfg_text = args.config.read_text(encoding="utf-8")
        header = [
            f"resonant-lorenz {__version__}",
            "command: " + shlex.join(["resonant-lorenz", *argv]),
            f"config_sha256: {config_hash(cfg_text)}",
        ]
        text = render(records, args.format, header)
        if args.out is None:
            stdout.write(text)
        else:
            args.out.write_text(text, encoding="utf-8")
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (UsageError, ParseError, InvariantViolation, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=stderr)
        return 2
    return 0


def main():
    sys.exit(run())
