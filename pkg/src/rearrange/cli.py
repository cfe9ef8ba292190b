"""Command-line front end.

Every subcommand writes its result to ``--out`` together with a JSON
manifest (inputs, parameters, versions, checks).  Exit codes: 0 when all
checks pass, 2 for invalid configuration or missing input, 3 when a check
fails or a computation cannot meet its accuracy target.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, fixtures
from .acceptance import PRNG_NAME, run_suite
from .energies import (
    DivergentQuadrature,
    KernelSpec,
    gagliardo,
    local_seminorm,
    regularized_energy,
    thin_film_energy,
)
from .good_funcs import (
    InvalidProfile,
    asymmetry_decomposition,
    derivative_local,
    derivative_nonlocal,
    read_profile,
    write_profile,
)
from .grid_functions import InvalidGridFunction, read_gfn, write_gfn
from .height_interp import convexity_curve, height_function, read_rad, write_curve_csv, write_rad
from .symmetrize import (
    DEFAULT_HEIGHTS,
    TauTooLarge,
    TruncationSpec,
    steiner_continuous,
    steiner_full,
    steiner_truncated,
)
from .thinfilm import explicit_solution, stationary_residual

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3


class ConfigInvalid(ValueError):
    pass


class InputMissing(FileNotFoundError):
    pass


def versions() -> dict:
    return {
        "rearrange": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_plain) + "\n")


def _manifest(command, args, inputs, checks, extra=None) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command", "out", "input", "f0", "f1")}
    doc = {
        "command": command,
        "inputs": inputs,
        "parameters": params,
        "versions": versions(),
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    if extra:
        doc.update(extra)
    return doc


def _finish(args, command, inputs, checks, extra=None) -> int:
    doc = _manifest(command, args, inputs, checks, extra)
    if args.out:
        write_json(str(args.out) + ".manifest.json", doc)
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK if doc["passed"] else EXIT_CHECK


def thread_limit():
    """Context capping native thread pools at ``REARRANGE_THREADS`` when set."""
    raw = os.environ.get("REARRANGE_THREADS")
    if raw is None:
        return contextlib.nullcontext()
    try:
        count = int(raw)
    except ValueError:
        count = 0
    if count < 1:
        raise ConfigInvalid(f"REARRANGE_THREADS must be a positive integer, got {raw!r}")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return contextlib.nullcontext()
    return threadpool_limits(limits=count)


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise InputMissing(f"input file {p} does not exist")
    return p


def _axis(value: str):
    if value in ("last", "-1"):
        return -1
    try:
        return int(value)
    except ValueError:
        raise ConfigInvalid(f"--axis must be 'last' or an integer, got {value!r}") from None


# ------------------------------------------------------------ subcommands


def cmd_symmetrize(args) -> int:
    f = read_gfn(_require(args.input))
    axis = _axis(args.axis)
    if args.tau is None:
        g = steiner_full(f, axis, args.heights)
        info = {}
    elif args.h0 is not None:
        g, info = steiner_truncated(f, args.tau, TruncationSpec(args.h0), axis, args.heights, full_output=True)
    else:
        if args.tau < 0:
            raise ConfigInvalid("--tau must be nonnegative")
        g = steiner_continuous(f, args.tau, axis, args.heights)
        info = {}
    write_gfn(g, args.out)
    rel = abs(g.integral() - f.integral()) / max(f.integral(), 1e-300)
    checks = [{"name": "mass preserved", "value": rel, "threshold": 1e-3, "passed": rel <= 1e-3}]
    return _finish(args, "symmetrize", {"input": str(args.input)}, checks, {"truncation": info})


def cmd_energy(args) -> int:
    f = read_gfn(_require(args.input))
    kind = args.functional
    if kind == "gagliardo":
        rep = gagliardo(f, KernelSpec(args.s, args.p))
    elif kind == "regularized":
        rep = regularized_energy(f, KernelSpec(args.s, args.p, args.eps))
    elif kind == "thin-film":
        if args.beta is None:
            raise ConfigInvalid("--beta is required for the thin-film energy")
        rep = thin_film_energy(f, KernelSpec(args.s, 2.0), args.beta)
    else:
        value = local_seminorm(f, args.p)
        result = {"functional": "local", "value": value}
        if args.out:
            write_json(args.out, result)
        return _finish(args, "energy", {"input": str(args.input)}, [], {"result": result})
    record = rep.to_record()
    if args.out:
        write_json(args.out, record)
    return _finish(args, "energy", {"input": str(args.input)}, [], {"result": record})


def cmd_derivative(args) -> int:
    g = read_profile(_require(args.input))
    spec = KernelSpec(args.s, args.p, args.eps)
    if args.kind == "nonlocal":
        value, err = derivative_nonlocal(g, spec, n_heights=args.heights, full_output=True)
        result = {"kind": "nonlocal", "value": value, "error_estimate": err}
        checks = [{"name": "nonpositive", "value": value, "threshold": 3 * err, "passed": value <= 3 * err}]
    elif args.kind == "local":
        out = derivative_local(g, args.p, args.eps_speed, full_output=True)
        result = {"kind": "local", **out}
        checks = [{"name": "nonpositive", "value": out["value"], "threshold": 1e-8 * out["scale"], "passed": out["value"] <= 1e-8 * out["scale"]}]
    else:
        a = asymmetry_decomposition(g, spec)
        result = {"kind": "asymmetry", "plus": a.plus, "zero": a.zero, "minus": a.minus, "value": a.derivative}
        checks = []
    if args.out:
        write_json(args.out, result)
    return _finish(args, "derivative", {"input": str(args.input)}, checks, {"result": result})


def _expected_shape(functional, p, n):
    """Sign the second differences must have, or None when nothing is asserted."""
    if functional in ("hs", "potential"):
        return "convex"
    if functional == "lp":
        return "flat" if p == 2 else ("concave" if p < 2 else "convex")
    if functional == "w1p":
        return "convex" if p >= 2 * n / (n + 1) else None
    return None


def cmd_interpolate(args) -> int:
    f0 = read_rad(_require(args.f0))
    f1 = read_rad(_require(args.f1))
    if f0.n != f1.n:
        raise ConfigInvalid("profiles must have the same dimension")
    H0, H1 = height_function(f0), height_function(f1)
    t = np.linspace(0.0, 1.0, args.t_steps)
    V = (lambda r: r * r) if args.functional == "potential" else None
    curve = convexity_curve(H0, H1, args.functional, t, s=args.s, p=args.p, V=V, grid_n=args.grid_n)
    write_curve_csv(curve, args.out)
    shape = _expected_shape(args.functional, args.p, f0.n)
    sd = curve.second_differences
    if shape == "convex":
        passed = bool(np.all(sd > -1e-8 * curve.scale))
    elif shape == "concave":
        passed = bool(np.all(sd < 1e-8 * curve.scale))
    elif shape == "flat":
        passed = bool(np.max(np.abs(sd)) <= 1e-6 * curve.scale)
    else:
        passed = True
    checks = [{"name": f"second differences {shape or 'reported'}", "value": float(sd.min()), "threshold": 0.0, "passed": passed}]
    return _finish(args, "interpolate", {"f0": str(args.f0), "f1": str(args.f1)}, checks)


def cmd_verify_stationary(args) -> int:
    if args.input:
        prof = read_rad(_require(args.input))
        fit = stationary_residual(prof, args.s)
    else:
        fit = stationary_residual(explicit_solution(args.lam, args.s, args.n))
    result = {
        "a": fit.a,
        "b": fit.b,
        "residual": fit.residual,
        "beta_implied": fit.beta_implied,
        "points": fit.points.tolist(),
        "laplacian": fit.laplacian.tolist(),
    }
    if args.out:
        write_json(args.out, result)
    checks = [{"name": "quadratic fit residual", "value": fit.residual, "threshold": 1e-2, "passed": fit.residual <= 1e-2}]
    return _finish(args, "verify-stationary", {"input": str(args.input) if args.input else None}, checks, {"result": result})


PROFILE_FIXTURES = {
    "triangle": fixtures.triangle_profile,
    "two-bump": fixtures.two_bump_profile,
    "three-bump": fixtures.three_bump_profile,
    "asymmetric-peak": fixtures.asymmetric_peak_profile,
    "two-cones": fixtures.two_cones_profile,
}
RADIAL_FIXTURES = {
    "triangle": fixtures.triangle_radial,
    "parabola": fixtures.parabola_radial,
    "cosine": fixtures.cosine_radial,
    "cone": fixtures.cone_radial,
    "paraboloid": fixtures.paraboloid_radial,
}


def cmd_make_fixture(args) -> int:
    name, fmt = args.name, args.format
    if args.out is None:
        args.out = f"{name}.{'json' if fmt == 'profile' else fmt}"
    if fmt == "gfn":
        params = {}
        if args.grid_n is not None:
            params["grid_n"] = args.grid_n
        if name == "stationary":
            params.update(s=args.s, lam=args.lam)
        if name not in fixtures.GRID_FIXTURES:
            raise fixtures.UnknownFixture(name)
        write_gfn(fixtures.grid_fixture(name, **params), args.out)
    elif fmt == "profile":
        if name not in PROFILE_FIXTURES:
            raise fixtures.UnknownFixture(name)
        write_profile(PROFILE_FIXTURES[name](), args.out)
    else:
        if name == "stationary":
            write_rad(explicit_solution(args.lam, args.s, args.n).profile, args.out)
        elif name in RADIAL_FIXTURES:
            write_rad(RADIAL_FIXTURES[name](), args.out)
        else:
            raise fixtures.UnknownFixture(name)
    return _finish(args, "make-fixture", {}, [], {"fixture": name, "format": fmt})


def cmd_suite(args) -> int:
    if args.suite != "acceptance":
        raise ConfigInvalid(f"unknown suite {args.suite!r}")
    only = None
    if args.only:
        only = {int(x) for x in args.only.split(",")}
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    records = run_suite(args.seed, only=only, log=log)
    doc = {
        "suite": "acceptance",
        "seed": args.seed,
        "prng": PRNG_NAME,
        "versions": versions(),
        "criteria": records,
        "passed": all(r["passed"] for r in records),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "manifest.json", doc)
    for r in records:
        print(f"criterion {r['id']:>2}: {'PASS' if r['passed'] else 'FAIL'}  {r['title']}")
    return EXIT_OK if doc["passed"] else EXIT_CHECK


# ------------------------------------------------------------ parser


def _kernel_flags(p, s=0.3, pp=2.0, eps=0.0):
    p.add_argument("--s", type=float, default=s, help="fractional order in (0, 1)")
    p.add_argument("--p", type=float, default=pp, help="integrability exponent")
    p.add_argument("--eps", type=float, default=eps, help="kernel regularization")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rearrange", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("symmetrize", help="continuous, truncated or full Steiner symmetrization of a .gfn grid")
    p.add_argument("--input", required=True)
    p.add_argument("--tau", type=float, help="symmetrization time; omit for the full rearrangement")
    p.add_argument("--h0", type=float, help="truncation height (slows levels below h0)")
    p.add_argument("--axis", default="last")
    p.add_argument("--heights", type=int, default=DEFAULT_HEIGHTS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_symmetrize)

    p = sub.add_parser("energy", help="seminorms and energies of a .gfn grid")
    p.add_argument("--input", required=True)
    p.add_argument("--functional", choices=["gagliardo", "regularized", "local", "thin-film"], default="gagliardo")
    _kernel_flags(p)
    p.add_argument("--beta", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("derivative", help="derivatives at tau = 0 for a good-profile file")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=["nonlocal", "local", "asymmetry"], default="nonlocal")
    _kernel_flags(p, eps=1e-2)
    p.add_argument("--eps-speed", type=float, default=0.05)
    p.add_argument("--heights", type=int, default=256)
    p.add_argument("--out")
    p.set_defaults(func=cmd_derivative)

    p = sub.add_parser("interpolate", help="functional along the height interpolation of two .rad profiles")
    p.add_argument("--f0", required=True)
    p.add_argument("--f1", required=True)
    p.add_argument("--functional", choices=["hs", "lp", "w1p", "potential"], required=True)
    _kernel_flags(p)
    p.add_argument("--t-steps", type=int, default=21)
    p.add_argument("--grid-n", type=int, default=2049)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("verify-stationary", help="quadratic fit of the fractional Laplacian of a stationary profile")
    p.add_argument("--input", help=".rad profile; defaults to the explicit solution")
    p.add_argument("--s", type=float, default=0.25)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1, choices=[1, 2])
    p.add_argument("--beta", type=float, help="recorded only; the fit reports the implied value")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_stationary)

    p = sub.add_parser("make-fixture", help="write a named test function")
    p.add_argument("name")
    p.add_argument("--format", choices=["gfn", "profile", "rad"], default="gfn")
    p.add_argument("--grid-n", type=int)
    p.add_argument("--s", type=float, default=0.25)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1, choices=[1, 2])
    p.add_argument("--out", help="defaults to NAME.gfn, NAME.json or NAME.rad")
    p.set_defaults(func=cmd_make_fixture)

    p = sub.add_parser("suite", help="run a check suite and write a manifest")
    p.add_argument("suite", choices=["acceptance"])
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--only", help="comma-separated criterion ids")
    p.add_argument("--out", default="acceptance-report")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with thread_limit():
            return args.func(args)
    except fixtures.UnknownFixture as exc:
        print(f"rearrange {args.command}: unknown fixture {exc.args[0]!r}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigInvalid, InputMissing, InvalidGridFunction, InvalidProfile, TauTooLarge) as exc:
        print(f"rearrange {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergentQuadrature as exc:
        print(f"rearrange {args.command}: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except ValueError as exc:
        print(f"rearrange {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
