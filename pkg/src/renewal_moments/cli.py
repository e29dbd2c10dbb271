"""``renewal-moments`` command line front end.

Exit status: 0 success (or all verify checks pass), 1 verify check failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .checks import DEFAULT_REPLICATIONS, run_checks
from .distributions import DIST_GRAMMAR, DistSpecError, SeedSpec, analytic_profile, parse_dist
from .matching import estimate_T_b_grid, fit_T_b_scaling, lemma1_expectation_check
from .moments import DEFAULT_MAX_A, OrderInsufficientError, exact_pair_moment
from .montecarlo import GridError, bootstrap_std_error, estimate_moment_grid, fit_scaling_exponent, simulate_paths

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2
SUBCOMMANDS = ("exact", "simulate", "matching", "scaling", "verify")

# stream ids per subcommand keep sub-runs independent of each other
_STREAMS = {"simulate": 1, "matching": 2, "lemma1": 3, "scaling": 4}


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    return values


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dist", default="exp", help=DIST_GRAMMAR)
    common.add_argument("--rate", default="1", help="arrival rate lambda > 0")
    common.add_argument("--a", type=int, help="even moment order (exact engine)")
    common.add_argument("--b", type=float, help="real exponent b > 0")
    common.add_argument("--k", type=int)
    common.add_argument("--r", type=int, default=0, help="index shift r >= 0")
    common.add_argument("--n", type=int, help="number of sensors of each color")
    common.add_argument("--k-grid", type=_int_list)
    common.add_argument("--n-grid", type=_int_list)
    common.add_argument("--replications", type=int)
    common.add_argument("--seed", type=_u64, default=0)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", type=Path)
    common.add_argument("--workers", type=int, default=1, help="threads; never changes results")
    common.add_argument("--config", type=Path, help="flat JSON file mirroring the flags")
    common.add_argument("--mode", choices=("moment", "matching"), default="moment", help="scaling target")
    common.add_argument("--permutations", action="store_true", help="matching: emit the Lemma 1 permutation table")
    common.add_argument("--bootstrap", type=int, default=0, help="simulate: bootstrap resamples for diagnostics")
    common.add_argument("--allow-large", action="store_true", help="lift the default caps on a and sigma")

    parser = argparse.ArgumentParser(
        prog="renewal-moments",
        description="Moments between two i.i.d. renewal processes and bicolored matching costs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        cfg = json.loads(args.config.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"--config: cannot read {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("--config: expected a flat JSON object")
    known = vars(args)
    defaults = {}
    for key, value in cfg.items():
        dest = key.lstrip("-").replace("-", "_")
        if dest not in known or dest in ("config", "command"):
            raise UsageError(f"--config: unknown key {key!r}")
        if dest in ("k_grid", "n_grid") and isinstance(value, str):
            value = _int_list(value)
        defaults[dest] = value
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub_action.choices[args.command].set_defaults(**defaults)
    # flags on the command line still win over the file
    return parser.parse_args(argv)


def _provenance(args: argparse.Namespace) -> dict:
    keys = ("command", "dist", "rate", "a", "b", "k", "r", "n", "k_grid", "n_grid", "replications", "seed",
            "mode", "permutations", "bootstrap", "allow_large")
    cfg = {key: getattr(args, key) for key in keys}
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return {
        "config_hash": hashlib.sha256(blob).hexdigest()[:16],
        "seed": args.seed,
        "versions": f"renewal_moments={__version__};numpy={np.__version__}",
    }


def _decimal_str(x: Fraction, digits: int = 30) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    with localcontext() as ctx:
        ctx.prec = digits
        return str(Decimal(x.numerator) / Decimal(x.denominator))


def _spec(args):
    try:
        return parse_dist(args.dist, rate=args.rate, allow_large=args.allow_large)
    except DistSpecError as exc:
        raise UsageError(f"--dist/--rate: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"--dist: {exc}") from None


def _replications(args) -> int:
    reps = DEFAULT_REPLICATIONS if args.replications is None else args.replications
    if reps < 100:
        raise UsageError(f"--replications must be >= 100, got {reps}")
    return reps


def _b(args) -> float:
    if args.b is None or not args.b > 0:
        raise UsageError("--b must be a positive real")
    return args.b


def _grid(args, single: str, grid: str) -> list[int]:
    values = getattr(args, grid.replace("-", "_"))
    if values is None:
        one = getattr(args, single)
        if one is None:
            raise UsageError(f"one of --{single} or --{grid} is required")
        values = [one]
    if not values:
        raise UsageError(f"--{grid} is empty")
    if any(v < 1 for v in values):
        raise UsageError(f"--{single}/--{grid} values must be positive integers")
    return values


def run_exact(args) -> list[dict]:
    spec = _spec(args)
    if args.a is None or args.a < 2 or args.a % 2:
        raise UsageError(f"--a must be an even integer >= 2 (exact engine), got {args.a}")
    max_a = None if args.allow_large else DEFAULT_MAX_A
    if max_a is not None and args.a > max_a:
        raise UsageError(f"--a {args.a} exceeds the cap {max_a}; pass --allow-large")
    profile = analytic_profile(
        parse_dist(args.dist, rate=args.rate, max_order=max(args.a, 2), allow_large=True)
    )
    rows = []
    for k in _grid(args, "k", "k-grid"):
        try:
            res = exact_pair_moment(args.a, k, profile, max_a=max_a).at_rate(spec.rate)
        except OrderInsufficientError as exc:
            raise UsageError(f"--a: {exc}") from None
        rows.append({
            "family": spec.label, "rate": str(args.rate), "a": args.a, "k": k,
            "value": _decimal_str(res.value),
            "value_numerator": str(res.value.numerator),
            "value_denominator": str(res.value.denominator),
            "leading_term": _decimal_str(res.leading_term),
            "remainder": _decimal_str(res.remainder),
            "ill_conditioned": profile.ill_conditioned,
        })
    return rows


def run_simulate(args) -> list[dict]:
    spec, b, reps = _spec(args), _b(args), _replications(args)
    ks = _grid(args, "k", "k-grid")
    if args.r < 0:
        raise UsageError("--r must be >= 0")
    seed = SeedSpec(args.seed, _STREAMS["simulate"])
    ests = estimate_moment_grid(spec, [b], ks, reps, seed, lambda k: args.r, args.workers)
    rows = []
    for k in ks:
        e = ests[(b, k)]
        row = {"family": spec.label, "rate": str(args.rate), "b": b, "k": k, "r": e.r,
               "mean": e.mean, "std_error": e.std_error, "replications": e.replications}
        if args.bootstrap:
            values = simulate_paths(spec, reps, seed, k + args.r, k,
                                    lambda sx, st: np.abs(sx[:, k + args.r - 1] - st[:, k - 1]) ** b)
            row["bootstrap_std_error"] = bootstrap_std_error(values[:, 0], args.bootstrap, seed) * spec.rate_float ** (-b)
        rows.append(row)
    return rows


def run_matching(args) -> list[dict]:
    spec, b, reps = _spec(args), _b(args), _replications(args)
    ns = _grid(args, "n", "n-grid")
    if args.permutations:
        if len(ns) != 1:
            raise UsageError("--permutations takes a single --n")
        try:
            table = lemma1_expectation_check(ns[0], b, spec, reps, SeedSpec(args.seed, _STREAMS["lemma1"]),
                                             args.workers)
        except ValueError as exc:
            raise UsageError(f"--n: {exc}") from None
        return [{"family": spec.label, "rate": str(args.rate), "b": b, "n": ns[0],
                 "permutation": list(row.permutation), "mean": row.mean, "std_error": row.std_error,
                 "gap": row.gap, "gap_std_error": row.gap_std_error, "replications": reps}
                for row in table]
    ests = estimate_T_b_grid(b, ns, spec, reps, SeedSpec(args.seed, _STREAMS["matching"]), args.workers)
    return [{"family": spec.label, "rate": str(args.rate), "b": b, "n": n, "mean": ests[n].mean,
             "std_error": ests[n].std_error, "replications": reps} for n in ns]


def run_scaling(args) -> list[dict]:
    spec, b, reps = _spec(args), _b(args), _replications(args)
    seed = SeedSpec(args.seed, _STREAMS["scaling"])
    try:
        if args.mode == "moment":
            grid = args.k_grid
            if not grid:
                raise UsageError("--k-grid is required and must be non-empty")
            fit = fit_scaling_exponent(b, grid, spec, reps, seed, r_rule=args.r, workers=args.workers)
        else:
            grid = args.n_grid
            if not grid:
                raise UsageError("--n-grid is required and must be non-empty")
            fit = fit_T_b_scaling(b, grid, spec, reps, seed, args.workers)
    except GridError as exc:
        raise UsageError(str(exc)) from None
    return [{"mode": args.mode, "family": spec.label, "rate": str(args.rate), "b": b, "x": x, "r": e.r,
             "mean": e.mean, "std_error": e.std_error, "replications": e.replications,
             "slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared}
            for x, e in fit.grid]


def run_verify(args) -> dict:
    # the battery fixes its own families; --dist is still validated
    _spec(args)
    reps = _replications(args)
    try:
        rate = Fraction(str(args.rate))
        if rate <= 0:
            raise ValueError
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"--rate must be a positive real, got {args.rate!r}") from None
    report = run_checks(reps, SeedSpec(args.seed), rate, args.workers)
    return {"tool": "renewal-moments", **_provenance(args), "replications": reps, "rate": str(args.rate), **report}


def _render(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    buf = io.StringIO()
    fields = list(dict.fromkeys(key for row in rows for key in row))
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: json.dumps(v) if isinstance(v, list) else v for k, v in row.items()})
    return buf.getvalue()


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_bytes(text.encode("utf-8"))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"renewal-moments: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.workers < 1:
        print("renewal-moments: usage error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "verify":
            report = run_verify(args)
            _emit(json.dumps(report, indent=2) + "\n", args.out)
            return EXIT_OK if report["status"] == "pass" else EXIT_CHECK_FAILED
        handler = {"exact": run_exact, "simulate": run_simulate, "matching": run_matching,
                   "scaling": run_scaling}[args.command]
        rows = handler(args)
    except UsageError as exc:
        print(f"renewal-moments: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"renewal-moments: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    prov = _provenance(args)
    _emit(_render([{**row, **prov} for row in rows], args.format), args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
