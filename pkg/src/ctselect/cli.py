"""Command line interface.

Subcommands: ``simulate`` (renewal or JSON model to a symbol line), ``fit``
(penalized selection on a sequence file), ``risk`` (exact bias of a tree
against a renewal source), ``slope`` (constant calibration trace) and
``experiment`` (the Monte-Carlo studies).  Exit codes: 0 success, 2 usage
error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .counting import FeasibilityPolicy, count_sequence, fit_full_model
from .harness import METHODS, ExperimentConfig, run_experiment
from .rng import stream
from .risk import exact_bias
from .selection import (
    Penalty,
    bootstrap_penalty_table,
    penalty_path,
    prune_select,
    slope_calibrate,
)
from .sources import RenewalParams, build_renewal_model, model_from_json, simulate
from .trees import Alphabet, parse_tree, tree_to_json

_METHOD_ALIASES = {m.lower(): m for m in METHODS}


def _parse_grid(spec: str) -> tuple[float, ...]:
    lo, hi, count = spec.split(":")
    lo, hi, count = float(lo), float(hi), int(count)
    if count < 2 or lo <= 0 or hi <= lo:
        raise ValueError(f"bad grid spec {spec!r}")
    ratio = (hi / lo) ** (1 / (count - 1))
    return tuple(lo * ratio**i for i in range(count))


def _read_sequence(path: str) -> str:
    text = Path(path).read_text()
    return "".join(text.split())


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctselect",
        description="Context tree selection: counting, risk, penalized fits, experiments.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a renewal or JSON-specified source")
    sim.add_argument("--lambda", dest="lam", type=float, default=3.0)
    sim.add_argument("--ko", type=int, default=14)
    sim.add_argument("--model", help="JSON model file (overrides --lambda/--ko)")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", help="output file (default stdout)")

    fit = sub.add_parser("fit", help="penalized context-tree fit of a sequence")
    fit.add_argument("--input", required=True, help="sequence file (one line of symbols)")
    fit.add_argument("--alphabet", default="01")
    fit.add_argument("--dmax", type=int, required=True)
    fit.add_argument("--penalty", choices=["bic", "aic", "bootstrap"], default="bic")
    fit.add_argument("--const", type=float, default=0.5)
    fit.add_argument("--slope", action="store_true", help="calibrate the constant")
    fit.add_argument("--grid", default="0.05:8:60", help="lo:hi:n geometric grid")
    fit.add_argument("--bootstrap-B", dest="bootstrap_b", type=int, default=20)
    fit.add_argument("--threshold", type=float, help="feasibility count threshold")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", help="output JSON file (default stdout)")

    risk = sub.add_parser("risk", help="exact bias of a tree against a renewal source")
    risk.add_argument("--tree", required=True, help="tree file (text or JSON format)")
    risk.add_argument("--lambda", dest="lam", type=float, default=3.0)
    risk.add_argument("--ko", type=int, default=14)
    risk.add_argument("--out", help="output JSON file (default stdout)")

    slope = sub.add_parser("slope", help="slope-algorithm trace for a sequence")
    for name, kwargs in [
        ("--input", {"required": True}),
        ("--alphabet", {"default": "01"}),
        ("--dmax", {"type": int, "required": True}),
        ("--penalty", {"choices": ["bic", "aic", "bootstrap"], "default": "bic"}),
        ("--grid", {"default": "0.05:8:60"}),
        ("--bootstrap-B", {"dest": "bootstrap_b", "type": int, "default": 20}),
        ("--seed", {"type": int, "default": 0}),
        ("--out", {}),
    ]:
        slope.add_argument(name, **kwargs)

    exp = sub.add_parser("experiment", help="run a Monte-Carlo study")
    exp.add_argument("name", choices=["fig1", "fig2", "fig4", "table1"])
    exp.add_argument("--n", type=int, default=500)
    exp.add_argument("--replicates", type=int, default=1000)
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--methods", default=",".join(m.lower() for m in METHODS))
    exp.add_argument("--lambda", dest="lam", type=float, default=3.0)
    exp.add_argument("--ko", type=int, default=14)
    exp.add_argument("--dmax", type=int)
    exp.add_argument("--bootstrap-B", dest="bootstrap_b", type=int, default=20)
    exp.add_argument("--grid", help="lo:hi:n geometric grid for slope methods")
    exp.add_argument("--two-step", action="store_true")
    exp.add_argument("--jobs", type=int, default=1)
    exp.add_argument("--out-dir", default="results")
    return parser


def _shape_penalty(args, table) -> Penalty:
    if args.penalty == "bic":
        return Penalty("bic", 1.0)
    if args.penalty == "aic":
        return Penalty("aic", 1.0)
    fitted = fit_full_model(table)
    bs = bootstrap_penalty_table(
        table, fitted, args.bootstrap_b, stream(args.seed, "bootstrap")
    )
    return Penalty("table", 1.0, bs)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_simulate(args) -> int:
    if args.model:
        model = model_from_json(json.loads(Path(args.model).read_text()))
    else:
        model = build_renewal_model(RenewalParams(lam=args.lam, k_o=args.ko))
    seq = simulate(model, args.n, stream(args.seed, "simulate"))
    if args.out:
        Path(args.out).write_text(seq + "\n")
    else:
        sys.stdout.write(seq + "\n")
    return 0


def _policy(args) -> FeasibilityPolicy:
    threshold = getattr(args, "threshold", None)
    if threshold is not None:
        return FeasibilityPolicy(mode="threshold", threshold=threshold)
    return FeasibilityPolicy()


def _cmd_fit(args) -> int:
    seq = _read_sequence(args.input)
    alphabet = Alphabet(args.alphabet)
    table = count_sequence(seq, alphabet, args.dmax)
    policy = _policy(args)
    shape = _shape_penalty(args, table)
    payload: dict = {"n": table.n, "d_max": args.dmax, "penalty": args.penalty}
    if args.slope:
        grid = _parse_grid(args.grid)
        path = penalty_path(table, shape, grid, args.dmax, policy)
        l_min, l_final = slope_calibrate(path)
        result = prune_select(table, replace(shape, constant=l_final), args.dmax, policy)
        payload["slope"] = {
            "grid": list(path.grid),
            "complexities": list(path.complexities),
            "sizes": list(path.sizes),
            "l_min": l_min,
            "l_final": l_final,
        }
        payload["constant"] = l_final
    else:
        result = prune_select(table, replace(shape, constant=args.const), args.dmax, policy)
        payload["constant"] = args.const
    payload["selected"] = tree_to_json(result.tree)
    payload["criterion"] = result.criterion
    payload["entropy_term"] = result.entropy_term
    payload["penalty_value"] = result.penalty_value
    payload["leaf_breakdown"] = {
        (w if w else "@"): list(v) for w, v in result.leaf_breakdown.items()
    }
    payload["seed"] = args.seed
    payload["version"] = __version__
    _emit(payload, args.out)
    return 0


def _cmd_risk(args) -> int:
    tree = parse_tree(Path(args.tree).read_text())
    model = build_renewal_model(RenewalParams(lam=args.lam, k_o=args.ko))
    bias = exact_bias(model, tree)
    _emit(
        {
            "tree": tree_to_json(tree),
            "lambda": args.lam,
            "k_o": args.ko,
            "bias": bias,
            "version": __version__,
        },
        args.out,
    )
    return 0


def _cmd_slope(args) -> int:
    seq = _read_sequence(args.input)
    alphabet = Alphabet(args.alphabet)
    table = count_sequence(seq, alphabet, args.dmax)
    shape = _shape_penalty(args, table)
    grid = _parse_grid(args.grid)
    path = penalty_path(table, shape, grid, args.dmax, FeasibilityPolicy())
    l_min, l_final = slope_calibrate(path)
    selected = prune_select(table, replace(shape, constant=l_final), args.dmax)
    _emit(
        {
            "grid": list(path.grid),
            "complexities": list(path.complexities),
            "sizes": list(path.sizes),
            "l_min": l_min,
            "l_final": l_final,
            "selected": tree_to_json(selected.tree),
            "seed": args.seed,
            "version": __version__,
        },
        args.out,
    )
    return 0


def _cmd_experiment(args) -> int:
    methods = []
    for token in args.methods.split(","):
        token = token.strip().lower()
        if token not in _METHOD_ALIASES:
            raise ValueError(f"unknown method {token!r}")
        methods.append(_METHOD_ALIASES[token])
    config = ExperimentConfig(
        experiment=args.name,
        n=args.n,
        replicates=args.replicates,
        seed=args.seed,
        methods=tuple(methods),
        lam=args.lam,
        k_o=args.ko,
        d_max=args.dmax,
        bootstrap_b=args.bootstrap_b,
        grid=_parse_grid(args.grid) if args.grid else None,
        two_step=args.two_step,
        jobs=args.jobs,
    )
    paths = run_experiment(config, args.out_dir)
    for name, path in sorted(paths.items()):
        sys.stdout.write(f"{name}: {path}\n")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "risk": _cmd_risk,
    "slope": _cmd_slope,
    "experiment": _cmd_experiment,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(cli_main())
