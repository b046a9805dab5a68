"""Seeded Monte-Carlo experiment driver for the renewal-source study.

Experiments
  fig1    exact bias and Monte-Carlo variance of every renewal-family tree
  fig2    bootstrap-penalized complexity traces over a constant grid
  fig4 /  per-method selected-size histograms and oracle risk ratios
  table1  (one computation, two output tables)

Every replicate draws from streams keyed ``(seed, replicate, purpose)`` so
results are byte-identical regardless of parallel scheduling.  Rows are sorted
before emission and aggregates are recomputable from the row-level CSV.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from . import __version__
from .counting import FeasibilityPolicy, count_sequence, feasibility_filter, fit_full_model, fitted_transitions
from .rng import stream
from .risk import INF, exact_bias, variance_term
from .selection import (
    Penalty,
    bootstrap_penalty_table,
    penalty_path,
    prune_select,
    slope_calibrate,
)
from .sources import RenewalParams, build_renewal_model, renewal_tree, simulate
from .trees import ContextTree

METHODS = ("BIC", "BIC+Slope", "Resampling", "Resampling+Slope", "AIC")

_SLOPE_GRID = tuple(0.05 * (8.0 / 0.05) ** (i / 59) for i in range(60))
_FIG2_GRID = tuple(i / 10 for i in range(1, 31))

_POLICY = FeasibilityPolicy()


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: int = 500
    replicates: int = 1000
    seed: int = 0
    methods: tuple[str, ...] = METHODS
    lam: float = 3.0
    k_o: int = 14
    d_max: int | None = None
    bootstrap_b: int = 20
    grid: tuple[float, ...] | None = None
    two_step: bool = False
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.experiment not in ("fig1", "fig2", "fig4", "table1"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if self.n <= self.depth_limit + 1:
            raise ValueError("n must exceed d_max + 1")

    @property
    def depth_limit(self) -> int:
        return self.k_o + 1 if self.d_max is None else self.d_max


def _family(k_o: int) -> list[ContextTree]:
    return [renewal_tree(k) for k in range(k_o + 1)]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_metadata(path: Path, config: ExperimentConfig, wall: float, extra: dict | None = None) -> None:
    payload = {
        "config": asdict(config),
        "seed": config.seed,
        "version": __version__,
        "wall_time_seconds": wall,
    }
    if extra:
        payload.update(extra)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _map_replicates(worker, config: ExperimentConfig):
    indices = range(config.replicates)
    if config.jobs <= 1:
        return [worker(i) for i in indices]
    with ProcessPoolExecutor(max_workers=config.jobs) as pool:
        return list(pool.map(worker, indices, chunksize=max(1, config.replicates // (4 * config.jobs))))


# --------------------------------------------------------------------------
# fig1: bias and variance of the renewal-family trees


@dataclass(frozen=True)
class _Fig1Task:
    config: ExperimentConfig
    model_params: RenewalParams

    def __call__(self, rep: int) -> list[float | None]:
        model = build_renewal_model(self.model_params)
        family = _family(self.model_params.k_o)
        seq = simulate(model, self.config.n, stream(self.config.seed, rep, "simulate"))
        table = count_sequence(seq, model.tree.alphabet, self.config.depth_limit)
        out: list[float | None] = []
        for tree in family:
            fitted = fitted_transitions(table, tree)
            v = variance_term(model, tree, fitted)
            out.append(None if v == INF else v)
        return out


def run_fig1(config: ExperimentConfig, out_dir: Path) -> dict[str, Path]:
    start = time.perf_counter()
    params = RenewalParams(lam=config.lam, k_o=config.k_o)
    model = build_renewal_model(params)
    family = _family(config.k_o)
    biases = [exact_bias(model, tree) for tree in family]
    per_rep = _map_replicates(_Fig1Task(config, params), config)
    rows = []
    for k, tree in enumerate(family):
        values = [r[k] for r in per_rep if r[k] is not None]
        infinite = config.replicates - len(values)
        if values:
            mean = sum(values) / len(values)
            var = sum((v - mean) ** 2 for v in values) / len(values)
            se = math.sqrt(var / len(values))
            total = biases[k] + mean
        else:
            mean = se = total = float("nan")
        rows.append([k, biases[k], mean, se, total, infinite])
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "fig1.csv"
    _write_csv(path, ["k", "bias", "variance", "variance_se", "total", "infinite_count"], rows)
    _write_metadata(out_dir / "fig1_meta.json", config, time.perf_counter() - start)
    return {"fig1": path}


# --------------------------------------------------------------------------
# fig2: slope phenomenon with the bootstrap penalty shape


@dataclass(frozen=True)
class _Fig2Task:
    config: ExperimentConfig
    model_params: RenewalParams
    grid: tuple[float, ...]

    def __call__(self, rep: int) -> list[tuple[float, float, int]]:
        config = self.config
        model = build_renewal_model(self.model_params)
        seq = simulate(model, config.n, stream(config.seed, rep, "simulate"))
        table = count_sequence(seq, model.tree.alphabet, config.depth_limit)
        fitted = fit_full_model(table)
        bs = bootstrap_penalty_table(
            table, fitted, config.bootstrap_b, stream(config.seed, rep, "bootstrap")
        )
        shape = Penalty("table", 1.0, bs)
        path = penalty_path(table, shape, self.grid, config.depth_limit, _POLICY)
        return [
            (c, comp, size)
            for c, comp, size in zip(path.grid, path.complexities, path.sizes)
        ]


def run_fig2(config: ExperimentConfig, out_dir: Path) -> dict[str, Path]:
    start = time.perf_counter()
    params = RenewalParams(lam=config.lam, k_o=config.k_o)
    grid = config.grid or _FIG2_GRID
    traces = _map_replicates(_Fig2Task(config, params, tuple(grid)), config)
    rows = []
    for rep, trace in enumerate(traces):
        for c, comp, size in trace:
            rows.append([rep, c, comp, size])
    medians = []
    for j, c in enumerate(grid):
        comps = sorted(t[j][1] for t in traces)
        sizes = sorted(t[j][2] for t in traces)
        mid = len(comps) // 2
        comp_med = comps[mid] if len(comps) % 2 else 0.5 * (comps[mid - 1] + comps[mid])
        size_med = sizes[mid] if len(sizes) % 2 else 0.5 * (sizes[mid - 1] + sizes[mid])
        medians.append([c, comp_med, size_med])
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "fig2.csv"
    _write_csv(path, ["replicate", "c", "complexity", "size"], rows)
    median_path = out_dir / "fig2_median.csv"
    _write_csv(median_path, ["c", "median_complexity", "median_size"], medians)
    _write_metadata(out_dir / "fig2_meta.json", config, time.perf_counter() - start)
    return {"fig2": path, "fig2_median": median_path}


# --------------------------------------------------------------------------
# fig4 / table1: method comparison against the exact risk oracle

_BIAS_CACHE: dict[tuple, float] = {}


def _tree_risk(model, tree: ContextTree, table) -> float:
    key = tree.contexts
    bias = _BIAS_CACHE.get(key)
    if bias is None:
        bias = exact_bias(model, tree)
        _BIAS_CACHE[key] = bias
    if bias == INF:
        return INF
    v = variance_term(model, tree, fitted_transitions(table, tree))
    return INF if v == INF else bias + v


def _slope_selected(table, shape: Penalty, grid, d_max, candidates=None) -> ContextTree:
    path = penalty_path(table, shape, grid, d_max, _POLICY, candidates=candidates)
    try:
        _, l_final = slope_calibrate(path)
    except ValueError:
        # Flat path: the same tree is selected at every constant.
        return path.trees[0]
    if candidates is None:
        return prune_select(table, replace(shape, constant=l_final), d_max, _POLICY).tree
    from .selection import select_among

    return select_among(table, replace(shape, constant=l_final), candidates, _POLICY).tree


@dataclass(frozen=True)
class _Table1Task:
    config: ExperimentConfig
    model_params: RenewalParams
    slope_grid: tuple[float, ...]

    def __call__(self, rep: int) -> list[tuple[str, int, float, float]]:
        config = self.config
        model = build_renewal_model(self.model_params)
        d_max = config.depth_limit
        seq = simulate(model, config.n, stream(config.seed, rep, "simulate"))
        table = count_sequence(seq, model.tree.alphabet, d_max)
        family = [
            t
            for t in _family(self.model_params.k_o)
            if t.depth <= d_max and feasibility_filter(table, t, _POLICY)
        ]
        candidate_risks = [_tree_risk(model, t, table) for t in family]
        finite = [r for r in candidate_risks if r != INF]
        oracle = min(finite) if finite else INF

        needs_bootstrap = any(m.startswith("Resampling") for m in config.methods)
        bs_table = None
        if needs_bootstrap:
            fitted = fit_full_model(table)
            bs_table = bootstrap_penalty_table(
                table, fitted, config.bootstrap_b, stream(config.seed, rep, "bootstrap")
            )
        two_step_candidates = None
        if config.two_step and needs_bootstrap:
            bic_path = penalty_path(
                table, Penalty("bic", 1.0), self.slope_grid, d_max, _POLICY
            )
            seen: dict[tuple, ContextTree] = {}
            for t in bic_path.trees:
                seen.setdefault(t.contexts, t)
            two_step_candidates = list(seen.values())

        rows = []
        for method in config.methods:
            tree = self._select(method, table, d_max, bs_table, two_step_candidates)
            risk = _tree_risk(model, tree, table)
            ratio = risk / oracle if risk != INF and oracle not in (0.0, INF) else INF
            rows.append((method, tree.size, risk, oracle, ratio))
        return rows

    def _select(self, method, table, d_max, bs_table, two_step_candidates) -> ContextTree:
        if method == "BIC":
            return prune_select(table, Penalty("bic", 0.5), d_max, _POLICY).tree
        if method == "AIC":
            return prune_select(table, Penalty("aic", 1.0), d_max, _POLICY).tree
        if method == "BIC+Slope":
            return _slope_selected(table, Penalty("bic", 1.0), self.slope_grid, d_max)
        shape = Penalty("table", 1.0, bs_table)
        if method == "Resampling":
            if two_step_candidates is not None:
                from .selection import select_among

                return select_among(
                    table, replace(shape, constant=2.0), two_step_candidates, _POLICY
                ).tree
            return prune_select(table, replace(shape, constant=2.0), d_max, _POLICY).tree
        if method == "Resampling+Slope":
            return _slope_selected(
                table, shape, self.slope_grid, d_max, candidates=two_step_candidates
            )
        raise ValueError(f"unknown method {method!r}")


def run_fig4_table1(config: ExperimentConfig, out_dir: Path) -> dict[str, Path]:
    start = time.perf_counter()
    params = RenewalParams(lam=config.lam, k_o=config.k_o)
    grid = config.grid or _SLOPE_GRID
    per_rep = _map_replicates(_Table1Task(config, params, tuple(grid)), config)

    row_records = []
    for rep, rows in enumerate(per_rep):
        for method, size, risk, oracle, ratio in rows:
            row_records.append([rep, method, size, risk, oracle, ratio])
    row_records.sort(key=lambda r: (r[0], r[1]))

    table_rows = []
    hist: dict[tuple[str, int], int] = {}
    for method in config.methods:
        ratios = [
            r[5] for r in row_records if r[1] == method and r[5] != INF
        ]
        excluded = config.replicates - len(ratios)
        if ratios:
            mean = sum(ratios) / len(ratios)
            var = sum((x - mean) ** 2 for x in ratios) / len(ratios)
            sd = math.sqrt(var)
        else:
            mean = sd = float("nan")
        table_rows.append([method, mean, sd, config.replicates, excluded])
        for r in row_records:
            if r[1] == method:
                key = (method, r[2])
                hist[key] = hist.get(key, 0) + 1
    hist_rows = [[m, s, c] for (m, s), c in sorted(hist.items())]

    out_dir.mkdir(parents=True, exist_ok=True)
    rows_path = out_dir / "rows.csv"
    _write_csv(
        rows_path,
        ["replicate", "method", "size", "risk", "oracle_risk", "ratio"],
        row_records,
    )
    fig4_path = out_dir / "fig4.csv"
    _write_csv(fig4_path, ["method", "size", "count"], hist_rows)
    table1_path = out_dir / "table1.csv"
    _write_csv(
        table1_path,
        ["method", "mean_ratio", "sd_ratio", "replicates", "excluded_infinite"],
        table_rows,
    )
    _write_metadata(
        out_dir / f"{config.experiment}_meta.json",
        config,
        time.perf_counter() - start,
        extra={"note": "fig4 caption uses n=1000 while the text uses n=500; n is configurable"},
    )
    return {"table1": table1_path, "fig4": fig4_path, "rows": rows_path}


def run_experiment(config: ExperimentConfig, out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    if config.experiment == "fig1":
        return run_fig1(config, out_dir)
    if config.experiment == "fig2":
        return run_fig2(config, out_dir)
    return run_fig4_table1(config, out_dir)
