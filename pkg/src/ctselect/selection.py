"""Penalized criterion minimization over complete subtrees.

The criterion is the empirical conditional entropy plus an additive per-leaf
penalty.  Because the penalty is additive over leaves, the exact minimizer
over all complete subtrees of bounded depth is found by one bottom-up pass
over the count trie: a node is pruned to a leaf unless splitting strictly
improves the criterion (ties prefer the smaller tree).

Penalty shapes: ``bic`` (``|A| ln(n) / n`` per leaf), ``aic``
(``(|A|-1) / n`` per leaf) and per-leaf tables, most importantly the
parametric-bootstrap estimate of the per-context variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .counting import (
    CountTable,
    FeasibilityPolicy,
    FittedModel,
    empirical_measure,
    feasibility_filter,
    transition_estimate,
)
from .risk import empirical_entropy_term, entropy_vector
from .trees import ContextTree, enumerate_complete_subtrees

TIE_TOLERANCE = 1e-12

INF = math.inf


@dataclass(frozen=True)
class Penalty:
    """Additive per-leaf penalty: ``constant * sum shape_leaf(w)`` over leaves."""

    shape: str
    constant: float
    table: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        if self.shape not in ("bic", "aic", "table"):
            raise ValueError(f"unknown penalty shape {self.shape!r}")
        if self.constant < 0:
            raise ValueError("penalty constant must be nonnegative")
        if (self.table is None) != (self.shape != "table"):
            raise ValueError("per-leaf table required exactly when shape='table'")
        if self.table is not None and any(v < 0 for v in self.table.values()):
            raise ValueError("per-leaf table entries must be nonnegative")

    def shape_leaf(self, word: str, n: int, alphabet_size: int) -> float:
        if self.shape == "bic":
            return alphabet_size * math.log(n) / n
        if self.shape == "aic":
            return (alphabet_size - 1) / n
        return self.table.get(word, 0.0)  # type: ignore[union-attr]


def penalty_value(penalty: Penalty, tree: ContextTree, n: int) -> float:
    a = tree.alphabet.size
    return penalty.constant * sum(penalty.shape_leaf(w, n, a) for w in tree.contexts)


@dataclass(frozen=True)
class SelectionResult:
    tree: ContextTree
    criterion: float
    entropy_term: float
    penalty_value: float
    leaf_breakdown: Mapping[str, tuple[float, float]]


@dataclass(frozen=True)
class SlopePath:
    """Selections along an increasing grid of penalty constants."""

    grid: tuple[float, ...]
    complexities: tuple[float, ...]
    sizes: tuple[int, ...]
    trees: tuple[ContextTree, ...]
    l_min: float | None = None
    l_final: float | None = None


class _Workspace:
    """Per-table DP state reusable across penalty constants of one shape."""

    def __init__(self, table: CountTable, penalty: Penalty, d_max: int, policy: FeasibilityPolicy):
        self.table = table
        self.policy = policy
        self.d_max = d_max
        alphabet = table.alphabet
        nodes: set[str] = {""}
        for w in table.counts:
            if 0 < len(w) <= d_max:
                nodes.add(w)
        if penalty.table is not None:
            for w in penalty.table:
                for k in range(max(len(w) - d_max, 0), len(w) + 1):
                    nodes.add(w[k:])
        self.nodes = sorted(nodes, key=len, reverse=True)
        self.node_set = nodes
        n = table.n
        a = alphabet.size
        self.entropy: dict[str, float] = {}
        self.shape: dict[str, float] = {}
        self.allowed: dict[str, bool] = {}
        for w in self.nodes:
            if table.count(w, n - 1) > 0:
                self.entropy[w] = empirical_measure(table, w, n - 1) * entropy_vector(
                    transition_estimate(table, w)
                )
            else:
                self.entropy[w] = 0.0
            self.shape[w] = penalty.shape_leaf(w, n, a)
            self.allowed[w] = policy.leaf_admissible(table, w)
        self.virtual_shape = {
            (w, s): penalty.shape_leaf(s + w, n, a)
            for w in self.nodes
            if len(w) < d_max
            for s in alphabet.symbols
            if s + w not in nodes
        }
        self.virtual_allowed = {
            key: policy.leaf_admissible(table, key[1] + key[0])
            for key in self.virtual_shape
        }

    def solve(self, constant: float, tie_tol: float) -> ContextTree:
        cost: dict[str, float] = {}
        is_leaf: dict[str, bool] = {}
        symbols = self.table.alphabet.symbols
        for w in self.nodes:
            leaf = (
                self.entropy[w] + constant * self.shape[w] if self.allowed[w] else INF
            )
            if len(w) == self.d_max:
                cost[w] = leaf
                is_leaf[w] = True
                continue
            split = 0.0
            for s in symbols:
                child = s + w
                if child in self.node_set:
                    split += cost[child]
                elif self.virtual_allowed[(w, s)]:
                    split += constant * self.virtual_shape[(w, s)]
                else:
                    split = INF
                if split == INF:
                    break
            if split < leaf - tie_tol:
                cost[w] = split
                is_leaf[w] = False
            else:
                cost[w] = leaf
                is_leaf[w] = True
        if cost[""] == INF:
            raise ValueError("no admissible tree under the feasibility policy")
        contexts: list[str] = []
        stack = [""]
        while stack:
            w = stack.pop()
            if w in self.node_set and not is_leaf[w]:
                stack.extend(s + w for s in symbols)
            else:
                contexts.append(w)
        return ContextTree(self.table.alphabet, contexts)


def _finalize(
    table: CountTable, penalty: Penalty, tree: ContextTree
) -> SelectionResult:
    n = table.n
    a = table.alphabet.size
    breakdown: dict[str, tuple[float, float]] = {}
    entropy_total = 0.0
    penalty_total = 0.0
    for w in tree.contexts:
        if table.count(w, n - 1) > 0:
            ent = empirical_measure(table, w, n - 1) * entropy_vector(
                transition_estimate(table, w)
            )
        else:
            ent = 0.0
        pen = penalty.constant * penalty.shape_leaf(w, n, a)
        breakdown[w] = (ent, pen)
        entropy_total += ent
        penalty_total += pen
    return SelectionResult(
        tree=tree,
        criterion=entropy_total + penalty_total,
        entropy_term=entropy_total,
        penalty_value=penalty_total,
        leaf_breakdown=breakdown,
    )


def prune_select(
    table: CountTable,
    penalty: Penalty,
    d_max: int | None = None,
    policy: FeasibilityPolicy = FeasibilityPolicy(),
    tie_tol: float = TIE_TOLERANCE,
) -> SelectionResult:
    """Exact global minimizer of entropy + penalty over complete subtrees of
    depth <= d_max, by bottom-up dynamic programming."""
    d_max = table.d_max if d_max is None else d_max
    if d_max > table.d_max:
        raise ValueError("d_max exceeds the counted horizon")
    workspace = _Workspace(table, penalty, d_max, policy)
    tree = workspace.solve(penalty.constant, tie_tol)
    return _finalize(table, penalty, tree)


def _tree_criterion(
    table: CountTable, penalty: Penalty, tree: ContextTree
) -> float:
    return empirical_entropy_term(table, tree, require_feasible=False) + penalty_value(
        penalty, tree, table.n
    )


def _tree_admissible(
    table: CountTable, tree: ContextTree, policy: FeasibilityPolicy
) -> bool:
    if policy.mode == "feasible-only":
        return True
    return all(policy.leaf_admissible(table, w) for w in tree.contexts)


def brute_force_select(
    table: CountTable,
    penalty: Penalty,
    d_max: int | None = None,
    policy: FeasibilityPolicy = FeasibilityPolicy(),
    tie_tol: float = TIE_TOLERANCE,
) -> SelectionResult:
    """Exhaustive minimum over the enumerated tree class; selection oracle for
    the dynamic program, same tie-break (smaller tree wins near-ties)."""
    d_max = table.d_max if d_max is None else d_max
    candidates = enumerate_complete_subtrees(table.alphabet, d_max)
    return select_among(table, penalty, candidates, policy, tie_tol)


def select_among(
    table: CountTable,
    penalty: Penalty,
    candidates: Sequence[ContextTree],
    policy: FeasibilityPolicy = FeasibilityPolicy(),
    tie_tol: float = TIE_TOLERANCE,
) -> SelectionResult:
    """Minimize the penalized criterion over an explicit candidate list."""
    scored: list[tuple[float, ContextTree]] = []
    for tree in candidates:
        if not _tree_admissible(table, tree, policy):
            continue
        scored.append((_tree_criterion(table, penalty, tree), tree))
    if not scored:
        raise ValueError("no admissible tree among the candidates")
    best = min(c for c, _ in scored)
    if best == INF:
        raise ValueError("no admissible tree among the candidates")
    tied = [t for c, t in scored if c <= best + tie_tol]
    tree = min(tied, key=lambda t: (t.size, t.contexts))
    return _finalize(table, penalty, tree)


def penalty_path(
    table: CountTable,
    shape: Penalty,
    grid: Sequence[float],
    d_max: int | None = None,
    policy: FeasibilityPolicy = FeasibilityPolicy(),
    candidates: Sequence[ContextTree] | None = None,
    tie_tol: float = TIE_TOLERANCE,
) -> SlopePath:
    """Selected tree for each constant of an increasing grid, recording the
    shape-complexity and size of each selection.

    The monotonicity of sizes and complexities along the grid is a theorem for
    additive penalties and is asserted on every run.
    """
    grid = tuple(float(g) for g in grid)
    if any(g <= 0 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing and positive")
    d_max = table.d_max if d_max is None else d_max
    n = table.n
    a = table.alphabet.size
    trees: list[ContextTree] = []
    if candidates is None:
        workspace = _Workspace(table, shape, d_max, policy)
        for constant in grid:
            trees.append(workspace.solve(constant, tie_tol))
    else:
        for constant in grid:
            result = select_among(
                table, replace(shape, constant=constant), candidates, policy, tie_tol
            )
            trees.append(result.tree)
    complexities = tuple(
        sum(shape.shape_leaf(w, n, a) for w in tree.contexts) for tree in trees
    )
    sizes = tuple(tree.size for tree in trees)
    for i in range(1, len(grid)):
        if sizes[i] > sizes[i - 1] or complexities[i] > complexities[i - 1] + 1e-9:
            raise AssertionError(
                "penalty path monotonicity violated at "
                f"L={grid[i]}: sizes {sizes[i - 1]}->{sizes[i]}, "
                f"complexities {complexities[i - 1]}->{complexities[i]}"
            )
    return SlopePath(
        grid=grid, complexities=complexities, sizes=sizes, trees=tuple(trees)
    )


def slope_calibrate(path: SlopePath) -> tuple[float, float]:
    """Locate the complexity jump: the grid point with the largest one-step
    drop is the minimal constant, and twice it is the calibrated constant."""
    if len(path.grid) < 3:
        raise ValueError("slope calibration needs a grid of at least 3 points")
    drops = [
        path.complexities[i - 1] - path.complexities[i]
        for i in range(1, len(path.grid))
    ]
    best = max(drops)
    if best <= 0.0:
        raise ValueError("no jump detected: complexity path is flat")
    l_min = path.grid[drops.index(best) + 1]
    return l_min, 2.0 * l_min


def bootstrap_penalty_table(
    table: CountTable,
    fitted: FittedModel,
    replicates: int,
    rng: np.random.Generator,
) -> dict[str, float]:
    """Parametric-bootstrap per-leaf penalty shape.

    Each replicate is a fresh length-``n`` sequence from the fitted
    maximal-depth model, recounted; the per-node term is the weighted KL from
    the observed plug-in kernel to the (add-half smoothed) bootstrap kernel.
    Averages are floored at zero.  Replicate ``b`` always consumes the ``b``-th
    spawned stream of ``rng``, independent of scheduling.
    """
    from .counting import count_sequence
    from .sources import bootstrap_resample

    if replicates < 1:
        raise ValueError("bootstrap needs at least one replicate")
    n = table.n
    alphabet = table.alphabet
    a = alphabet.size
    nodes = [w for w in table.counts if len(w) <= table.d_max and table.is_feasible(w)]
    base = {w: transition_estimate(table, w) for w in nodes}
    weight = {w: empirical_measure(table, w, n - 1) for w in nodes}
    acc = {w: 0.0 for w in nodes}
    streams = rng.spawn(replicates)
    for child in streams:
        sample = bootstrap_resample(fitted, n, child)
        resampled = count_sequence(sample, alphabet, table.d_max)
        for w in nodes:
            denom = resampled.count(w, n - 1) + 0.5 * a
            term = 0.0
            for i, sym in enumerate(alphabet.symbols):
                p = base[w][i]
                if p == 0.0:
                    continue
                q = (resampled.count(w + sym) + 0.5) / denom
                term += p * math.log(p / q)
            acc[w] += weight[w] * term
    return {w: max(acc[w] / replicates, 0.0) for w in nodes}
