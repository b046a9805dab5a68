"""Kullback-Leibler risk machinery.

The risk of a plug-in estimator on a candidate tree splits exactly into an
approximation (bias) part, which depends only on the source and the tree, and
an estimation (variance) part carried by the fitted transitions:

    total = sum over refinement leaves of mass * KL(true kernel, fitted kernel)
          = bias + variance.

The bias is computed exactly from the source's stationary word masses via the
common refinement of the candidate tree and the source tree; nothing is
sampled.  Infinite values are first-class: a fitted kernel that puts zero mass
where the source is positive yields ``inf``, not an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .counting import CountTable, empirical_measure, transition_estimate
from .trees import ContextTree, join, suffix_context

INF = math.inf


def kl_vector(p, q) -> float:
    """``sum p_a ln(p_a / q_a)`` with the conventions 0 ln 0 = 0 and
    ``inf`` whenever q vanishes where p does not."""
    if len(p) != len(q):
        raise ValueError("probability vectors must have equal length")
    for v in (p, q):
        if any(x < 0 for x in v) or abs(sum(v) - 1.0) > 1e-9:
            raise ValueError(f"not a probability vector: {tuple(v)!r}")
    total = 0.0
    for pa, qa in zip(p, q):
        if pa == 0.0:
            continue
        if qa == 0.0:
            return INF
        total += pa * math.log(pa / qa)
    return max(total, 0.0)


def entropy_vector(p) -> float:
    """``sum p_a ln(1 / p_a)`` with 0 ln(1/0) = 0."""
    return -sum(pa * math.log(pa) for pa in p if pa > 0.0)


def kl_tree(
    weights: Mapping[str, float],
    p_kernels: Mapping[str, tuple[float, ...]],
    q_kernels: Mapping[str, tuple[float, ...]],
) -> float:
    """Weighted per-context KL sum over a common context set."""
    if set(p_kernels) != set(q_kernels):
        raise ValueError("mismatched context sets")
    total = 0.0
    for w, p in p_kernels.items():
        mass = weights.get(w, 0.0)
        if mass < 0:
            raise ValueError(f"negative weight for context {w!r}")
        if mass == 0.0:
            continue
        term = kl_vector(p, q_kernels[w])
        if term == INF:
            return INF
        total += mass * term
    return total


@dataclass(frozen=True)
class RiskReport:
    """Exact risk decomposition of a fitted tree against a known source."""

    bias: float
    variance: float
    bias_terms: Mapping[str, tuple[float, float]]
    variance_terms: Mapping[str, tuple[float, float]]

    @property
    def total(self) -> float:
        return self.bias + self.variance

    def to_json(self) -> dict:
        return {
            "bias": self.bias,
            "variance": self.variance,
            "total": self.total,
            "bias_terms": {w: list(v) for w, v in self.bias_terms.items()},
            "variance_terms": {w: list(v) for w, v in self.variance_terms.items()},
        }


def _bias_terms(source, tree: ContextTree) -> dict[str, tuple[float, float]]:
    refinement = join(tree, source.tree)
    kernel_cache: dict[str, tuple[float, ...]] = {}
    terms: dict[str, tuple[float, float]] = {}
    for w in refinement.contexts:
        mass = source.word_mass(w)
        if mass == 0.0:
            continue
        true_kernel = source.transitions[suffix_context(source.tree, w)]
        ctx = suffix_context(tree, w)
        mixed = kernel_cache.get(ctx)
        if mixed is None:
            mixed = source.conditional(ctx)
            kernel_cache[ctx] = mixed
        terms[w] = (mass, kl_vector(true_kernel, mixed))
    return terms


def exact_bias(source, tree: ContextTree) -> float:
    """Approximation error of the best kernel on ``tree``: zero iff the source
    tree is a subtree of ``tree`` (up to null-mass contexts)."""
    if source.tree.alphabet.symbols != tree.alphabet.symbols:
        raise ValueError("alphabet mismatch")
    total = 0.0
    for mass, term in _bias_terms(source, tree).values():
        if term == INF:
            return INF
        total += mass * term
    return total


def _variance_terms(
    source, tree: ContextTree, fitted: Mapping[str, tuple[float, ...]]
) -> dict[str, tuple[float, float]]:
    terms: dict[str, tuple[float, float]] = {}
    for w in tree.contexts:
        mass = source.word_mass(w)
        if mass == 0.0:
            continue
        estimate = fitted.get(w)
        if estimate is None:
            terms[w] = (mass, INF)
            continue
        terms[w] = (mass, kl_vector(source.conditional(w), estimate))
    return terms


def variance_term(
    source, tree: ContextTree, fitted: Mapping[str, tuple[float, ...]]
) -> float:
    """Estimation error ``sum mass(w) KL(true conditional on w, fitted on w)``;
    ``inf`` when a positive-mass context is missing from ``fitted`` or the
    fitted kernel vanishes where the truth does not."""
    total = 0.0
    for mass, term in _variance_terms(source, tree, fitted).values():
        if term == INF:
            return INF
        total += mass * term
    return total


def direct_risk(
    source, tree: ContextTree, fitted: Mapping[str, tuple[float, ...]]
) -> float:
    """Non-decomposed risk: KL over the refinement, fitted kernel plugged in."""
    refinement = join(tree, source.tree)
    total = 0.0
    for w in refinement.contexts:
        mass = source.word_mass(w)
        if mass == 0.0:
            continue
        true_kernel = source.transitions[suffix_context(source.tree, w)]
        estimate = fitted.get(suffix_context(tree, w))
        if estimate is None:
            return INF
        term = kl_vector(true_kernel, estimate)
        if term == INF:
            return INF
        total += mass * term
    return total


def total_risk(
    source, tree: ContextTree, fitted: Mapping[str, tuple[float, ...]]
) -> RiskReport:
    """Full risk report; in debug runs the decomposition is audited against
    the direct computation to 1e-10 (stripped under ``python -O``)."""
    bias_terms = _bias_terms(source, tree)
    variance_terms = _variance_terms(source, tree, fitted)
    bias = 0.0
    for mass, term in bias_terms.values():
        bias = INF if term == INF else bias + mass * term
        if bias == INF:
            break
    variance = 0.0
    for mass, term in variance_terms.values():
        variance = INF if term == INF else variance + mass * term
        if variance == INF:
            break
    report = RiskReport(
        bias=bias,
        variance=variance,
        bias_terms=bias_terms,
        variance_terms=variance_terms,
    )
    if __debug__ and report.total != INF:
        direct = direct_risk(source, tree, fitted)
        assert abs(direct - report.total) < 1e-10, (
            f"risk decomposition off: direct={direct!r} decomposed={report.total!r}"
        )
    return report


def empirical_entropy_term(
    table: CountTable, tree: ContextTree, require_feasible: bool = True
) -> float:
    """Data-fit term: ``sum mass_hat(w) * H(P_hat(.|w))`` over the contexts.

    With ``require_feasible=False`` unobserved contexts contribute zero, which
    is the convention used when scoring trees with unobserved leaves.
    """
    if tree.depth > table.d_max:
        raise ValueError("tree deeper than the counted horizon")
    total = 0.0
    for w in tree.contexts:
        if table.count(w, table.n - 1) == 0:
            if require_feasible:
                raise ValueError(f"tree not feasible: context {w!r} unobserved")
            continue
        total += empirical_measure(table, w, table.n - 1) * entropy_vector(
            transition_estimate(table, w)
        )
    return total
