"""Ground-truth sources: generic probabilistic context trees and the bounded
renewal family (truncated-Poisson gap law, exact stationary measure).

The renewal source is a binary process whose distances between successive 1s
are i.i.d. gaps ``T = 1 + Z`` with ``Z ~ Poisson(lambda)`` conditioned on
``Z <= K_o``.  Its context tree is ``{1 0^k, k = 0..K_o}`` plus the null-mass
completion leaf ``0^(K_o+1)``, and its transitions are the gap hazard rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

import numpy as np

from .counting import FittedModel
from .trees import Alphabet, ContextTree, context_of

_STATIONARY_STATE_LIMIT = 4096

BINARY = Alphabet("01")


@dataclass(frozen=True)
class SourceModel:
    """Probabilistic context tree plus its stationary context measure."""

    tree: ContextTree
    transitions: Mapping[str, tuple[float, ...]]
    context_measure: Mapping[str, float]

    def transition(self, context: str) -> tuple[float, ...]:
        return self.transitions[context]

    @cached_property
    def _history_marginals(self) -> dict[str, float]:
        """Stationary masses of all words up to the tree depth, from the
        history chain on length-``depth`` windows."""
        depth = self.tree.depth
        alphabet = self.tree.alphabet
        a = alphabet.size
        if depth == 0:
            return {"": 1.0}
        n_states = a**depth
        if n_states > _STATIONARY_STATE_LIMIT:
            raise ValueError(
                f"source depth {depth} too large for exact stationary computation"
            )
        states = ["".join(p) for p in _product_strings(alphabet.symbols, depth)]
        index = {s: i for i, s in enumerate(states)}
        matrix = np.zeros((n_states, n_states))
        for s in states:
            probs = self.transitions[context_of(self.tree, s)]
            for sym, p in zip(alphabet.symbols, probs):
                matrix[index[s], index[(s + sym)[1:]]] += p
        # Solve pi = pi M with sum(pi) = 1 in the least-squares sense.
        system = np.vstack([matrix.T - np.eye(n_states), np.ones(n_states)])
        rhs = np.zeros(n_states + 1)
        rhs[-1] = 1.0
        pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        pi = np.clip(pi, 0.0, None)
        pi /= pi.sum()
        marginals: dict[str, float] = {"": 1.0}
        for s, mass in zip(states, pi.tolist()):
            for k in range(1, depth + 1):
                w = s[-k:]
                marginals[w] = marginals.get(w, 0.0) + mass
        # Re-aggregate exactly: suffix marginals of the state distribution.
        return marginals

    def word_mass(self, word: str) -> float:
        """Stationary probability of observing ``word``."""
        depth = self.tree.depth
        if len(word) <= depth:
            return self._history_marginals.get(word, 0.0)
        mass = self.word_mass(word[:depth]) if depth else 1.0
        for i in range(depth, len(word)):
            if mass == 0.0:
                return 0.0
            probs = self.transitions[context_of(self.tree, word[:i])] if depth else self.transitions[""]
            mass *= probs[self.tree.alphabet.index(word[i])]
        return mass

    def conditional(self, word: str) -> tuple[float, ...]:
        """Next-symbol law given that the past ends with ``word``."""
        m = self.word_mass(word)
        if m == 0.0:
            raise ValueError(f"conditioning word {word!r} has zero stationary mass")
        return tuple(self.word_mass(word + a) / m for a in self.tree.alphabet.symbols)


def _product_strings(symbols, length):
    if length == 0:
        yield ()
        return
    for rest in _product_strings(symbols, length - 1):
        for s in symbols:
            yield rest + (s,)


def build_source_model(
    tree: ContextTree,
    transitions: Mapping[str, tuple[float, ...]],
    context_measure: Mapping[str, float] | None = None,
) -> SourceModel:
    """Validate transitions and attach the stationary context measure."""
    for w in tree.contexts:
        if w not in transitions:
            raise ValueError(f"missing transition vector for context {w!r}")
        probs = transitions[w]
        if len(probs) != tree.alphabet.size or any(p < 0 for p in probs):
            raise ValueError(f"invalid transition vector for context {w!r}")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"transition vector for context {w!r} does not sum to 1")
    model = SourceModel(tree=tree, transitions=dict(transitions), context_measure={})
    measure = context_measure or {w: model.word_mass(w) for w in tree.contexts}
    object.__setattr__(model, "context_measure", dict(measure))
    return model


def stationarity_residual(model: SourceModel) -> float:
    """Worst violation of shift invariance over the contexts: extending one
    step into the past or the future must preserve each context's mass."""
    worst = 0.0
    for w in model.tree.contexts:
        mass = model.word_mass(w)
        past = sum(model.word_mass(a + w) for a in model.tree.alphabet.symbols)
        future = sum(model.word_mass(w + a) for a in model.tree.alphabet.symbols)
        worst = max(worst, abs(past - mass), abs(future - mass))
        claimed = model.context_measure.get(w)
        if claimed is not None:
            worst = max(worst, abs(claimed - mass))
    return worst


@dataclass(frozen=True)
class RenewalParams:
    """Gap law ``T = 1 + (Z | Z <= k_o)`` with ``Z ~ Poisson(lam)``."""

    lam: float = 3.0
    k_o: int = 14

    def __post_init__(self) -> None:
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.k_o < 1:
            raise ValueError("k_o must be at least 1")


def truncated_poisson_pmf(params: RenewalParams) -> np.ndarray:
    """pmf of the gap ``T`` over ``{1, .., k_o + 1}``; entry ``i`` is ``P(T = i + 1)``."""
    k = np.arange(params.k_o + 1)
    log_pmf = -params.lam + k * math.log(params.lam) - np.array(
        [math.lgamma(v + 1) for v in k]
    )
    pmf = np.exp(log_pmf)
    pmf /= pmf.sum()
    return pmf


def hazard_rates(gap_pmf: np.ndarray) -> np.ndarray:
    """``h(k) = P(T = k + 1 | T > k)`` for ``k = 0..K_o``; the last hazard is exactly 1."""
    pmf = np.asarray(gap_pmf, dtype=float)
    tails = np.cumsum(pmf[::-1])[::-1]
    if np.any(tails <= 0):
        raise ValueError("zero tail mass before the bound")
    h = pmf / tails
    h[-1] = 1.0
    return h


def gap_pmf_from_hazards(hazards: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hazard_rates`, for round-trip checks."""
    survival = 1.0
    pmf = np.empty(len(hazards))
    for k, h in enumerate(hazards):
        pmf[k] = survival * h
        survival *= 1.0 - h
    return pmf


def renewal_tree(k_o: int, alphabet: Alphabet = BINARY) -> ContextTree:
    """``{1 0^k, k = 0..k_o}`` plus the all-zero completion leaf ``0^(k_o+1)``."""
    one, zero = alphabet.symbols[1], alphabet.symbols[0]
    contexts = [one + zero * k for k in range(k_o + 1)]
    contexts.append(zero * (k_o + 1))
    return ContextTree(alphabet, contexts)


@dataclass(frozen=True)
class RenewalModel(SourceModel):
    """Renewal source with exact closed-form word masses via the age chain."""

    params: RenewalParams = RenewalParams()
    gap_pmf: tuple[float, ...] = ()
    hazards: tuple[float, ...] = ()
    mean_gap: float = 0.0

    def word_mass(self, word: str) -> float:
        """Forward pass of the stationary age distribution through ``word``."""
        self.tree.alphabet.validate_word(word)
        k_o = self.params.k_o
        h = self.hazards
        ages = [self.context_measure["1" + "0" * k] for k in range(k_o + 1)]
        for ch in word:
            if ch == "1":
                hit = sum(p * h[k] for k, p in enumerate(ages))
                ages = [hit] + [0.0] * k_o
            else:
                shifted = [0.0] * (k_o + 1)
                for k in range(k_o):
                    shifted[k + 1] = ages[k] * (1.0 - h[k])
                ages = shifted
        return sum(ages)

    @property
    def stationary_one_frequency(self) -> float:
        return 1.0 / self.mean_gap


def build_renewal_model(params: RenewalParams) -> RenewalModel:
    pmf = truncated_poisson_pmf(params)
    h = hazard_rates(pmf)
    mean_gap = float(np.dot(np.arange(1, params.k_o + 2), pmf))
    tails = np.cumsum(pmf[::-1])[::-1]
    tree = renewal_tree(params.k_o)
    measure = {"1" + "0" * k: float(tails[k]) / mean_gap for k in range(params.k_o + 1)}
    measure["0" * (params.k_o + 1)] = 0.0
    transitions = {
        "1" + "0" * k: (1.0 - float(h[k]), float(h[k])) for k in range(params.k_o + 1)
    }
    # Arbitrary-but-fixed law on the null-mass completion leaf: emit 1.
    transitions["0" * (params.k_o + 1)] = (0.0, 1.0)
    return RenewalModel(
        tree=tree,
        transitions=transitions,
        context_measure=measure,
        params=params,
        gap_pmf=tuple(float(p) for p in pmf),
        hazards=tuple(float(v) for v in h),
        mean_gap=mean_gap,
    )


def _simulate_renewal(model: RenewalModel, n: int, rng: np.random.Generator) -> str:
    """Gap-based sampler started from the exact stationary age law."""
    k_o = model.params.k_o
    pmf = np.asarray(model.gap_pmf)
    tails = np.cumsum(pmf[::-1])[::-1]
    # Position of the first 1 follows the residual-life law P(T >= r) / E[T].
    first_law = tails / tails.sum()
    first = int(rng.choice(np.arange(1, k_o + 2), p=first_law))
    ones = [first]
    supports = np.arange(1, k_o + 2)
    batch = max(16, int(n / model.mean_gap * 1.25) + 16)
    last = first
    while last < n:
        gaps = rng.choice(supports, p=pmf, size=batch)
        positions = last + np.cumsum(gaps)
        ones.append(positions)
        last = int(positions[-1])
    positions = np.concatenate([np.atleast_1d(np.asarray(p)) for p in ones])
    out = np.zeros(n, dtype=np.uint8)
    inside = positions[positions <= n].astype(np.int64) - 1
    out[inside] = 1
    return (out + ord("0")).tobytes().decode("ascii")


def _simulate_generic(
    model: SourceModel, n: int, rng: np.random.Generator, burn_in: int
) -> str:
    alphabet = model.tree.alphabet
    depth = model.tree.depth
    past = "".join(
        alphabet.symbols[int(rng.integers(alphabet.size))] for _ in range(max(depth, 1))
    )
    out: list[str] = []
    total = burn_in + n
    uniforms = rng.random(total)
    cums = {w: np.cumsum(p) for w, p in model.transitions.items()}
    for i in range(total):
        ctx = context_of(model.tree, past) if depth else ""
        sym = alphabet.symbols[int(np.searchsorted(cums[ctx], uniforms[i], side="right"))]
        if i >= burn_in:
            out.append(sym)
        past = (past + sym)[-max(depth, 1) :]
    return "".join(out)


def simulate(
    model: SourceModel,
    n: int,
    rng: np.random.Generator,
    init: str | tuple[str, int] = "stationary",
) -> str:
    """Length-``n`` symbol string from a source model.

    Renewal models always start from the exact stationary age law.  Generic
    models accept ``("burn_in", m)`` (default m = 64 * depth) since their
    stationary past is not directly samplable.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if isinstance(model, RenewalModel):
        return _simulate_renewal(model, n, rng)
    if init == "stationary":
        burn = 64 * max(model.tree.depth, 1)
    elif isinstance(init, tuple) and init[0] == "burn_in":
        burn = int(init[1])
    else:
        raise ValueError(f"unknown init {init!r}")
    return _simulate_generic(model, n, rng, burn)


def bootstrap_resample(fitted: FittedModel, n: int, rng: np.random.Generator) -> str:
    """Fresh length-``n`` sequence from a fitted maximal-depth model.

    The state is seeded from the observed opening window and burnt in for
    ``d_max`` discarded steps before emission starts.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    alphabet = fitted.alphabet
    state = fitted.initial_state()
    burn = fitted.d_max
    uniforms = rng.random(burn + n)
    out: list[str] = []
    for i in range(burn + n):
        cum = fitted.cumulative(state)
        sym = alphabet.symbols[int(np.searchsorted(cum, uniforms[i], side="right"))]
        if i >= burn:
            out.append(sym)
        state = fitted.step_state(state, sym)
    return "".join(out)


def model_from_json(payload: dict) -> SourceModel:
    """Generic model from the tree JSON format extended with transitions."""
    from .trees import tree_from_json

    tree = tree_from_json(payload)
    transitions = {
        ("" if w == "@" else w): tuple(float(p) for p in probs)
        for w, probs in payload["transitions"].items()
    }
    measure = None
    if "context_measure" in payload:
        measure = {
            ("" if w == "@" else w): float(m)
            for w, m in payload["context_measure"].items()
        }
    return build_source_model(tree, transitions, measure)
