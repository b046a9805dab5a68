"""One-pass sliding-window word counts and the empirical estimates built on them.

Counts follow the convention ``N_t(w) = #{k in [|w|, t] : X_{k-|w|+1}..X_k = w}``
for ``t in {n-1, n}`` over a length-``n`` sequence (positions are 1-based).
Only the full-sequence counts are stored; ``N_{n-1}`` is recovered by
subtracting one for words that end at the last position.

Probability estimates use raw-count ratios ``P(a|w) = N_n(wa) / N_{n-1}(w)``,
which sum to one by the child-sum identity.  The empirical measure keeps the
``n - |w| + 1`` denominator used as criterion weight, with the root mass fixed
to one by convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .trees import Alphabet, ContextTree


@dataclass(frozen=True)
class CountTable:
    """Occurrence counts of every word up to length ``d_max + 1``."""

    alphabet: Alphabet
    n: int
    d_max: int
    counts: Mapping[str, int]
    end_words: frozenset[str]
    head: str = ""

    def count(self, word: str, t: int | None = None) -> int:
        """``N_t(word)`` for ``t`` equal to ``n`` (default) or ``n - 1``."""
        if t is None or t == self.n:
            return self.counts.get(word, 0)
        if t == self.n - 1:
            c = self.counts.get(word, 0)
            return c - 1 if word in self.end_words else c
        raise ValueError(f"t must be {self.n} or {self.n - 1}, got {t}")

    def is_feasible(self, word: str) -> bool:
        return self.count(word, self.n - 1) > 0

    def words(self, max_len: int | None = None):
        limit = self.d_max if max_len is None else max_len
        return (w for w in self.counts if len(w) <= limit)


def _symbol_indices(sequence: str, alphabet: Alphabet) -> np.ndarray:
    try:
        raw = np.frombuffer(sequence.encode("latin-1"), dtype=np.uint8)
    except UnicodeEncodeError:
        idx = np.empty(len(sequence), dtype=np.int64)
        for i, ch in enumerate(sequence):
            if ch not in alphabet.symbols:
                raise ValueError(f"unknown symbol {ch!r} at position {i + 1}")
            idx[i] = alphabet.index(ch)
        return idx
    lookup = np.full(256, -1, dtype=np.int64)
    for i, s in enumerate(alphabet.symbols):
        lookup[ord(s)] = i
    idx = lookup[raw]
    bad = np.nonzero(idx < 0)[0]
    if bad.size:
        pos = int(bad[0])
        raise ValueError(f"unknown symbol {sequence[pos]!r} at position {pos + 1}")
    return idx


def count_sequence(sequence: str, alphabet: Alphabet, d_max: int) -> CountTable:
    """Count all words of length <= d_max + 1 in one left-to-right pass."""
    n = len(sequence)
    if d_max < 0:
        raise ValueError("d_max must be nonnegative")
    if n <= d_max + 1:
        raise ValueError(f"sequence too short: need n > d_max + 1 = {d_max + 1}, got {n}")
    idx = _symbol_indices(sequence, alphabet)
    base = alphabet.size
    symbols = alphabet.symbols
    counts: dict[str, int] = {"": n + 1}
    for length in range(1, d_max + 2):
        m = n - length + 1
        codes = np.zeros(m, dtype=np.uint64)
        for j in range(length):
            codes = codes * np.uint64(base) + idx[j : j + m].astype(np.uint64)
        uniq, freq = np.unique(codes, return_counts=True)
        for code, c in zip(uniq.tolist(), freq.tolist()):
            digits = []
            v = int(code)
            for _ in range(length):
                digits.append(symbols[v % base])
                v //= base
            counts["".join(reversed(digits))] = int(c)
    end_words = frozenset(
        sequence[n - length :] for length in range(0, min(n, d_max + 1) + 1)
    )
    return CountTable(
        alphabet=alphabet,
        n=n,
        d_max=d_max,
        counts=counts,
        end_words=end_words,
        head=sequence[: d_max + 1],
    )


def empirical_measure(table: CountTable, word: str, t: int | None = None) -> float:
    """Empirical mass ``N_t(word) / (n - |word| + 1)``; the root always carries mass 1."""
    if word == "":
        return 1.0
    if len(word) > table.d_max + 1:
        raise ValueError(f"word longer than counted horizon d_max + 1 = {table.d_max + 1}")
    return table.count(word, t) / (table.n - len(word) + 1)


def transition_estimate(table: CountTable, word: str) -> tuple[float, ...]:
    """Raw-count transition estimate ``N_n(word a) / N_{n-1}(word)`` over the alphabet."""
    if len(word) > table.d_max:
        raise ValueError(f"word too long for transitions: |word| must be <= {table.d_max}")
    denom = table.count(word, table.n - 1)
    if denom == 0:
        raise ValueError(f"zero denominator: word {word!r} is not feasible")
    probs = tuple(table.count(word + a) / denom for a in table.alphabet.symbols)
    assert abs(sum(probs) - 1.0) < 1e-12
    return probs


@dataclass(frozen=True)
class FeasibilityPolicy:
    """Which trees count as admissible.

    ``feasible-only`` admits any complete tree; unobserved leaves carry zero
    entropy weight and full penalty weight.  ``threshold`` additionally requires
    every leaf to be feasible and every observed transition count ``N_n(wa)``
    to be zero or at least ``threshold``; ``threshold=1`` reproduces the plain
    all-words-feasible class.
    """

    mode: str = "feasible-only"
    threshold: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("feasible-only", "threshold"):
            raise ValueError(f"unknown feasibility mode {self.mode!r}")
        if self.mode == "threshold":
            if self.threshold is None or self.threshold < 1:
                raise ValueError("threshold mode requires threshold >= 1")

    def leaf_admissible(self, table: CountTable, word: str) -> bool:
        """Per-leaf admissibility used by the selection search."""
        if self.mode == "feasible-only":
            return True
        if not table.is_feasible(word) and word != "":
            return False
        for a in table.alphabet.symbols:
            c = table.count(word + a)
            if 0 < c < self.threshold:  # type: ignore[operator]
                return False
        return True


def feasibility_filter(table: CountTable, tree: ContextTree, policy: FeasibilityPolicy) -> bool:
    """True iff every context is feasible (and meets the count threshold, if set)."""
    if tree.depth > table.d_max:
        raise ValueError("tree deeper than the counted horizon")
    for w in tree.contexts:
        if w != "" and not table.is_feasible(w):
            return False
    if policy.mode == "threshold":
        for w in tree.contexts:
            for a in table.alphabet.symbols:
                c = table.count(w + a)
                if 0 < c < policy.threshold:  # type: ignore[operator]
                    return False
    return True


def fitted_transitions(table: CountTable, tree: ContextTree) -> dict[str, tuple[float, ...]]:
    """Plug-in transition vectors on the feasible contexts of a tree."""
    if tree.depth > table.d_max:
        raise ValueError("tree deeper than the counted horizon")
    return {
        w: transition_estimate(table, w) for w in tree.contexts if table.is_feasible(w)
    }


@dataclass(frozen=True)
class TypicalityReport:
    """Per-context typicality flags against a known source."""

    eta: float
    word_flags: Mapping[str, bool]
    worst_ratio: float
    impossible: tuple[str, ...]

    @property
    def all_typical(self) -> bool:
        return not self.impossible and all(self.word_flags.values())


def typicality_report(table, source, tree: ContextTree, eta: float) -> TypicalityReport:
    """Check every context (at t=n-1) and its one-symbol extensions (at t=n)
    against the (1 +/- eta) band around the source masses."""
    flags: dict[str, bool] = {}
    impossible: list[str] = []
    worst = 0.0

    def in_band(word: str, t: int) -> bool:
        nonlocal worst
        mu = source.word_mass(word)
        hat = empirical_measure(table, word, t)
        if mu == 0.0:
            if hat > 0.0:
                impossible.append(word)
                return False
            return True
        ratio = abs(hat - mu) / mu
        worst = max(worst, ratio)
        return (1.0 - eta) * mu <= hat <= (1.0 + eta) * mu

    for w in tree.contexts:
        ok = in_band(w, table.n - 1)
        for a in table.alphabet.symbols:
            ok = in_band(w + a, table.n) and ok
        flags[w] = ok
    return TypicalityReport(
        eta=eta, word_flags=flags, worst_ratio=worst, impossible=tuple(impossible)
    )


class FittedModel:
    """Maximal-depth fitted VLMC: each past is mapped to its longest feasible
    suffix (up to ``d_max``) and the plug-in transition there.

    Used as the parametric bootstrap generator.  State stepping is memoized so
    long simulations cost one dictionary lookup per symbol.
    """

    def __init__(self, alphabet: Alphabet, d_max: int, transitions: dict[str, tuple[float, ...]], seed_window: str):
        if "" not in transitions:
            raise ValueError("fitted model infeasible at root")
        self.alphabet = alphabet
        self.d_max = d_max
        self.transitions = transitions
        self.seed_window = seed_window
        self._step: dict[tuple[str, str], str] = {}
        self._cum = {w: np.cumsum(p) for w, p in transitions.items()}

    def longest_feasible_suffix(self, past: str) -> str:
        u = ""
        limit = min(len(past), self.d_max)
        while len(u) < limit and past[-(len(u) + 1) :] in self.transitions:
            u = past[-(len(u) + 1) :]
        return u

    def initial_state(self) -> str:
        return self.longest_feasible_suffix(self.seed_window)

    def step_state(self, state: str, symbol: str) -> str:
        key = (state, symbol)
        nxt = self._step.get(key)
        if nxt is None:
            nxt = self.longest_feasible_suffix(state + symbol)
            self._step[key] = nxt
        return nxt

    def cumulative(self, state: str) -> np.ndarray:
        return self._cum[state]


def fit_full_model(table: CountTable) -> FittedModel:
    """Fit plug-in transitions on every feasible word up to ``d_max``."""
    transitions = {
        w: transition_estimate(table, w)
        for w in table.counts
        if len(w) <= table.d_max and table.is_feasible(w)
    }
    if "" not in transitions:
        transitions[""] = transition_estimate(table, "")
    return FittedModel(
        alphabet=table.alphabet,
        d_max=table.d_max,
        transitions=transitions,
        seed_window=table.head[: table.d_max],
    )
