"""Context trees over finite alphabets.

Words are plain strings in past order: the leftmost character is the deepest
past symbol, the rightmost character is the most recent one.  A context tree
is a finite set of words (the leaves) such that every semi-infinite past has
exactly one context among its suffixes.  The empty string is the root context;
it is written "@" in the text format.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable

_ENUMERATION_LIMIT = 10_000


class TreeFormatError(ValueError):
    """Raised when a context set does not form a complete context tree."""


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of distinct single-character symbols, size >= 2."""

    symbols: tuple[str, ...]

    def __init__(self, symbols: Iterable[str]):
        object.__setattr__(self, "symbols", tuple(symbols))
        if len(self.symbols) < 2:
            raise ValueError("alphabet needs at least two symbols")
        if any(len(s) != 1 for s in self.symbols):
            raise ValueError("alphabet symbols must be single characters")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be distinct")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.symbols)})

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]  # type: ignore[attr-defined]
        except KeyError:
            raise ValueError(f"alphabet violation: unknown symbol {symbol!r}") from None

    def validate_word(self, word: str) -> None:
        for ch in word:
            if ch not in self._index:  # type: ignore[attr-defined]
                raise ValueError(f"alphabet violation: unknown symbol {ch!r} in word {word!r}")

    def as_string(self) -> str:
        return "".join(self.symbols)


@dataclass(frozen=True)
class ContextTree:
    """Complete, suffix-prefix-free set of contexts over an alphabet.

    Completeness is validated at construction by rebuilding the suffix trie:
    every internal node must have all ``|A|`` children and every context must
    be a leaf.  Contexts are stored sorted lexicographically for canonical
    iteration and serialization.
    """

    alphabet: Alphabet
    contexts: tuple[str, ...]

    def __init__(self, alphabet: Alphabet, contexts: Iterable[str]):
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "contexts", tuple(sorted(contexts)))
        self._validate()
        object.__setattr__(self, "_context_set", frozenset(self.contexts))

    def _validate(self) -> None:
        contexts = self.contexts
        if not contexts:
            raise TreeFormatError("not a context tree: empty context set")
        if len(set(contexts)) != len(contexts):
            raise TreeFormatError("not a context tree: duplicate contexts")
        for w in contexts:
            self.alphabet.validate_word(w)
        if "" in contexts:
            if len(contexts) > 1:
                raise TreeFormatError("not a context tree: root context mixed with others")
            return
        # Internal nodes are the proper suffixes of the contexts.
        internal: set[str] = set()
        for w in contexts:
            for k in range(len(w)):
                internal.add(w[k + 1 :])
        nodes = internal.union(contexts)
        for w in contexts:
            if w in internal:
                longer = next(c for c in contexts if c != w and c.endswith(w))
                raise TreeFormatError(
                    f"not a context tree: context {w!r} is a suffix of {longer!r}"
                )
        for u in internal:
            for a in self.alphabet.symbols:
                if a + u not in nodes:
                    raise TreeFormatError(
                        f"not a context tree: node {u!r} is missing child {a + u!r}"
                    )

    @property
    def depth(self) -> int:
        return max(len(w) for w in self.contexts)

    @property
    def size(self) -> int:
        return len(self.contexts)

    def __contains__(self, word: str) -> bool:
        return word in self._context_set  # type: ignore[attr-defined]

    def __iter__(self):
        return iter(self.contexts)

    def internal_nodes(self) -> set[str]:
        nodes: set[str] = set()
        for w in self.contexts:
            for k in range(1, len(w) + 1):
                nodes.add(w[k:])
        return nodes - set(self.contexts)


def root_tree(alphabet: Alphabet) -> ContextTree:
    return ContextTree(alphabet, ("",))


def suffix_context(tree: ContextTree, word: str) -> str:
    """Unique context of ``tree`` that is a suffix of ``word``.

    Raises if no suffix of ``word`` (including ``word`` itself) is a context,
    which happens when ``word`` is shorter than the containing branch.
    """
    u = ""
    while u not in tree:
        if len(u) == len(word):
            raise ValueError(f"insufficient history: no context is a suffix of {word!r}")
        u = word[-(len(u) + 1) :]
    return u


def context_of(tree: ContextTree, past: str) -> str:
    """Context selected by a past, given in past order (rightmost = latest)."""
    if len(past) < tree.depth:
        raise ValueError(
            f"insufficient history: need at least {tree.depth} symbols, got {len(past)}"
        )
    tree.alphabet.validate_word(past)
    return suffix_context(tree, past)


def is_subtree(sub: ContextTree, sup: ContextTree) -> bool:
    """True iff every context of ``sub`` has an extension among ``sup``'s contexts."""
    if sub.alphabet.symbols != sup.alphabet.symbols:
        raise ValueError("alphabet mismatch")
    return all(any(c.endswith(w) for c in sup.contexts) for w in sub.contexts)


def join(left: ContextTree, right: ContextTree) -> ContextTree:
    """Smallest common refinement: both trees are subtrees, contexts drawn from their union."""
    if left.alphabet.symbols != right.alphabet.symbols:
        raise ValueError("alphabet mismatch")
    kept = [w for w in left.contexts if any(w.endswith(c) for c in right.contexts)]
    kept += [w for w in right.contexts if any(w.endswith(c) for c in left.contexts)]
    return ContextTree(left.alphabet, set(kept))


def count_complete_subtrees(alphabet_size: int, d_max: int) -> int:
    total = 1
    for _ in range(d_max):
        total = 1 + total**alphabet_size
    return total


def enumerate_complete_subtrees(alphabet: Alphabet, d_max: int) -> list[ContextTree]:
    """All complete context trees of depth <= d_max, in a deterministic order."""
    if d_max < 0:
        raise ValueError("d_max must be nonnegative")
    if count_complete_subtrees(alphabet.size, d_max) > _ENUMERATION_LIMIT:
        raise ValueError("enumeration too large")
    level: list[tuple[str, ...]] = [("",)]
    for _ in range(d_max):
        combos = [("",)]
        for parts in itertools.product(level, repeat=alphabet.size):
            combos.append(
                tuple(w + a for a, sub in zip(alphabet.symbols, parts) for w in sub)
            )
        level = combos
    return [ContextTree(alphabet, contexts) for contexts in level]


def format_tree(tree: ContextTree) -> str:
    lines = [f"alphabet={tree.alphabet.as_string()}"]
    lines.extend(w if w else "@" for w in tree.contexts)
    return "\n".join(lines) + "\n"


def parse_tree(text: str) -> ContextTree:
    """Parse the text format (or its JSON alternative) and validate completeness."""
    stripped = text.strip()
    if stripped.startswith("{"):
        return tree_from_json(json.loads(stripped))
    lines = [line.strip() for line in stripped.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("alphabet="):
        raise TreeFormatError("tree text must start with an 'alphabet=' line")
    alphabet = Alphabet(lines[0][len("alphabet=") :])
    contexts = ["" if line == "@" else line for line in lines[1:]]
    return ContextTree(alphabet, contexts)


def tree_to_json(tree: ContextTree) -> dict:
    return {"alphabet": tree.alphabet.as_string(), "contexts": list(tree.contexts)}


def tree_from_json(payload: dict) -> ContextTree:
    alphabet = Alphabet(payload["alphabet"])
    contexts = ["" if w == "@" else w for w in payload["contexts"]]
    return ContextTree(alphabet, contexts)
