"""Attribute measurements over token sequences.

All functions here are deterministic pure functions of their inputs. They
expect EOS-free sequences: rollout handling strips the trailing end marker
once at the boundary (see :func:`ctrlgen.vocab.strip_eos`) before anything
is measured.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Collection, NamedTuple

from .vocab import TokenSeq

# Extractive fragment density boundaries: bin 1 = (3.3, inf], bin 2 =
# (1.3, 3.3], bin 3 = [0, 1.3]. Bin 3 is the most abstractive.
ABS_DENSITY_EDGES = (1.3, 3.3)


class Fragment(NamedTuple):
    summary_start: int
    doc_start: int
    length: int


@dataclass(frozen=True)
class FragmentSet:
    """Greedy maximal shared token runs between a document and a summary.

    Fragments are non-overlapping in summary positions and sorted by
    summary_start; ``summary_length`` is the normalizer for density.
    """

    fragments: tuple[Fragment, ...]
    summary_length: int

    def lengths(self) -> list[int]:
        return [f.length for f in self.fragments]

    def density(self) -> float:
        if self.summary_length < 1:
            raise ValueError("density undefined for an empty summary")
        return sum(f.length ** 2 for f in self.fragments) / self.summary_length


def repeat_ratio(y: TokenSeq, n: int = 3) -> float:
    """Fraction of n-gram occurrences that already occurred earlier in y.

    Sequences shorter than n have no n-grams and score 0.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    total = len(y) - n + 1
    if total <= 0:
        return 0.0
    seen: set[tuple] = set()
    repeats = 0
    for i in range(total):
        gram = tuple(y[i : i + n])
        if gram in seen:
            repeats += 1
        else:
            seen.add(gram)
    return repeats / total


def extractive_fragments(x: TokenSeq, y: TokenSeq) -> FragmentSet:
    """Greedy scan: at each summary position take the longest match found
    anywhere in the document (smallest doc position on ties) and jump past
    it; unmatched positions advance by one.
    """
    x = list(x)
    y = list(y)
    frags: list[Fragment] = []
    i = 0
    while i < len(y):
        best_k = 0
        best_j = -1
        for j in range(len(x)):
            if x[j] != y[i]:
                continue
            k = 1
            while i + k < len(y) and j + k < len(x) and x[j + k] == y[i + k]:
                k += 1
            if k > best_k:
                best_k = k
                best_j = j
        if best_k > 0:
            frags.append(Fragment(i, best_j, best_k))
            i += best_k
        else:
            i += 1
    return FragmentSet(tuple(frags), len(y))


def extractive_density(x: TokenSeq, y: TokenSeq) -> float:
    """Mean squared extractive fragment length, normalized by summary length."""
    if len(y) < 1:
        raise ValueError("density undefined for an empty summary")
    return extractive_fragments(x, y).density()


def abstractiveness_bin(density: float) -> int:
    if density < 0:
        raise ValueError("density must be nonnegative")
    lo, hi = ABS_DENSITY_EDGES
    if density > hi:
        return 1
    if density > lo:
        return 2
    return 3


def split_sentences(seq: TokenSeq, terminator) -> list[list[int]]:
    """Token runs delimited by any terminator id (kept with its sentence); a
    trailing unterminated run counts as a sentence. ``terminator`` is a single
    id or a collection of ids."""
    terms = {terminator} if isinstance(terminator, int) else set(terminator)
    sents: list[list[int]] = []
    cur: list[int] = []
    for t in seq:
        cur.append(t)
        if t in terms:
            sents.append(cur)
            cur = []
    if cur:
        sents.append(cur)
    return sents


def entity_repetition_fraction(
    y: TokenSeq, requested: Collection[int], terminator
) -> float:
    """Fraction of sentences in y where some requested entity occurs twice
    or more. Zero sentences (empty y) scores 0."""
    sents = split_sentences(y, terminator)
    if not sents:
        return 0.0
    requested = set(requested)
    repeated = sum(
        1 for s in sents if any(s.count(e) >= 2 for e in requested)
    )
    return repeated / len(sents)


def conjunction_indicator(y: TokenSeq, y_ref: TokenSeq, but: int) -> int:
    """1 iff y contains the conjunction token while the reference does not."""
    return int(but in set(y) and but not in set(y_ref))


def appear_pct(y: TokenSeq, requested: Collection[int]) -> float:
    """Fraction of requested entities occurring at least once in y."""
    requested = set(requested)
    if not requested:
        raise ValueError("requested entity set must be non-empty")
    present = set(y)
    return sum(1 for e in requested if e in present) / len(requested)


def lcs_length(a: TokenSeq, b: TokenSeq) -> int:
    """Longest common subsequence length, O(len(a) * len(b))."""
    if not a or not b:
        return 0
    row = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        prev = 0
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            tmp = row[j]
            if ai == b[j - 1]:
                row[j] = prev + 1
            else:
                row[j] = max(row[j], row[j - 1])
            prev = tmp
    return row[len(b)]


def lcs_f1(y: TokenSeq, y_ref: TokenSeq) -> float:
    """Harmonic mean of LCS precision and recall; 0 when either side is empty."""
    if not y or not y_ref:
        return 0.0
    l = lcs_length(y, y_ref)
    if l == 0:
        return 0.0
    p = l / len(y)
    r = l / len(y_ref)
    return 2 * p * r / (p + r)


def lcs_recall(y: TokenSeq, y_ref: TokenSeq) -> float:
    """LCS length over reference length; 0 when the reference is empty."""
    if not y_ref:
        return 0.0
    return lcs_length(y, y_ref) / len(y_ref)
