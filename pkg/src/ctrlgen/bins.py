"""Equal-frequency length bins built from a training corpus."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .vocab import N_LENGTH_BINS


class DegenerateBinsError(ValueError):
    """Raised when a corpus cannot support strictly ascending bin boundaries."""


@dataclass(frozen=True)
class BinTable:
    """Nine ascending boundary lengths defining ten half-open ranges.

    Bin i covers (boundaries[i-2], boundaries[i-1]] with an open left end at
    bin 1 and an unbounded bin 10; a length exactly on a boundary falls in
    the lower bin.
    """

    boundaries: tuple[int, ...]
    corpus_id: str = ""
    sample_count: int = 0

    def __post_init__(self):
        if len(self.boundaries) != N_LENGTH_BINS - 1:
            raise ValueError(
                "expected %d boundaries, got %d"
                % (N_LENGTH_BINS - 1, len(self.boundaries))
            )
        if any(b >= c for b, c in zip(self.boundaries, self.boundaries[1:])):
            raise ValueError("boundaries must be strictly ascending")

    def to_dict(self) -> dict:
        return {
            "boundaries": list(self.boundaries),
            "corpus_id": self.corpus_id,
            "sample_count": self.sample_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BinTable":
        return cls(
            boundaries=tuple(d["boundaries"]),
            corpus_id=d.get("corpus_id", ""),
            sample_count=d.get("sample_count", 0),
        )


def length_bin_of(l: int, table: BinTable) -> int:
    """1-based bin of a summary length; lengths past the last boundary map
    to bin 10."""
    if l < 0:
        raise ValueError("length must be nonnegative")
    for i, b in enumerate(table.boundaries, start=1):
        if l <= b:
            return i
    return N_LENGTH_BINS


def build_length_bins(
    lengths: Sequence[int], corpus_id: str = ""
) -> BinTable:
    """Boundaries at the empirical deciles of reference lengths.

    Ties are assigned to the lower bin; when a decile collides with the
    previous boundary the boundary shifts up to the next distinct length so
    the table stays strictly ascending. Corpora with fewer than ten distinct
    lengths cannot produce a valid table and are rejected.
    """
    n = len(lengths)
    if n < N_LENGTH_BINS:
        raise ValueError("need at least %d samples to build bins" % N_LENGTH_BINS)
    if any(l < 0 for l in lengths):
        raise ValueError("lengths must be nonnegative")
    s = sorted(lengths)
    boundaries: list[int] = []
    prev = None
    for i in range(1, N_LENGTH_BINS):
        idx = math.ceil(n * i / N_LENGTH_BINS) - 1
        b = s[idx]
        if prev is not None and b <= prev:
            nxt = next((v for v in s[idx:] if v > prev), None)
            if nxt is None:
                raise DegenerateBinsError(
                    "cannot place boundary %d: fewer than %d distinct lengths"
                    % (i, N_LENGTH_BINS)
                )
            b = nxt
        boundaries.append(b)
        prev = b
    return BinTable(tuple(boundaries), corpus_id=corpus_id, sample_count=n)
