"""Shared token vocabulary with designated special-token subsets.

Token sequences everywhere in this package are flat sequences of integer ids
into one :class:`Vocabulary`. The vocabulary carries the handful of ids that
metrics and corpus construction need to know about (sentence terminators, the
"but" conjunction, EOS, MASK, entity tokens, control tokens). Control tokens
get ids like every other token but never occur inside documents or reference
summaries; they exist so checkpoints and corpora can name them stably.

Sentence terminators are positional: the sentence at position k of a document
ends with terminator ``.k``. Any of them delimits a sentence for metric
purposes; the ordinal exists so a decoder can tell how deep into a document
prefix it is without counting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

TokenSeq = Sequence[int]

N_LENGTH_BINS = 10
N_ABS_BINS = 3
N_POSITIONS = 10

EOS_TOKEN = "</s>"
BUT_TOKEN = "but"
MASK_TOKEN = "[MASK]"
ENTITY_SEP_TOKEN = "<ent>"


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token table plus the designated id subsets."""

    tokens: tuple[str, ...]
    eos: int
    terminators: tuple[int, ...]
    but: int
    mask: int
    entity_sep: int
    entities: tuple[int, ...]
    length_controls: tuple[int, ...]
    abs_controls: tuple[int, ...]
    content_words: tuple[int, ...]
    synonyms: tuple[int, ...]
    _id_of: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate token strings in vocabulary")
        if not self.terminators:
            raise ValueError("need at least one sentence terminator")
        if len(self.length_controls) != N_LENGTH_BINS:
            raise ValueError("expected %d length control tokens" % N_LENGTH_BINS)
        if len(self.abs_controls) != N_ABS_BINS:
            raise ValueError("expected %d abstractiveness control tokens" % N_ABS_BINS)
        if len(self.content_words) != len(self.synonyms):
            raise ValueError("content words and synonyms must pair up")
        object.__setattr__(self, "_id_of", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self._id_of[token]

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]

    @property
    def entity_set(self) -> frozenset[int]:
        return frozenset(self.entities)

    @property
    def terminator_set(self) -> frozenset[int]:
        return frozenset(self.terminators)

    def synonym_map(self) -> dict[int, int]:
        """Content word id -> paraphrase (synonym) id."""
        return dict(zip(self.content_words, self.synonyms))

    def encode(self, text: str) -> list[int]:
        """Space-separated token strings -> ids."""
        return [self._id_of[t] for t in text.split()]

    def decode(self, seq: TokenSeq) -> str:
        return " ".join(self.tokens[t] for t in seq)

    def to_dict(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "eos": self.eos,
            "terminators": list(self.terminators),
            "but": self.but,
            "mask": self.mask,
            "entity_sep": self.entity_sep,
            "entities": list(self.entities),
            "length_controls": list(self.length_controls),
            "abs_controls": list(self.abs_controls),
            "content_words": list(self.content_words),
            "synonyms": list(self.synonyms),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(
            tokens=tuple(d["tokens"]),
            eos=d["eos"],
            terminators=tuple(d["terminators"]),
            but=d["but"],
            mask=d["mask"],
            entity_sep=d["entity_sep"],
            entities=tuple(d["entities"]),
            length_controls=tuple(d["length_controls"]),
            abs_controls=tuple(d["abs_controls"]),
            content_words=tuple(d["content_words"]),
            synonyms=tuple(d["synonyms"]),
        )


def build_vocabulary(n_entities: int = 10, n_content: int = 66) -> Vocabulary:
    """Construct the standard vocabulary layout.

    Ids are assigned contiguously: specials, positional terminators, control
    tokens, entity tokens, content words, then one synonym per content word.
    The pairing ``w{i} <-> v{i}`` is the default paraphrase substitution map.
    """
    tokens: list[str] = [EOS_TOKEN, BUT_TOKEN, MASK_TOKEN, ENTITY_SEP_TOKEN]
    terminators = []
    for i in range(1, N_POSITIONS + 1):
        terminators.append(len(tokens))
        tokens.append(f".{i}")
    length_controls = []
    for i in range(1, N_LENGTH_BINS + 1):
        length_controls.append(len(tokens))
        tokens.append(f"<len_{i}>")
    abs_controls = []
    for i in range(1, N_ABS_BINS + 1):
        abs_controls.append(len(tokens))
        tokens.append(f"<abs_{i}>")
    entities = []
    for i in range(n_entities):
        entities.append(len(tokens))
        tokens.append(f"ent{i:02d}")
    content = []
    for i in range(n_content):
        content.append(len(tokens))
        tokens.append(f"w{i:02d}")
    synonyms = []
    for i in range(n_content):
        synonyms.append(len(tokens))
        tokens.append(f"v{i:02d}")
    return Vocabulary(
        tokens=tuple(tokens),
        eos=0,
        terminators=tuple(terminators),
        but=1,
        mask=2,
        entity_sep=3,
        entities=tuple(entities),
        length_controls=tuple(length_controls),
        abs_controls=tuple(abs_controls),
        content_words=tuple(content),
        synonyms=tuple(synonyms),
    )


def strip_eos(seq: TokenSeq, eos: int) -> list[int]:
    """Drop a trailing EOS marker; metrics operate on the stripped sequence."""
    out = list(seq)
    if out and out[-1] == eos:
        out.pop()
    return out
