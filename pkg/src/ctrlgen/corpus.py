"""Synthetic document/summary corpus with controllable ground-truth attributes.

Documents are built from a positional slot grammar chosen so that every
structural decision a decoder faces is observable one step at a time and
repeated 3-grams cannot arise from position confusion:

- Every sentence has exactly `sentence_len` tokens and ends with the
  positional terminator of its document position (the k-th sentence of a
  document ends with ``.k``). Its content words are the leading run of band
  k: the `band_width` content ids starting at k * band_width. Bands are
  disjoint across positions, so two sentences from different positions never
  share a 3-gram -- in documents, in references, and in any model output
  that keeps each position's emission inside its band.
- A position is realized pure (the band run alone) or as an entity sentence
  (one or two entity tokens followed by a shorter run). Entity placement is
  random per document, or pinned with `entity_positions` (the i-th listed
  position carries the document's i-th entity), which makes entity sentences
  fully predictable from the request and keeps entity-filtered references
  prefix-shaped.

References are document prefixes: the first `s` document sentences verbatim
or with synonym substitution for the target abstractiveness bin (bin 1
verbatim, bin 2 substitutes one content word per sentence, bin 3 substitutes
all of them; substitution is redrawn until the computed bin matches). The
prefix shape means the k-th reference sentence always ends with ``.k``, so
generating to a target length never requires counting, and reference lengths
are multiples of the sentence length. Length bins are built from the train
split only.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bins import BinTable, build_length_bins, length_bin_of
from .metrics import abstractiveness_bin, extractive_density, split_sentences
from .vocab import N_ABS_BINS, N_LENGTH_BINS, N_POSITIONS, Vocabulary, build_vocabulary

SPLITS = ("train", "valid", "test")

# Redraws allowed before declaring an abstractiveness target unrealizable.
MAX_REF_ATTEMPTS = 50


class CorpusError(ValueError):
    """Raised for infeasible corpus specs and malformed corpus files."""


def _check_mix(name: str, mix: Sequence[float], size: int) -> tuple[float, ...]:
    mix = tuple(float(v) for v in mix)
    if len(mix) != size:
        raise CorpusError(f"{name} must have {size} entries, got {len(mix)}")
    if any(v < 0 for v in mix):
        raise CorpusError(f"{name} entries must be nonnegative")
    total = sum(mix)
    if not math.isclose(total, 1.0, abs_tol=1e-9):
        raise CorpusError(f"{name} must sum to 1, got {total}")
    return mix


@dataclass(frozen=True)
class CorpusSpec:
    n_train: int = 2000
    n_valid: int = 200
    n_test: int = 200
    n_entities: int = 10
    n_content: int = 40
    band_width: int = 4
    doc_sentences: int = 10
    sentence_len: int = 5
    entity_sentence_prob: float = 0.4
    entity_pair_prob: float = 0.0  # chance an entity sentence names two entities
    entities_per_doc: int = 2
    entity_positions: Optional[tuple[int, ...]] = None  # 1-based, pins placement
    abs_mix: tuple[float, float, float] = (1.0, 0.0, 0.0)
    ref_sentence_mix: tuple[float, ...] = (0.1,) * N_LENGTH_BINS
    require_ref_entity: bool = False
    synonym_substitution: bool = True

    def __post_init__(self):
        if min(self.n_train, self.n_valid, self.n_test) < 0:
            raise CorpusError("split sizes must be nonnegative")
        if self.n_train < N_LENGTH_BINS:
            raise CorpusError("train split too small to fit length bins")
        if self.sentence_len < 4:
            raise CorpusError("sentences need at least 4 tokens")
        if self.doc_sentences < N_LENGTH_BINS:
            raise CorpusError(
                f"documents need at least {N_LENGTH_BINS} sentences for all bins"
            )
        if self.doc_sentences > N_POSITIONS:
            raise CorpusError(
                f"only {N_POSITIONS} positional terminators exist; "
                f"doc_sentences {self.doc_sentences} will not fit"
            )
        if self.band_width < self.sentence_len - 1:
            raise CorpusError(
                f"band_width {self.band_width} cannot fill a sentence "
                f"(needs >= {self.sentence_len - 1})"
            )
        need = self.band_width * self.doc_sentences
        if self.n_content < need:
            raise CorpusError(
                f"band_width {self.band_width} over {self.doc_sentences} disjoint "
                f"position bands needs n_content >= {need}"
            )
        if not 0.0 <= self.entity_sentence_prob <= 1.0:
            raise CorpusError("entity_sentence_prob must lie in [0, 1]")
        if not 0.0 <= self.entity_pair_prob <= 1.0:
            raise CorpusError("entity_pair_prob must lie in [0, 1]")
        if self.entity_pair_prob > 0 and self.entities_per_doc < 2:
            raise CorpusError("entity pairs need entities_per_doc >= 2")
        if not 1 <= self.entities_per_doc <= self.n_entities:
            raise CorpusError("entities_per_doc out of range")
        if self.entity_positions is not None:
            pos = self.entity_positions
            if len(pos) != self.entities_per_doc:
                raise CorpusError(
                    "entity_positions must list one position per document entity"
                )
            if list(pos) != sorted(set(pos)):
                raise CorpusError("entity_positions must be strictly ascending")
            if pos[0] < 1 or pos[-1] > self.doc_sentences:
                raise CorpusError("entity_positions out of document range")
            if self.entity_pair_prob > 0:
                raise CorpusError("fixed entity positions do not support entity pairs")
            if self.require_ref_entity and pos[0] != 1:
                raise CorpusError(
                    "require_ref_entity with fixed positions needs an entity "
                    "at position 1"
                )
        _check_mix("abs_mix", self.abs_mix, N_ABS_BINS)
        _check_mix("ref_sentence_mix", self.ref_sentence_mix, N_LENGTH_BINS)
        if not self.synonym_substitution and sum(self.abs_mix[1:]) > 0:
            raise CorpusError(
                "abstractiveness bins 2 and 3 need the synonym substitution map"
            )


@dataclass(frozen=True)
class CorpusSample:
    id: str
    document: tuple[int, ...]
    reference: tuple[int, ...]
    entities: tuple[int, ...]  # distinct, ordered by first occurrence in reference
    length_bin: int
    abs_bin: int


@dataclass(frozen=True)
class GeneratedCorpus:
    vocab: Vocabulary
    table: BinTable
    splits: dict[str, list[CorpusSample]]


def _exact_counts(n: int, mix: Sequence[float]) -> list[int]:
    """Largest-remainder rounding so emitted attribute counts hit the mix
    exactly up to integer resolution."""
    raw = [n * p for p in mix]
    base = [math.floor(v) for v in raw]
    order = sorted(range(len(mix)), key=lambda i: raw[i] - base[i], reverse=True)
    for i in order[: n - sum(base)]:
        base[i] += 1
    return base


def _assignment_list(n: int, mix: Sequence[float], rng: np.random.Generator) -> list[int]:
    values: list[int] = []
    for idx, count in enumerate(_exact_counts(n, mix)):
        values.extend([idx + 1] * count)
    rng.shuffle(values)
    return values


def _make_document(
    rng: np.random.Generator,
    vocab: Vocabulary,
    spec: CorpusSpec,
    entity_within: Optional[int] = None,
) -> tuple[list[list[int]], list[int]]:
    """Returns (sentences, entity_sentence_indices).

    The sentence at document position k draws the leading run of band k and
    takes terminator ``.k``; bands are disjoint across positions, so any two
    realized sentences are 3-gram-disjoint regardless of entity conversion.
    Without `entity_positions`, each position independently becomes an entity
    sentence with `entity_sentence_prob`, and `entity_within` forces at least
    one among the first that many positions (so a reference prefix of that
    length mentions an entity); otherwise one is forced anywhere.
    """
    doc_entities = rng.choice(
        np.asarray(vocab.entities), size=spec.entities_per_doc, replace=False
    )
    pure_run = spec.sentence_len - 1
    ent_run = spec.sentence_len - 2

    def run(pos: int, count: int) -> list[int]:
        start = pos * spec.band_width
        return [vocab.content_words[start + k] for k in range(count)]

    entity_at: dict[int, tuple[int, ...]] = {}
    if spec.entity_positions is not None:
        for i, pos in enumerate(spec.entity_positions):
            entity_at[pos - 1] = (int(doc_entities[i]),)
    else:
        flags = [
            bool(rng.random() < spec.entity_sentence_prob)
            for _ in range(spec.doc_sentences)
        ]
        limit = entity_within if entity_within is not None else spec.doc_sentences
        if not any(flags[:limit]):
            flags[int(rng.integers(limit))] = True
        for pos, flagged in enumerate(flags):
            if not flagged:
                continue
            if spec.entity_pair_prob and rng.random() < spec.entity_pair_prob:
                pair = rng.choice(doc_entities, size=2, replace=False)
                entity_at[pos] = (int(pair[0]), int(pair[1]))
            else:
                entity_at[pos] = (
                    int(doc_entities[int(rng.integers(len(doc_entities)))]),
                )

    sentences: list[list[int]] = []
    entity_idx: list[int] = []
    for pos in range(spec.doc_sentences):
        ents = entity_at.get(pos)
        if ents is None:
            sentences.append(run(pos, pure_run) + [vocab.terminators[pos]])
        else:
            entity_idx.append(pos)
            sentences.append(
                list(ents)
                + run(pos, ent_run - (len(ents) - 1))
                + [vocab.terminators[pos]]
            )
    return sentences, entity_idx


def _substituted(
    sentence: list[int], target_bin: int, rng: np.random.Generator, syn: dict[int, int]
) -> list[int]:
    if target_bin == 1:
        return list(sentence)
    if target_bin == 3:
        return [syn.get(t, t) for t in sentence]
    positions = [i for i, t in enumerate(sentence) if t in syn]
    out = list(sentence)
    if positions:
        p = positions[int(rng.integers(len(positions)))]
        out[p] = syn[out[p]]
    return out


def _make_reference(
    rng: np.random.Generator,
    vocab: Vocabulary,
    spec: CorpusSpec,
    sentences: list[list[int]],
    n_sentences: int,
    target_bin: int,
) -> tuple[int, ...]:
    """Document prefix of `n_sentences` sentences, substituted until the
    computed abstractiveness bin matches the target."""
    syn = vocab.synonym_map()
    document: list[int] = [t for s in sentences for t in s]
    for _ in range(MAX_REF_ATTEMPTS):
        ref: list[int] = []
        for j in range(n_sentences):
            ref.extend(_substituted(sentences[j], target_bin, rng, syn))
        if abstractiveness_bin(extractive_density(document, ref)) == target_bin:
            return tuple(ref)
    raise CorpusError(
        f"could not realize abstractiveness bin {target_bin} with "
        f"{n_sentences} sentences after {MAX_REF_ATTEMPTS} attempts"
    )


def _reference_entities(reference: Sequence[int], vocab: Vocabulary) -> tuple[int, ...]:
    ent_set = vocab.entity_set
    seen: list[int] = []
    for t in reference:
        if t in ent_set and t not in seen:
            seen.append(t)
    return tuple(seen)


def generate_corpus(spec: CorpusSpec, seed: int) -> GeneratedCorpus:
    """Deterministic corpus build; the length-bin table comes from the train
    split only and annotates every split."""
    vocab = build_vocabulary(spec.n_entities, spec.n_content)
    rng = np.random.default_rng(seed)
    splits: dict[str, list[CorpusSample]] = {}
    for split, n in zip(SPLITS, (spec.n_train, spec.n_valid, spec.n_test)):
        s_values = _assignment_list(n, spec.ref_sentence_mix, rng)
        bin_values = _assignment_list(n, spec.abs_mix, rng)
        samples = []
        for i in range(n):
            entity_within = s_values[i] if spec.require_ref_entity else None
            sentences, _ = _make_document(rng, vocab, spec, entity_within)
            reference = _make_reference(
                rng, vocab, spec, sentences, s_values[i], bin_values[i]
            )
            samples.append(
                CorpusSample(
                    id=f"{split}-{i:05d}",
                    document=tuple(t for s in sentences for t in s),
                    reference=reference,
                    entities=_reference_entities(reference, vocab),
                    length_bin=0,  # annotated below once the table exists
                    abs_bin=bin_values[i],
                )
            )
        splits[split] = samples

    table = build_length_bins(
        [len(s.reference) for s in splits["train"]], corpus_id=f"synth-seed{seed}"
    )
    for split, samples in splits.items():
        splits[split] = [
            dataclasses.replace(s, length_bin=length_bin_of(len(s.reference), table))
            for s in samples
        ]
    return GeneratedCorpus(vocab=vocab, table=table, splits=splits)


def filter_reference_for_entities(
    sample: CorpusSample, vocab: Vocabulary, table: BinTable
) -> Optional[CorpusSample]:
    """Drop reference sentences that mention none of the sample's entities.

    Returns None (sample excluded) when the sample has no entities or no
    sentence survives. Bins are recomputed for the filtered reference.
    """
    if not sample.entities:
        return None
    ent_set = set(sample.entities)
    kept: list[int] = []
    for sent in split_sentences(sample.reference, vocab.terminator_set):
        if ent_set & set(sent):
            kept.extend(sent)
    if not kept:
        return None
    return dataclasses.replace(
        sample,
        reference=tuple(kept),
        length_bin=length_bin_of(len(kept), table),
        abs_bin=abstractiveness_bin(extractive_density(sample.document, kept)),
    )


def prepare_task_samples(
    samples: Sequence[CorpusSample], task: str, vocab: Vocabulary, table: BinTable
) -> list[CorpusSample]:
    """Task-specific preprocessing shared by training and evaluation. The
    entity task trains and scores against entity-bearing reference sentences
    only, so both sides must filter identically."""
    if task != "entity":
        return list(samples)
    out = []
    for s in samples:
        filtered = filter_reference_for_entities(s, vocab, table)
        if filtered is not None:
            out.append(filtered)
    return out


_FIELDS = ("id", "document", "reference", "entities", "length_bin", "abs_bin")


def write_corpus_file(path, samples: Sequence[CorpusSample], vocab: Vocabulary) -> None:
    with open(path, "w") as f:
        for s in samples:
            row = {
                "id": s.id,
                "document": vocab.decode(s.document),
                "reference": vocab.decode(s.reference),
                "entities": [vocab.token(e) for e in s.entities],
                "length_bin": s.length_bin,
                "abs_bin": s.abs_bin,
            }
            f.write(json.dumps(row) + "\n")


def read_corpus_file(path, vocab: Vocabulary) -> list[CorpusSample]:
    samples = []
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"{path}:{line_no}: invalid JSON: {e}") from None
            missing = [k for k in _FIELDS if k not in row]
            if missing:
                raise CorpusError(f"{path}:{line_no}: missing fields {missing}")
            try:
                samples.append(
                    CorpusSample(
                        id=row["id"],
                        document=tuple(vocab.encode(row["document"])),
                        reference=tuple(vocab.encode(row["reference"])),
                        entities=tuple(vocab.id_of(t) for t in row["entities"]),
                        length_bin=int(row["length_bin"]),
                        abs_bin=int(row["abs_bin"]),
                    )
                )
            except KeyError as e:
                raise CorpusError(f"{path}:{line_no}: unknown token {e}") from None
    return samples


def write_corpus_dir(outdir, corpus: GeneratedCorpus) -> None:
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "vocab.json"), "w") as f:
        json.dump(corpus.vocab.to_dict(), f)
        f.write("\n")
    with open(os.path.join(outdir, "bins.json"), "w") as f:
        json.dump(corpus.table.to_dict(), f)
        f.write("\n")
    for split, samples in corpus.splits.items():
        write_corpus_file(os.path.join(outdir, f"{split}.jsonl"), samples, corpus.vocab)


def read_corpus_dir(path) -> GeneratedCorpus:
    vocab_path = os.path.join(path, "vocab.json")
    bins_path = os.path.join(path, "bins.json")
    for p in (vocab_path, bins_path):
        if not os.path.exists(p):
            raise CorpusError(f"missing corpus file: {p}")
    with open(vocab_path) as f:
        vocab = Vocabulary.from_dict(json.load(f))
    with open(bins_path) as f:
        table = BinTable.from_dict(json.load(f))
    splits = {}
    for split in SPLITS:
        p = os.path.join(path, f"{split}.jsonl")
        if os.path.exists(p):
            splits[split] = read_corpus_file(p, vocab)
    if not splits:
        raise CorpusError(f"no split files found under {path}")
    return GeneratedCorpus(vocab=vocab, table=table, splits=splits)
