"""Cloze question construction and the deterministic answer oracle.

Questions are built by masking entity occurrences in a reference summary,
one occurrence at a time. The oracle answers a question against a context
(usually a generated summary) by scoring every entity occurrence in the
context with the unigram overlap between the token windows flanking the
candidate and the MASK; it abstains when the best score falls below the
oracle's minimum. The QA training-set builders reproduce the answerable /
irrelevant / repeated-entity construction used to supervise an extractive
QA model, including the pseudo-reference balancing step; this package only
audits that pipeline, nothing trains on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .metrics import lcs_recall, split_sentences
from .vocab import TokenSeq, Vocabulary

# Gold answer marking a question as unanswerable from its context.
UNANSWERABLE = -1

# LCS-recall ceiling for a document sentence to count as irrelevant.
IRRELEVANT_RECALL_MAX = 0.2


@dataclass(frozen=True)
class AnswerOracle:
    """Window-matching extractive answerer.

    window: tokens inspected on each side of the MASK / candidate.
    min_score: smallest window overlap accepted; below it the oracle
    predicts UNANSWERABLE.
    """

    window: int = 5
    min_score: int = 1

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window radius must be >= 1")
        if self.min_score < 0:
            raise ValueError("min_score must be >= 0")


@dataclass(frozen=True)
class ClozeItem:
    question: tuple[int, ...]
    context: tuple[int, ...]
    gold: int  # entity token id, or UNANSWERABLE

    def mask_position(self, mask: int) -> int:
        positions = [i for i, t in enumerate(self.question) if t == mask]
        if len(positions) != 1:
            raise ValueError(
                "cloze question must contain exactly one mask, found %d"
                % len(positions)
            )
        return positions[0]


def make_cloze_items(
    reference: TokenSeq,
    entities: Sequence[int],
    context: TokenSeq,
    mask: int,
) -> list[ClozeItem]:
    """One item per entity occurrence in the reference, masking that single
    occurrence; the gold answer is the masked entity."""
    reference = list(reference)
    items = []
    for ent in entities:
        for pos, tok in enumerate(reference):
            if tok != ent:
                continue
            question = reference.copy()
            question[pos] = mask
            items.append(ClozeItem(tuple(question), tuple(context), ent))
    return items


def _window(seq: Sequence[int], center: int, radius: int) -> set[int]:
    lo = max(0, center - radius)
    return set(seq[lo:center]) | set(seq[center + 1 : center + 1 + radius])


def oracle_answer(
    item: ClozeItem,
    context: TokenSeq,
    oracle: AnswerOracle,
    vocab: Vocabulary,
) -> int:
    """Extract the best-matching entity occurrence from the context, or
    UNANSWERABLE when nothing scores at least the oracle minimum. Ties go to
    the earliest occurrence."""
    mask_pos = item.mask_position(vocab.mask)
    q_window = _window(item.question, mask_pos, oracle.window)
    entity_ids = vocab.entity_set
    context = list(context)
    best_score = -1
    best_token = UNANSWERABLE
    for pos, tok in enumerate(context):
        if tok not in entity_ids:
            continue
        score = len(q_window & _window(context, pos, oracle.window))
        if score > best_score:
            best_score = score
            best_token = tok
    if best_score < oracle.min_score:
        return UNANSWERABLE
    return best_token


def qa_f1(
    items: Sequence[ClozeItem],
    summary: TokenSeq,
    oracle: AnswerOracle,
    vocab: Vocabulary,
) -> float:
    """Mean per-item answer score using the summary as context.

    Answers are single tokens, so token-level F1 per item reduces to exact
    match; an UNANSWERABLE prediction scores 1 only on UNANSWERABLE gold.
    """
    if not items:
        raise ValueError("qa_f1 needs at least one cloze item")
    total = 0.0
    for item in items:
        total += float(oracle_answer(item, summary, oracle, vocab) == item.gold)
    return total / len(items)


def pseudo_reference(
    document: TokenSeq,
    reference: TokenSeq,
    entities: Sequence[int],
    vocab: Vocabulary,
) -> list[int]:
    """Greedily pick document sentences maximizing LCS recall against the
    reference until recall stops improving; returns [] (discarded) when the
    result misses any reference entity."""
    sentences = split_sentences(document, vocab.terminator_set)
    selected: list[int] = []
    best = 0.0
    while len(selected) < len(sentences):
        gain_idx = -1
        gain = best
        for idx in range(len(sentences)):
            if idx in selected:
                continue
            cand: list[int] = []
            for j in sorted(selected + [idx]):
                cand.extend(sentences[j])
            r = lcs_recall(cand, reference)
            if r > gain:
                gain = r
                gain_idx = idx
        if gain_idx < 0:
            break
        selected.append(gain_idx)
        best = gain
    out: list[int] = []
    for j in sorted(selected):
        out.extend(sentences[j])
    present = set(out)
    if any(e not in present for e in entities):
        return []
    return out


def make_unanswerable_items(
    document: TokenSeq,
    reference: TokenSeq,
    entities: Sequence[int],
    vocab: Vocabulary,
) -> list[ClozeItem]:
    """Irrelevant and repeated-entity items, both labeled UNANSWERABLE.

    Irrelevant: every cloze question paired with each document sentence that
    mentions no reference entity and has LCS recall <= 0.2 against the
    reference. Repeated-entity: for each reference sentence holding two or
    more distinct entities and each ordered entity pair (a, b), the sentence
    with the first occurrence of b overwritten by a, questioned by masking
    the first occurrence of a.
    """
    items: list[ClozeItem] = []
    questions = [
        it.question for it in make_cloze_items(reference, entities, reference, vocab.mask)
    ]
    ent_set = set(entities)

    for sent in split_sentences(document, vocab.terminator_set):
        if ent_set & set(sent):
            continue
        if lcs_recall(sent, reference) > IRRELEVANT_RECALL_MAX:
            continue
        for q in questions:
            items.append(ClozeItem(q, tuple(sent), UNANSWERABLE))

    for sent in split_sentences(reference, vocab.terminator_set):
        present: list[int] = []
        for tok in sent:
            if tok in ent_set and tok not in present:
                present.append(tok)
        if len(present) < 2:
            continue
        for a in present:
            for b in present:
                if a == b:
                    continue
                context = list(sent)
                context[context.index(b)] = a
                question = list(sent)
                question[question.index(a)] = vocab.mask
                items.append(ClozeItem(tuple(question), tuple(context), UNANSWERABLE))
    return items


@dataclass(frozen=True)
class QaTrainingSet:
    """Appendix-style question-context-answer triplets for one sample."""

    answerable: tuple[ClozeItem, ...]
    unanswerable: tuple[ClozeItem, ...]


def build_qa_training_items(
    document: TokenSeq,
    reference: TokenSeq,
    entities: Sequence[int],
    vocab: Vocabulary,
) -> QaTrainingSet:
    """Full construction: reference-context items balanced against
    pseudo-reference items (reference triplets are kept only when the pseudo
    reference exists), plus the unanswerable items."""
    answerable: list[ClozeItem] = []
    pseudo = pseudo_reference(document, reference, entities, vocab)
    if pseudo:
        answerable.extend(make_cloze_items(reference, entities, reference, vocab.mask))
        answerable.extend(make_cloze_items(reference, entities, pseudo, vocab.mask))
    unanswerable = make_unanswerable_items(document, reference, entities, vocab)
    return QaTrainingSet(tuple(answerable), tuple(unanswerable))
