"""Constraint sets: named cost functions with thresholds, one set per task.

A cost vector is evaluated for a generated summary against its document,
reference, and control request. Constraint order inside a set is fixed and
is the order used everywhere downstream (multipliers, penalty weights,
trace columns, checkpoints).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import cloze, metrics
from .bins import BinTable, length_bin_of
from .vocab import N_ABS_BINS, N_LENGTH_BINS, TokenSeq, Vocabulary

TASKS = ("length", "entity", "abstractiveness")


class CostKind(enum.Enum):
    LENGTH_BIN = "length_bin_distance"
    ABS_BIN = "abs_bin_distance"
    REPEAT3 = "repeat3"
    QA_NEGF1 = "qa_negf1"
    ENTITY_REPETITION = "entity_repetition"
    CONJUNCTION = "conjunction"


# Worst attainable value per cost, charged to degenerate (empty) rollouts.
_MAX_COST = {
    CostKind.LENGTH_BIN: 0.9,
    CostKind.ABS_BIN: 2.0 / 3.0,
    CostKind.REPEAT3: 1.0,
    CostKind.QA_NEGF1: 0.0,
    CostKind.ENTITY_REPETITION: 1.0,
    CostKind.CONJUNCTION: 1.0,
}


@dataclass(frozen=True)
class Constraint:
    kind: CostKind
    threshold: float


@dataclass(frozen=True)
class ConstraintSet:
    task: str
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if not self.constraints:
            raise ValueError("constraint set must not be empty")

    def __len__(self) -> int:
        return len(self.constraints)

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([c.threshold for c in self.constraints], dtype=float)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.kind.value for c in self.constraints)

    def max_costs(self) -> np.ndarray:
        return np.array([_MAX_COST[c.kind] for c in self.constraints], dtype=float)


def length_constraint_set() -> ConstraintSet:
    return ConstraintSet(
        "length",
        (
            Constraint(CostKind.LENGTH_BIN, 0.0),
            Constraint(CostKind.REPEAT3, 0.0),
        ),
    )


def entity_constraint_set() -> ConstraintSet:
    return ConstraintSet(
        "entity",
        (
            Constraint(CostKind.QA_NEGF1, -0.9),
            Constraint(CostKind.REPEAT3, 0.0),
            Constraint(CostKind.ENTITY_REPETITION, 0.0),
        ),
    )


def abstractiveness_constraint_set() -> ConstraintSet:
    return ConstraintSet(
        "abstractiveness",
        (
            Constraint(CostKind.ABS_BIN, 0.0),
            Constraint(CostKind.REPEAT3, 0.0),
            Constraint(CostKind.CONJUNCTION, 0.0),
        ),
    )


def constraint_set_for(task: str) -> ConstraintSet:
    try:
        return {
            "length": length_constraint_set,
            "entity": entity_constraint_set,
            "abstractiveness": abstractiveness_constraint_set,
        }[task]()
    except KeyError:
        raise ValueError(f"unknown task {task!r}") from None


@dataclass(frozen=True)
class ControlRequest:
    """One control signal. Exactly one of the target fields is set, and it
    must match the task."""

    task: str
    length_bin: Optional[int] = None
    abs_bin: Optional[int] = None
    entities: tuple[int, ...] = ()

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.task == "length":
            if self.length_bin is None or self.abs_bin is not None or self.entities:
                raise ValueError("length request takes only length_bin")
            if not 1 <= self.length_bin <= N_LENGTH_BINS:
                raise ValueError(f"length_bin out of range: {self.length_bin}")
        elif self.task == "abstractiveness":
            if self.abs_bin is None or self.length_bin is not None or self.entities:
                raise ValueError("abstractiveness request takes only abs_bin")
            if not 1 <= self.abs_bin <= N_ABS_BINS:
                raise ValueError(f"abs_bin out of range: {self.abs_bin}")
        else:
            if not self.entities or self.length_bin is not None or self.abs_bin is not None:
                raise ValueError("entity request takes only a non-empty entity tuple")
            if len(set(self.entities)) != len(self.entities):
                raise ValueError("requested entities must be distinct")


def length_bin_cost(generated_bin: int, target_bin: int) -> float:
    """Normalized bin distance |generated - target| / 10."""
    for b in (generated_bin, target_bin):
        if not 1 <= b <= N_LENGTH_BINS:
            raise ValueError(f"length bin out of range: {b}")
    return abs(generated_bin - target_bin) / N_LENGTH_BINS


def abs_bin_cost(generated_bin: int, target_bin: int) -> float:
    """Normalized bin distance |generated - target| / 3."""
    for b in (generated_bin, target_bin):
        if not 1 <= b <= N_ABS_BINS:
            raise ValueError(f"abstractiveness bin out of range: {b}")
    return abs(generated_bin - target_bin) / N_ABS_BINS


def evaluate_costs(
    x: TokenSeq,
    y: TokenSeq,
    y_ref: TokenSeq,
    request: ControlRequest,
    cset: ConstraintSet,
    vocab: Vocabulary,
    table: Optional[BinTable] = None,
    oracle: Optional[cloze.AnswerOracle] = None,
) -> np.ndarray:
    """Cost vector for one summary, in constraint-set order.

    Sequences must already be EOS-free. An empty summary is rejected here;
    callers that tolerate degenerate rollouts charge ``cset.max_costs()``
    themselves instead of calling in.
    """
    if len(y) == 0:
        raise ValueError("cannot evaluate costs of an empty summary")
    if request.task != cset.task:
        raise ValueError(
            f"request task {request.task!r} does not match constraint set {cset.task!r}"
        )
    out = np.empty(len(cset), dtype=float)
    for i, constraint in enumerate(cset.constraints):
        kind = constraint.kind
        if kind is CostKind.LENGTH_BIN:
            if table is None:
                raise ValueError("length_bin_distance needs a bin table")
            out[i] = length_bin_cost(length_bin_of(len(y), table), request.length_bin)
        elif kind is CostKind.ABS_BIN:
            gen_bin = metrics.abstractiveness_bin(metrics.extractive_density(x, y))
            out[i] = abs_bin_cost(gen_bin, request.abs_bin)
        elif kind is CostKind.REPEAT3:
            out[i] = metrics.repeat_ratio(y, 3)
        elif kind is CostKind.QA_NEGF1:
            if oracle is None:
                raise ValueError("qa_negf1 needs an answer oracle")
            items = cloze.make_cloze_items(y_ref, request.entities, y_ref, vocab.mask)
            if not items:
                raise ValueError("no cloze questions: requested entities missing from reference")
            out[i] = -cloze.qa_f1(items, y, oracle, vocab)
        elif kind is CostKind.ENTITY_REPETITION:
            out[i] = metrics.entity_repetition_fraction(y, request.entities, vocab.terminator_set)
        elif kind is CostKind.CONJUNCTION:
            out[i] = float(metrics.conjunction_indicator(y, y_ref, vocab.but))
        else:  # pragma: no cover - enum is closed
            raise AssertionError(kind)
    return out


def violations(costs: np.ndarray, cset: ConstraintSet) -> np.ndarray:
    """Boolean vector, True where the cost strictly exceeds its threshold."""
    costs = np.asarray(costs, dtype=float)
    if costs.shape != (len(cset),):
        raise ValueError(
            f"cost vector shape {costs.shape} does not match constraint set of {len(cset)}"
        )
    return costs > cset.thresholds
