"""Training loops.

Three modes share one gradient path:

- ml: likelihood pretraining on reference summaries, conditioning each sample
  on its own reference attributes (plain SGD, no clipping).
- cmdp: constrained self-critical policy gradient. The policy ascends
  reward - lambda . costs - baseline, with the greedy rollout's reward as the
  baseline; multipliers then take a projected ascent step on the batch-mean
  constraint gaps, so lambda_i grows while constraint i is violated on
  average and decays to zero once it is satisfied.
- mdp: the unconstrained baseline with the same reward shaped by fixed
  penalty weights, reward - weights . costs, self-critical against the
  identically shaped greedy score.

Likelihood pretraining necessarily conditions each sample on the control its
own reference satisfies, so it can only learn the controls the reference
distribution exercises. The rollout modes instead draw the requested length
or abstractiveness bin uniformly at random per rollout: the costs carry the
control signal for any request, and the greedy baseline shares the sampled
rollout's request, so the reference-dependent part of the reward cancels
from the advantage. Entity requests stay reference-derived in every mode
because the cloze questions behind the QA constraint are built from the
paired reference.

Sampled rollouts draw their seeds as base seed + a running rollout counter,
so whole runs are reproducible bit for bit. The policy-gradient estimate
(only it; neither the likelihood gradient nor the multiplier step) is
norm-clipped before the update.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO

import numpy as np

from . import policy
from .bins import BinTable
from .cloze import AnswerOracle
from .constraints import (
    TASKS,
    ConstraintSet,
    ControlRequest,
    constraint_set_for,
    evaluate_costs,
    violations,
)
from .corpus import CorpusSample
from .metrics import lcs_f1
from .vocab import Vocabulary, strip_eos

CLIP_NORM = 5.0

DEFAULT_POLICY_LR = {"ml": 1e-3, "cmdp": 5e-5, "mdp": 5e-5}

# Fixed penalty weights for the mdp baseline, in constraint-set order.
DEFAULT_MDP_WEIGHTS = {
    "length": (0.4, 0.6),
    "entity": (0.15, 0.4, 0.5),
    "abstractiveness": (0.4, 0.5, 0.3),
}

MODES = ("ml", "cmdp", "mdp")


class NumericError(ArithmeticError):
    """Raised when training produces non-finite parameters."""


@dataclass
class TrainingConfig:
    task: str = "length"
    mode: str = "cmdp"
    policy_lr: Optional[float] = None  # None picks the per-mode default
    multiplier_lr: float = 1e-2
    lambda_init: float = 0.01
    batch_size: int = 16
    max_iters: int = 1000
    epochs: int = 10  # ml mode trains in passes over the data
    checkpoint_interval: int = 10  # iterations per trace row
    seed: int = 0
    max_len: int = 40
    mdp_weights: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        for name in ("batch_size", "max_iters", "epochs", "checkpoint_interval", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("multiplier_lr", "lambda_init"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.policy_lr is not None and self.policy_lr <= 0:
            raise ValueError("policy_lr must be positive")

    def resolved_policy_lr(self) -> float:
        if self.policy_lr is not None:
            return self.policy_lr
        return DEFAULT_POLICY_LR[self.mode]

    def resolved_mdp_weights(self, cset: ConstraintSet) -> np.ndarray:
        w = self.mdp_weights
        if w is None:
            w = DEFAULT_MDP_WEIGHTS[self.task]
        w = np.asarray(w, dtype=float)
        if w.shape != (len(cset),):
            raise ValueError(
                f"mdp_weights has {w.size} entries, constraint set has {len(cset)}"
            )
        return w


@dataclass(frozen=True)
class LagrangianState:
    """Multiplier vector, kept nonnegative by projection."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("multipliers must form a vector")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("multipliers must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @classmethod
    def init(cls, m: int, value: float) -> "LagrangianState":
        return cls(np.full(m, float(value)))


def lambda_step(
    lam: np.ndarray, mean_costs: np.ndarray, thresholds: np.ndarray, lr: float
) -> np.ndarray:
    """Projected ascent on the dual: max(0, lambda + lr * (mean_costs - alpha))."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != np.shape(mean_costs) or lam.shape != np.shape(thresholds):
        raise ValueError("multiplier, cost, and threshold vectors must align")
    return np.maximum(0.0, lam + lr * (np.asarray(mean_costs) - np.asarray(thresholds)))


def request_for_sample(sample: CorpusSample, task: str) -> ControlRequest:
    """The control signal a sample's own reference satisfies.

    Training always conditions on the reference's measured attribute, so the
    reward (overlap with that reference) and the bin/entity costs pull in the
    same direction; free-form requests are a decode-time affair."""
    if task == "length":
        return ControlRequest(task, length_bin=sample.length_bin)
    if task == "abstractiveness":
        return ControlRequest(task, abs_bin=sample.abs_bin)
    return ControlRequest(task, entities=tuple(sample.entities))


@dataclass(frozen=True)
class TrajectoryItem:
    sample: CorpusSample
    request: ControlRequest
    sampled: policy.Rollout
    greedy: policy.Rollout
    reward: float
    baseline: float
    costs: np.ndarray
    greedy_costs: np.ndarray


@dataclass(frozen=True)
class TrajectoryBatch:
    items: tuple[TrajectoryItem, ...]

    def __len__(self) -> int:
        return len(self.items)

    def mean_reward(self) -> float:
        return float(np.mean([it.reward for it in self.items]))

    def mean_costs(self) -> np.ndarray:
        return np.mean([it.costs for it in self.items], axis=0)


def _scored_rollout(
    rollout: policy.Rollout,
    sample: CorpusSample,
    request: ControlRequest,
    cset: ConstraintSet,
    vocab: Vocabulary,
    table: Optional[BinTable],
    oracle: Optional[AnswerOracle],
) -> tuple[float, np.ndarray]:
    """Reward and cost vector; a rollout that stopped immediately earns zero
    reward and the worst attainable cost on every constraint."""
    y = strip_eos(rollout.tokens, vocab.eos)
    if not y:
        return 0.0, cset.max_costs()
    reward = lcs_f1(y, sample.reference)
    costs = evaluate_costs(
        sample.document, y, sample.reference, request, cset,
        vocab=vocab, table=table, oracle=oracle,
    )
    return reward, costs


def build_batch(
    params: policy.PolicyParams,
    samples: Sequence[CorpusSample],
    task: str,
    cset: ConstraintSet,
    vocab: Vocabulary,
    table: Optional[BinTable],
    oracle: Optional[AnswerOracle],
    seeds: Sequence[int],
    max_len: int,
    requests: Optional[Sequence[ControlRequest]] = None,
) -> TrajectoryBatch:
    if len(seeds) != len(samples):
        raise ValueError("one rollout seed per sample")
    if requests is None:
        requests = [request_for_sample(s, task) for s in samples]
    if len(requests) != len(samples):
        raise ValueError("one control request per sample")
    items = []
    for sample, seed, request in zip(samples, seeds, requests):
        sampled = policy.sample(params, sample.document, request, vocab, seed, max_len)
        greedy = policy.greedy(params, sample.document, request, vocab, max_len)
        reward, costs = _scored_rollout(sampled, sample, request, cset, vocab, table, oracle)
        baseline, greedy_costs = _scored_rollout(
            greedy, sample, request, cset, vocab, table, oracle
        )
        items.append(
            TrajectoryItem(sample, request, sampled, greedy, reward, baseline, costs, greedy_costs)
        )
    return TrajectoryBatch(tuple(items))


def _policy_gradient(
    params: policy.PolicyParams,
    batch: TrajectoryBatch,
    advantages: Sequence[float],
    vocab: Vocabulary,
    clip: float = CLIP_NORM,
) -> policy.PolicyParams:
    """Batch-mean REINFORCE estimate, norm-clipped. Accumulation runs in
    batch order so runs are bitwise reproducible."""
    total = policy.zeros_like(params)
    for item, adv in zip(batch.items, advantages):
        _, g = policy.logprob_grad(
            params, item.sample.document, item.request, item.sampled.tokens, vocab
        )
        total.add_scaled_(g, float(adv))
    total.scale_(1.0 / len(batch))
    norm = total.global_norm()
    if norm > clip:
        total.scale_(clip / norm)
    return total


def cmdp_update(
    params: policy.PolicyParams,
    lam: LagrangianState,
    batch: TrajectoryBatch,
    cset: ConstraintSet,
    policy_lr: float,
    multiplier_lr: float,
    vocab: Vocabulary,
) -> LagrangianState:
    """One primal-dual step: ascend the policy on the Lagrangian advantage,
    then move the multipliers against the batch-mean constraint gaps.
    Updates params in place and returns the new multiplier state."""
    if lam.values.shape != (len(cset),):
        raise ValueError(
            f"{lam.values.size} multipliers for a constraint set of {len(cset)}"
        )
    advantages = [
        it.reward - float(lam.values @ it.costs) - it.baseline for it in batch.items
    ]
    grad = _policy_gradient(params, batch, advantages, vocab)
    params.add_scaled_(grad, policy_lr)
    new_values = lambda_step(
        lam.values, batch.mean_costs(), cset.thresholds, multiplier_lr
    )
    return LagrangianState(new_values)


def mdp_update(
    params: policy.PolicyParams,
    batch: TrajectoryBatch,
    weights: np.ndarray,
    cset: ConstraintSet,
    policy_lr: float,
    vocab: Vocabulary,
) -> None:
    """Fixed-penalty self-critical step: both the sampled and the greedy
    rollout are scored as reward - weights . costs."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(cset),):
        raise ValueError(
            f"{weights.size} penalty weights for a constraint set of {len(cset)}"
        )
    advantages = [
        (it.reward - float(weights @ it.costs))
        - (it.baseline - float(weights @ it.greedy_costs))
        for it in batch.items
    ]
    grad = _policy_gradient(params, batch, advantages, vocab)
    params.add_scaled_(grad, policy_lr)


def ml_pretrain(
    params: policy.PolicyParams,
    samples: Sequence[CorpusSample],
    vocab: Vocabulary,
    config: TrainingConfig,
) -> list[float]:
    """Likelihood ascent on references (with EOS appended), conditioning on
    each reference's own attributes. Returns per-epoch mean log-likelihood."""
    if not samples:
        raise ValueError("ml_pretrain needs a non-empty sample list")
    lr = config.resolved_policy_lr()
    rng = np.random.default_rng(config.seed)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(samples))
        total_logp = 0.0
        for start in range(0, len(order), config.batch_size):
            chunk = order[start : start + config.batch_size]
            grad = policy.zeros_like(params)
            for idx in chunk:
                sample = samples[int(idx)]
                request = request_for_sample(sample, config.task)
                target = list(sample.reference) + [vocab.eos]
                logp, g = policy.logprob_grad(
                    params, sample.document, request, target, vocab
                )
                grad.add_scaled_(g, 1.0)
                total_logp += logp
            grad.scale_(1.0 / len(chunk))
            params.add_scaled_(grad, lr)
        bad = params.first_nonfinite()
        if bad is not None:
            raise NumericError(
                f"non-finite parameter block {bad!r} after epoch {epoch + 1}"
            )
        history.append(total_logp / len(samples))
    return history


TRACE_FIXED_COLUMNS = ("iter", "mean_reward")


def trace_columns(m: int) -> list[str]:
    cols = list(TRACE_FIXED_COLUMNS)
    cols += [f"cost_{i}" for i in range(1, m + 1)]
    cols += [f"lambda_{i}" for i in range(1, m + 1)]
    cols += [f"viol_{i}" for i in range(1, m + 1)]
    return cols


class _TraceWriter:
    def __init__(self, fh: Optional[TextIO], m: int):
        self.fh = fh
        self.columns = trace_columns(m)
        self.writer = None
        if fh is not None:
            self.writer = csv.writer(fh)
            self.writer.writerow(self.columns)

    def write(self, row: dict) -> None:
        if self.writer is not None:
            self.writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in self.columns])
            self.fh.flush()


@dataclass
class _SpanAccumulator:
    """Collects per-sample statistics between trace rows."""

    m: int
    rewards: list[float] = field(default_factory=list)
    costs: list[np.ndarray] = field(default_factory=list)
    viols: list[np.ndarray] = field(default_factory=list)

    def add(self, batch: TrajectoryBatch, cset: ConstraintSet) -> None:
        for it in batch.items:
            self.rewards.append(it.reward)
            self.costs.append(it.costs)
            self.viols.append(violations(it.costs, cset).astype(float))

    def row(self, iteration: int, lam_values: np.ndarray) -> dict:
        mean_costs = np.mean(self.costs, axis=0)
        mean_viols = np.mean(self.viols, axis=0)
        row = {"iter": iteration, "mean_reward": float(np.mean(self.rewards))}
        for i in range(self.m):
            row[f"cost_{i + 1}"] = float(mean_costs[i])
            row[f"lambda_{i + 1}"] = float(lam_values[i])
            row[f"viol_{i + 1}"] = float(mean_viols[i])
        return row

    def reset(self) -> None:
        self.rewards.clear()
        self.costs.clear()
        self.viols.clear()


@dataclass
class TrainResult:
    params: policy.PolicyParams
    lam: Optional[LagrangianState]
    trace_rows: list[dict]
    ml_history: list[float]


def train(
    params: policy.PolicyParams,
    samples: Sequence[CorpusSample],
    vocab: Vocabulary,
    table: Optional[BinTable],
    config: TrainingConfig,
    trace_file: Optional[TextIO] = None,
) -> TrainResult:
    """Run one training job according to config.mode, mutating params.

    Trace rows (cmdp and mdp modes) report span means of reward, costs, and
    violation rates over the iterations since the previous row, and the
    instantaneous multipliers at the row's iteration. ml mode writes no
    trace; its per-epoch likelihood history lands in the result instead.
    """
    if config.mode == "ml":
        history = ml_pretrain(params, samples, vocab, config)
        return TrainResult(params, None, [], history)

    if not samples:
        raise ValueError("training needs a non-empty sample list")
    cset = constraint_set_for(config.task)
    oracle = AnswerOracle() if config.task == "entity" else None
    if config.task == "length" and table is None:
        raise ValueError("length task needs a bin table")
    lr = config.resolved_policy_lr()
    lam = LagrangianState.init(len(cset), config.lambda_init)
    weights = config.resolved_mdp_weights(cset) if config.mode == "mdp" else None

    rng = np.random.default_rng(config.seed)
    rollout_counter = 0
    tracer = _TraceWriter(trace_file, len(cset))
    span = _SpanAccumulator(len(cset))
    rows = []
    for it in range(config.max_iters):
        idxs = rng.integers(0, len(samples), size=config.batch_size)
        batch_samples = [samples[int(i)] for i in idxs]
        requests = [request_for_sample(s, config.task) for s in batch_samples]
        seeds = [config.seed + rollout_counter + k for k in range(config.batch_size)]
        rollout_counter += config.batch_size
        batch = build_batch(
            params,
            batch_samples,
            config.task,
            cset,
            vocab,
            table,
            oracle,
            seeds,
            config.max_len,
            requests=requests,
        )
        if config.mode == "cmdp":
            lam = cmdp_update(
                params, lam, batch, cset, lr, config.multiplier_lr, vocab
            )
        else:
            mdp_update(params, batch, weights, cset, lr, vocab)
        bad = params.first_nonfinite()
        if bad is not None:
            raise NumericError(
                f"non-finite parameter block {bad!r} at iteration {it + 1}"
            )
        span.add(batch, cset)
        if (it + 1) % config.checkpoint_interval == 0 or it + 1 == config.max_iters:
            lam_values = lam.values if config.mode == "cmdp" else np.zeros(len(cset))
            row = span.row(it + 1, lam_values)
            rows.append(row)
            tracer.write(row)
            span.reset()
    return TrainResult(
        params, lam if config.mode == "cmdp" else None, rows, []
    )
