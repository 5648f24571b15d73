"""Constrained policy-gradient training for attribute-controlled generation."""

from .bins import BinTable, DegenerateBinsError, build_length_bins, length_bin_of
from .cloze import UNANSWERABLE, AnswerOracle, ClozeItem, build_qa_training_items, qa_f1
from .constraints import (
    Constraint,
    ConstraintSet,
    ControlRequest,
    CostKind,
    constraint_set_for,
    evaluate_costs,
    violations,
)
from .corpus import (
    CorpusError,
    CorpusSample,
    CorpusSpec,
    GeneratedCorpus,
    generate_corpus,
    read_corpus_dir,
    write_corpus_dir,
)
from .evaluation import EvalReport, evaluate_policy, write_report
from .metrics import (
    abstractiveness_bin,
    extractive_density,
    extractive_fragments,
    lcs_f1,
    repeat_ratio,
)
from .policy import (
    PolicyDims,
    PolicyParams,
    Rollout,
    greedy,
    init_params,
    load_checkpoint,
    logprob_grad,
    sample,
    save_checkpoint,
)
from .trainer import (
    LagrangianState,
    NumericError,
    TrainingConfig,
    TrainResult,
    lambda_step,
    train,
)
from .vocab import Vocabulary, build_vocabulary

__version__ = "0.1.0"

__all__ = [
    "AnswerOracle",
    "BinTable",
    "ClozeItem",
    "Constraint",
    "ConstraintSet",
    "ControlRequest",
    "CorpusError",
    "CorpusSample",
    "CorpusSpec",
    "CostKind",
    "DegenerateBinsError",
    "EvalReport",
    "GeneratedCorpus",
    "LagrangianState",
    "NumericError",
    "PolicyDims",
    "PolicyParams",
    "Rollout",
    "TrainResult",
    "TrainingConfig",
    "UNANSWERABLE",
    "Vocabulary",
    "abstractiveness_bin",
    "build_length_bins",
    "build_qa_training_items",
    "build_vocabulary",
    "constraint_set_for",
    "evaluate_costs",
    "evaluate_policy",
    "extractive_density",
    "extractive_fragments",
    "generate_corpus",
    "greedy",
    "init_params",
    "lambda_step",
    "lcs_f1",
    "length_bin_of",
    "load_checkpoint",
    "logprob_grad",
    "qa_f1",
    "read_corpus_dir",
    "repeat_ratio",
    "sample",
    "save_checkpoint",
    "train",
    "violations",
    "write_corpus_dir",
    "write_report",
]
