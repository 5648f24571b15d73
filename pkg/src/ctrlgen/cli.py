"""Command-line entry point.

Subcommands: gen-corpus, train, generate, evaluate. Options resolve in
layers: dataclass defaults, then a JSON config file (--config), then
command-line flags, then --set key=value overrides. Unknown keys are
rejected, and the fully resolved configuration is echoed to the output
directory as config.json before any work starts.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from typing import Callable, Optional, Sequence

from . import metrics, policy
from .bins import DegenerateBinsError, length_bin_of
from .constraints import TASKS, ControlRequest
from .corpus import (
    CorpusError,
    CorpusSpec,
    generate_corpus,
    prepare_task_samples,
    read_corpus_dir,
    write_corpus_dir,
)
from .evaluation import evaluate_policy, write_report
from .trainer import MODES, NumericError, TrainingConfig, train
from .vocab import strip_eos

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


def _dataclass_defaults(cls) -> dict:
    out = {}
    for f in dataclasses.fields(cls):
        if f.default is not dataclasses.MISSING:
            out[f.name] = f.default
        elif f.default_factory is not dataclasses.MISSING:  # type: ignore[misc]
            out[f.name] = f.default_factory()  # type: ignore[misc]
    return out


def _gen_corpus_defaults() -> dict:
    d = _dataclass_defaults(CorpusSpec)
    d["seed"] = 0
    return d


def _train_defaults() -> dict:
    d = _dataclass_defaults(TrainingConfig)
    d.update({"d_embed": 16, "d_ctrl": 16, "d_hidden": 32, "init_scale": 0.1})
    return d


def _generate_defaults() -> dict:
    return {"max_len": 40}


def _evaluate_defaults() -> dict:
    return {"split": "test", "max_len": 40, "task": None}


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def resolve_config(defaults: dict, args: argparse.Namespace, flag_keys: Sequence[str]) -> dict:
    """Layered merge with unknown-key rejection."""
    merged = dict(defaults)

    def apply(key: str, value, source: str) -> None:
        if key not in merged:
            raise ConfigError(f"unknown config key {key!r} (from {source})")
        merged[key] = value

    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path) as f:
                loaded = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        for k, v in loaded.items():
            apply(k, v, config_path)
    for key in flag_keys:
        value = getattr(args, key, None)
        if value is not None:
            apply(key, value, f"--{key}")
    for item in getattr(args, "set", None) or []:
        key, value = _parse_override(item)
        apply(key, value, "--set")

    # JSON has no tuples; dataclass fields that want them get them here.
    for k, v in merged.items():
        if isinstance(v, list):
            merged[k] = tuple(v)
    return merged


def _echo_config(outdir: str, command: str, merged: dict, inputs: dict) -> None:
    os.makedirs(outdir, exist_ok=True)
    payload = {"command": command, "config": merged, "inputs": inputs}
    with open(os.path.join(outdir, "config.json"), "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    merged = resolve_config(_gen_corpus_defaults(), args, ("seed",))
    seed = merged["seed"]
    try:
        spec = CorpusSpec(**{k: v for k, v in merged.items() if k != "seed"})
    except (CorpusError, TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    _echo_config(args.out, "gen-corpus", merged, {})
    try:
        corpus = generate_corpus(spec, seed)
    except (CorpusError, DegenerateBinsError) as e:
        raise DataError(str(e)) from None
    write_corpus_dir(args.out, corpus)
    sizes = {split: len(samples) for split, samples in corpus.splits.items()}
    print(f"wrote corpus to {args.out} (sizes: {sizes})")
    return EXIT_OK


def _load_corpus(path: str):
    try:
        return read_corpus_dir(path)
    except (CorpusError, FileNotFoundError) as e:
        raise DataError(str(e)) from None


def _load_checkpoint(path: str) -> policy.Checkpoint:
    try:
        return policy.load_checkpoint(path)
    except FileNotFoundError:
        raise DataError(f"checkpoint not found: {path}") from None
    except (KeyError, ValueError) as e:
        raise DataError(f"malformed checkpoint {path}: {e}") from None


def cmd_train(args: argparse.Namespace) -> int:
    merged = resolve_config(_train_defaults(), args, ("task", "mode", "seed"))
    dims_keys = {"d_embed", "d_ctrl", "d_hidden", "init_scale"}
    cfg_dict = {k: v for k, v in merged.items() if k not in dims_keys}
    try:
        config = TrainingConfig(**cfg_dict)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None

    corpus = _load_corpus(args.corpus)
    vocab, table = corpus.vocab, corpus.table
    if "train" not in corpus.splits:
        raise DataError(f"corpus at {args.corpus} has no train split")

    if args.checkpoint:
        ckpt = _load_checkpoint(args.checkpoint)
        if ckpt.vocab is not None and ckpt.vocab.tokens != vocab.tokens:
            raise DataError("checkpoint vocabulary does not match the corpus")
        params = ckpt.params
    else:
        dims = policy.PolicyDims(
            vocab_size=len(vocab),
            d_embed=merged["d_embed"],
            d_ctrl=merged["d_ctrl"],
            d_hidden=merged["d_hidden"],
        )
        params = policy.init_params(dims, seed=config.seed, scale=merged["init_scale"])

    samples = prepare_task_samples(corpus.splits["train"], config.task, vocab, table)
    if not samples:
        raise DataError(f"no usable training samples for task {config.task!r}")

    _echo_config(
        args.out, "train", merged,
        {"corpus": args.corpus, "checkpoint": args.checkpoint},
    )
    trace_path = os.path.join(args.out, "trace.csv")
    if config.mode == "ml":
        result = train(params, samples, vocab, table, config)
        with open(os.path.join(args.out, "ml_history.csv"), "w") as f:
            f.write("epoch,mean_logprob\n")
            for i, value in enumerate(result.ml_history, start=1):
                f.write(f"{i},{value!r}\n")
    else:
        with open(trace_path, "w") as f:
            result = train(params, samples, vocab, table, config, trace_file=f)

    lam = result.lam.values if result.lam is not None else None
    policy.save_checkpoint(
        os.path.join(args.out, "checkpoint.json"),
        result.params,
        lam=lam,
        vocab=vocab,
        bin_table=table,
        meta={"task": config.task, "mode": config.mode, "seed": config.seed},
    )
    if config.mode == "ml":
        print(
            f"ml training done: {config.epochs} epochs, "
            f"final mean logprob {result.ml_history[-1]:.3f}"
        )
    else:
        last = result.trace_rows[-1]
        print(
            f"{config.mode} training done: {config.max_iters} iterations, "
            f"final span reward {last['mean_reward']:.3f}"
        )
    return EXIT_OK


def _request_from_row(
    row: dict, line_no: int, encode_entity: Callable[[str], int]
) -> ControlRequest:
    present = [k for k in ("length_bin", "abs_bin", "entities") if row.get(k) is not None]
    if len(present) != 1:
        raise DataError(
            f"request line {line_no}: need exactly one of length_bin, abs_bin, entities"
        )
    key = present[0]
    try:
        if key == "length_bin":
            return ControlRequest("length", length_bin=int(row[key]))
        if key == "abs_bin":
            return ControlRequest("abstractiveness", abs_bin=int(row[key]))
        return ControlRequest("entity", entities=tuple(encode_entity(e) for e in row[key]))
    except (KeyError, ValueError) as e:
        raise DataError(f"request line {line_no}: {e}") from None


def cmd_generate(args: argparse.Namespace) -> int:
    merged = resolve_config(_generate_defaults(), args, ())
    ckpt = _load_checkpoint(args.checkpoint)
    if ckpt.vocab is None:
        raise DataError("checkpoint lacks an embedded vocabulary")
    vocab = ckpt.vocab
    _echo_config(
        args.out, "generate", merged,
        {"checkpoint": args.checkpoint, "requests": args.requests},
    )

    def encode_entity(token: str) -> int:
        ent = vocab.id_of(token)
        if ent not in vocab.entity_set:
            raise ValueError(f"{token!r} is not an entity token")
        return ent

    out_path = os.path.join(args.out, "summaries.jsonl")
    try:
        req_file = open(args.requests)
    except FileNotFoundError:
        raise DataError(f"requests file not found: {args.requests}") from None
    with req_file, open(out_path, "w") as out:
        for line_no, line in enumerate(req_file, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"request line {line_no}: invalid JSON: {e}") from None
            if "document" not in row:
                raise DataError(f"request line {line_no}: missing document")
            try:
                doc = vocab.encode(row["document"])
            except KeyError as e:
                raise DataError(f"request line {line_no}: unknown token {e}") from None
            request = _request_from_row(row, line_no, encode_entity)
            rollout = policy.greedy(
                ckpt.params, doc, request, vocab, max_len=merged["max_len"]
            )
            y = strip_eos(rollout.tokens, vocab.eos)
            record = {
                "id": row.get("id", f"line-{line_no}"),
                "summary": vocab.decode(y),
                "length": len(y),
            }
            if ckpt.bin_table is not None:
                record["length_bin"] = length_bin_of(len(y), ckpt.bin_table)
            if y and doc:
                record["abs_bin"] = metrics.abstractiveness_bin(
                    metrics.extractive_density(doc, y)
                )
            ents = [t for t in dict.fromkeys(y) if t in vocab.entity_set]
            record["entities"] = [vocab.token(t) for t in ents]
            out.write(json.dumps(record) + "\n")
    print(f"wrote summaries to {out_path}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    merged = resolve_config(_evaluate_defaults(), args, ("task", "split"))
    ckpt = _load_checkpoint(args.checkpoint)
    corpus = _load_corpus(args.corpus)
    vocab = corpus.vocab
    if ckpt.vocab is not None and ckpt.vocab.tokens != vocab.tokens:
        raise DataError("checkpoint vocabulary does not match the corpus")
    task = merged["task"] or ckpt.meta.get("task")
    if task not in TASKS:
        raise ConfigError(
            f"task {task!r} unknown; pass --task or use a checkpoint with task metadata"
        )
    split = merged["split"]
    if split not in corpus.splits:
        raise DataError(f"corpus has no {split!r} split")
    table = ckpt.bin_table if ckpt.bin_table is not None else corpus.table

    _echo_config(
        args.out, "evaluate", merged,
        {"checkpoint": args.checkpoint, "corpus": args.corpus},
    )
    try:
        report = evaluate_policy(
            ckpt.params, corpus.splits[split], task, vocab,
            table=table, max_len=merged["max_len"],
        )
    except ValueError as e:
        raise DataError(str(e)) from None
    write_report(report, args.out)
    headline = f"task={task} split={split} n={report.n_samples}"
    if report.bin_pct is not None:
        headline += f" bin_pct={100 * report.bin_pct:.1f}%"
    if report.appear is not None:
        headline += f" appear={100 * report.appear:.1f}% qa={report.qa:.3f} er={report.er:.3f}"
    headline += f" reward={report.mean_reward:.3f} satisfied={100 * report.satisfaction_rate:.1f}%"
    print(headline)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctrlgen",
        description="Attribute-controlled summarization on synthetic corpora",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file with config overrides")
        p.add_argument(
            "--set", action="append", metavar="KEY=VALUE",
            help="override a single config key (repeatable)",
        )
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("gen-corpus", help="generate a synthetic corpus")
    common(p)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train", help="train a policy")
    common(p)
    p.add_argument("--corpus", required=True, help="corpus directory")
    p.add_argument("--checkpoint", help="warm-start checkpoint")
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="decode summaries for a request file")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--requests", required=True, help="JSONL request file")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="score a checkpoint on a corpus split")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", choices=TASKS)
    p.add_argument("--split")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"numeric abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
