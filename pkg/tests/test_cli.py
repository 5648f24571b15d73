"""End-to-end command-line workflows: corpus generation, training, decoding,
evaluation, config layering, exit codes, and byte-level rerun determinism."""

import json
import os

import pytest

from ctrlgen import policy
from ctrlgen.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from ctrlgen.vocab import build_vocabulary

SMALL = [
    "--set", "n_train=30", "--set", "n_valid=10", "--set", "n_test=10",
    "--set", "n_entities=4", "--set", "n_content=40", "--set", "band_width=4",
    "--set", "require_ref_entity=true",
]


def read(path):
    with open(path, "rb") as f:
        return f.read()


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["gen-corpus", "--out", str(out), "--seed", "3"] + SMALL) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def ml_dir(tmp_path_factory, corpus_dir):
    out = tmp_path_factory.mktemp("ml")
    code = main([
        "train", "--out", str(out), "--corpus", str(corpus_dir),
        "--task", "length", "--mode", "ml", "--set", "epochs=2",
    ])
    assert code == EXIT_OK
    return out


class TestGenCorpus:
    def test_writes_all_artifacts(self, corpus_dir):
        names = {p.name for p in corpus_dir.iterdir()}
        assert {"config.json", "vocab.json", "bins.json",
                "train.jsonl", "valid.jsonl", "test.jsonl"} <= names

    def test_config_echo_is_resolved(self, corpus_dir):
        with open(corpus_dir / "config.json") as f:
            echo = json.load(f)
        assert echo["command"] == "gen-corpus"
        assert echo["config"]["seed"] == 3
        assert echo["config"]["n_train"] == 30
        assert echo["config"]["doc_sentences"] == 10  # untouched default

    def test_rerun_is_byte_identical(self, corpus_dir, tmp_path):
        again = tmp_path / "again"
        assert main(["gen-corpus", "--out", str(again), "--seed", "3"] + SMALL) == EXIT_OK
        for name in ("vocab.json", "bins.json", "train.jsonl", "valid.jsonl",
                     "test.jsonl", "config.json"):
            assert read(corpus_dir / name) == read(again / name), name

    def test_unknown_key_rejected(self, tmp_path):
        code = main(["gen-corpus", "--out", str(tmp_path / "x"),
                     "--set", "no_such_knob=1"])
        assert code == EXIT_CONFIG

    def test_infeasible_spec_is_config_error(self, tmp_path):
        code = main(["gen-corpus", "--out", str(tmp_path / "x"),
                     "--set", "band_width=10"])
        assert code == EXIT_CONFIG

    def test_config_file_layering(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"seed": 5, "n_train": 30, "n_valid": 10,
                                   "n_test": 10, "n_entities": 4,
                                   "n_content": 40, "band_width": 4}))
        out = tmp_path / "out"
        code = main(["gen-corpus", "--out", str(out), "--config", str(cfg),
                     "--seed", "7", "--set", "n_valid=12"])
        assert code == EXIT_OK
        with open(out / "config.json") as f:
            echo = json.load(f)["config"]
        assert echo["seed"] == 7  # flag beats file
        assert echo["n_valid"] == 12  # --set beats both
        assert echo["n_train"] == 30  # file beats default

    def test_missing_config_file(self, tmp_path):
        code = main(["gen-corpus", "--out", str(tmp_path / "x"),
                     "--config", str(tmp_path / "nope.json")])
        assert code == EXIT_CONFIG


class TestTrain:
    def test_ml_artifacts(self, ml_dir):
        assert (ml_dir / "checkpoint.json").exists()
        with open(ml_dir / "ml_history.csv") as f:
            lines = f.read().splitlines()
        assert lines[0] == "epoch,mean_logprob"
        assert len(lines) == 3
        ckpt = policy.load_checkpoint(ml_dir / "checkpoint.json")
        assert ckpt.lam is None
        assert ckpt.meta["mode"] == "ml"

    def test_cmdp_trace_and_multipliers(self, corpus_dir, ml_dir, tmp_path):
        out = tmp_path / "cmdp"
        code = main([
            "train", "--out", str(out), "--corpus", str(corpus_dir),
            "--checkpoint", str(ml_dir / "checkpoint.json"),
            "--task", "length", "--mode", "cmdp",
            "--set", "max_iters=3", "--set", "checkpoint_interval=1",
        ])
        assert code == EXIT_OK
        with open(out / "trace.csv") as f:
            lines = f.read().splitlines()
        assert lines[0].startswith("iter,mean_reward")
        assert len(lines) == 4
        ckpt = policy.load_checkpoint(out / "checkpoint.json")
        assert ckpt.lam is not None and len(ckpt.lam) == 2

    def test_rerun_is_byte_identical(self, corpus_dir, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            code = main([
                "train", "--out", str(out), "--corpus", str(corpus_dir),
                "--task", "length", "--mode", "cmdp", "--seed", "1",
                "--set", "max_iters=2", "--set", "checkpoint_interval=1",
            ])
            assert code == EXIT_OK
            outs.append(out)
        for name in ("trace.csv", "checkpoint.json"):
            assert read(outs[0] / name) == read(outs[1] / name), name

    def test_bad_training_config(self, corpus_dir, tmp_path):
        code = main([
            "train", "--out", str(tmp_path / "x"), "--corpus", str(corpus_dir),
            "--task", "length", "--mode", "ml", "--set", "epochs=-1",
        ])
        assert code == EXIT_CONFIG

    def test_missing_corpus(self, tmp_path):
        code = main([
            "train", "--out", str(tmp_path / "x"), "--corpus", str(tmp_path / "no"),
            "--task", "length", "--mode", "ml",
        ])
        assert code == EXIT_DATA

    def test_checkpoint_vocab_mismatch(self, corpus_dir, ml_dir, tmp_path):
        other = tmp_path / "other-corpus"
        args = ["gen-corpus", "--out", str(other), "--seed", "3"] + SMALL
        args[args.index("n_entities=4")] = "n_entities=5"
        assert main(args) == EXIT_OK
        code = main([
            "train", "--out", str(tmp_path / "x"), "--corpus", str(other),
            "--checkpoint", str(ml_dir / "checkpoint.json"),
            "--task", "length", "--mode", "ml",
        ])
        assert code == EXIT_DATA


@pytest.fixture(scope="module")
def requests_path(corpus_dir, tmp_path_factory):
    with open(corpus_dir / "train.jsonl") as f:
        rows = [json.loads(line) for line in f]
    p = tmp_path_factory.mktemp("req") / "requests.jsonl"
    with open(p, "w") as f:
        f.write(json.dumps({"id": "r1", "document": rows[0]["document"],
                            "length_bin": 4}) + "\n")
        f.write(json.dumps({"document": rows[1]["document"],
                            "abs_bin": 2}) + "\n")
        f.write(json.dumps({"document": rows[2]["document"],
                            "entities": rows[2]["entities"]}) + "\n")
    return p


class TestGenerate:
    def test_decodes_every_request(self, ml_dir, requests_path, tmp_path):
        out = tmp_path / "gen"
        code = main([
            "generate", "--out", str(out),
            "--checkpoint", str(ml_dir / "checkpoint.json"),
            "--requests", str(requests_path),
        ])
        assert code == EXIT_OK
        with open(out / "summaries.jsonl") as f:
            recs = [json.loads(line) for line in f]
        assert [r["id"] for r in recs] == ["r1", "line-2", "line-3"]
        for r in recs:
            assert isinstance(r["summary"], str)
            assert r["length"] == len(r["summary"].split())
            assert "length_bin" in r

    def test_rerun_is_byte_identical(self, ml_dir, requests_path, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main([
                "generate", "--out", str(out),
                "--checkpoint", str(ml_dir / "checkpoint.json"),
                "--requests", str(requests_path),
            ]) == EXIT_OK
            outs.append(out)
        assert read(outs[0] / "summaries.jsonl") == read(outs[1] / "summaries.jsonl")

    def bad_request_code(self, ml_dir, tmp_path, row):
        p = tmp_path / "bad.jsonl"
        with open(p, "w") as f:
            f.write(json.dumps(row) + "\n")
        return main([
            "generate", "--out", str(tmp_path / "out"),
            "--checkpoint", str(ml_dir / "checkpoint.json"),
            "--requests", str(p),
        ])

    def test_request_needs_exactly_one_control(self, ml_dir, requests_path, tmp_path):
        with open(requests_path) as f:
            doc = json.loads(f.readline())["document"]
        assert self.bad_request_code(
            ml_dir, tmp_path, {"document": doc, "length_bin": 1, "abs_bin": 1}
        ) == EXIT_DATA
        assert self.bad_request_code(ml_dir, tmp_path, {"document": doc}) == EXIT_DATA

    def test_unknown_document_token(self, ml_dir, tmp_path):
        assert self.bad_request_code(
            ml_dir, tmp_path, {"document": "gibberish", "length_bin": 1}
        ) == EXIT_DATA

    def test_non_entity_request_token(self, ml_dir, requests_path, tmp_path):
        with open(requests_path) as f:
            doc = json.loads(f.readline())["document"]
        token = doc.split()[1]  # a content word, not an entity
        assert self.bad_request_code(
            ml_dir, tmp_path, {"document": doc, "entities": [token]}
        ) == EXIT_DATA

    def test_missing_requests_file(self, ml_dir, tmp_path):
        code = main([
            "generate", "--out", str(tmp_path / "x"),
            "--checkpoint", str(ml_dir / "checkpoint.json"),
            "--requests", str(tmp_path / "none.jsonl"),
        ])
        assert code == EXIT_DATA


class TestEvaluate:
    def test_reports_written(self, corpus_dir, ml_dir, tmp_path, capsys):
        out = tmp_path / "eval"
        code = main([
            "evaluate", "--out", str(out),
            "--checkpoint", str(ml_dir / "checkpoint.json"),
            "--corpus", str(corpus_dir), "--split", "valid",
        ])
        assert code == EXIT_OK
        headline = capsys.readouterr().out
        assert "task=length split=valid n=10" in headline
        assert "bin_pct=" in headline
        with open(out / "report.csv") as f:
            header = f.readline()
        assert header == "metric,value\n"
        assert (out / "summary.txt").exists()

    def test_task_flag_overrides_checkpoint_meta(self, corpus_dir, ml_dir, tmp_path, capsys):
        code = main([
            "evaluate", "--out", str(tmp_path / "e"),
            "--checkpoint", str(ml_dir / "checkpoint.json"),
            "--corpus", str(corpus_dir), "--task", "entity", "--split", "valid",
        ])
        assert code == EXIT_OK
        assert "appear=" in capsys.readouterr().out

    def test_unknown_split(self, corpus_dir, ml_dir, tmp_path):
        code = main([
            "evaluate", "--out", str(tmp_path / "e"),
            "--checkpoint", str(ml_dir / "checkpoint.json"),
            "--corpus", str(corpus_dir), "--split", "nosuch",
        ])
        assert code == EXIT_DATA

    def test_checkpoint_without_task_metadata(self, corpus_dir, tmp_path):
        vocab = build_vocabulary(4, 40)
        params = policy.init_params(policy.PolicyDims(vocab_size=len(vocab)), seed=0)
        ckpt_path = tmp_path / "bare.json"
        policy.save_checkpoint(ckpt_path, params, vocab=vocab)
        code = main([
            "evaluate", "--out", str(tmp_path / "e"),
            "--checkpoint", str(ckpt_path), "--corpus", str(corpus_dir),
        ])
        assert code == EXIT_CONFIG

    def test_missing_checkpoint(self, corpus_dir, tmp_path):
        code = main([
            "evaluate", "--out", str(tmp_path / "e"),
            "--checkpoint", str(tmp_path / "no.json"),
            "--corpus", str(corpus_dir), "--task", "length",
        ])
        assert code == EXIT_DATA
