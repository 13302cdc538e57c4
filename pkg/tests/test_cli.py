import json
import xml.etree.ElementTree as ET
from dataclasses import replace
from pathlib import Path

import pytest
from click.testing import CliRunner

from stancewatch.cli import main
from stancewatch.corpus import ingest_jsonl, labeled_subset, split_dataset, write_jsonl
from stancewatch.encoder import init_params, load_checkpoint, param_tensors, save_checkpoint
from stancewatch.manifest import LOCK_NAME
from stancewatch.synth import generate_corpus, generate_labeled
from stancewatch.tokenizer import Vocabulary


@pytest.fixture
def runner():
    return CliRunner()


def run_ok(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


# Small-but-trainable settings shared by the pipeline tests.
FAST_TRAIN = [
    "--set", "d_model=16", "--set", "n_layers=1", "--set", "n_heads=2",
    "--set", "max_len=16", "--set", "epochs=2", "--set", "batch_size=8",
    "--set", "learning_rate=1e-3", "--set", "vocab_max_size=400",
]


@pytest.fixture
def workspace(tmp_path, runner):
    """Synthetic labeled + corpus files plus vocab/checkpoint in out/."""
    labeled = tmp_path / "labeled.jsonl"
    corpus = tmp_path / "corpus.jsonl"
    write_jsonl(generate_labeled(per_class=12, seed=7), labeled)
    write_jsonl(generate_corpus(days=6, per_day=30, seed=8, spike_days=(3,)), corpus)
    out = tmp_path / "out"
    run_ok(runner, ["build-vocab", "--labeled", str(labeled), "--out", str(out), "--quiet", *FAST_TRAIN])
    run_ok(runner, ["train", "--labeled", str(labeled), "--out", str(out), "--quiet", *FAST_TRAIN])
    return {"labeled": labeled, "corpus": corpus, "out": out}


class TestExitCodes:
    def test_missing_input_is_2(self, runner, tmp_path):
        result = runner.invoke(main, ["build-vocab", "--labeled", str(tmp_path / "nope.jsonl"),
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code == 2
        assert "not found" in result.output

    def test_no_input_given_is_2(self, runner, tmp_path):
        result = runner.invoke(main, ["build-vocab", "--out", str(tmp_path / "out")])
        assert result.exit_code == 2
        assert "--labeled" in result.output

    def test_validation_failure_is_3(self, runner, tmp_path):
        labeled = tmp_path / "labeled.jsonl"
        # one example per class is too few to stratify
        write_jsonl(generate_labeled(per_class=1, seed=1), labeled)
        result = runner.invoke(main, ["build-vocab", "--labeled", str(labeled),
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code == 3
        assert "stratify" in result.output

    def test_duplicate_ids_are_3(self, runner, tmp_path):
        labeled = tmp_path / "labeled.jsonl"
        rec = json.dumps({"id": "a", "created_at": "2021-07-22T10:00:00Z", "text": "aşı", "label": 0})
        labeled.write_text(rec + "\n" + rec + "\n", encoding="utf-8")
        result = runner.invoke(main, ["build-vocab", "--labeled", str(labeled),
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code == 3
        assert "duplicate" in result.output

    def test_bad_set_pair_is_3(self, runner, tmp_path):
        result = runner.invoke(main, ["build-vocab", "--labeled", "x", "--set", "epochs",
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code == 3

    def test_unknown_set_key_is_3(self, runner, tmp_path):
        result = runner.invoke(main, ["build-vocab", "--labeled", "x", "--set", "epoks=3",
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code == 3
        assert "unknown config key" in result.output

    def test_lock_contention_is_2(self, runner, workspace):
        out = workspace["out"]
        (out / LOCK_NAME).write_text("123", encoding="utf-8")
        result = runner.invoke(main, ["build-vocab", "--labeled", str(workspace["labeled"]),
                                      "--out", str(out), *FAST_TRAIN])
        (out / LOCK_NAME).unlink()
        assert result.exit_code == 2
        assert "locked" in result.output


class TestBuildVocab:
    def test_outputs_and_manifest(self, runner, tmp_path):
        labeled = tmp_path / "labeled.jsonl"
        write_jsonl(generate_labeled(per_class=8, seed=3), labeled)
        out = tmp_path / "out"
        run_ok(runner, ["build-vocab", "--labeled", str(labeled), "--out", str(out), *FAST_TRAIN])
        assert (out / "vocab.txt").is_file()
        doc = json.loads((out / "manifest_build_vocab.json").read_text(encoding="utf-8"))
        assert doc["command"] == "build-vocab"
        assert doc["inputs"]["labeled"].startswith("sha256:")
        assert "vocab.txt" in doc["outputs"]
        assert not (out / LOCK_NAME).exists()

    def test_vocab_uses_train_split_only(self, runner, tmp_path):
        """A marker character present only in a test-split text never reaches
        the vocabulary; one in a train-split text does. The synthetic word
        pools contain neither 'q' nor 'w', so chars are clean markers."""
        tweets = generate_labeled(per_class=12, seed=9)
        # same seed and fraction the command will use; membership depends on
        # positions only, so rewriting texts cannot move examples across
        split = split_dataset(labeled_subset(tweets), 0.8, seed=13)
        test_id = split.test.examples[0].id
        train_id = split.train.examples[0].id
        rows = []
        for t in tweets:
            text = t.text
            if t.id == test_id:
                text += " qqq"
            if t.id == train_id:
                text += " www"
            rows.append(replace(t, text=text))
        labeled = tmp_path / "labeled.jsonl"
        write_jsonl(rows, labeled)
        out = tmp_path / "out"
        run_ok(runner, ["build-vocab", "--labeled", str(labeled), "--out", str(out),
                        "--set", "vocab_max_size=4000"])
        vocab = Vocabulary.load(out / "vocab.txt")
        assert not any("q" in tok for tok in vocab.tokens if not tok.startswith("["))
        assert any("w" in tok for tok in vocab.tokens if not tok.startswith("["))

    def test_rejects_written(self, runner, tmp_path):
        labeled = tmp_path / "labeled.jsonl"
        rows = generate_labeled(per_class=8, seed=3)
        write_jsonl(rows, labeled)
        with open(labeled, "a", encoding="utf-8") as fh:
            fh.write("{bad json\n")
        out = tmp_path / "out"
        result = run_ok(runner, ["build-vocab", "--labeled", str(labeled), "--out", str(out), *FAST_TRAIN])
        assert "rejected 1 records" in result.output
        assert (out / "rejects_labeled.jsonl").is_file()
        doc = json.loads((out / "manifest_build_vocab.json").read_text(encoding="utf-8"))
        assert "rejects_labeled.jsonl" in doc["outputs"]


class TestTrain:
    def test_outputs(self, workspace):
        out = workspace["out"]
        for name in ("model.ckpt", "train_trace.txt", "split_manifest.json", "manifest_train.json"):
            assert (out / name).is_file(), name
        params = load_checkpoint(out / "model.ckpt")
        assert params.config.d_model == 16
        vocab = Vocabulary.load(out / "vocab.txt")
        assert params.vocab_hash == vocab.content_hash()
        trace = (out / "train_trace.txt").read_text(encoding="utf-8").splitlines()
        assert len(trace) == 3  # header + 2 epochs

    def test_zero_lr_checkpoint_equals_init(self, runner, tmp_path):
        labeled = tmp_path / "labeled.jsonl"
        write_jsonl(generate_labeled(per_class=8, seed=5), labeled)
        out = tmp_path / "out"
        args = FAST_TRAIN + ["--set", "learning_rate=0", "--set", "epochs=1", "--seed-init", "21"]
        run_ok(runner, ["build-vocab", "--labeled", str(labeled), "--out", str(out), *args])
        run_ok(runner, ["train", "--labeled", str(labeled), "--out", str(out), *args])
        got = load_checkpoint(out / "model.ckpt")
        vocab = Vocabulary.load(out / "vocab.txt")
        fresh = init_params(got.config, 21, vocab.content_hash())
        ref = tmp_path / "ref.ckpt"
        save_checkpoint(fresh, ref)
        assert ref.read_bytes() == (out / "model.ckpt").read_bytes()

    def test_head_only_flag(self, runner, tmp_path):
        labeled = tmp_path / "labeled.jsonl"
        write_jsonl(generate_labeled(per_class=8, seed=5), labeled)
        out = tmp_path / "out"
        run_ok(runner, ["build-vocab", "--labeled", str(labeled), "--out", str(out), *FAST_TRAIN])
        run_ok(runner, ["train", "--labeled", str(labeled), "--out", str(out),
                        "--head-only", *FAST_TRAIN])
        got = load_checkpoint(out / "model.ckpt")
        vocab = Vocabulary.load(out / "vocab.txt")
        fresh = init_params(got.config, 17, vocab.content_hash())  # default seed_init
        fresh32 = {n: a.astype("float32") for n, a in param_tensors(fresh)}
        for name, arr in param_tensors(got):
            same = (arr.astype("float32") == fresh32[name]).all()
            if name in ("pooler_w", "pooler_b", "classifier_w", "classifier_b"):
                assert not same, name
            else:
                assert same, name


class TestEvaluate:
    def test_outputs(self, runner, workspace):
        out = workspace["out"]
        run_ok(runner, ["evaluate", "--labeled", str(workspace["labeled"]), "--out", str(out),
                        "--quiet", *FAST_TRAIN])
        report = json.loads((out / "eval_report.json").read_text(encoding="utf-8"))
        assert set(report["per_class"]) == {"news", "irrelevant", "anti_vaccine", "pro_vaccine"}
        for name in ("roc_news.csv", "roc_irrelevant.csv", "roc_anti_vaccine.csv", "roc_pro_vaccine.csv"):
            assert (out / name).is_file()
        for name in ("fig_confusion.svg", "fig_roc.svg", "fig_prf.svg"):
            ET.fromstring((out / name).read_text(encoding="utf-8"))

    def test_missing_checkpoint_is_2(self, runner, tmp_path):
        labeled = tmp_path / "labeled.jsonl"
        write_jsonl(generate_labeled(per_class=8, seed=5), labeled)
        result = CliRunner().invoke(main, ["evaluate", "--labeled", str(labeled),
                                           "--out", str(tmp_path / "empty_out")])
        assert result.exit_code == 2


class TestClassifyAndTimeline:
    def test_classify_outputs(self, runner, workspace):
        out = workspace["out"]
        run_ok(runner, ["classify", "--corpus", str(workspace["corpus"]), "--out", str(out),
                        "--quiet", *FAST_TRAIN])
        rows = (out / "classified.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(rows) == 180  # 6 days x 30
        rec = json.loads(rows[0])
        assert set(rec) == {"id", "created_at", "predicted", "proba"}

    def test_timeline_outputs(self, runner, workspace):
        out = workspace["out"]
        result = run_ok(runner, ["timeline", "--corpus", str(workspace["corpus"]),
                                 "--out", str(out), *FAST_TRAIN])
        assert "peaks:" in result.output
        csv_lines = (out / "timeline.csv").read_text(encoding="utf-8").splitlines()
        assert csv_lines[0].startswith("date,count_news")
        assert len(csv_lines) == 7  # header + 6 days
        peaks = json.loads((out / "peaks.json").read_text(encoding="utf-8"))
        assert peaks["category"] == "anti_vaccine"
        assert "global_max_date" in peaks
        ET.fromstring((out / "fig_timeline.svg").read_text(encoding="utf-8"))

    def test_timeline_reuses_classified(self, runner, workspace, tmp_path):
        out = workspace["out"]
        run_ok(runner, ["classify", "--corpus", str(workspace["corpus"]), "--out", str(out),
                        "--quiet", *FAST_TRAIN])
        out2 = tmp_path / "out2"
        result = run_ok(runner, ["timeline", "--classified", str(out / "classified.jsonl"),
                                 "--out", str(out2), *FAST_TRAIN])
        assert "reusing" in result.output
        assert (out2 / "timeline.csv").is_file()
        doc = json.loads((out2 / "manifest_timeline.json").read_text(encoding="utf-8"))
        assert "classified" in doc["inputs"]

    def test_single_day_corpus_degenerate(self, runner, workspace, tmp_path):
        corpus = tmp_path / "one_day.jsonl"
        write_jsonl(generate_corpus(days=1, per_day=25, seed=3, spike_days=()), corpus)
        out = workspace["out"]
        result = run_ok(runner, ["timeline", "--corpus", str(corpus), "--out", str(out), *FAST_TRAIN])
        peaks = json.loads((out / "peaks.json").read_text(encoding="utf-8"))
        assert peaks["degenerate"] is True
        assert "global max" in result.output

    def test_smoothing_window_labelled(self, runner, workspace):
        out = workspace["out"]
        run_ok(runner, ["timeline", "--corpus", str(workspace["corpus"]), "--out", str(out),
                        "--smoothing-window", "3", "--quiet", *FAST_TRAIN])
        fig = (out / "fig_timeline.svg").read_text(encoding="utf-8")
        assert "smoothed, window 3" in fig
        peaks = json.loads((out / "peaks.json").read_text(encoding="utf-8"))
        assert peaks["parameters"]["smoothing_window"] == 3


class TestGenSynthetic:
    def test_outputs(self, runner, tmp_path):
        out = tmp_path / "out"
        run_ok(runner, ["gen-synthetic", "--per-class", "5", "--days", "3", "--per-day", "10",
                        "--spike-days", "1", "--out", str(out), "--quiet"])
        labeled = ingest_jsonl(out / "synthetic_labeled.jsonl")
        corpus = ingest_jsonl(out / "synthetic_corpus.jsonl")
        assert len(labeled.tweets) == 20
        assert len(corpus.tweets) == 30
        assert all(t.gold_label is not None for t in labeled.tweets)
        assert all(t.gold_label is None for t in corpus.tweets)
        doc = json.loads((out / "manifest_gen_synthetic.json").read_text(encoding="utf-8"))
        assert doc["config"]["generator"]["per_class"] == 5

    def test_bad_spike_day_is_3(self, runner, tmp_path):
        result = runner.invoke(main, ["gen-synthetic", "--days", "3", "--spike-days", "9",
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code == 3

    def test_default_spikes_match_default_days(self, runner, tmp_path):
        out = tmp_path / "out"
        run_ok(runner, ["gen-synthetic", "--per-class", "2", "--per-day", "2",
                        "--out", str(out), "--quiet"])
        doc = json.loads((out / "manifest_gen_synthetic.json").read_text(encoding="utf-8"))
        assert doc["config"]["generator"]["spike_days"] == [20, 28]


class TestReproducibility:
    def test_rerun_byte_identical(self, runner, tmp_path):
        """Same inputs and seeds give byte-identical data outputs; manifests
        may differ only in the timing block."""
        labeled = tmp_path / "labeled.jsonl"
        corpus = tmp_path / "corpus.jsonl"
        write_jsonl(generate_labeled(per_class=10, seed=4), labeled)
        write_jsonl(generate_corpus(days=4, per_day=20, seed=6, spike_days=(2,)), corpus)

        def pipeline(out: Path):
            for cmd in (
                ["build-vocab", "--labeled", str(labeled)],
                ["train", "--labeled", str(labeled)],
                ["evaluate", "--labeled", str(labeled)],
                ["timeline", "--corpus", str(corpus)],
            ):
                run_ok(runner, [*cmd, "--out", str(out), "--quiet", *FAST_TRAIN])

        out = tmp_path / "run"
        pipeline(out)
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        for p in out.iterdir():
            p.unlink()
        pipeline(out)
        second = {p.name: p.read_bytes() for p in out.iterdir()}
        assert sorted(first) == sorted(second)
        for name, b1 in first.items():
            b2 = second[name]
            if name.startswith("manifest_"):
                d1 = json.loads(b1)
                d2 = json.loads(b2)
                d1.pop("timings_s")
                d2.pop("timings_s")
                assert d1 == d2, name
            else:
                assert b1 == b2, name
