import numpy as np
import pytest

from rumourlab.config import RunConfig, parse_config_text
from rumourlab.errors import ValidationError
from rumourlab.evalrun import (
    RunPredictor,
    compute_report,
    majority_vote,
    metrics_to_text,
    report_to_text,
    run_experiment,
)
from rumourlab.ingest import save_tweets
from rumourlab.synthetic import make_planted_records


def brute_force_counts(predictions, truth, cls):
    tp = fp = fn = tn = 0
    for p, t in zip(predictions, truth):
        if p == cls and t == cls:
            tp += 1
        elif p == cls:
            fp += 1
        elif t == cls:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


class TestComputeReport:
    def test_perfect_predictions(self):
        labels = ["rumour", "nonrumour", "rumour"]
        report = compute_report(labels, labels)
        assert report.accuracy == 1.0
        for row in report.rows.values():
            assert row.precision == row.recall == row.f1 == 1.0

    def test_table_row_harmonic_mean_identity(self):
        # Precision 0.79 and recall 0.77 print as F1 0.78 at 2 dp.
        from rumourlab.evalrun import _f1

        assert round(_f1(0.79, 0.77), 2) == 0.78

    def test_confusion_example(self):
        # 10 examples with rumour-row TP=2 FP=1 FN=2.
        predictions = ["rumour", "rumour", "rumour",
                       "nonrumour", "nonrumour",
                       "nonrumour", "nonrumour", "nonrumour", "nonrumour", "nonrumour"]
        truth = ["rumour", "rumour", "nonrumour",
                 "rumour", "rumour",
                 "nonrumour", "nonrumour", "nonrumour", "nonrumour", "nonrumour"]
        report = compute_report(predictions, truth)
        row = report.rows["rumour"]
        assert row.precision == pytest.approx(0.667, abs=1e-3)
        assert row.recall == pytest.approx(0.5, abs=1e-12)
        assert row.f1 == pytest.approx(0.571, abs=1e-3)

    def test_matches_brute_force_on_random_pairs(self):
        rng = np.random.default_rng(23)
        labels = ("rumour", "nonrumour")
        predictions = [labels[i] for i in rng.integers(0, 2, size=1000)]
        truth = [labels[i] for i in rng.integers(0, 2, size=1000)]
        report = compute_report(predictions, truth)
        correct = sum(p == t for p, t in zip(predictions, truth))
        assert report.accuracy == pytest.approx(correct / 1000, abs=1e-12)
        for cls in labels:
            tp, fp, fn, _ = brute_force_counts(predictions, truth, cls)
            row = report.rows[cls]
            assert row.support == tp + fn
            assert row.precision == pytest.approx(tp / (tp + fp), abs=1e-12)
            assert row.recall == pytest.approx(tp / (tp + fn), abs=1e-12)

    def test_accuracy_is_support_weighted_recall(self):
        rng = np.random.default_rng(29)
        labels = ("rumour", "nonrumour")
        predictions = [labels[i] for i in rng.integers(0, 2, size=400)]
        truth = [labels[i] for i in rng.integers(0, 2, size=400)]
        report = compute_report(predictions, truth)
        weighted = sum(
            report.rows[c].recall * report.rows[c].support for c in labels
        ) / 400
        assert report.accuracy == pytest.approx(weighted, abs=1e-12)

    def test_zero_denominators_give_zero(self):
        report = compute_report(["nonrumour", "nonrumour"], ["nonrumour", "nonrumour"])
        row = report.rows["rumour"]
        assert row.precision == 0.0 and row.recall == 0.0 and row.f1 == 0.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            compute_report(["rumour"], ["rumour", "nonrumour"])

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            compute_report([], [])

    def test_unknown_label_rejected(self):
        with pytest.raises(ValidationError):
            compute_report(["maybe"], ["rumour"])


class TestMajorityVote:
    def test_single_run_identity(self):
        run = ["rumour", "nonrumour"]
        assert majority_vote([run]) == run

    def test_two_of_three(self):
        runs = [["rumour"], ["rumour"], ["nonrumour"]]
        assert majority_vote(runs) == ["rumour"]

    def test_tie_resolves_to_nonrumour(self):
        runs = [["rumour"], ["nonrumour"]]
        assert majority_vote(runs) == ["nonrumour"]

    def test_order_invariance(self):
        rng = np.random.default_rng(31)
        labels = ("rumour", "nonrumour")
        runs = [[labels[i] for i in rng.integers(0, 2, size=50)] for _ in range(5)]
        voted = majority_vote(runs)
        assert majority_vote(list(reversed(runs))) == voted

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            majority_vote([["rumour"], ["rumour", "nonrumour"]])

    def test_no_runs_rejected(self):
        with pytest.raises(ValidationError):
            majority_vote([])


class TestReportText:
    def test_report_layout(self):
        report = compute_report(
            ["rumour", "nonrumour"], ["rumour", "nonrumour"],
            model="logreg", config_digest="abc123", seeds=(1, 2))
        text = report_to_text(report)
        lines = text.splitlines()
        assert lines[0] == "# rumourlab-report v1"
        assert "model = logreg" in lines
        assert "seeds = 1,2" in lines
        assert any(line.startswith("R ") for line in lines)
        assert any(line.startswith("N ") for line in lines)

    def test_metrics_flat_keys(self):
        report = compute_report(["rumour"], ["rumour"])
        text = metrics_to_text(report)
        for key in ("accuracy", "r_precision", "r_recall", "r_f1",
                    "n_precision", "n_recall", "n_f1"):
            assert f"{key} = " in text


class TestRunConfig:
    def test_digest_stable_and_sensitive(self):
        base = RunConfig(dataset="x.jsonl")
        assert base.digest() == RunConfig(dataset="x.jsonl").digest()
        assert base.digest() != RunConfig(dataset="y.jsonl").digest()

    def test_digest_ignores_output_location(self):
        a = RunConfig(dataset="x.jsonl", out_dir="here")
        b = RunConfig(dataset="x.jsonl", out_dir="there")
        assert a.digest() == b.digest()

    def test_parse_overrides(self):
        config = parse_config_text(
            "model = bigcn\nseeds = 1,2,3\nratios = 0.6,0.2,0.2\n"
            "smote = true\nrf_max_depth = none\nlr = 0.005\n")
        assert config.model == "bigcn"
        assert config.seeds == (1, 2, 3)
        assert config.ratios == (0.6, 0.2, 0.2)
        assert config.smote is True
        assert config.rf_max_depth is None
        assert config.lr == 0.005

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError, match="unknown config key"):
            parse_config_text("no_such_key = 1\n")

    def test_comments_and_blanks_ignored(self):
        config = parse_config_text("# comment\n\nmodel = rf  # trailing\n")
        assert config.model == "rf"

    def test_unknown_model_rejected(self):
        with pytest.raises(ValidationError):
            parse_config_text("model = transformer\n")

    def test_finetune_preset_values(self):
        from rumourlab.config import FINETUNE_PRESET

        config = parse_config_text(FINETUNE_PRESET)
        assert config.optimizer == "adamw"
        assert config.lr == 1e-4
        assert config.weight_decay == 1e-2
        assert config.epsilon == 1e-7
        assert config.batch_size == 16
        assert config.max_epochs == 10


@pytest.fixture(scope="module")
def planted_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "planted.jsonl"
    save_tweets(make_planted_records(n_threads=40, seed=7, max_replies=2), path)
    return path


class TestRunExperiment:
    def _config(self, planted_file, tmp_path, **overrides):
        fields = dict(dataset=str(planted_file), model="logreg",
                      out_dir=str(tmp_path / "runs"), seeds=(1,),
                      features="tfidf", classic_iters=150)
        fields.update(overrides)
        return RunConfig(**fields)

    def test_report_matches_predictions_file(self, planted_file, tmp_path):
        result = run_experiment(self._config(planted_file, tmp_path))
        run_dir = result.run_dir
        assert (run_dir / "report.txt").exists()
        assert (run_dir / "metrics.txt").exists()
        lines = (run_dir / "predictions.txt").read_text().splitlines()
        predicted = [line.split("\t")[1] for line in lines]
        truth = [t.label for t in result.split.test]
        recomputed = compute_report(predicted, truth)
        assert recomputed.accuracy == result.report.accuracy
        assert recomputed.rows == result.report.rows

    def test_rerun_is_byte_identical(self, planted_file, tmp_path):
        config = self._config(planted_file, tmp_path)
        first = run_experiment(config)
        payload_a = {
            p.name: p.read_bytes() for p in sorted(first.run_dir.iterdir())
            if p.is_file()
        }
        second = run_experiment(config)
        assert second.run_dir == first.run_dir
        payload_b = {
            p.name: p.read_bytes() for p in sorted(second.run_dir.iterdir())
            if p.is_file()
        }
        assert payload_a == payload_b

    def test_seed_list_recorded(self, planted_file, tmp_path):
        config = self._config(planted_file, tmp_path, seeds=(1, 2, 3))
        result = run_experiment(config)
        assert result.report.seeds == (1, 2, 3)
        assert "seeds = 1,2,3" in (result.run_dir / "report.txt").read_text()
        for seed in (1, 2, 3):
            assert (result.run_dir / f"ckpt_seed{seed}.txt").exists()

    def test_predictor_round_trip(self, planted_file, tmp_path):
        config = self._config(planted_file, tmp_path)
        result = run_experiment(config)
        predictor = RunPredictor(result.run_dir)
        labels, scores = predictor.predict(result.split.test)
        file_lines = (result.run_dir / "predictions.txt").read_text().splitlines()
        assert [l.split("\t")[1] for l in file_lines] == labels
        assert len(scores) == len(labels)

    def test_stage_name_attached_to_errors(self, tmp_path):
        config = RunConfig(dataset=str(tmp_path / "missing.jsonl"),
                           out_dir=str(tmp_path / "runs"))
        with pytest.raises(FileNotFoundError, match="stage: ingest"):
            run_experiment(config)
