import numpy as np
import pytest

from rumourlab.errors import ValidationError
from rumourlab.featurize import build_vocabulary, fit_tfidf
from rumourlab.gradengine import Tensor, parameter
from rumourlab.models import (
    BiGcnConfig,
    BiGcnModel,
    ClassicOptions,
    LstmConfig,
    LstmModel,
    TrainConfig,
    fit,
    forest_from_text,
    forest_to_text,
    predict_classic,
    predict_threads,
    train_classic,
)
from rumourlab.models.data import thread_docs, tweet_docs
from rumourlab.proptree import to_graph_batch
from rumourlab.synthetic import make_planted_threads

from conftest import make_thread


@pytest.fixture(scope="module")
def toy_threads():
    return make_planted_threads(n_threads=12, seed=3, max_replies=2)


@pytest.fixture(scope="module")
def lstm_setup(toy_threads):
    vocab = build_vocabulary(thread_docs(toy_threads), cap=80)
    model = LstmModel(
        LstmConfig(vocab_cap=100, embed_dim=6, hidden_dim=8,
                   perceptron_dim=5, max_len=16),
        vocab,
    )
    params = model.init_params(np.random.default_rng(0))
    return model, params


class TestLstm:
    def test_fully_padded_row_gives_bias_constant(self, lstm_setup):
        model, params = lstm_setup
        ids = np.zeros((3, 6), dtype=int)
        mask = np.zeros((3, 6))
        out = model.forward(params, ids, mask).values
        assert out[0, 0] == out[1, 0] == out[2, 0]

    def test_padding_extension_invariance(self, lstm_setup, toy_threads):
        model, params = lstm_setup
        data = model.prepare(toy_threads[:4])
        base = model.forward(params, data.ids, data.mask).values
        extended_ids = np.hstack([data.ids, np.zeros((4, 7), dtype=int)])
        extended_mask = np.hstack([data.mask, np.zeros((4, 7))])
        extended = model.forward(params, extended_ids, extended_mask).values
        assert np.abs(extended - base).max() <= 1e-12

    def test_output_in_open_unit_interval(self, lstm_setup, toy_threads):
        model, params = lstm_setup
        data = model.prepare(toy_threads)
        out = model.forward(params, data.ids, data.mask).values
        assert ((out > 0) & (out < 1)).all()

    def test_out_of_range_id_rejected(self, lstm_setup):
        model, params = lstm_setup
        bad = np.full((1, 4), params["embed"].shape[0], dtype=int)
        with pytest.raises(ValidationError, match="out of range"):
            model.forward(params, bad, np.ones((1, 4)))

    def test_forget_gate_bias_initialized_to_one(self, lstm_setup):
        _, params = lstm_setup
        assert (params["b_f"].values == 1.0).all()
        assert (params["b_i"].values == 0.0).all()

    def test_vocab_saturating_cap_still_addressable(self, toy_threads):
        # Reserved ids live inside the cap: a vocabulary built with
        # cap - 3 content terms must embed without range errors.
        vocab = build_vocabulary(thread_docs(toy_threads), cap=17)
        model = LstmModel(LstmConfig(vocab_cap=20, embed_dim=4, hidden_dim=4,
                                     perceptron_dim=3, max_len=8), vocab)
        params = model.init_params(np.random.default_rng(0))
        assert params["embed"].shape[0] == vocab.size
        data = model.prepare(toy_threads[:3])
        assert model.forward(params, data.ids, data.mask).shape == (3, 1)

    def test_vocab_exceeding_cap_rejected(self, toy_threads):
        vocab = build_vocabulary(thread_docs(toy_threads), cap=30)
        model = LstmModel(LstmConfig(vocab_cap=20, embed_dim=4, hidden_dim=4,
                                     perceptron_dim=3, max_len=8), vocab)
        with pytest.raises(ValidationError, match="vocab_cap"):
            model.init_params(np.random.default_rng(0))


@pytest.fixture(scope="module")
def bigcn_setup(toy_threads):
    tfidf = fit_tfidf(tweet_docs(toy_threads), top_k=50)
    model = BiGcnModel(
        BiGcnConfig(input_dim=tfidf.vocab.content_size, hidden_dim=6,
                    out_dim=5, drop_edge_rate=0.0),
        tfidf,
    )
    params = model.init_params(np.random.default_rng(1))
    return model, params


class TestBiGcn:
    def test_probabilities_sum_to_one(self, bigcn_setup, toy_threads):
        model, params = bigcn_setup
        data = model.prepare(toy_threads)
        batch = to_graph_batch(data.trees, model.config.input_dim)
        probs = model.forward(params, batch).values
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_non_root_permutation_invariance(self, bigcn_setup, toy_threads):
        model, params = bigcn_setup
        data = model.prepare([t for t in toy_threads if len(t.replies) >= 2][:3])
        batch = to_graph_batch(data.trees, model.config.input_dim)
        base = model.forward(params, batch).values
        permuted_trees = []
        for tree in data.trees:
            nodes = list(tree.nodes)
            if len(nodes) >= 3:
                reordered = [nodes[0]] + list(reversed(nodes[1:]))
                renumbered = [
                    type(node)(index=i + 1, parent=node.parent, features=node.features)
                    for i, node in enumerate(reordered)
                ]
                tree = type(tree)(thread_id=tree.thread_id, label=tree.label,
                                  nodes=tuple(renumbered))
            permuted_trees.append(tree)
        permuted = model.forward(
            params, to_graph_batch(permuted_trees, model.config.input_dim)).values
        assert np.abs(permuted - base).max() <= 1e-9

    def test_single_node_directions_agree_with_tied_weights(self, bigcn_setup):
        model, params = bigcn_setup
        tied = dict(params)
        tied["bu_w1"] = parameter(params["td_w1"].values.copy(), "bu_w1")
        tied["bu_w2"] = parameter(params["td_w2"].values.copy(), "bu_w2")
        thread = make_thread("solo", label="rumour", text="people say report")
        data = model.prepare([thread])
        batch = to_graph_batch(data.trees, model.config.input_dim)
        features = Tensor(batch.features)
        from rumourlab.gradengine import concat, gather_rows, matmul, relu, segment_mean, spmm

        halves = []
        for direction, adjacency in (("td", batch.td_adjacency),
                                     ("bu", batch.bu_adjacency)):
            root = batch.root_index[batch.graph_membership]
            h1 = relu(spmm(adjacency, matmul(features, tied[f"{direction}_w1"])))
            h1 = concat([h1, gather_rows(h1, root)])
            h2 = relu(spmm(adjacency, matmul(h1, tied[f"{direction}_w2"])))
            h2 = concat([h2, gather_rows(h2, root)])
            halves.append(segment_mean(h2, batch.graph_membership, 1).values)
        assert np.allclose(halves[0], halves[1], atol=1e-12)

    def test_dimension_mismatch_rejected(self, bigcn_setup, toy_threads):
        model, params = bigcn_setup
        data = model.prepare(toy_threads[:2])
        batch = to_graph_batch(data.trees, model.config.input_dim + 3)
        with pytest.raises(ValidationError, match="columns"):
            model.forward(params, batch)


class _StubBatch:
    def __init__(self, n):
        self.targets = np.zeros(n, dtype=int)

    def __len__(self):
        return len(self.targets)


class _ScriptedModel:
    """Trainer-protocol stub with scripted dev losses, for pinning the
    early-stopping contract."""

    def __init__(self, dev_losses):
        self.dev_losses = dev_losses
        self.epoch = 0

    def init_params(self, rng):
        return {"theta": parameter(np.array([0.0]), "theta")}

    def prepare(self, threads):
        return _StubBatch(max(1, len(threads)))

    def slice(self, data, index):
        return _StubBatch(len(index))

    def loss_and_predictions(self, params, batch, train, rng=None):
        if train:
            # One training batch per epoch; bump theta so snapshots differ.
            params["theta"].values = params["theta"].values + 1.0
            self.epoch += 1
            value = 1.0
        else:
            value = self.dev_losses[self.epoch - 1]
        loss = Tensor(np.array(float(value)))
        labels = ["nonrumour"] * len(batch)
        return loss, labels, np.zeros(len(batch))


class TestFitContracts:
    def _threads(self):
        return [make_thread(f"t{i}", label="nonrumour") for i in range(1)]

    def test_patience_one_stops_after_second_epoch(self):
        model = _ScriptedModel(dev_losses=[1.0, 2.0, 3.0, 4.0, 5.0])
        config = TrainConfig(lr=1.0, batch_size=1, max_epochs=10, patience=1,
                             class_weights=False, seed=0)
        result = fit(model, self._threads(), self._threads(), config)
        assert len(result.history) == 2
        assert result.best_epoch == 1
        # Epoch-1 parameters restored: theta was 1.0 after the first epoch.
        assert result.params["theta"].values.tolist() == [1.0]

    def test_patience_tolerates_plateau_then_recovers(self):
        model = _ScriptedModel(dev_losses=[3.0, 3.0, 2.0, 2.5, 2.4, 2.6, 2.7])
        config = TrainConfig(lr=1.0, batch_size=1, max_epochs=7, patience=2,
                             class_weights=False, seed=0)
        result = fit(model, self._threads(), self._threads(), config)
        assert result.best_epoch == 3
        assert len(result.history) == 5
        assert result.params["theta"].values.tolist() == [3.0]

    def test_non_finite_loss_reports_epoch_and_batch(self, toy_threads):
        class ExplodingModel(_ScriptedModel):
            def loss_and_predictions(self, params, batch, train, rng=None):
                if train:
                    return Tensor(np.array(np.nan)), ["nonrumour"], np.zeros(1)
                return Tensor(np.array(1.0)), ["nonrumour"], np.zeros(len(batch))

        config = TrainConfig(lr=1.0, batch_size=1, max_epochs=3, patience=1, seed=0)
        with pytest.raises(ValidationError, match="epoch 1, batch 1"):
            fit(ExplodingModel([1.0]), self._threads(), self._threads(), config)

    def test_empty_sets_rejected(self):
        config = TrainConfig(seed=0)
        with pytest.raises(ValidationError):
            fit(_ScriptedModel([1.0]), [], self._threads(), config)


class TestFitDeterminism:
    def test_same_seed_bitwise_identical(self, toy_threads):
        vocab = build_vocabulary(thread_docs(toy_threads), cap=60)
        model = LstmModel(LstmConfig(vocab_cap=80, embed_dim=4, hidden_dim=5,
                                     perceptron_dim=4, max_len=10, dropout=0.2),
                          vocab)
        config = TrainConfig(lr=0.05, batch_size=4, max_epochs=3, patience=3,
                             class_weights=False, seed=11)
        train, dev = toy_threads[:8], toy_threads[8:]
        first = fit(model, train, dev, config)
        second = fit(model, train, dev, config)
        assert first.history == second.history
        for name in first.params:
            assert np.array_equal(first.params[name].values,
                                  second.params[name].values)


class TestLearningSanity:
    def test_lstm_learns_planted_signal(self):
        threads = make_planted_threads(n_threads=40, seed=21, max_replies=1)
        vocab = build_vocabulary(thread_docs(threads), cap=200)
        model = LstmModel(LstmConfig(vocab_cap=250, embed_dim=12, hidden_dim=12,
                                     perceptron_dim=8, max_len=24), vocab)
        config = TrainConfig(lr=0.05, batch_size=8, max_epochs=15, patience=15,
                             class_weights=True, seed=2)
        result = fit(model, threads[:32], threads[32:], config)
        labels, _ = predict_threads(model, result.params, threads[:32])
        truth = [t.label for t in threads[:32]]
        accuracy = np.mean([p == t for p, t in zip(labels, truth)])
        assert accuracy >= 0.95


class TestTrainClassic:
    def _separable(self, n=20, seed=0):
        rng = np.random.default_rng(seed)
        pos = rng.normal(loc=(3, 3), scale=0.4, size=(n // 2, 2))
        neg = rng.normal(loc=(-3, -3), scale=0.4, size=(n // 2, 2))
        x = np.vstack([pos, neg])
        y = ["rumour"] * (n // 2) + ["nonrumour"] * (n // 2)
        return x, y

    def test_logreg_separates(self):
        x, y = self._separable()
        model = train_classic("logreg", x, y, ClassicOptions(seed=1, max_iters=300))
        labels, scores = predict_classic(model, x)
        assert labels == y
        assert ((scores > 0) & (scores < 1)).all()

    def test_logreg_zero_weights_score_half(self):
        x, y = self._separable()
        model = train_classic("logreg", x, y, ClassicOptions(seed=1, max_iters=300))
        model.weights[:] = 0.0
        model = type(model)(kind="logreg", weights=model.weights * 0, bias=0.0,
                            standardizer=model.standardizer)
        _, scores = predict_classic(model, x)
        assert np.allclose(scores, 0.5)

    def test_svm_converges_on_margin_data(self):
        # Ten points at fixed distance from the separating plane.
        x = np.array([[2.0], [2.2], [2.4], [2.6], [2.8],
                      [-2.0], [-2.2], [-2.4], [-2.6], [-2.8]])
        y = ["rumour"] * 5 + ["nonrumour"] * 5
        model = train_classic("svm", x, y, ClassicOptions(seed=0, svm_iters=2000, lr=0.1))
        z = model.standardizer.transform(x) @ model.weights + model.bias
        signs = np.where(np.array(y) == "rumour", 1.0, -1.0)
        hinge = np.maximum(0.0, 1.0 - signs * z).mean()
        assert hinge < 0.01
        labels, _ = predict_classic(model, x)
        assert labels == y

    def test_rf_depth_zero_predicts_majority(self):
        x = np.arange(12.0).reshape(-1, 1)
        y = ["rumour"] * 8 + ["nonrumour"] * 4
        model = train_classic("rf", x, y, ClassicOptions(
            seed=5, rf_trees=1, rf_max_depth=0))
        labels, _ = predict_classic(model, np.array([[0.0], [100.0]]))
        assert labels == ["rumour", "rumour"]

    def test_rf_unanimous_scores_one(self):
        x, y = self._separable()
        model = train_classic("rf", x, y, ClassicOptions(seed=2, rf_trees=15))
        _, scores = predict_classic(model, np.array([[3.0, 3.0], [-3.0, -3.0]]))
        assert scores[0] == 1.0 and scores[1] == 0.0

    def test_smote_requested_balances_training(self):
        x, y = self._separable(n=20)
        x = np.vstack([x, x[:4] + 0.1])
        y = y + ["rumour"] * 4
        model = train_classic("logreg", x, y,
                              ClassicOptions(seed=3, smote=True, max_iters=100))
        assert model.weights is not None  # smoke: fit succeeded on balanced data

    def test_single_class_rejected(self):
        x = np.zeros((4, 2))
        with pytest.raises(ValidationError):
            train_classic("logreg", x, ["rumour"] * 4, ClassicOptions())

    def test_deterministic_given_seed(self):
        x, y = self._separable()
        a = train_classic("rf", x, y, ClassicOptions(seed=9, rf_trees=10))
        b = train_classic("rf", x, y, ClassicOptions(seed=9, rf_trees=10))
        assert forest_to_text(a) == forest_to_text(b)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValidationError):
            train_classic("mlp", np.zeros((2, 2)), ["rumour", "nonrumour"])

    def test_dimension_mismatch_on_predict(self):
        x, y = self._separable()
        model = train_classic("logreg", x, y, ClassicOptions(max_iters=50))
        with pytest.raises(ValidationError, match="features"):
            predict_classic(model, np.zeros((2, 5)))


class TestForestPersistence:
    def test_round_trip_predictions_identical(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(30, 3))
        y = ["rumour" if v > 0 else "nonrumour" for v in x[:, 0]]
        model = train_classic("rf", x, y, ClassicOptions(seed=4, rf_trees=12))
        text = forest_to_text(model)
        reloaded = forest_from_text(text)
        labels_a, scores_a = predict_classic(model, x)
        labels_b, scores_b = predict_classic(reloaded, x)
        assert labels_a == labels_b
        assert np.array_equal(scores_a, scores_b)

    def test_version_required(self):
        with pytest.raises(ValidationError):
            forest_from_text("not a forest\n")


class TestBiGcnPredictMatchesArgmax(object):
    def test_predict_equals_argmax(self, bigcn_setup, toy_threads):
        model, params = bigcn_setup
        data = model.prepare(toy_threads)
        batch = to_graph_batch(data.trees, model.config.input_dim)
        probs = model.forward(params, batch).values
        _, labels, _ = model.loss_and_predictions(params, data, train=False)
        expected = ["rumour" if row[0] >= row[1] else "nonrumour" for row in probs]
        assert labels == expected
