import numpy as np
import pytest
import scipy.sparse as sp

from causaltext.classify import (
    LogisticModel,
    LogregConfig,
    accuracy,
    estimate_error_rates,
    featurize,
    features_matrix,
    loss_and_gradient,
    make_split,
    predict_proba,
    train_logreg,
)
from causaltext.seeding import child_rng


class TestFeaturize:
    def test_empty_sequence(self):
        row = featurize(np.array([], dtype=np.int64), 4)
        assert np.array_equal(row.dense(), np.zeros(4))

    def test_counts(self):
        row = featurize(np.array([0, 0, 3]), 4)
        assert np.array_equal(row.dense(), [2, 0, 0, 1])

    def test_covariate_appended(self):
        row = featurize(np.array([1]), 4, covariates=[1.0])
        dense = row.dense()
        assert dense.shape == (5,)
        assert dense[4] == 1.0

    def test_binary_mode(self):
        row = featurize(np.array([0, 0, 3]), 4, binary=True)
        assert np.array_equal(row.dense(), [1, 0, 0, 1])

    def test_out_of_bounds(self):
        with pytest.raises(ValueError):
            featurize(np.array([9]), 4)

    def test_matrix_assembly(self):
        rows = [featurize(np.array([0]), 3), featurize(np.array([1, 2]), 3)]
        X = features_matrix(rows)
        assert isinstance(X, sp.csr_matrix)
        assert np.array_equal(X.toarray(), [[1, 0, 0], [0, 1, 1]])


class TestGradient:
    def test_matches_central_differences(self):
        rng = child_rng("grad-check")
        X = rng.random((40, 7))
        y = (rng.random(40) < 0.5).astype(float)
        w = rng.normal(0, 0.5, 8)
        l2 = 0.01
        _, grad = loss_and_gradient(X, y, w, l2)
        h = 1e-6
        for j in range(8):
            up, down = w.copy(), w.copy()
            up[j] += h
            down[j] -= h
            lu, _ = loss_and_gradient(X, y, up, l2)
            ld, _ = loss_and_gradient(X, y, down, l2)
            assert abs(grad[j] - (lu - ld) / (2 * h)) <= 1e-6


class TestTrainLogreg:
    def test_separable_two_points(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([0, 1])
        model = train_logreg(X, y, LogregConfig(l2=1e-6, max_epochs=2000))
        assert accuracy(model, X, y) == 1.0

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            train_logreg(np.ones((4, 2)), np.zeros(4))

    def test_deterministic(self):
        rng = child_rng("det")
        X = rng.random((100, 5))
        y = (X[:, 0] > 0.5).astype(float)
        a = train_logreg(X, y, seed=3)
        b = train_logreg(X, y, seed=3)
        assert np.array_equal(a.weights, b.weights)

    def test_loss_monotone_nonincreasing(self):
        rng = child_rng("mono")
        X = rng.random((200, 6))
        y = (rng.random(200) < 0.4).astype(float)
        model = train_logreg(X, y, LogregConfig(track_history=True, max_epochs=100))
        history = np.array(model.summary["loss_history"])
        assert np.all(np.diff(history) <= 1e-15)

    def test_cap_recorded(self):
        rng = child_rng("cap")
        X = rng.random((50, 3))
        y = (rng.random(50) < 0.5).astype(float)
        model = train_logreg(X, y, LogregConfig(max_epochs=2))
        assert model.summary["hit_epoch_cap"] is True
        assert model.summary["epochs_run"] == 2

    def test_probabilities_in_open_interval(self):
        rng = child_rng("probs")
        X = rng.random((60, 4)) * 10
        y = (X[:, 0] > 5).astype(float)
        model = train_logreg(X, y)
        p = predict_proba(model, X)
        assert np.all(p > 0) and np.all(p < 1)


class TestAccuracy:
    def test_zero_weight_model_predicts_class_zero(self):
        model = LogisticModel(weights=np.zeros(3), config=LogregConfig(), seed=0)
        X = np.ones((10, 2))
        y = np.array([0] * 5 + [1] * 5)
        # ties at probability 0.5 resolve to class 0
        assert accuracy(model, X, y) == 0.5

    def test_perfect_predictor(self):
        model = LogisticModel(weights=np.array([10.0, -5.0]), config=LogregConfig(), seed=0)
        X = np.array([[0.0], [1.0], [0.0], [1.0]])
        y = np.array([0, 1, 0, 1])
        assert accuracy(model, X, y) == 1.0

    def test_empty_set_rejected(self):
        model = LogisticModel(weights=np.zeros(2), config=LogregConfig(), seed=0)
        with pytest.raises(ValueError):
            accuracy(model, np.zeros((0, 1)), np.array([]))


class TestErrorRates:
    def test_perfect_model(self):
        model = LogisticModel(weights=np.array([20.0, -10.0]), config=LogregConfig(), seed=0)
        X = np.array([[0.0], [1.0]] * 10)
        y = np.array([0, 1] * 10)
        rates = estimate_error_rates(model, X, y)
        assert rates.fpr == 0.0 and rates.fnr == 0.0
        assert rates.separation == 1.0

    def test_constant_one_model(self):
        model = LogisticModel(weights=np.array([0.0, 5.0]), config=LogregConfig(), seed=0)
        X = np.zeros((20, 1))
        y = np.array([0, 1] * 10)
        rates = estimate_error_rates(model, X, y)
        assert rates.fpr == 1.0 and rates.fnr == 0.0

    def test_class_absent_rejected(self):
        model = LogisticModel(weights=np.zeros(2), config=LogregConfig(), seed=0)
        with pytest.raises(ValueError):
            estimate_error_rates(model, np.zeros((4, 1)), np.zeros(4))

    def test_independent_flips_recovered(self):
        # a margin-separable problem gives a near-perfect classifier; labels
        # flipped with probability 0.2 independent of features then show up
        # as error rates near 0.2
        rng = child_rng("flips")
        n = 4000
        x0 = np.concatenate([rng.uniform(0, 0.45, n // 2), rng.uniform(0.55, 1, n // 2)])
        X = np.column_stack([x0, rng.random(n)])
        order = rng.permutation(n)
        X = X[order]
        clean = (X[:, 0] > 0.5).astype(float)
        model = train_logreg(X[:3000], clean[:3000], LogregConfig(l2=1e-4, max_epochs=1500))
        flip = rng.random(1000) < 0.2
        y_heldout = np.where(flip, 1 - clean[3000:], clean[3000:])
        rates = estimate_error_rates(model, X[3000:], y_heldout)
        assert rates.fpr == pytest.approx(0.2, abs=0.03)
        assert rates.fnr == pytest.approx(0.2, abs=0.03)


class TestSplitsAndSerialization:
    def test_split_sizes_and_disjointness(self):
        split = make_split(100, (80, 10, 10), rng=child_rng("split"))
        assert len(split.train) == 80 and len(split.dev) == 10 and len(split.test) == 10
        merged = np.sort(np.concatenate([split.train, split.dev, split.test]))
        assert np.array_equal(merged, np.arange(100))

    def test_split_size_mismatch(self):
        with pytest.raises(ValueError):
            make_split(50, (40, 5, 10))

    def test_model_text_round_trip(self):
        rng = child_rng("ser")
        X = rng.random((50, 4))
        y = (rng.random(50) < 0.5).astype(float)
        model = train_logreg(X, y, LogregConfig(l2=0.02), seed=5)
        again = LogisticModel.from_text(model.to_text())
        assert np.array_equal(again.weights, model.weights)
        assert again.config.l2 == model.config.l2
        assert again.seed == 5
