import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from fragsel.errors import DimensionMismatch, DomainError, LengthMismatch, MissingTeacherLogits
from fragsel.fig import FigRecord
from fragsel.features import FragmentFeatureExtractor
from fragsel.selector import (
    SelectorEstimator,
    SelectorModel,
    TrainConfig,
    bce_loss,
    binary_kl,
    kd_grad,
    kd_loss,
    score,
    sigmoid,
    train,
)
from fragsel.types import Document, EvidenceItem
from oracles import central_difference, mp_bernoulli_kl, mp_kd_loss, mp_sigmoid

LN2 = math.log(2)


class TestSigmoid:
    def test_values(self):
        assert sigmoid(0.0) == 0.5
        assert sigmoid(2.0) == pytest.approx(0.8807970779778823, abs=1e-15)

    def test_extremes_do_not_overflow(self):
        assert sigmoid(-700.0) > 0.0
        assert sigmoid(700.0) == 1.0
        assert np.all(np.isfinite(sigmoid(np.array([-1e4, 1e4]))))

    @given(st.floats(-30, 30))
    def test_matches_high_precision(self, x):
        assert sigmoid(x) == pytest.approx(float(mp_sigmoid(x)), rel=1e-14)


class TestLosses:
    def test_bce_examples(self):
        assert bce_loss([1, 0], [0.5, 0.5]) == pytest.approx(LN2, abs=1e-12)
        assert bce_loss([0], [0.5]) == pytest.approx(LN2, abs=1e-12)
        assert bce_loss([1], [1.0]) == pytest.approx(0.0, abs=1e-11)
        assert math.isfinite(bce_loss([1], [0.0]))

    def test_bce_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            bce_loss([1, 0], [0.5])

    def test_binary_kl(self):
        p = float(mp_sigmoid(2))
        # the commonly quoted 0.32775 is rounded; the exact value is 0.3278133...
        assert binary_kl(p, 0.5) == pytest.approx(0.32775, abs=1e-4)
        assert binary_kl(p, 0.5) == pytest.approx(float(mp_bernoulli_kl(p, 0.5)), rel=1e-12)
        assert binary_kl(0.3, 0.3) == 0.0
        with pytest.raises(DomainError):
            binary_kl(1.0, 0.5)

    def test_kd_example(self):
        assert kd_loss([1], [0.0], [2.0], 0.5, 1.0) == pytest.approx(0.51045, abs=1e-4)
        assert kd_loss([1], [0.0], [2.0], 0.5, 1.0) == pytest.approx(
            float(mp_kd_loss([1], [0.0], [2.0], 0.5, 1)), rel=1e-12
        )

    def test_kd_alpha_one_equal_logits_is_zero(self):
        assert kd_loss([1, 0, 1], [0.3, -2.0, 4.0], [0.3, -2.0, 4.0], 1.0, 2.0) == pytest.approx(0.0, abs=1e-15)

    @given(st.lists(st.tuples(st.integers(0, 1), st.floats(-10, 10), st.floats(-10, 10)), min_size=1, max_size=10))
    def test_alpha_zero_is_bce_and_loss_is_nonnegative(self, rows):
        z, s, t = (list(c) for c in zip(*rows))
        assert kd_loss(z, s, t, 0.0, 2.0) == pytest.approx(bce_loss(z, sigmoid(np.array(s))), abs=1e-12)
        for alpha in (0.3, 0.7, 1.0):
            assert kd_loss(z, s, t, alpha, 3.0) >= -1e-15

    @pytest.mark.parametrize("s, t", [(0.5, -1.5), (2.0, -2.0), (-1.0, 1.7), (0.0, 0.1)])
    def test_high_temperature_limit(self, s, t):
        T = 100.0
        scaled_kl = kd_loss([0], [s], [t], 1.0, T)
        assert scaled_kl == pytest.approx((t - s) ** 2 / 8, rel=1e-3)


class TestGradient:
    def test_examples(self):
        assert np.all(kd_grad([1, 0], [0.4, -0.3], [0.4, -0.3], 1.0, 2.0) == 0.0)
        np.testing.assert_allclose(kd_grad([1, 1], [0.0, 0.0], [5.0, 5.0], 0.0, 2.0), [-0.25, -0.25])

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        for alpha in (0, 0.3, 0.7, 1):
            for T in (1, 2, 4):
                for _ in range(5):
                    n = int(rng.integers(1, 9))
                    z = rng.integers(0, 2, n).astype(float)
                    s = rng.uniform(-5, 5, n)
                    t = rng.uniform(-5, 5, n)
                    fd = central_difference(lambda v: kd_loss(z, v, t, alpha, T), list(s))
                    np.testing.assert_allclose(kd_grad(z, s, t, alpha, T), fd, rtol=1e-6, atol=1e-10)


class TestScore:
    def test_examples(self):
        assert score(SelectorModel.zeros(8), [3.0] * 8) == 0.0
        assert score(SelectorModel((1.0, 0.0, 0.0), 0.5), [2.0, 7.0, 9.0]) == 2.5
        assert score(SelectorModel((0.3, -0.2), 0.1), [1.0, 2.0]) == pytest.approx(0.0, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            score(SelectorModel.zeros(2), [1.0])
        with pytest.raises(DimensionMismatch):
            SelectorModel.zeros(2).decision(np.ones((3, 4)))

    def test_model_file_round_trip(self, tmp_path):
        model = SelectorModel((0.25, -1.5), 0.125, "spec", {"alpha": 0.7}, 0.3, (0.5, 0.3))
        model.save(tmp_path / "m.json")
        loaded = SelectorModel.load(tmp_path / "m.json")
        assert loaded == model and loaded.loss_curve == model.loss_curve


def separable(n=40, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 2))
    X = X[np.abs(X[:, 0] + X[:, 1]) > 0.2]
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    return X, y


class TestTraining:
    def test_separable_set_bce_goes_low(self):
        X, y = separable()
        est = SelectorEstimator(alpha=0.0, learning_rate=1.0, epochs=800, batch_size=8).fit(X, y)
        assert bce_loss(y, est.predict_proba(X)[:, 1]) < 0.1
        assert est.score(X, y) == 1.0

    def test_pure_distillation_tracks_teacher(self):
        X, y = separable()
        teacher = X @ np.array([1.5, -0.5]) + 0.25
        gaps = []
        for epochs in (1, 5, 25, 125):
            est = SelectorEstimator(alpha=1.0, temperature=2.0, learning_rate=0.5, epochs=epochs, batch_size=8)
            est.fit(X, y, teacher_logits=teacher)
            gaps.append(np.max(np.abs(est.decision_function(X) - teacher)))
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 0.05

    def test_zero_epochs_returns_zero_model(self):
        X, y = separable()
        model = SelectorEstimator(alpha=0.0, epochs=0).fit(X, y).to_model()
        assert model.weights == (0.0, 0.0) and model.bias == 0.0

    def test_same_seed_is_bit_identical(self):
        X, y = separable()
        t = np.linspace(-1, 1, len(y))
        a = SelectorEstimator(learning_rate=0.3, epochs=7, batch_size=5, seed=4).fit(X, y, teacher_logits=t)
        b = SelectorEstimator(learning_rate=0.3, epochs=7, batch_size=5, seed=4).fit(X, y, teacher_logits=t)
        assert a.coef_.tobytes() == b.coef_.tobytes() and a.intercept_ == b.intercept_
        c = SelectorEstimator(learning_rate=0.3, epochs=7, batch_size=5, seed=5).fit(X, y, teacher_logits=t)
        assert c.coef_.tobytes() != a.coef_.tobytes()

    def test_teacher_required_when_alpha_positive(self):
        X, y = separable()
        with pytest.raises(MissingTeacherLogits):
            SelectorEstimator(alpha=0.5).fit(X, y)

    def test_sklearn_protocol(self):
        est = SelectorEstimator(alpha=0.2, epochs=3)
        assert est.get_params()["alpha"] == 0.2
        twin = clone(est).set_params(temperature=4.0)
        assert twin.temperature == 4.0 and est.temperature == 2.0


def _record(text, fig, teacher):
    item = EvidenceItem.coarse(Document.text("d" + text[:3], text))
    return FigRecord("q1", item, fig, int(fig > 0.2), teacher, query_text="Nobel prize winner")


class TestTrainOnRecords:
    dataset = [
        _record("Nobel prize winner announced", 0.9, 3.0),
        _record("weather in Oslo", -0.4, -2.0),
        _record("the prize winner is Abiy", 0.5, 2.0),
        _record("city hall architecture", 0.0, -1.0),
    ]

    def test_train_records_curve_and_spec(self):
        config = TrainConfig(learning_rate=0.5, epochs=20, batch_size=2)
        model = train(self.dataset, FragmentFeatureExtractor(), config)
        assert model.feature_spec == "baseline-v1" and len(model.weights) == 8
        assert len(model.loss_curve) == 20 and model.loss_curve[-1] < model.loss_curve[0]
        assert model.final_loss == model.loss_curve[-1]
        assert model.train_config["alpha"] == 0.7

    def test_missing_teacher(self):
        records = self.dataset[:1] + [_record("no teacher here", 0.1, None)]
        with pytest.raises(MissingTeacherLogits):
            train(records, FragmentFeatureExtractor(), TrainConfig())
        train(records, FragmentFeatureExtractor(), TrainConfig(alpha=0.0))
