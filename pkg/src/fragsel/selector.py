"""Linear student selector trained with hard labels and teacher distillation.

The distillation objective mixes, per sample, binary cross-entropy against the
hard label with a temperature-softened Bernoulli KL from the teacher to the
student::

    L = mean_j[(1 - alpha) * BCE(z_j, sigmoid(s_j))
               + alpha * T**2 * KL(sigmoid(t_j / T) || sigmoid(s_j / T))]

Probabilities are clamped to ``[EPS, 1 - EPS]`` before any logarithm.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import (
    DataError,
    DimensionMismatch,
    DomainError,
    LengthMismatch,
    MissingTeacherLogits,
    PreconditionViolation,
)

EPS = 1e-12


def sigmoid(logit):
    """Logistic function, overflow-free for large ``|logit|``.

    Accepts a scalar or an array and returns the same shape.
    """
    x = np.asarray(logit, dtype=np.float64)
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def _clamp(p):
    return np.clip(p, EPS, 1.0 - EPS)


def _as_vectors(*arrays):
    out = [np.asarray(a, dtype=np.float64).reshape(-1) for a in arrays]
    n = len(out[0])
    if n == 0 or any(len(a) != n for a in out):
        raise LengthMismatch(f"expected equal non-empty lengths, got {[len(a) for a in out]}")
    return out


def _bce_terms(labels: np.ndarray, probs: np.ndarray) -> np.ndarray:
    p = _clamp(probs)
    return -(labels * np.log(p) + (1.0 - labels) * np.log1p(-p))


def _kl_terms(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    p, q = _clamp(p), _clamp(q)
    return p * (np.log(p) - np.log(q)) + (1.0 - p) * (np.log1p(-p) - np.log1p(-q))


def bce_loss(labels: Sequence[float], probs: Sequence[float]) -> float:
    z, p = _as_vectors(labels, probs)
    return float(np.mean(_bce_terms(z, p)))


def binary_kl(p_teacher: float, p_student: float) -> float:
    """KL divergence between Bernoulli(p_teacher) and Bernoulli(p_student)."""
    for name, v in (("p_teacher", p_teacher), ("p_student", p_student)):
        if not 0.0 < v < 1.0:
            raise DomainError(f"{name}={v} must lie strictly inside (0, 1)")
    p, q = p_teacher, p_student
    return p * math.log(p / q) + (1.0 - p) * math.log((1.0 - p) / (1.0 - q))


def _check_hyper(alpha: float, temperature: float):
    if not 0.0 <= alpha <= 1.0:
        raise DataError(f"alpha must lie in [0, 1], got {alpha}")
    if not temperature > 0:
        raise DataError(f"temperature must be positive, got {temperature}")


def kd_loss(labels, student_logits, teacher_logits, alpha: float, temperature: float) -> float:
    _check_hyper(alpha, temperature)
    z, s, t = _as_vectors(labels, student_logits, teacher_logits)
    T = temperature
    hard = _bce_terms(z, sigmoid(s))
    soft = _kl_terms(sigmoid(t / T), sigmoid(s / T))
    return float(np.mean((1.0 - alpha) * hard + alpha * T * T * soft))


def kd_grad(labels, student_logits, teacher_logits, alpha: float, temperature: float) -> np.ndarray:
    """Derivative of :func:`kd_loss` with respect to each student logit."""
    _check_hyper(alpha, temperature)
    z, s, t = _as_vectors(labels, student_logits, teacher_logits)
    T = temperature
    g = (1.0 - alpha) * (sigmoid(s) - z) + alpha * T * (sigmoid(s / T) - sigmoid(t / T))
    return g / len(z)


# --------------------------------------------------------------------- model


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.7
    temperature: float = 2.0
    learning_rate: float = 2e-5
    epochs: int = 5
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        _check_hyper(self.alpha, self.temperature)
        if self.learning_rate <= 0 or self.epochs < 0 or self.batch_size < 1:
            raise DataError("learning_rate > 0, epochs >= 0 and batch_size >= 1 are required")

    @classmethod
    def from_config(cls, config) -> "TrainConfig":
        return cls(
            config.alpha, config.temperature, config.learning_rate, config.epochs, config.batch_size, config.seed
        )


@dataclass(frozen=True)
class SelectorModel:
    weights: tuple[float, ...]
    bias: float = 0.0
    feature_spec: str = "baseline-v1"
    train_config: dict | None = None
    final_loss: float | None = None
    loss_curve: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "loss_curve", tuple(float(v) for v in self.loss_curve))

    @classmethod
    def zeros(cls, n_features: int, feature_spec: str = "baseline-v1") -> "SelectorModel":
        return cls((0.0,) * n_features, 0.0, feature_spec)

    def decision(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.weights):
            raise DimensionMismatch(f"expected {len(self.weights)} features, got shape {X.shape}")
        return X @ np.asarray(self.weights) + self.bias

    def to_dict(self) -> dict:
        return {
            "feature_spec": self.feature_spec,
            "weights": list(self.weights),
            "bias": self.bias,
            "train_config": self.train_config,
            "final_loss": self.final_loss,
            "loss_curve": list(self.loss_curve),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectorModel":
        try:
            return cls(
                weights=d["weights"],
                bias=d["bias"],
                feature_spec=d["feature_spec"],
                train_config=d.get("train_config"),
                final_loss=d.get("final_loss"),
                loss_curve=d.get("loss_curve", ()),
            )
        except KeyError as exc:
            raise DataError(f"model file is missing {exc.args[0]!r}") from None

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SelectorModel":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid model JSON ({exc.msg})") from None


def score(model: SelectorModel, features: Sequence[float]) -> float:
    if len(features) != len(model.weights):
        raise DimensionMismatch(f"model has {len(model.weights)} weights, got {len(features)} features")
    return math.fsum(w * x for w, x in zip(model.weights, features)) + model.bias


# ------------------------------------------------------------------ training


def fit_linear(X: np.ndarray, labels: np.ndarray, teacher: np.ndarray, config: TrainConfig):
    """Mini-batch gradient descent from a zero initialization.

    Batches come from a fresh permutation per epoch drawn from
    ``default_rng(config.seed)``. Returns ``(weights, bias, loss_curve)`` where
    the curve holds the full-data loss after each epoch.
    """
    n, d = X.shape
    w, b = np.zeros(d), 0.0
    rng = np.random.default_rng(config.seed)
    curve = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            Xb = X[idx]
            g = kd_grad(labels[idx], Xb @ w + b, teacher[idx], config.alpha, config.temperature)
            w = w - config.learning_rate * (Xb.T @ g)
            b = b - config.learning_rate * float(np.sum(g))
        curve.append(kd_loss(labels, X @ w + b, teacher, config.alpha, config.temperature))
    return w, b, curve


class SelectorEstimator(ClassifierMixin, BaseEstimator):
    """scikit-learn wrapper around :func:`fit_linear`.

    ``fit`` takes the teacher logits as a keyword argument; they may be
    omitted only when ``alpha == 0``.
    """

    def __init__(self, alpha=0.7, temperature=2.0, learning_rate=2e-5, epochs=5, batch_size=32, seed=0):
        self.alpha = alpha
        self.temperature = temperature
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(self.alpha, self.temperature, self.learning_rate, self.epochs, self.batch_size, self.seed)

    def fit(self, X, y, teacher_logits=None):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        config = self._train_config()
        if teacher_logits is None:
            if config.alpha > 0:
                raise MissingTeacherLogits("alpha > 0 requires teacher logits")
            teacher = np.zeros(len(y))
        else:
            teacher = check_array(teacher_logits, ensure_2d=False, dtype=np.float64)
            if teacher.shape != y.shape:
                raise LengthMismatch(f"{len(y)} labels but {len(teacher)} teacher logits")
        w, b, curve = fit_linear(X, y.astype(np.float64), teacher, config)
        self.coef_ = w
        self.intercept_ = b
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.loss_curve_ = curve
        self.final_loss_ = curve[-1] if curve else kd_loss(y, X @ w + b, teacher, config.alpha, config.temperature)
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        p = sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(int)

    def to_model(self, feature_spec: str = "baseline-v1") -> SelectorModel:
        check_is_fitted(self)
        return SelectorModel(
            weights=self.coef_,
            bias=self.intercept_,
            feature_spec=feature_spec,
            train_config=asdict(self._train_config()),
            final_loss=self.final_loss_,
            loss_curve=self.loss_curve_,
        )


def train(dataset, extractor, config: TrainConfig) -> SelectorModel:
    """Fit a selector on FIG records; features come from ``extractor``."""
    if not dataset:
        raise PreconditionViolation("training dataset is empty")
    teacher = [r.teacher_logit for r in dataset]
    if config.alpha > 0 and any(t is None for t in teacher):
        missing = sum(t is None for t in teacher)
        raise MissingTeacherLogits(f"{missing} of {len(dataset)} records lack a teacher logit and alpha > 0")
    X = extractor.transform([(r.query, r.fragment) for r in dataset])
    y = np.array([r.hard_label for r in dataset])
    est = SelectorEstimator(**asdict(config))
    est.fit(X, y, teacher_logits=None if config.alpha == 0 else teacher)
    return est.to_model(getattr(extractor, "feature_spec", "custom"))
