"""Favorable-outcome scoring: built-in logistic regression, constant and
function-backed models, and a batch protocol adapter for external scorers.

Every model exposes score_rows(rows) -> list of probabilities in [0, 1].
The protected columns are deliberately kept as features so the model can
be sensitive to them; that sensitivity is what the audit measures.
"""
from __future__ import annotations

import math
import subprocess
from dataclasses import dataclass, field
from io import StringIO

import numpy as np

from .errors import ExternalModelFailure, SchemaMismatch
from .tabular import NUMERIC, Dataset, Schema

_SIGMOID_CLIP = 35.0


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -_SIGMOID_CLIP, _SIGMOID_CLIP)))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    l2: float = 1e-3
    epochs: int = 200
    class_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")
        if self.epochs <= 0:
            raise ValueError("epochs must be a positive integer")
        if self.class_weight <= 0:
            raise ValueError("class_weight must be positive")

    def to_json_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "l2": self.l2,
            "epochs": self.epochs,
            "class_weight": self.class_weight,
            "seed": self.seed,
        }


DEFAULT_TRAIN = TrainConfig()


class FeatureEncoder:
    """One-hot categorical columns, standardized numeric columns.

    Categories are those observed at fit time, in sorted order; an unseen
    category at transform time maps to the all-zero bucket. Numeric columns
    with zero training spread encode as constant 0.
    """

    def __init__(self, columns, numeric_stats, categories):
        self.columns = tuple(columns)          # (name, kind) pairs
        self.numeric_stats = dict(numeric_stats)  # name -> (mean, std)
        self.categories = {k: tuple(v) for k, v in categories.items()}
        self._offsets = {}
        width = 0
        for name, kind in self.columns:
            self._offsets[name] = width
            width += 1 if kind == NUMERIC else len(self.categories[name])
        self.width = width

    @classmethod
    def fit(cls, ds: Dataset, columns=None) -> "FeatureEncoder":
        names = columns if columns is not None else ds.schema.feature_names
        cols = []
        numeric_stats = {}
        categories = {}
        for name in names:
            kind = ds.schema.kind_of(name)
            cols.append((name, kind))
            values = ds.column(name)
            if kind == NUMERIC:
                arr = np.asarray(values, dtype=float)
                std = float(arr.std())
                numeric_stats[name] = (float(arr.mean()), std)
            else:
                categories[name] = tuple(sorted(set(values), key=str))
        return cls(cols, numeric_stats, categories)

    def transform(self, rows) -> np.ndarray:
        out = np.zeros((len(rows), self.width))
        for j, (name, kind) in enumerate(self.columns):
            off = self._offsets[name]
            if kind == NUMERIC:
                mean, std = self.numeric_stats[name]
                try:
                    col = np.asarray([float(r[name]) for r in rows])
                except (KeyError, TypeError, ValueError) as exc:
                    raise SchemaMismatch(f"bad numeric column {name!r}: {exc}") from None
                out[:, off] = (col - mean) / std if std > 0 else 0.0
            else:
                index = {c: i for i, c in enumerate(self.categories[name])}
                for i, r in enumerate(rows):
                    if name not in r:
                        raise SchemaMismatch(f"row missing column {name!r}")
                    pos = index.get(r[name])
                    if pos is not None:
                        out[i, off + pos] = 1.0
        return out


def fit_logreg_matrix(x: np.ndarray, y: np.ndarray, cfg: TrainConfig):
    """Full-batch gradient descent on weighted, L2-regularized log-loss.

    Weights start at zero, so the procedure is deterministic for a fixed
    config. Returns (weights, bias, loss_history) where the history has one
    entry before training plus one per epoch.
    """
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    sample_w = np.where(y == 1.0, cfg.class_weight, 1.0)

    def loss(w, b):
        z = x @ w + b
        # log(1 + e^z) - y*z, computed stably
        ce = np.logaddexp(0.0, z) - y * z
        return float(np.mean(sample_w * ce) + cfg.l2 * np.dot(w, w))

    history = [loss(w, b)]
    for _ in range(cfg.epochs):
        p = _sigmoid(x @ w + b)
        g = sample_w * (p - y)
        grad_w = x.T @ g / n + 2.0 * cfg.l2 * w
        grad_b = float(np.mean(g))
        w = w - cfg.learning_rate * grad_w
        b = b - cfg.learning_rate * grad_b
        history.append(loss(w, b))
    return w, b, tuple(history)


@dataclass(frozen=True)
class ConstantModel:
    """Scores every row with the same probability."""

    probability: float

    def score_rows(self, rows):
        return [self.probability] * len(rows)


@dataclass(frozen=True)
class FunctionModel:
    """Wraps an arbitrary row -> probability function (used for synthetic
    scorers in experiments and tests)."""

    fn: object

    def score_rows(self, rows):
        return [float(self.fn(r)) for r in rows]


@dataclass(frozen=True)
class LogRegModel:
    encoder: FeatureEncoder
    weights: np.ndarray
    bias: float
    loss_history: tuple = field(default=(), repr=False)

    def score_rows(self, rows):
        x = self.encoder.transform(rows)
        return _sigmoid(x @ self.weights + self.bias).tolist()


@dataclass(frozen=True)
class ExternalModel:
    """Batch adapter: spawns the command once per score call, writes the
    feature columns as CSV (header included, label column omitted) to its
    stdin and expects one probability per row on stdout, in order."""

    command: tuple[str, ...]
    schema: Schema

    def __post_init__(self):
        if not self.command:
            raise ValueError("command must be non-empty")

    def score_rows(self, rows):
        names = self.schema.feature_names
        buf = StringIO()
        buf.write(",".join(names) + "\n")
        for r in rows:
            buf.write(",".join(str(r[n]) for n in names) + "\n")
        try:
            proc = subprocess.run(
                list(self.command),
                input=buf.getvalue().encode("utf-8"),
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
            )
        except OSError as exc:
            raise ExternalModelFailure(f"cannot spawn {self.command[0]!r}: {exc}") from None
        if proc.returncode != 0:
            raise ExternalModelFailure(
                f"{self.command[0]!r} exited {proc.returncode}: "
                f"{proc.stderr.decode('utf-8', 'replace').strip()[:200]}"
            )
        lines = proc.stdout.decode("utf-8").split()
        if len(lines) != len(rows):
            raise ExternalModelFailure(
                f"expected {len(rows)} probabilities, got {len(lines)}"
            )
        try:
            probs = [float(s) for s in lines]
        except ValueError as exc:
            raise ExternalModelFailure(f"malformed probability: {exc}") from None
        if any(not (0.0 <= p <= 1.0) or not math.isfinite(p) for p in probs):
            raise ExternalModelFailure("probability outside [0, 1]")
        return probs


def train_logreg(train: Dataset, cfg: TrainConfig = DEFAULT_TRAIN):
    """Fit the built-in model. A single-class training set short-circuits
    to a ConstantModel at that class's empirical favorable rate."""
    if len(train) == 0:
        raise SchemaMismatch("training set is empty")
    y = np.asarray(train.favorable_labels(), dtype=float)
    if y.min() == y.max():
        return ConstantModel(float(y[0]))
    encoder = FeatureEncoder.fit(train)
    x = encoder.transform(train.rows)
    w, b, history = fit_logreg_matrix(x, y, cfg)
    return LogRegModel(encoder=encoder, weights=w, bias=b, loss_history=history)


def score(model, rows) -> list[float]:
    """One probability per row, order preserved, each validated into [0, 1]."""
    probs = model.score_rows(list(rows))
    if len(probs) != len(rows):
        raise SchemaMismatch(f"model returned {len(probs)} scores for {len(rows)} rows")
    for p in probs:
        if not math.isfinite(p) or p < 0.0 or p > 1.0:
            raise SchemaMismatch(f"score {p!r} outside [0, 1]")
    return [float(p) for p in probs]


def evaluate(model, test: Dataset) -> dict:
    """Accuracy and favorable-class F1 under the 'score >= 0.5 means
    favorable' decision rule."""
    if len(test) == 0:
        raise SchemaMismatch("test set is empty")
    probs = score(model, test.rows)
    pred = np.asarray(probs) >= 0.5
    truth = np.asarray(test.favorable_labels())
    accuracy = float(np.mean(pred == truth))
    tp = float(np.sum(pred & truth))
    fp = float(np.sum(pred & ~truth))
    fn = float(np.sum(~pred & truth))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return {"accuracy": accuracy, "f1": f1}
