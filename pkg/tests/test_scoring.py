import sys

import numpy as np
import pytest

from evtfair.errors import ExternalModelFailure, SchemaMismatch
from evtfair.scoring import (
    ConstantModel,
    ExternalModel,
    FeatureEncoder,
    FunctionModel,
    LogRegModel,
    TrainConfig,
    evaluate,
    score,
    train_logreg,
)
from evtfair.tabular import CATEGORICAL, NUMERIC, Column, Dataset, Schema


def numeric_schema():
    return Schema(
        columns=(Column("x", NUMERIC), Column("z", CATEGORICAL), Column("y", CATEGORICAL)),
        protected=frozenset({"z"}),
        label="y",
        favorable_value="yes",
    )


def two_point_dataset():
    rows = (
        {"x": -1.0, "z": "a", "y": "no"},
        {"x": 1.0, "z": "a", "y": "yes"},
    )
    return Dataset(numeric_schema(), rows)


def test_separable_training_reaches_full_accuracy():
    ds = two_point_dataset()
    model = train_logreg(ds, TrainConfig(learning_rate=0.5, l2=0.0, epochs=500))
    assert evaluate(model, ds)["accuracy"] == 1.0


def test_all_favorable_returns_constant_model():
    rows = tuple({"x": float(i), "z": "a", "y": "yes"} for i in range(4))
    ds = Dataset(numeric_schema(), rows)
    model = train_logreg(ds)
    assert isinstance(model, ConstantModel)
    assert model.probability == 1.0
    assert score(model, ds.rows) == [1.0] * 4


def test_training_is_bit_deterministic():
    ds = two_point_dataset()
    cfg = TrainConfig(learning_rate=0.3, l2=1e-4, epochs=200)
    m1 = train_logreg(ds, cfg)
    m2 = train_logreg(ds, cfg)
    assert np.array_equal(m1.weights, m2.weights)
    assert m1.bias == m2.bias


def test_constant_model_scores():
    model = ConstantModel(0.3)
    rows = [{"x": float(i)} for i in range(5)]
    assert score(model, rows) == [0.3] * 5


def test_zero_weight_logreg_scores_half():
    ds = two_point_dataset()
    encoder = FeatureEncoder.fit(ds)
    model = LogRegModel(encoder=encoder, weights=np.zeros(encoder.width), bias=0.0)
    assert score(model, ds.rows) == [0.5, 0.5]


def test_loss_monotone_at_small_learning_rate():
    rng = np.random.default_rng(3)
    rows = tuple(
        {
            "x": float(rng.normal()),
            "z": "a" if i % 2 else "b",
            "y": "yes" if rng.random() > 0.5 else "no",
        }
        for i in range(50)
    )
    ds = Dataset(numeric_schema(), rows)
    model = train_logreg(ds, TrainConfig(learning_rate=0.1, l2=1e-3, epochs=120))
    losses = np.asarray(model.loss_history)
    assert np.all(np.diff(losses) <= 1e-9)


def test_unseen_category_maps_to_zero_bucket():
    ds = two_point_dataset()
    model = train_logreg(ds, TrainConfig(epochs=20))
    probs = score(model, [{"x": 0.0, "z": "never-seen"}])
    assert len(probs) == 1 and 0.0 <= probs[0] <= 1.0


def test_score_validates_range_and_length():
    bad = FunctionModel(lambda r: 1.5)
    with pytest.raises(SchemaMismatch):
        score(bad, [{"x": 1.0}])

    class ShortModel:
        def score_rows(self, rows):
            return [0.5] * (len(rows) - 1)

    with pytest.raises(SchemaMismatch):
        score(ShortModel(), [{"x": 1.0}, {"x": 2.0}])


def test_missing_feature_column_raises():
    ds = two_point_dataset()
    model = train_logreg(ds, TrainConfig(epochs=10))
    with pytest.raises(SchemaMismatch):
        score(model, [{"z": "a"}])


def test_evaluate_perfect_and_degenerate():
    ds = two_point_dataset()
    perfect = FunctionModel(lambda r: 1.0 if r["x"] > 0 else 0.0)
    out = evaluate(perfect, ds)
    assert out == {"accuracy": 1.0, "f1": 1.0}

    all_fav = Dataset(
        numeric_schema(), tuple({"x": 0.0, "z": "a", "y": "yes"} for _ in range(3))
    )
    out = evaluate(ConstantModel(0.0), all_fav)
    assert out == {"accuracy": 0.0, "f1": 0.0}


def test_exact_half_score_counts_favorable():
    ds = Dataset(numeric_schema(), ({"x": 0.0, "z": "a", "y": "yes"},))
    assert evaluate(ConstantModel(0.5), ds)["accuracy"] == 1.0


def _external(code: str) -> ExternalModel:
    return ExternalModel(command=(sys.executable, "-c", code), schema=numeric_schema())


OK_CODE = (
    "import sys; lines = sys.stdin.read().splitlines()[1:]; "
    "print('\\n'.join('0.25' for _ in lines))"
)


def test_external_model_ok():
    model = _external(OK_CODE)
    rows = [{"x": 1.0, "z": "a"}, {"x": 2.0, "z": "b"}]
    assert score(model, rows) == [0.25, 0.25]


def test_external_model_wrong_count():
    code = (
        "import sys; lines = sys.stdin.read().splitlines()[1:]; "
        "print('\\n'.join('0.25' for _ in lines[:-1]))"
    )
    with pytest.raises(ExternalModelFailure):
        score(_external(code), [{"x": 1.0, "z": "a"}, {"x": 2.0, "z": "b"}])


def test_external_model_nonzero_exit():
    with pytest.raises(ExternalModelFailure):
        score(_external("import sys; sys.exit(3)"), [{"x": 1.0, "z": "a"}])


def test_external_model_malformed_output():
    with pytest.raises(ExternalModelFailure):
        score(_external("print('not-a-number')"), [{"x": 1.0, "z": "a"}])
