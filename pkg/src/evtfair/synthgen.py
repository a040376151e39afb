"""Conditional tabular generation via a Gaussian copula, plus the metrics
used to judge generation quality against the real data.

The generator is fit per protected group: empirical marginals (inverse-CDF
sampling keeps numeric values inside the observed range and categorical
values inside the observed domain) joined by a rank-based latent-normal
correlation. It is deterministic for a fixed seed, which the audit relies
on end to end.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata

from .errors import GroupTooSmall, SchemaMismatch
from .scoring import DEFAULT_TRAIN, FeatureEncoder, TrainConfig, evaluate, fit_logreg_matrix, train_logreg, _sigmoid
from .tabular import NUMERIC, Dataset, GroupSpec

_MIN_GROUP_ROWS = 5
_KL_BINS = 20


@dataclass(frozen=True)
class CopulaGenerator:
    schema: object
    group: GroupSpec
    target_value: object
    numeric_marginals: dict   # column -> sorted training values (np.ndarray)
    categorical_tables: dict  # column -> (categories, probabilities, cumulative)
    correlation: np.ndarray
    cholesky: np.ndarray


def _latent_scores(ds: Dataset) -> np.ndarray:
    """Normal scores per column: rank-based for numeric, cumulative-midpoint
    for categorical. Constant columns come out as zeros."""
    n = len(ds)
    cols = []
    for col in ds.schema.columns:
        values = ds.column(col.name)
        if col.kind == NUMERIC:
            ranks = rankdata(np.asarray(values, dtype=float))
            u = (ranks - 0.5) / n
        else:
            cats = sorted(set(values), key=str)
            freq = {c: values.count(c) / n for c in cats}
            mid = {}
            cum = 0.0
            for c in cats:
                mid[c] = cum + freq[c] / 2.0
                cum += freq[c]
            u = np.asarray([mid[v] for v in values])
        z = ndtri(np.clip(u, 1e-10, 1 - 1e-10))
        cols.append(z)
    return np.column_stack(cols)


def _nearest_psd_correlation(c: np.ndarray) -> np.ndarray:
    """Clamp negative eigenvalues to zero and renormalize the diagonal."""
    c = np.where(np.isfinite(c), c, 0.0)
    np.fill_diagonal(c, 1.0)
    c = (c + c.T) / 2.0
    eigval, eigvec = np.linalg.eigh(c)
    eigval = np.clip(eigval, 0.0, None)
    c = eigvec @ np.diag(eigval) @ eigvec.T
    d = np.sqrt(np.clip(np.diag(c), 1e-12, None))
    c = c / np.outer(d, d)
    np.fill_diagonal(c, 1.0)
    return (c + c.T) / 2.0


def fit_generator(train: Dataset, group: GroupSpec, target_value) -> CopulaGenerator:
    """Fit marginals and latent correlation on the target group's rows only.

    The generator's protected column is pinned to target_value.
    """
    if target_value not in group.values:
        raise ValueError(f"target value {target_value!r} not in group")
    rows = train.subset_by_value(group.attribute, target_value)
    if len(rows) < _MIN_GROUP_ROWS:
        raise GroupTooSmall(
            f"{len(rows)} rows with {group.attribute}={target_value!r}, "
            f"need at least {_MIN_GROUP_ROWS}"
        )
    numeric = {}
    categorical = {}
    for col in train.schema.columns:
        values = rows.column(col.name)
        if col.kind == NUMERIC:
            numeric[col.name] = np.sort(np.asarray(values, dtype=float))
        else:
            cats = sorted(set(values), key=str)
            probs = np.asarray([values.count(c) / len(values) for c in cats])
            categorical[col.name] = (tuple(cats), probs, np.cumsum(probs))
    scores = _latent_scores(rows)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(scores, rowvar=False)
    corr = np.atleast_2d(corr)
    corr = _nearest_psd_correlation(corr)
    chol = np.linalg.cholesky(corr + 1e-9 * np.eye(corr.shape[0]))
    return CopulaGenerator(
        schema=train.schema,
        group=group,
        target_value=target_value,
        numeric_marginals=numeric,
        categorical_tables=categorical,
        correlation=corr,
        cholesky=chol,
    )


def sample(gen: CopulaGenerator, n: int, seed: int) -> list[dict]:
    """Draw n records deterministically for the seed. The protected column
    is always the generator's target value; numeric values stay within the
    fitted group's observed [min, max]."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    d = gen.correlation.shape[0]
    z = rng.standard_normal((n, d)) @ gen.cholesky.T
    u = ndtr(z)
    rows = [dict() for _ in range(n)]
    for j, col in enumerate(gen.schema.columns):
        uj = np.clip(u[:, j], 0.0, 1.0)
        if col.kind == NUMERIC:
            vals = gen.numeric_marginals[col.name]
            grid = np.linspace(0.0, 1.0, vals.size) if vals.size > 1 else np.asarray([0.5])
            drawn = np.interp(uj, grid, vals)
            for i in range(n):
                rows[i][col.name] = float(drawn[i])
        else:
            cats, _, cum = gen.categorical_tables[col.name]
            idx = np.minimum(np.searchsorted(cum, uj, side="left"), len(cats) - 1)
            for i in range(n):
                rows[i][col.name] = cats[idx[i]]
    for r in rows:
        r[gen.group.attribute] = gen.target_value
    return rows


# --------------------------------------------------------------------------
# generation-quality metrics
# --------------------------------------------------------------------------

def _check_same_schema(real: Dataset, synth: Dataset):
    if real.schema != synth.schema:
        raise SchemaMismatch("datasets have different schemas")


def kl_similarity(real: Dataset, synth: Dataset) -> float:
    """exp(-mean per-column KL(real || synth)); 1.0 means identical.

    Numeric columns use a shared 20-bin histogram over the combined range,
    categorical columns use the union category table, both with add-one
    smoothing.
    """
    _check_same_schema(real, synth)
    if len(real) == 0 or len(synth) == 0:
        raise SchemaMismatch("datasets must be non-empty")
    kls = []
    for col in real.schema.columns:
        rv = real.column(col.name)
        sv = synth.column(col.name)
        if col.kind == NUMERIC:
            combined = np.asarray(rv + sv, dtype=float)
            lo, hi = float(combined.min()), float(combined.max())
            if lo == hi:
                kls.append(0.0)
                continue
            edges = np.linspace(lo, hi, _KL_BINS + 1)
            p_counts, _ = np.histogram(rv, bins=edges)
            q_counts, _ = np.histogram(sv, bins=edges)
        else:
            domain = sorted(set(rv) | set(sv), key=str)
            p_counts = np.asarray([rv.count(c) for c in domain])
            q_counts = np.asarray([sv.count(c) for c in domain])
        p = (p_counts + 1.0) / (p_counts.sum() + p_counts.size)
        q = (q_counts + 1.0) / (q_counts.sum() + q_counts.size)
        kls.append(float(np.sum(p * np.log(p / q))))
    return float(np.exp(-np.mean(kls)))


def _sqrt_psd(c: np.ndarray) -> np.ndarray:
    eigval, eigvec = np.linalg.eigh((c + c.T) / 2.0)
    eigval = np.clip(eigval, 0.0, None)
    return eigvec @ np.diag(np.sqrt(eigval)) @ eigvec.T


def gaussian_frechet(m1, c1, m2, c2) -> float:
    """Frechet distance between two Gaussians:
    ||m1 - m2||^2 + tr(C1 + C2 - 2 (C1 C2)^(1/2)).

    The cross term uses tr((S C1 S)^(1/2)) with S = C2^(1/2), computed via
    symmetric eigendecompositions with negative eigenvalues clamped to 0.
    """
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    c1 = np.atleast_2d(np.asarray(c1, dtype=float))
    c2 = np.atleast_2d(np.asarray(c2, dtype=float))
    diff = float(np.sum((m1 - m2) ** 2))
    s = _sqrt_psd(c2)
    inner = s @ c1 @ s
    eigval = np.clip(np.linalg.eigvalsh((inner + inner.T) / 2.0), 0.0, None)
    cross = float(np.sum(np.sqrt(eigval)))
    return diff + float(np.trace(c1) + np.trace(c2)) - 2.0 * cross


def frechet_distance(real: Dataset, synth: Dataset) -> float:
    """Gaussian Frechet distance on one-hot plus standardized encodings.

    The encoder is fit on the concatenation of both datasets, which makes
    the distance symmetric in its arguments.
    """
    _check_same_schema(real, synth)
    if len(real) < 2 or len(synth) < 2:
        raise SchemaMismatch("need at least 2 rows in each dataset")
    combined = Dataset(real.schema, real.rows + synth.rows)
    encoder = FeatureEncoder.fit(combined, columns=real.schema.column_names)
    xr = encoder.transform(real.rows)
    xs = encoder.transform(synth.rows)
    cr = np.atleast_2d(np.cov(xr, rowvar=False))
    cs = np.atleast_2d(np.cov(xs, rowvar=False))
    return gaussian_frechet(xr.mean(axis=0), cr, xs.mean(axis=0), cs)


def _roc_auc(y: np.ndarray, p: np.ndarray) -> float | None:
    pos = y == 1.0
    n1 = int(pos.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        return None
    ranks = rankdata(p)
    u = float(ranks[pos].sum()) - n1 * (n1 + 1) / 2.0
    return u / (n1 * n0)


def detection_auc(real: Dataset, synth: Dataset, seed: int = 0) -> float:
    """Mean 5-fold cross-validated ROC-AUC of a logistic regression told to
    separate real (label 1) from synthetic (label 0) records. 0.5 means the
    two are indistinguishable.

    Rows are put in a canonical order before the fold shuffle, so the
    result does not depend on input row order.
    """
    if len(real) < 10 or len(synth) < 10:
        raise SchemaMismatch("need at least 10 rows in each dataset")
    names = real.schema.column_names
    tagged = [(tuple(repr(r[n]) for n in names), 1.0, r) for r in real.rows]
    tagged += [(tuple(repr(r[n]) for n in names), 0.0, r) for r in synth.rows]
    tagged.sort(key=lambda t: (t[0], t[1]))
    combined = Dataset(real.schema, tuple(t[2] for t in tagged))
    encoder = FeatureEncoder.fit(combined, columns=names)
    x = encoder.transform(combined.rows)
    y = np.asarray([t[1] for t in tagged])
    rng = np.random.default_rng(seed)
    order = rng.permutation(y.size)
    folds = np.array_split(order, 5)
    cfg = TrainConfig(learning_rate=0.1, l2=1e-3, epochs=150, class_weight=1.0, seed=seed)
    aucs = []
    for fold in folds:
        mask = np.ones(y.size, dtype=bool)
        mask[fold] = False
        if y[mask].min() == y[mask].max():
            continue
        w, b, _ = fit_logreg_matrix(x[mask], y[mask], cfg)
        p = _sigmoid(x[fold] @ w + b)
        auc = _roc_auc(y[fold], p)
        if auc is not None:
            aucs.append(auc)
    return float(np.mean(aucs)) if aucs else 0.5


def downstream_f1_loss(real_train: Dataset, synth_train: Dataset, test: Dataset) -> float:
    """Absolute F1 gap, on the identical test set, between models trained
    on the real and on the synthetic training data."""
    _check_same_schema(real_train, synth_train)
    model_real = train_logreg(real_train, DEFAULT_TRAIN)
    model_synth = train_logreg(synth_train, DEFAULT_TRAIN)
    f1_real = evaluate(model_real, test)["f1"]
    f1_synth = evaluate(model_synth, test)["f1"]
    return abs(f1_real - f1_synth)
