"""Epsilon-SVR training with grid-searched (C, gamma), content-separated splits, SRCC/PLCC."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.stats import rankdata
from sklearn.svm import SVR

from .errors import ConfigError, DataError, DegenerateInputError

DEFAULT_C = (0.1, 1.0, 10.0, 100.0, 1000.0)
DEFAULT_GAMMA = tuple(2.0**k for k in range(-8, 3))
DEFAULT_EPSILON = 0.1
N_FOLDS = 5
KKT_TOL = 1e-3
MAX_ITER = 100_000


@dataclass(frozen=True)
class Grid:
    C: tuple = DEFAULT_C
    gamma: tuple = DEFAULT_GAMMA
    epsilon: float = DEFAULT_EPSILON
    folds: int = N_FOLDS

    def pairs(self):
        return [(c, g) for c in self.C for g in self.gamma]


@dataclass
class SvrModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    gamma: float
    C: float
    epsilon: float
    feature_mean: np.ndarray
    feature_std: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.feature_mean)

    def to_dict(self) -> dict:
        return {
            "kernel": "rbf",
            "gamma": self.gamma,
            "C": self.C,
            "epsilon": self.epsilon,
            "bias": self.bias,
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvrModel":
        n = len(d["feature_mean"])
        return cls(
            support_vectors=np.asarray(d["support_vectors"], dtype=np.float64).reshape(-1, n),
            dual_coef=np.asarray(d["dual_coef"], dtype=np.float64),
            bias=float(d["bias"]),
            gamma=float(d["gamma"]),
            C=float(d["C"]),
            epsilon=float(d["epsilon"]),
            feature_mean=np.asarray(d["feature_mean"], dtype=np.float64),
            feature_std=np.asarray(d["feature_std"], dtype=np.float64),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "SvrModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class SplitPlan:
    splits: tuple
    ratio: float
    seed: int

    @property
    def n_splits(self) -> int:
        return len(self.splits)


@dataclass
class EvalReport:
    srcc: list
    plcc: list
    median_srcc: float = field(init=False)
    median_plcc: float = field(init=False)
    std_srcc: float = field(init=False)
    std_plcc: float = field(init=False)

    def __post_init__(self):
        s, p = np.asarray(self.srcc, float), np.asarray(self.plcc, float)
        self.median_srcc = float(np.nanmedian(s))
        self.median_plcc = float(np.nanmedian(p))
        self.std_srcc = float(np.nanstd(s))
        self.std_plcc = float(np.nanstd(p))

    def summary(self) -> str:
        return (f"median_srcc={self.median_srcc:.4f} median_plcc={self.median_plcc:.4f} "
                f"std_srcc={self.std_srcc:.4f} std_plcc={self.std_plcc:.4f}")

    def to_dict(self) -> dict:
        return {
            "median_srcc": self.median_srcc,
            "median_plcc": self.median_plcc,
            "std_srcc": self.std_srcc,
            "std_plcc": self.std_plcc,
            "srcc": [None if math.isnan(v) else v for v in self.srcc],
            "plcc": [None if math.isnan(v) else v for v in self.plcc],
        }


def _check_corr_inputs(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DataError(f"correlation inputs differ in length: {a.size} vs {b.size}")
    if a.size < 3:
        raise DataError("correlation needs at least 3 values")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DegenerateInputError("correlation undefined for a zero-variance input")
    return a, b


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    return float(np.dot(a, b) / math.sqrt(np.dot(a, a) * np.dot(b, b)))


def plcc(a, b) -> float:
    a, b = _check_corr_inputs(a, b)
    return _pearson(a, b)


def srcc(a, b) -> float:
    """Pearson correlation of average ranks."""
    a, b = _check_corr_inputs(a, b)
    return _pearson(rankdata(a), rankdata(b))


def _logistic4(x, b1, b2, b3, b4):
    return b2 + (b1 - b2) / (1 + np.exp(-(x - b3) / abs(b4)))


def logistic_plcc(pred, mos) -> float:
    """PLCC after a 4-parameter logistic fit of predictions onto scores."""
    pred, mos = _check_corr_inputs(pred, mos)
    p0 = [mos.max(), mos.min(), float(np.mean(pred)), float(np.std(pred)) or 1.0]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            params, _ = curve_fit(_logistic4, pred, mos, p0=p0, maxfev=20000)
        mapped = _logistic4(pred, *params)
    except RuntimeError:
        mapped = pred
    if np.ptp(mapped) == 0:
        return _pearson(pred, mos)
    return _pearson(mapped, mos)


def make_splits(content_ids: Sequence, ratio: float = 0.8, n: int = 100, seed: int = 0) -> SplitPlan:
    """Independent content-level train/test partitions keyed by (seed, split index)."""
    if not 0 < ratio < 1:
        raise ConfigError(f"train ratio must be in (0, 1), got {ratio}")
    contents = sorted(set(content_ids), key=str)
    if len(contents) < 2:
        raise ConfigError("content separation needs at least 2 contents")
    n_train = min(max(int(math.floor(ratio * len(contents) + 0.5)), 1), len(contents) - 1)
    splits = []
    for i in range(n):
        order = np.random.default_rng([int(seed), i]).permutation(len(contents))
        train = tuple(sorted((contents[k] for k in order[:n_train]), key=str))
        test = tuple(sorted((contents[k] for k in order[n_train:]), key=str))
        splits.append((train, test))
    return SplitPlan(tuple(splits), ratio, seed)


def _validate_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DataError(f"feature matrix {X.shape} does not match {y.size} scores")
    bad = np.argwhere(~np.isfinite(X))
    if bad.size:
        r, c = bad[0]
        raise DataError(f"non-finite feature at row {r}, column {c}")
    if not np.all(np.isfinite(y)):
        raise DataError(f"non-finite score at row {int(np.argmin(np.isfinite(y)))}")
    return X, y


def _standardization(X):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    return mean, std


def _sq_distances(Z):
    sq = (Z * Z).sum(axis=1)
    return np.maximum(sq[:, None] + sq[None, :] - 2 * Z @ Z.T, 0.0)


def _fit(K, y, C, epsilon):
    svr = SVR(kernel="precomputed", C=C, epsilon=epsilon, tol=KKT_TOL,
              max_iter=MAX_ITER, shrinking=True)
    svr.fit(K, y)
    return svr


def _safe_srcc(a, b):
    try:
        return srcc(a, b)
    except (DegenerateInputError, DataError):
        return 0.0


def cross_validate(K, y, C, epsilon=DEFAULT_EPSILON, folds=N_FOLDS) -> float:
    """Mean validation SRCC over interleaved folds (row k goes to fold k mod folds).

    ``K`` is the full RBF Gram matrix of the training rows.
    """
    fold_of = np.arange(len(y)) % folds
    scores = []
    for f in range(folds):
        val = fold_of == f
        svr = _fit(K[np.ix_(~val, ~val)], y[~val], C, epsilon)
        scores.append(_safe_srcc(svr.predict(K[np.ix_(val, ~val)]), y[val]))
    return float(np.mean(scores))


def train_svr(X, y, grid: Grid | None = None) -> SvrModel:
    """Grid-search (C, gamma) by k-fold validation SRCC, then refit on all rows.

    Each gamma's Gram matrix is built once and shared by every C and fold.
    Ties keep the first pair in grid order, so the winner is deterministic.
    """
    grid = grid or Grid()
    X, y = _validate_xy(X, y)
    pairs = grid.pairs()
    # a fixed (C, gamma) needs no folds, so tiny hand-checkable sets can be fit
    need = 2 if len(pairs) == 1 else max(grid.folds, 5)
    if X.shape[0] < need:
        raise ConfigError(f"need at least {need} rows to train, got {X.shape[0]}")
    mean, std = _standardization(X)
    Z = (X - mean) / std
    d2 = _sq_distances(Z)
    if len(pairs) == 1:
        best = pairs[0]
    else:
        cv = {}
        for g in dict.fromkeys(grid.gamma):
            K = np.exp(-g * d2)
            for c in dict.fromkeys(grid.C):
                cv[c, g] = cross_validate(K, y, c, grid.epsilon, grid.folds)
        best = pairs[int(np.argmax([cv[p] for p in pairs]))]
    svr = _fit(np.exp(-best[1] * d2), y, best[0], grid.epsilon)
    return SvrModel(
        support_vectors=Z[svr.support_].copy(),
        dual_coef=svr.dual_coef_.ravel().copy(),
        bias=float(svr.intercept_[0]),
        gamma=float(best[1]),
        C=float(best[0]),
        epsilon=float(grid.epsilon),
        feature_mean=mean,
        feature_std=std,
    )


def predict(model: SvrModel, X) -> np.ndarray:
    """RBF kernel expansion on standardized features."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise DataError(f"model expects {model.n_features} features, got {X.shape[1]}")
    Z = (X - model.feature_mean) / model.feature_std
    if model.support_vectors.shape[0] == 0:
        return np.full(Z.shape[0], model.bias)
    # explicit differences and per-row reductions (no BLAS) so a row's
    # prediction never depends on which batch it arrives in
    sv = model.support_vectors
    out = np.empty(Z.shape[0])
    for start in range(0, Z.shape[0], 256):
        z = Z[start:start + 256]
        d2 = ((z[:, None, :] - sv[None, :, :]) ** 2).sum(axis=2)
        out[start:start + 256] = (np.exp(-model.gamma * d2) * model.dual_coef).sum(axis=1)
    return out + model.bias


def evaluate(plan: SplitPlan, features_by_video: Mapping, scores_by_video: Mapping,
             content_by_video: Mapping, grid: Grid | None = None,
             logistic: bool = False) -> EvalReport:
    """Train on each split's train contents, score its test contents.

    Splits with identical partitions are trained once; results are recorded
    per split index.
    """
    videos = list(content_by_video)
    for v in videos:
        if v not in features_by_video:
            raise DataError(f"video {v!r} has no features")
        if v not in scores_by_video:
            raise DataError(f"video {v!r} has no score")
    X = np.array([np.asarray(features_by_video[v], dtype=np.float64) for v in videos])
    y = np.array([float(scores_by_video[v]) for v in videos])
    contents = np.array([str(content_by_video[v]) for v in videos])
    cache = {}
    s_out, p_out = [], []
    for train_ids, test_ids in plan.splits:
        key = frozenset(map(str, train_ids))
        if key not in cache:
            train = np.isin(contents, [str(c) for c in train_ids])
            test = np.isin(contents, [str(c) for c in test_ids])
            model = train_svr(X[train], y[train], grid)
            pred = predict(model, X[test])
            try:
                s = srcc(pred, y[test])
                p = logistic_plcc(pred, y[test]) if logistic else plcc(pred, y[test])
            except DegenerateInputError:
                s = p = float("nan")
            cache[key] = (s, p)
        s_out.append(cache[key][0])
        p_out.append(cache[key][1])
    return EvalReport(s_out, p_out)
