"""Gradient boosting driver: logistic loss, leaf-wise trees, early stopping
on validation log loss, split-count importance, and a versioned JSON model
format.

Scores and histogram sums are accumulated in float64 throughout; given the
same params, data, and seed the fit is bit-reproducible at any worker-thread
setting (per-feature histogram reductions run in fixed feature order).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..metrics import EvalBatch, logloss
from ..tabular import ColumnRole, Table
from .binning import (
    BinMapper,
    bin_table,
    build_bin_mapper,
    mapper_from_json,
    mapper_to_json,
)
from .tree import (
    GrownTree,
    Node,
    count_leaves,
    grow_tree,
    node_from_json,
    node_to_json,
    tree_output,
)

MODEL_FORMAT = "resplite-gbdt"
MODEL_VERSION = 1


class GbdtError(ValueError):
    """Raised for invalid training inputs or parameters."""


@dataclass(frozen=True)
class GbdtParams:
    num_leaves: int = 491
    max_depth: int = -1  # -1 = unlimited
    learning_rate: float = 0.05
    num_iterations: int = 10000
    early_stopping_rounds: int = 100
    min_data_in_leaf: int = 20
    lambda_l2: float = 1.0
    max_bins: int = 255
    seed: int = 0
    feature_fraction: float = 1.0

    def __post_init__(self) -> None:
        if self.num_leaves < 2:
            raise GbdtError("num_leaves must be >= 2")
        if not 2 <= self.max_bins <= 255:
            raise GbdtError("max_bins must be in [2, 255]")
        if self.learning_rate <= 0:
            raise GbdtError("learning_rate must be positive")
        if self.early_stopping_rounds < 1:
            raise GbdtError("early_stopping_rounds must be >= 1")
        if self.num_iterations < 1:
            raise GbdtError("num_iterations must be >= 1")
        if self.min_data_in_leaf < 1:
            raise GbdtError("min_data_in_leaf must be >= 1")
        if self.lambda_l2 < 0:
            raise GbdtError("lambda_l2 must be >= 0")
        if not 0 < self.feature_fraction <= 1:
            raise GbdtError("feature_fraction must be in (0, 1]")


@dataclass
class GbdtModel:
    params: GbdtParams
    feature_names: tuple[str, ...]
    bin_mapper: BinMapper
    base_score: float
    trees: list[Node]
    best_iteration: int
    split_counts: np.ndarray
    train_curve: list[float] = field(default_factory=list)
    valid_curve: list[float] = field(default_factory=list)

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def loss_grad_hess(score: float, label: int) -> tuple[float, float]:
    """Gradient and hessian of the logistic loss at one (score, label)."""
    p = 1.0 / (1.0 + math.exp(-score)) if score >= 0 else (
        math.exp(score) / (1.0 + math.exp(score))
    )
    return p - label, p * (1.0 - p)


def _grad_hess(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = _sigmoid(scores)
    return p - labels, p * (1.0 - p)


def _scores_logloss(scores: np.ndarray, labels: np.ndarray) -> float:
    # identical arithmetic to metrics.logloss so logged curves and external
    # evaluation of predict() output agree exactly
    return logloss(EvalBatch(labels, _sigmoid(scores)))


def _check_features(table: Table, feature_names: list[str], target: str) -> None:
    for name in feature_names:
        role = table.schema.role(name)
        if role in (ColumnRole.LABEL_CLICK, ColumnRole.LABEL_INSTALL, ColumnRole.ROW_ID):
            raise GbdtError(f"column {name!r} ({role.value}) cannot be a feature")
        if name == target:
            raise GbdtError(f"target column {name!r} cannot also be a feature")


def fit(
    params: GbdtParams,
    train: Table,
    valid: Table,
    feature_names: list[str] | None = None,
    target: str | None = None,
    n_threads: int = 1,
) -> GbdtModel:
    """Boost trees on the train table, early-stopping on validation log loss.

    Keeps trees up to the iteration with the lowest validation loss (first
    minimum on ties).  The validation table must be non-empty; the train
    labels must contain both classes.
    """
    if feature_names is None:
        feature_names = list(train.schema.feature_columns())
    if target is None:
        target = train.schema.require_install()
    if train.schema != valid.schema:
        raise GbdtError("train and valid tables must share a schema")
    if valid.n_rows == 0:
        raise GbdtError("validation table is empty; early stopping needs it")
    if not feature_names:
        raise GbdtError("no feature columns given")
    _check_features(train, feature_names, target)

    y_train = train.col(target).astype(np.float64)
    y_valid = valid.col(target).astype(np.float64)
    pos_rate = float(y_train.mean())
    if pos_rate <= 0.0 or pos_rate >= 1.0:
        raise GbdtError("train labels are single-class; cannot fit")

    mapper = build_bin_mapper(train, feature_names, params.max_bins)
    binned_train = bin_table(mapper, train)
    binned_valid = bin_table(mapper, valid)
    n_bins_all = mapper.n_bins()
    is_cat = np.asarray(
        [mapper.is_categorical(j) for j in range(mapper.n_features)], dtype=bool
    )

    base_score = math.log(pos_rate / (1.0 - pos_rate))
    scores = np.full(train.n_rows, base_score, dtype=np.float64)
    valid_scores = np.full(valid.n_rows, base_score, dtype=np.float64)

    rng = np.random.Generator(np.random.PCG64(params.seed))
    n_features = len(feature_names)
    n_sub = max(1, math.ceil(params.feature_fraction * n_features))

    pool = ThreadPoolExecutor(max_workers=n_threads) if n_threads > 1 else None
    trees: list[Node] = []
    train_curve: list[float] = []
    valid_curve: list[float] = []
    best_iter = -1
    best_loss = math.inf
    try:
        for it in range(params.num_iterations):
            grad, hess = _grad_hess(scores, y_train)
            if n_sub < n_features:
                subset = np.sort(rng.choice(n_features, size=n_sub, replace=False))
            else:
                subset = np.arange(n_features, dtype=np.int64)
            grown = grow_tree(
                binned_train,
                n_bins_all,
                is_cat,
                grad,
                hess,
                subset,
                params.num_leaves,
                params.max_depth,
                params.min_data_in_leaf,
                params.lambda_l2,
                params.learning_rate,
                pool=pool,
                n_chunks=n_threads,
            )
            if grown is None:
                break
            for rows, value in grown.leaf_updates:
                scores[rows] += value
            valid_scores += tree_output(grown.root, binned_valid)
            trees.append(grown.root)
            train_curve.append(_scores_logloss(scores, y_train))
            vloss = _scores_logloss(valid_scores, y_valid)
            valid_curve.append(vloss)
            if vloss < best_loss:
                best_loss = vloss
                best_iter = it
            elif it - best_iter >= params.early_stopping_rounds:
                break
    finally:
        if pool is not None:
            pool.shutdown()

    kept = trees[: best_iter + 1]
    split_counts = np.zeros(n_features, dtype=np.int64)
    for root in kept:
        _accumulate_splits(root, split_counts)
    return GbdtModel(
        params=params,
        feature_names=tuple(feature_names),
        bin_mapper=mapper,
        base_score=base_score,
        trees=kept,
        best_iteration=len(kept),
        split_counts=split_counts,
        train_curve=train_curve,
        valid_curve=valid_curve,
    )


def _accumulate_splits(node: Node, counts: np.ndarray) -> None:
    if hasattr(node, "feature"):
        counts[node.feature] += 1
        _accumulate_splits(node.left, counts)
        _accumulate_splits(node.right, counts)


def predict_raw(model: GbdtModel, table: Table) -> np.ndarray:
    """Raw additive scores (log-odds); monotone in predicted probability."""
    binned = bin_table(model.bin_mapper, table)
    scores = np.full(table.n_rows, model.base_score, dtype=np.float64)
    for root in model.trees:
        scores += tree_output(root, binned)
    return scores


def predict(model: GbdtModel, table: Table) -> np.ndarray:
    """Predicted installation probabilities for each row."""
    return _sigmoid(predict_raw(model, table))


def feature_importance(model: GbdtModel) -> list[tuple[str, int]]:
    """Per-feature split counts over retained trees, sorted descending with
    ties broken by feature index."""
    order = sorted(
        range(len(model.feature_names)),
        key=lambda j: (-int(model.split_counts[j]), j),
    )
    return [(model.feature_names[j], int(model.split_counts[j])) for j in order]


def total_leaves(model: GbdtModel) -> int:
    return sum(count_leaves(root) for root in model.trees)


def save_model(model: GbdtModel, path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "params": asdict(model.params),
        "feature_names": list(model.feature_names),
        "bin_mapper": mapper_to_json(model.bin_mapper),
        "base_score": model.base_score,
        "best_iteration": model.best_iteration,
        "split_counts": [int(c) for c in model.split_counts],
        "trees": [node_to_json(root) for root in model.trees],
        "train_curve": model.train_curve,
        "valid_curve": model.valid_curve,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> GbdtModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise GbdtError(f"not a {MODEL_FORMAT} document")
    if doc.get("version") != MODEL_VERSION:
        raise GbdtError(f"unsupported model version {doc.get('version')}")
    return GbdtModel(
        params=GbdtParams(**doc["params"]),
        feature_names=tuple(doc["feature_names"]),
        bin_mapper=mapper_from_json(doc["bin_mapper"]),
        base_score=float(doc["base_score"]),
        trees=[node_from_json(t) for t in doc["trees"]],
        best_iteration=int(doc["best_iteration"]),
        split_counts=np.asarray(doc["split_counts"], dtype=np.int64),
        train_curve=[float(x) for x in doc["train_curve"]],
        valid_curve=[float(x) for x in doc["valid_curve"]],
    )
