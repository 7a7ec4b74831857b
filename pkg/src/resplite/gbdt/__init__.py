"""Histogram-based, leaf-wise gradient boosted trees for binary
classification with logistic loss."""

from .binning import BinMapper, CategoricalBins, NumericBins, bin_table, build_bin_mapper
from .boosting import (
    GbdtError,
    GbdtModel,
    GbdtParams,
    feature_importance,
    fit,
    load_model,
    loss_grad_hess,
    predict,
    predict_raw,
    save_model,
    total_leaves,
)
from .tree import (
    CategoricalSplitNode,
    GrownTree,
    LeafNode,
    Node,
    NumericSplitNode,
    count_leaves,
    grow_tree,
    tree_output,
)

__all__ = [
    "BinMapper",
    "CategoricalBins",
    "CategoricalSplitNode",
    "GbdtError",
    "GbdtModel",
    "GbdtParams",
    "GrownTree",
    "LeafNode",
    "Node",
    "NumericBins",
    "NumericSplitNode",
    "bin_table",
    "build_bin_mapper",
    "count_leaves",
    "feature_importance",
    "fit",
    "grow_tree",
    "load_model",
    "loss_grad_hess",
    "predict",
    "predict_raw",
    "save_model",
    "total_leaves",
    "tree_output",
]
