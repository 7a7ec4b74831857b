"""Leaf-wise histogram tree growth on second-order gradient statistics.

A tree is grown by repeatedly splitting the live leaf with the highest gain
until the leaf budget is hit or no candidate has positive gain.  Gain is the
usual regularized second-order score
``G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - G^2/(H+lam)``; leaf values are damped
Newton steps ``-G/(H+lam) * learning_rate``.

Determinism rules: features are scanned in ascending index order and a
candidate replaces the incumbent only on strictly greater gain, so ties keep
the lowest feature index and lowest bin; equal-gain leaves split in creation
order; missing values go left on exact gain ties.  Sibling histograms are
derived by subtraction from the parent (smaller child built directly).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .binning import STRIDE


@dataclass
class LeafNode:
    value: float


@dataclass
class NumericSplitNode:
    feature: int
    threshold_bin: int  # left = finite bins 1..threshold_bin
    missing_left: bool
    left: "Node"
    right: "Node"


@dataclass
class CategoricalSplitNode:
    feature: int
    left_bins: np.ndarray  # sorted bin ids routed left
    missing_left: bool     # == (bin 0 in left_bins)
    left: "Node"
    right: "Node"


Node = Union[LeafNode, NumericSplitNode, CategoricalSplitNode]


@dataclass
class GrownTree:
    root: Node
    leaf_updates: list[tuple[np.ndarray, float]]  # (train row indices, value)
    n_leaves: int
    split_features: list[int]


@dataclass
class _Split:
    gain: float
    feature: int      # model feature index
    fpos: int         # position within this tree's feature subset
    kind: str         # "numeric" | "categorical"
    threshold_bin: int
    missing_left: bool
    left_bins: np.ndarray | None
    grad_left: float
    hess_left: float
    count_left: int


class _Leaf:
    __slots__ = ("rows", "depth", "grad", "hess", "count", "hist", "split", "node_box")

    def __init__(self, rows, depth, grad, hess, count):
        self.rows = rows
        self.depth = depth
        self.grad = grad
        self.hess = hess
        self.count = count
        self.hist: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        self.split: _Split | None = None
        self.node_box: list = [None, None, None]  # kind marker, left, right


def _build_hist(
    binned: np.ndarray,
    subset: np.ndarray,
    rows: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    chunks: list[np.ndarray],
    pool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-feature histograms of gradient sums, hessian sums, and counts.

    Features may be processed in chunks (optionally on a thread pool); each
    feature's sums are accumulated independently in row order, so results do
    not depend on the chunking.
    """
    n_sub = len(subset)
    g_rows = grad[rows]
    h_rows = hess[rows]
    hg = np.empty((n_sub, STRIDE), dtype=np.float64)
    hh = np.empty((n_sub, STRIDE), dtype=np.float64)
    hc = np.empty((n_sub, STRIDE), dtype=np.float64)

    def work(chunk: np.ndarray) -> None:
        m = len(rows)
        k = len(chunk)
        # one fancy gather of shape (k, m); avoids copying full feature rows
        idx = binned[subset[chunk][:, None], rows[None, :]].astype(np.int64)
        idx += (np.arange(k, dtype=np.int64) * STRIDE)[:, None]
        flat = idx.ravel()
        size = k * STRIDE
        hg[chunk] = np.bincount(
            flat, weights=np.tile(g_rows, k), minlength=size
        ).reshape(k, STRIDE)
        hh[chunk] = np.bincount(
            flat, weights=np.tile(h_rows, k), minlength=size
        ).reshape(k, STRIDE)
        hc[chunk] = np.bincount(flat, minlength=size).reshape(k, STRIDE)

    if pool is None or len(chunks) == 1:
        for chunk in chunks:
            work(chunk)
    else:
        list(pool.map(work, chunks))
    return hg, hh, hc


def _scan_numeric(hg, hh, hc, n_bins, total_g, total_h, total_c, lam, min_data):
    """Best threshold over one numeric feature's histogram, trying the
    missing bin on both sides; returns None when no valid positive split."""
    if n_bins < 3:
        return None
    pg = np.cumsum(hg[1:n_bins])[:-1]
    ph = np.cumsum(hh[1:n_bins])[:-1]
    pc = np.cumsum(hc[1:n_bins])[:-1]
    mg, mh, mc = hg[0], hh[0], hc[0]
    parent = total_g * total_g / (total_h + lam)

    def side_gain(gl, hl, cl):
        gr = total_g - gl
        hr = total_h - hl
        cr = total_c - cl
        ok = (cl >= min_data) & (cr >= min_data)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent
        return np.where(ok, gain, -np.inf)

    gain_left = side_gain(pg + mg, ph + mh, pc + mc)   # missing joins left
    gain_right = side_gain(pg, ph, pc)                 # missing joins right
    use_right = gain_right > gain_left
    gain = np.where(use_right, gain_right, gain_left)
    b = int(np.argmax(gain))
    if not np.isfinite(gain[b]) or gain[b] <= 0.0:
        return None
    missing_left = not bool(use_right[b])
    gl = float(pg[b] + (mg if missing_left else 0.0))
    hl = float(ph[b] + (mh if missing_left else 0.0))
    cl = int(pc[b] + (mc if missing_left else 0))
    return float(gain[b]), b + 1, missing_left, gl, hl, cl


def _scan_categorical(hg, hh, hc, n_bins, total_g, total_h, total_c, lam, min_data):
    """Best prefix of the G/H-sorted occupied bins; returns None when no
    valid positive split exists."""
    counts = hc[:n_bins]
    nz = np.flatnonzero(counts)
    if len(nz) < 2:
        return None
    key = hg[nz] / hh[nz]  # per-row hessians are positive, so hh[nz] > 0
    order = np.lexsort((nz, key))
    sel = nz[order]
    cg = np.cumsum(hg[sel])[:-1]
    ch = np.cumsum(hh[sel])[:-1]
    cc = np.cumsum(hc[sel])[:-1]
    gr = total_g - cg
    hr = total_h - ch
    cr = total_c - cc
    ok = (cc >= min_data) & (cr >= min_data)
    parent = total_g * total_g / (total_h + lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = cg * cg / (ch + lam) + gr * gr / (hr + lam) - parent
    gain = np.where(ok, gain, -np.inf)
    k = int(np.argmax(gain))
    if not np.isfinite(gain[k]) or gain[k] <= 0.0:
        return None
    left_bins = np.sort(sel[: k + 1]).astype(np.int64)
    return float(gain[k]), left_bins, float(cg[k]), float(ch[k]), int(cc[k])


def _find_best_split(leaf: _Leaf, subset, n_bins_all, is_cat, lam, min_data) -> _Split | None:
    if leaf.count < 2 * min_data:
        return None
    hg, hh, hc = leaf.hist
    best: _Split | None = None
    for fpos, f in enumerate(subset):
        nb = int(n_bins_all[f])
        if is_cat[f]:
            res = _scan_categorical(
                hg[fpos], hh[fpos], hc[fpos], nb,
                leaf.grad, leaf.hess, leaf.count, lam, min_data,
            )
            if res is None:
                continue
            gain, left_bins, gl, hl, cl = res
            if best is None or gain > best.gain:
                best = _Split(
                    gain=gain, feature=int(f), fpos=fpos, kind="categorical",
                    threshold_bin=0, missing_left=bool(0 in left_bins),
                    left_bins=left_bins, grad_left=gl, hess_left=hl, count_left=cl,
                )
        else:
            res = _scan_numeric(
                hg[fpos], hh[fpos], hc[fpos], nb,
                leaf.grad, leaf.hess, leaf.count, lam, min_data,
            )
            if res is None:
                continue
            gain, tb, missing_left, gl, hl, cl = res
            if best is None or gain > best.gain:
                best = _Split(
                    gain=gain, feature=int(f), fpos=fpos, kind="numeric",
                    threshold_bin=tb, missing_left=missing_left,
                    left_bins=None, grad_left=gl, hess_left=hl, count_left=cl,
                )
    return best


def _left_mask(split: _Split, bins_rows: np.ndarray) -> np.ndarray:
    if split.kind == "numeric":
        mask = bins_rows <= split.threshold_bin
        if not split.missing_left:
            mask &= bins_rows != 0
        return mask
    bitmap = np.zeros(STRIDE, dtype=bool)
    bitmap[split.left_bins] = True
    return bitmap[bins_rows]


def grow_tree(
    binned: np.ndarray,
    n_bins_all: np.ndarray,
    is_cat: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    subset: np.ndarray,
    num_leaves: int,
    max_depth: int,
    min_data: int,
    lam: float,
    learning_rate: float,
    pool=None,
    n_chunks: int = 1,
) -> Optional[GrownTree]:
    """Grow one tree over all rows; returns None when not even the root can
    be split with positive gain (no further boosting progress is possible)."""
    n = binned.shape[1]
    rows = np.arange(n, dtype=np.int64)
    chunk_list = [c for c in np.array_split(np.arange(len(subset)), max(1, n_chunks)) if len(c)]

    root = _Leaf(rows, 0, float(grad.sum()), float(hess.sum()), n)
    root.hist = _build_hist(binned, subset, rows, grad, hess, chunk_list, pool)
    root.split = _find_best_split(root, subset, n_bins_all, is_cat, lam, min_data)
    if root.split is None:
        return None

    heap: list[tuple[float, int, _Leaf]] = []
    seq = 0
    heapq.heappush(heap, (-root.split.gain, seq, root))
    n_leaves = 1
    split_features: list[int] = []

    while heap and n_leaves < num_leaves:
        _, _, leaf = heapq.heappop(heap)
        split = leaf.split
        bins_rows = binned[split.feature][leaf.rows]
        mask = _left_mask(split, bins_rows)
        rows_l = leaf.rows[mask]
        rows_r = leaf.rows[~mask]

        left = _Leaf(rows_l, leaf.depth + 1, split.grad_left, split.hess_left, len(rows_l))
        right = _Leaf(
            rows_r, leaf.depth + 1,
            leaf.grad - split.grad_left, leaf.hess - split.hess_left, len(rows_r),
        )
        # build the smaller child's histogram directly, derive the sibling
        small, big = (left, right) if left.count <= right.count else (right, left)
        small.hist = _build_hist(binned, subset, small.rows, grad, hess, chunk_list, pool)
        big.hist = tuple(p - s for p, s in zip(leaf.hist, small.hist))
        leaf.hist = None
        leaf.rows = None

        leaf.node_box = [split, left, right]
        split_features.append(split.feature)
        n_leaves += 1

        for child in (left, right):
            if max_depth >= 0 and child.depth >= max_depth:
                child.hist = None
                continue
            child.split = _find_best_split(child, subset, n_bins_all, is_cat, lam, min_data)
            if child.split is not None:
                seq += 1
                heapq.heappush(heap, (-child.split.gain, seq, child))
        if n_leaves >= num_leaves:
            break

    leaf_updates: list[tuple[np.ndarray, float]] = []

    def finalize(leaf: _Leaf) -> Node:
        split, left, right = leaf.node_box
        if left is None:  # never split: a terminal leaf
            value = -leaf.grad / (leaf.hess + lam) * learning_rate
            leaf_updates.append((leaf.rows, float(value)))
            return LeafNode(float(value))
        if split.kind == "numeric":
            return NumericSplitNode(
                feature=split.feature,
                threshold_bin=split.threshold_bin,
                missing_left=split.missing_left,
                left=finalize(left),
                right=finalize(right),
            )
        return CategoricalSplitNode(
            feature=split.feature,
            left_bins=split.left_bins,
            missing_left=split.missing_left,
            left=finalize(left),
            right=finalize(right),
        )

    tree_root = finalize(root)
    return GrownTree(tree_root, leaf_updates, n_leaves, split_features)


def tree_output(root: Node, binned: np.ndarray) -> np.ndarray:
    """Route every column of the binned matrix through the tree and return
    the per-row leaf values."""
    n = binned.shape[1]
    out = np.empty(n, dtype=np.float64)
    stack: list[tuple[Node, np.ndarray]] = [(root, np.arange(n, dtype=np.int64))]
    while stack:
        node, idx = stack.pop()
        if isinstance(node, LeafNode):
            out[idx] = node.value
            continue
        bins_rows = binned[node.feature][idx]
        if isinstance(node, NumericSplitNode):
            mask = bins_rows <= node.threshold_bin
            if not node.missing_left:
                mask &= bins_rows != 0
        else:
            bitmap = np.zeros(STRIDE, dtype=bool)
            bitmap[node.left_bins] = True
            mask = bitmap[bins_rows]
        stack.append((node.left, idx[mask]))
        stack.append((node.right, idx[~mask]))
    return out


def count_leaves(root: Node) -> int:
    if isinstance(root, LeafNode):
        return 1
    return count_leaves(root.left) + count_leaves(root.right)


def node_to_json(node: Node) -> dict:
    if isinstance(node, LeafNode):
        return {"leaf": node.value}
    doc = {
        "feature": node.feature,
        "left": node_to_json(node.left),
        "right": node_to_json(node.right),
        "missing_left": node.missing_left,
    }
    if isinstance(node, NumericSplitNode):
        doc["threshold_bin"] = node.threshold_bin
    else:
        doc["left_bins"] = [int(b) for b in node.left_bins]
    return doc


def node_from_json(doc: dict) -> Node:
    if "leaf" in doc:
        return LeafNode(float(doc["leaf"]))
    left = node_from_json(doc["left"])
    right = node_from_json(doc["right"])
    if "threshold_bin" in doc:
        return NumericSplitNode(
            feature=int(doc["feature"]),
            threshold_bin=int(doc["threshold_bin"]),
            missing_left=bool(doc["missing_left"]),
            left=left,
            right=right,
        )
    return CategoricalSplitNode(
        feature=int(doc["feature"]),
        left_bins=np.asarray(doc["left_bins"], dtype=np.int64),
        missing_left=bool(doc["missing_left"]),
        left=left,
        right=right,
    )
