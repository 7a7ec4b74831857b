"""Arithmetic-lattice detection and integer quantization for continuous
features, plus the pairwise Pearson correlation matrix used to spot related
feature blocks.

A column is "on a lattice" when its sorted unique values all sit within
``tol_rel * step`` of multiples of a common step above the minimum value.
Detection estimates the step from the minimum positive gap between
consecutive uniques, then refines it by averaging the per-value implied
steps, which removes the downward bias of taking a single noisy gap.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .tabular import ColumnRole, MISSING_TOKEN, Table

DEFAULT_TOL_REL = 1e-3


class DenoiseError(ValueError):
    """Raised when quantization is applied without a detected lattice."""


@dataclass(frozen=True)
class DeltaEstimate:
    feature: str
    delta: float            # NaN when not detected
    v_min: float
    n_unique: int
    max_abs_residual: float
    detected: bool
    tol_rel: float = DEFAULT_TOL_REL

    def to_json_dict(self) -> dict:
        return {
            "feature": self.feature,
            "delta": None if np.isnan(self.delta) else float(self.delta),
            "v_min": None if np.isnan(self.v_min) else float(self.v_min),
            "n_unique": self.n_unique,
            "max_abs_residual": float(self.max_abs_residual),
            "detected": self.detected,
            "tol_rel": self.tol_rel,
        }


def _not_detected(feature: str, uniques: np.ndarray, tol_rel: float) -> DeltaEstimate:
    return DeltaEstimate(
        feature=feature,
        delta=float("nan"),
        v_min=float(uniques[0]) if len(uniques) else float("nan"),
        n_unique=len(uniques),
        max_abs_residual=float("inf"),
        detected=False,
        tol_rel=tol_rel,
    )


def detect_delta(
    column: np.ndarray,
    tol_rel: float = DEFAULT_TOL_REL,
    feature: str = "",
) -> DeltaEstimate:
    """Detect an arithmetic progression in a continuous column's uniques.

    Fewer than 3 finite unique values yields a not-detected result rather
    than an error.
    """
    finite = column[np.isfinite(column)]
    uniques = np.unique(finite)
    if len(uniques) < 3:
        return _not_detected(feature, uniques, tol_rel)
    gaps = np.diff(uniques)
    candidate = float(gaps[gaps > 0].min())
    offsets = uniques - uniques[0]
    k = np.round(offsets / candidate)
    residuals = np.abs(offsets - k * candidate)
    if residuals.max() > tol_rel * candidate:
        return _not_detected(feature, uniques, tol_rel)
    positive = k > 0
    delta = float(np.mean(offsets[positive] / k[positive]))
    delta = _harmonize_with_origin(delta, float(uniques[0]), tol_rel)
    k2 = np.round(offsets / delta)
    max_resid = float(np.abs(offsets - k2 * delta).max())
    return DeltaEstimate(
        feature=feature,
        delta=delta,
        v_min=float(uniques[0]),
        n_unique=len(uniques),
        max_abs_residual=max_resid,
        detected=True,
        tol_rel=tol_rel,
    )


_MAX_HARMONIC = 16


def _harmonize_with_origin(delta: float, v_min: float, tol_rel: float) -> float:
    """Shrink the gap-based step so the minimum value itself is a multiple.

    The gap structure only pins the step up to a divisor: values like
    {1, 3, 5} * d have every consecutive gap equal to 2d, yet dividing by 2d
    would not yield integers.  Quantization divides raw values by the step,
    so when v_min sits halfway (or 1/m of the way) between multiples, the
    true step is delta/m.  Values stay on the finer lattice automatically
    because they differ from v_min by whole multiples of delta.
    """
    f = v_min / delta
    if abs(f - round(f)) <= tol_rel:
        return delta
    for m in range(2, _MAX_HARMONIC + 1):
        fm = f * m
        if abs(fm - round(fm)) <= tol_rel * m:
            return delta / m
    return delta


def quantize(
    column: np.ndarray,
    estimate: DeltaEstimate,
    origin: str = "zero",
) -> np.ndarray:
    """Divide by the detected step and round to integers; NaN stays missing.

    ``origin="zero"`` computes round(v / delta); ``origin="vmin"`` computes
    round((v - v_min) / delta).  Returned as float64 with integral values so
    missing cells stay representable.
    """
    if not estimate.detected:
        raise DenoiseError(
            f"no lattice detected for {estimate.feature or 'column'}; cannot quantize"
        )
    if origin not in ("zero", "vmin"):
        raise DenoiseError(f"unknown origin {origin!r}; use 'zero' or 'vmin'")
    base = 0.0 if origin == "zero" else estimate.v_min
    out = np.full(len(column), np.nan)
    finite = np.isfinite(column)
    out[finite] = np.round((column[finite] - base) / estimate.delta)
    return out


def detect_all(
    table: Table,
    features: list[str] | None = None,
    tol_rel: float = DEFAULT_TOL_REL,
) -> list[DeltaEstimate]:
    """Run detection over the given (default: all) continuous features."""
    if features is None:
        features = [
            name
            for name, role in table.schema.columns
            if role is ColumnRole.CONTINUOUS
        ]
    return [
        detect_delta(table.col(name), tol_rel=tol_rel, feature=name)
        for name in features
    ]


def group_deltas(
    estimates: list[DeltaEstimate], rel_tol: float = 0.01
) -> list[list[str]]:
    """Cluster detected steps within 1% relative difference; reporting only,
    detection itself stays per-feature."""
    detected = sorted(
        (e for e in estimates if e.detected), key=lambda e: (e.delta, e.feature)
    )
    groups: list[list[str]] = []
    last_delta = None
    for e in detected:
        if last_delta is not None and (e.delta - last_delta) <= rel_tol * last_delta:
            groups[-1].append(e.feature)
        else:
            groups.append([e.feature])
        last_delta = e.delta
    return groups


def apply_denoise_group(
    tables: list[Table],
    estimates: list[DeltaEstimate],
    as_categorical: bool = True,
    origin: str = "zero",
) -> list[Table]:
    """Replace each detected column with its quantized integers, in place
    under the same name, typed categorical or continuous per the flag.

    When quantized columns become categorical, one dictionary is built per
    feature over the union of all tables' values (ascending integer order),
    so codes agree across train and test exactly like shared ingest
    dictionaries do.
    """
    out = list(tables)
    for est in estimates:
        if not est.detected:
            continue
        quantized = [
            quantize(t.col(est.feature), est, origin=origin)
            if est.feature in t.schema.names else None
            for t in out
        ]
        if not as_categorical:
            out = [
                t if q is None else t.replace_column(est.feature, ColumnRole.CONTINUOUS, q)
                for t, q in zip(out, quantized)
            ]
            continue
        union = np.unique(
            np.concatenate(
                [q[~np.isnan(q)] for q in quantized if q is not None]
                or [np.empty(0)]
            )
        ).astype(np.int64)
        dictionary = (MISSING_TOKEN,) + tuple(str(int(v)) for v in union)
        replaced = []
        for t, q in zip(out, quantized):
            if q is None:
                replaced.append(t)
                continue
            codes = np.zeros(len(q), dtype=np.int32)
            finite = ~np.isnan(q)
            codes[finite] = (
                np.searchsorted(union, q[finite].astype(np.int64)) + 1
            ).astype(np.int32)
            replaced.append(
                t.replace_column(est.feature, ColumnRole.CATEGORICAL, codes, dictionary)
            )
        out = replaced
    return out


def apply_denoise(
    table: Table,
    estimates: list[DeltaEstimate],
    as_categorical: bool = True,
    origin: str = "zero",
) -> Table:
    """Single-table form of :func:`apply_denoise_group`."""
    return apply_denoise_group([table], estimates, as_categorical, origin)[0]


def save_estimates(
    estimates: list[DeltaEstimate], path, groups: list[list[str]] | None = None
) -> None:
    doc = {
        "estimates": [e.to_json_dict() for e in estimates],
        "groups": groups if groups is not None else group_deltas(estimates),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def correlation_matrix(
    table: Table, features: list[str] | None = None
) -> tuple[np.ndarray, list[str]]:
    """Pairwise-complete Pearson correlations over continuous features.

    Zero-variance features get NaN rows/columns with a warning; the diagonal
    of well-behaved features is exactly 1.
    """
    if features is None:
        features = [
            name
            for name, role in table.schema.columns
            if role is ColumnRole.CONTINUOUS
        ]
    if len(features) < 2:
        raise DenoiseError("correlation matrix needs at least 2 continuous features")
    cols = [table.col(name) for name in features]
    m = len(features)
    out = np.eye(m)
    degenerate = set()
    for i in range(m):
        finite = cols[i][np.isfinite(cols[i])]
        if len(finite) == 0 or finite.std() == 0.0:
            degenerate.add(i)
            warnings.warn(
                f"feature {features[i]!r} has zero variance; correlations set to NaN",
                stacklevel=2,
            )
    for i in range(m):
        for j in range(i, m):
            if i in degenerate or j in degenerate:
                out[i, j] = out[j, i] = np.nan
                continue
            if i == j:
                continue
            both = np.isfinite(cols[i]) & np.isfinite(cols[j])
            xi, xj = cols[i][both], cols[j][both]
            if len(xi) < 2 or xi.std() == 0.0 or xj.std() == 0.0:
                out[i, j] = out[j, i] = np.nan
                continue
            xi = xi - xi.mean()
            xj = xj - xj.mean()
            r = float(xi @ xj / np.sqrt((xi @ xi) * (xj @ xj)))
            out[i, j] = out[j, i] = r
    return out, list(features)


def save_correlation_csv(matrix: np.ndarray, features: list[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("feature," + ",".join(features) + "\n")
        for i, name in enumerate(features):
            cells = ",".join(
                "" if np.isnan(matrix[i, j]) else f"{matrix[i, j]:.6f}"
                for j in range(len(features))
            )
            fh.write(f"{name},{cells}\n")
