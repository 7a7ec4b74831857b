"""Feature discretization for histogram tree growth.

Continuous features map to quantile bins via ascending upper-bound
thresholds computed on the training split only; bin 0 is reserved for
missing everywhere.  Categorical features map codes to bins by identity,
with codes at or beyond ``max_bins - 1`` collapsed into one overflow bin.
Total bins per feature never exceed 256, so a binned matrix is uint8.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tabular import ColumnRole, Table

#: uniform histogram row width; per-feature n_bins is always <= this
STRIDE = 256


@dataclass(frozen=True)
class NumericBins:
    """Ascending thresholds; finite value v lands in the first bin whose
    upper bound is >= v (1-based; bin 0 = missing)."""

    thresholds: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.thresholds) + 2  # missing + len+1 finite bins


@dataclass(frozen=True)
class CategoricalBins:
    n_categories: int
    overflow_bin: int  # == max_bins - 1

    @property
    def n_bins(self) -> int:
        return min(self.n_categories, self.overflow_bin + 1)


@dataclass(frozen=True)
class BinMapper:
    feature_names: tuple[str, ...]
    feature_bins: tuple[NumericBins | CategoricalBins, ...]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def n_bins(self) -> np.ndarray:
        return np.asarray([fb.n_bins for fb in self.feature_bins], dtype=np.int64)

    def is_categorical(self, j: int) -> bool:
        return isinstance(self.feature_bins[j], CategoricalBins)


def _numeric_thresholds(values: np.ndarray, max_bins: int) -> np.ndarray:
    finite = values[~np.isnan(values)]
    if finite.size == 0:
        return np.empty(0, dtype=np.float64)
    uniques = np.unique(finite)
    if len(uniques) <= max_bins - 1:
        return ((uniques[:-1] + uniques[1:]) / 2.0).astype(np.float64)
    qs = np.linspace(0.0, 1.0, max_bins)[1:-1]
    return np.unique(np.quantile(finite, qs)).astype(np.float64)


def build_bin_mapper(
    table: Table, feature_names: list[str], max_bins: int
) -> BinMapper:
    """Compute per-feature bins from the given (training) table."""
    bins: list[NumericBins | CategoricalBins] = []
    for name in feature_names:
        role = table.schema.role(name)
        if role is ColumnRole.CATEGORICAL:
            bins.append(
                CategoricalBins(
                    n_categories=len(table.dictionary(name)),
                    overflow_bin=max_bins - 1,
                )
            )
        else:
            bins.append(
                NumericBins(_numeric_thresholds(table.col(name), max_bins))
            )
    return BinMapper(tuple(feature_names), tuple(bins))


def bin_column(mapper: BinMapper, j: int, values: np.ndarray) -> np.ndarray:
    fb = mapper.feature_bins[j]
    if isinstance(fb, CategoricalBins):
        return np.minimum(values, fb.overflow_bin).astype(np.uint8)
    out = np.zeros(len(values), dtype=np.uint8)
    finite = ~np.isnan(values)
    out[finite] = (
        np.searchsorted(fb.thresholds, values[finite], side="left") + 1
    ).astype(np.uint8)
    return out


def bin_table(mapper: BinMapper, table: Table) -> np.ndarray:
    """Binned feature matrix of shape (n_features, n_rows), one contiguous
    uint8 row per feature."""
    out = np.empty((mapper.n_features, table.n_rows), dtype=np.uint8)
    for j, name in enumerate(mapper.feature_names):
        out[j] = bin_column(mapper, j, table.col(name))
    return out


def mapper_to_json(mapper: BinMapper) -> list[dict]:
    doc = []
    for name, fb in zip(mapper.feature_names, mapper.feature_bins):
        if isinstance(fb, CategoricalBins):
            doc.append(
                {
                    "name": name,
                    "kind": "categorical",
                    "n_categories": fb.n_categories,
                    "overflow_bin": fb.overflow_bin,
                }
            )
        else:
            doc.append(
                {
                    "name": name,
                    "kind": "numeric",
                    "thresholds": [float(t) for t in fb.thresholds],
                }
            )
    return doc


def mapper_from_json(doc: list[dict]) -> BinMapper:
    names = []
    bins: list[NumericBins | CategoricalBins] = []
    for entry in doc:
        names.append(entry["name"])
        if entry["kind"] == "categorical":
            bins.append(
                CategoricalBins(
                    n_categories=int(entry["n_categories"]),
                    overflow_bin=int(entry["overflow_bin"]),
                )
            )
        else:
            bins.append(
                NumericBins(np.asarray(entry["thresholds"], dtype=np.float64))
            )
    return BinMapper(tuple(names), tuple(bins))
