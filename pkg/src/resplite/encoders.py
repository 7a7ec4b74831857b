"""Leakage-free categorical encoders.

Both encoders are day-indexed: the statistics used to encode a row at day d
come exclusively from rows with day < d (never day d itself), so within-day
label or occurrence shuffles cannot change any encoding, and appending
future rows cannot either.

Frequency encoding counts category occurrences over one of three trailing
windows: the previous day, the previous 7 days, or all history up to one
day ago.  Target encoding is the ordered, smoothed kind: the category's
historical target mean shrunk toward the day's global prior by a pseudo
count ``a``, with 0.5 as the cold-start value when no history exists at all.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .tabular import ColumnRole, Table


class EncoderError(ValueError):
    """Raised for invalid encoder inputs."""


class FreqWindow(Enum):
    PREV_DAY = "prev_day"
    PREV_WEEK = "prev_week"
    ALL_HISTORY = "all_history"


#: semantic target names -> schema accessor
_TARGETS = ("click", "install")


@dataclass(frozen=True)
class EncoderState:
    """Fitted day-indexed statistics for one feature.

    ``counts[i, c]`` is the number of occurrences of category ``c`` on day
    ``min_day + i``.  ``target_sums`` (target kind only) is the matching sum
    of the target label.  Day totals back the per-day global priors.
    """

    kind: str                      # "frequency" | "target"
    feature: str
    n_categories: int
    min_day: int
    max_day: int
    counts: np.ndarray             # (n_days, n_categories) int64
    window: FreqWindow | None = None
    target: str | None = None      # "click" | "install"
    smoothing: float = 1.0
    target_sums: np.ndarray | None = None
    day_rows: np.ndarray | None = None       # rows per day
    day_positives: np.ndarray | None = None  # positive labels per day

    @property
    def column_name(self) -> str:
        if self.kind == "frequency":
            return f"{self.feature}__freq_{self.window.value}"
        return f"{self.feature}__te_{self.target}"

    def to_json_dict(self) -> dict:
        doc = {
            "kind": self.kind,
            "feature": self.feature,
            "n_categories": self.n_categories,
            "min_day": self.min_day,
            "max_day": self.max_day,
            "counts": self.counts.tolist(),
        }
        if self.kind == "frequency":
            doc["window"] = self.window.value
        else:
            doc["target"] = self.target
            doc["smoothing"] = self.smoothing
            doc["target_sums"] = self.target_sums.tolist()
            doc["day_rows"] = self.day_rows.tolist()
            doc["day_positives"] = self.day_positives.tolist()
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "EncoderState":
        kind = doc["kind"]
        return cls(
            kind=kind,
            feature=doc["feature"],
            n_categories=int(doc["n_categories"]),
            min_day=int(doc["min_day"]),
            max_day=int(doc["max_day"]),
            counts=np.asarray(doc["counts"], dtype=np.int64),
            window=FreqWindow(doc["window"]) if kind == "frequency" else None,
            target=doc.get("target"),
            smoothing=float(doc.get("smoothing", 1.0)),
            target_sums=(
                np.asarray(doc["target_sums"], dtype=np.int64)
                if kind == "target" else None
            ),
            day_rows=(
                np.asarray(doc["day_rows"], dtype=np.int64)
                if kind == "target" else None
            ),
            day_positives=(
                np.asarray(doc["day_positives"], dtype=np.int64)
                if kind == "target" else None
            ),
        )


def _per_day_matrices(
    table: Table, feature: str, label: np.ndarray | None
) -> tuple[int, int, np.ndarray, np.ndarray | None, np.ndarray, np.ndarray | None]:
    role = table.schema.role(feature)
    if role is not ColumnRole.CATEGORICAL:
        raise EncoderError(f"feature {feature!r} is not categorical")
    days = table.day_values
    codes = table.col(feature)
    n_categories = len(table.dictionary(feature))
    min_day = int(days.min())
    max_day = int(days.max())
    n_days = max_day - min_day + 1
    day_idx = (days - min_day).astype(np.int64)
    flat = day_idx * n_categories + codes
    size = n_days * n_categories
    counts = np.bincount(flat, minlength=size).reshape(n_days, n_categories)
    day_rows = np.bincount(day_idx, minlength=n_days)
    if label is None:
        return min_day, max_day, counts.astype(np.int64), None, day_rows, None
    tsums = np.bincount(flat, weights=label.astype(np.float64), minlength=size)
    tsums = tsums.reshape(n_days, n_categories).astype(np.int64)
    day_pos = np.bincount(day_idx, weights=label.astype(np.float64), minlength=n_days)
    return min_day, max_day, counts.astype(np.int64), tsums, day_rows, day_pos.astype(np.int64)


def fit_frequency(table: Table, feature: str, window: FreqWindow) -> EncoderState:
    """Build per-day category counts; days absent from data count zero."""
    min_day, max_day, counts, _, _, _ = _per_day_matrices(table, feature, None)
    return EncoderState(
        kind="frequency",
        feature=feature,
        n_categories=counts.shape[1],
        min_day=min_day,
        max_day=max_day,
        counts=counts,
        window=window,
    )


def _resolve_target_column(table: Table, target: str) -> str:
    if target == "click":
        name = table.schema.click_column
    elif target == "install":
        name = table.schema.install_column
    else:
        raise EncoderError(f"unknown target {target!r}; use one of {_TARGETS}")
    if name is None:
        raise EncoderError(f"table has no {target} label column")
    return name


def fit_target(table: Table, feature: str, target: str, a: float = 1.0) -> EncoderState:
    """Fit the ordered target encoder for one label ("click" or "install")."""
    if a <= 0:
        raise EncoderError("smoothing a must be positive")
    label_col = _resolve_target_column(table, target)
    label = table.col(label_col)
    min_day, max_day, counts, tsums, day_rows, day_pos = _per_day_matrices(
        table, feature, label
    )
    return EncoderState(
        kind="target",
        feature=feature,
        n_categories=counts.shape[1],
        min_day=min_day,
        max_day=max_day,
        counts=counts,
        target=target,
        smoothing=a,
        target_sums=tsums,
        day_rows=day_rows,
        day_positives=day_pos,
    )


def _cum_before(matrix: np.ndarray) -> np.ndarray:
    """cum[i] = column sums over rows < i; shape (n_days + 1, C)."""
    out = np.zeros((matrix.shape[0] + 1,) + matrix.shape[1:], dtype=np.float64)
    np.cumsum(matrix, axis=0, out=out[1:])
    return out


def _window_counts(state: EncoderState, day: int) -> np.ndarray:
    """Per-category occurrence counts for the state's window at one day.

    Days past the fitted range are clamped to ``max_day + 1`` so late rows
    are encoded from statistics accumulated through the last fitted day.
    """
    cum = _cum_before(state.counts)
    n_days = state.counts.shape[0]

    def idx(d: int) -> int:
        return min(max(d - state.min_day, 0), n_days)

    e = min(day, state.max_day + 1)
    hi = idx(e)
    if state.window is FreqWindow.PREV_DAY:
        lo = idx(e - 1)
    elif state.window is FreqWindow.PREV_WEEK:
        lo = idx(e - 7)
    else:
        lo = 0
    return cum[hi] - cum[lo]


def _target_encoding_for_day(state: EncoderState, day: int) -> tuple[np.ndarray, float]:
    """Per-category encodings plus the unseen-category fallback for one day."""
    cum_counts = _cum_before(state.counts)
    cum_tsums = _cum_before(state.target_sums)
    cum_rows = np.concatenate(([0], np.cumsum(state.day_rows)))
    cum_pos = np.concatenate(([0], np.cumsum(state.day_positives)))
    n_days = state.counts.shape[0]
    e = min(day, state.max_day + 1)
    hi = min(max(e - state.min_day, 0), n_days)
    if cum_rows[hi] == 0:
        return np.full(state.n_categories, 0.5), 0.5
    prior = cum_pos[hi] / cum_rows[hi]
    a = state.smoothing
    return (cum_tsums[hi] + a * prior) / (cum_counts[hi] + a), float(prior)


def transform(state: EncoderState, table: Table) -> np.ndarray:
    """Encode the table's feature column day by day from the fitted state.

    Unseen categories follow the zero-count / prior-fallback conventions;
    rows at days past the fitted range use all fitted history.
    """
    if table.n_rows == 0:
        return np.empty(0, dtype=np.float64)
    codes = table.col(state.feature)
    days = table.day_values
    out = np.empty(table.n_rows, dtype=np.float64)
    for day in np.unique(days):
        sel = days == day
        if state.kind == "frequency":
            lookup = _window_counts(state, int(day))
            fallback = 0.0
        else:
            lookup, fallback = _target_encoding_for_day(state, int(day))
        row_codes = codes[sel]
        # codes beyond the fitted dictionary behave as unseen categories
        safe = np.minimum(row_codes, state.n_categories - 1)
        vals = lookup[safe]
        oob = row_codes >= state.n_categories
        if oob.any():
            vals = np.where(oob, fallback, vals)
        out[sel] = vals
    return out


def apply_encoders(states: list[EncoderState], table: Table) -> Table:
    """Append one continuous column per fitted encoder state."""
    new_cols = [
        (state.column_name, ColumnRole.CONTINUOUS, transform(state, table))
        for state in states
    ]
    return table.append_columns(new_cols)


def save_states(states: list[EncoderState], path) -> None:
    doc = {"encoders": [s.to_json_dict() for s in states]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_states(path) -> list[EncoderState]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return [EncoderState.from_json_dict(d) for d in doc["encoders"]]
