"""Columnar dataset core: schema, typed column storage, CSV ingestion,
binary persistence, and day-based temporal splitting.

Tables are immutable after construction. Categorical columns are stored as
int32 codes plus a per-column dictionary whose code 0 is always the reserved
missing token ``__MISSING__``; continuous and binary columns are float64 with
NaN for missing; labels are uint8 {0,1} with missing disallowed; the day
column is int32.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

MISSING_TOKEN = "__MISSING__"

#: magic bytes of the binary table cache format
BINARY_MAGIC = b"RLT1"
BINARY_VERSION = 1


class TabularError(ValueError):
    """Raised for malformed schemas, files, or split plans."""


class ColumnRole(Enum):
    ROW_ID = "row_id"
    DAY = "day"
    CATEGORICAL = "categorical"
    CONTINUOUS = "continuous"
    BINARY = "binary"
    LABEL_CLICK = "label_click"
    LABEL_INSTALL = "label_install"


#: roles that are model-feature candidates (everything except ids, day, labels)
FEATURE_ROLES = frozenset(
    {ColumnRole.CATEGORICAL, ColumnRole.CONTINUOUS, ColumnRole.BINARY}
)

_UNIQUE_ROLES = (
    ColumnRole.ROW_ID,
    ColumnRole.DAY,
    ColumnRole.LABEL_CLICK,
    ColumnRole.LABEL_INSTALL,
)


@dataclass(frozen=True)
class Schema:
    """Ordered column layout of a delimited file.

    ``columns`` is the on-disk column order and is preserved through
    persistence round-trips.  ``delimiter`` defaults to tab; ``has_header``
    skips one leading line on ingest.
    """

    columns: tuple[tuple[str, ColumnRole], ...]
    delimiter: str = "\t"
    has_header: bool = False

    def __post_init__(self) -> None:
        names = [name for name, _ in self.columns]
        if len(set(names)) != len(names):
            raise TabularError("schema column names must be unique")
        if len(self.delimiter) != 1:
            raise TabularError("delimiter must be a single character")
        for role in _UNIQUE_ROLES:
            if sum(1 for _, r in self.columns if r is role) > 1:
                raise TabularError(f"schema may declare at most one {role.value} column")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.columns)

    def role(self, name: str) -> ColumnRole:
        for col, role in self.columns:
            if col == name:
                return role
        raise KeyError(name)

    def _single(self, role: ColumnRole) -> str | None:
        for name, r in self.columns:
            if r is role:
                return name
        return None

    @property
    def day_column(self) -> str | None:
        return self._single(ColumnRole.DAY)

    @property
    def row_id_column(self) -> str | None:
        return self._single(ColumnRole.ROW_ID)

    @property
    def click_column(self) -> str | None:
        return self._single(ColumnRole.LABEL_CLICK)

    @property
    def install_column(self) -> str | None:
        return self._single(ColumnRole.LABEL_INSTALL)

    def feature_columns(self) -> tuple[str, ...]:
        return tuple(name for name, r in self.columns if r in FEATURE_ROLES)

    def require_day(self) -> str:
        name = self.day_column
        if name is None:
            raise TabularError("schema has no day column")
        return name

    def require_install(self) -> str:
        name = self.install_column
        if name is None:
            raise TabularError("schema has no install label column")
        return name

    def to_json(self) -> dict:
        return {
            "delimiter": self.delimiter,
            "has_header": self.has_header,
            "columns": {name: role.value for name, role in self.columns},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Schema":
        """Build a schema from a JSON-compatible mapping.

        Accepts either ``{"columns": {name: role, ...}, "delimiter": ...}``
        or a bare ``{name: role, ...}`` mapping (tab-delimited, no header).
        """
        if "columns" in doc:
            cols = doc["columns"]
            delimiter = doc.get("delimiter", "\t")
            has_header = bool(doc.get("has_header", False))
        else:
            cols, delimiter, has_header = doc, "\t", False
        try:
            columns = tuple((name, ColumnRole(role)) for name, role in cols.items())
        except ValueError as exc:
            raise TabularError(f"unknown column role: {exc}") from None
        return cls(columns=columns, delimiter=delimiter, has_header=has_header)

    def drop(self, names: set[str]) -> "Schema":
        return Schema(
            columns=tuple((n, r) for n, r in self.columns if n not in names),
            delimiter=self.delimiter,
            has_header=self.has_header,
        )


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


_ROLE_DTYPES = {
    ColumnRole.CATEGORICAL: np.int32,
    ColumnRole.CONTINUOUS: np.float64,
    ColumnRole.BINARY: np.float64,
    ColumnRole.DAY: np.int32,
    ColumnRole.LABEL_CLICK: np.uint8,
    ColumnRole.LABEL_INSTALL: np.uint8,
}


class Table:
    """Immutable column-major dataset with typed columns.

    Construct through :meth:`from_columns`, :func:`ingest_csv`, or
    :func:`load_binary`; all column arrays are frozen (non-writeable) and may
    be shared between derived tables.
    """

    __slots__ = ("schema", "n_rows", "_columns", "_dicts")

    def __init__(
        self,
        schema: Schema,
        n_rows: int,
        columns: dict[str, np.ndarray],
        dicts: dict[str, tuple[str, ...]],
    ):
        self.schema = schema
        self.n_rows = n_rows
        self._columns = columns
        self._dicts = dicts

    @classmethod
    def from_columns(
        cls,
        schema: Schema,
        columns: dict[str, np.ndarray | list],
        dicts: dict[str, tuple[str, ...] | list[str]] | None = None,
    ) -> "Table":
        """Validate, normalize dtypes, and freeze the given columns.

        Continuous/binary NaNs are rewritten to the canonical float64 NaN so
        that binary persistence round-trips bit-exactly.
        """
        dicts = {k: tuple(v) for k, v in (dicts or {}).items()}
        if set(columns) != set(schema.names):
            raise TabularError("columns do not match schema names")
        n_rows = None
        out: dict[str, np.ndarray] = {}
        for name, role in schema.columns:
            raw = columns[name]
            if role is ColumnRole.ROW_ID:
                arr = np.asarray(raw, dtype=np.str_)
            else:
                arr = np.asarray(raw, dtype=_ROLE_DTYPES[role])
            if arr.ndim != 1:
                raise TabularError(f"column {name!r} must be one-dimensional")
            if n_rows is None:
                n_rows = len(arr)
            elif len(arr) != n_rows:
                raise TabularError(f"column {name!r} length mismatch")
            if role in (ColumnRole.CONTINUOUS, ColumnRole.BINARY):
                nan_mask = np.isnan(arr)
                if nan_mask.any():
                    arr = arr.copy()
                    arr[nan_mask] = np.nan  # canonical NaN bit pattern
            if role is ColumnRole.BINARY:
                finite = arr[~np.isnan(arr)]
                if finite.size and not np.isin(finite, (0.0, 1.0)).all():
                    raise TabularError(f"binary column {name!r} has values outside {{0,1}}")
            if role in (ColumnRole.LABEL_CLICK, ColumnRole.LABEL_INSTALL):
                if arr.size and arr.max() > 1:
                    raise TabularError(f"label column {name!r} has values outside {{0,1}}")
            if role is ColumnRole.DAY and arr.size and arr.min() < 0:
                raise TabularError("day values must be non-negative")
            if role is ColumnRole.CATEGORICAL:
                if name not in dicts:
                    raise TabularError(f"categorical column {name!r} needs a dictionary")
                d = dicts[name]
                if not d or d[0] != MISSING_TOKEN:
                    raise TabularError(f"dictionary for {name!r} must start with {MISSING_TOKEN!r}")
                if arr.size and (arr.min() < 0 or arr.max() >= len(d)):
                    raise TabularError(f"categorical codes for {name!r} out of dictionary range")
            out[name] = _freeze(arr)
        return cls(schema, n_rows or 0, out, dicts)

    def col(self, name: str) -> np.ndarray:
        return self._columns[name]

    def dictionary(self, name: str) -> tuple[str, ...]:
        return self._dicts[name]

    @property
    def day_values(self) -> np.ndarray:
        return self._columns[self.schema.require_day()]

    def take(self, indices: np.ndarray) -> "Table":
        """Row subset in the given index order (shares nothing, copies rows)."""
        cols = {name: _freeze(self._columns[name][indices]) for name in self.schema.names}
        return Table(self.schema, len(indices), cols, dict(self._dicts))

    def drop_columns(self, names: set[str]) -> "Table":
        keep_schema = self.schema.drop(names)
        cols = {n: self._columns[n] for n in keep_schema.names}
        dicts = {n: d for n, d in self._dicts.items() if n not in names}
        return Table(keep_schema, self.n_rows, cols, dicts)

    def replace_column(
        self,
        name: str,
        role: ColumnRole,
        values: np.ndarray,
        dictionary: tuple[str, ...] | None = None,
    ) -> "Table":
        """New table with one column's role and values swapped in place."""
        if len(values) != self.n_rows:
            raise TabularError(f"replacement column {name!r} length mismatch")
        columns = tuple(
            (n, role if n == name else r) for n, r in self.schema.columns
        )
        schema = Schema(columns, self.schema.delimiter, self.schema.has_header)
        cols = dict(self._columns)
        dicts = {k: v for k, v in self._dicts.items() if k != name}
        if dictionary is not None:
            dicts[name] = tuple(dictionary)
        new_cols = {name: values}
        new_dicts = {name: dicts[name]} if name in dicts else {}
        tmp = Table.from_columns(
            Schema(((name, role),), self.schema.delimiter),
            new_cols,
            new_dicts,
        )
        cols[name] = tmp.col(name)
        return Table(schema, self.n_rows, cols, dicts)

    def append_columns(
        self, new: list[tuple[str, ColumnRole, np.ndarray]]
    ) -> "Table":
        """New table with extra (non-categorical) columns appended."""
        columns = tuple(self.schema.columns) + tuple((n, r) for n, r, _ in new)
        schema = Schema(columns, self.schema.delimiter, self.schema.has_header)
        cols = dict(self._columns)
        for n, r, arr in new:
            if r is ColumnRole.CATEGORICAL:
                raise TabularError("append_columns does not build dictionaries")
            a = np.asarray(arr, dtype=_ROLE_DTYPES[r])
            nan_mask = np.isnan(a) if a.dtype == np.float64 else None
            if nan_mask is not None and nan_mask.any():
                a = a.copy()
                a[nan_mask] = np.nan
            cols[n] = _freeze(a)
        return Table(schema, self.n_rows, cols, dict(self._dicts))

    def equals(self, other: "Table") -> bool:
        """Structural equality: schema, dictionaries, and bit-exact columns."""
        if self.schema != other.schema or self.n_rows != other.n_rows:
            return False
        if self._dicts != other._dicts:
            return False
        for name, role in self.schema.columns:
            a, b = self._columns[name], other._columns[name]
            if a.dtype != b.dtype:
                return False
            if a.dtype == np.float64:
                if a.tobytes() != b.tobytes():
                    return False
            elif not np.array_equal(a, b):
                return False
        return True


@dataclass(frozen=True)
class SplitPlan:
    """Temporal split: train on a set of days, validate on one later day,
    optionally hold out a single test day after that."""

    train_days: frozenset[int]
    valid_day: int
    test_day: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "train_days", frozenset(self.train_days))
        if self.valid_day in self.train_days:
            raise TabularError("valid_day must not be a train day")
        if any(d >= self.valid_day for d in self.train_days):
            raise TabularError("all train days must precede valid_day")
        if self.test_day is not None and self.test_day <= self.valid_day:
            raise TabularError("test_day must come after valid_day")


@dataclass
class SplitResult:
    train: Table
    valid: Table
    test: Table  # zero rows when the plan has no test day


def split(table: Table, plan: SplitPlan) -> SplitResult:
    """Partition rows by day per the plan, preserving row order within parts.

    Rows whose day is not covered by the plan are excluded.  Raises when the
    validation day selects zero rows (validation would be empty).
    """
    days = table.day_values
    train_mask = np.isin(days, sorted(plan.train_days))
    valid_mask = days == plan.valid_day
    if not valid_mask.any():
        raise TabularError(f"valid_day {plan.valid_day} selects zero rows")
    if plan.test_day is not None:
        test_mask = days == plan.test_day
    else:
        test_mask = np.zeros(table.n_rows, dtype=bool)
    idx = np.arange(table.n_rows)
    return SplitResult(
        train=table.take(idx[train_mask]),
        valid=table.take(idx[valid_mask]),
        test=table.take(idx[test_mask]),
    )


# ---------------------------------------------------------------------------
# CSV ingestion


class _DictBuilder:
    """First-occurrence-order dictionary with the reserved missing code 0."""

    def __init__(self) -> None:
        self.index: dict[str, int] = {MISSING_TOKEN: 0}
        self.tokens: list[str] = [MISSING_TOKEN]

    def code(self, token: str) -> int:
        if token == "":
            return 0
        c = self.index.get(token)
        if c is None:
            c = len(self.tokens)
            self.index[token] = c
            self.tokens.append(token)
        return c


def _parse_file(
    path: str | Path,
    schema: Schema,
    dict_builders: dict[str, _DictBuilder],
) -> Table:
    path = Path(path)
    names = schema.names
    roles = [role for _, role in schema.columns]
    n_cols = len(names)
    raw: list[list] = [[] for _ in range(n_cols)]

    with open(path, "r", encoding="utf-8", newline="") as fh:
        line_no = 0
        if schema.has_header:
            fh.readline()
            line_no = 1
        for line in fh:
            line_no += 1
            fields = line.rstrip("\r\n").split(schema.delimiter)
            if len(fields) != n_cols:
                raise TabularError(
                    f"{path.name}: line {line_no}: expected {n_cols} fields, got {len(fields)}"
                )
            for i, token in enumerate(fields):
                role = roles[i]
                if role is ColumnRole.ROW_ID:
                    raw[i].append(token)
                elif role is ColumnRole.CATEGORICAL:
                    raw[i].append(dict_builders[names[i]].code(token))
                elif role in (ColumnRole.CONTINUOUS, ColumnRole.BINARY):
                    if token == "" or token == "NaN":
                        raw[i].append(np.nan)
                    else:
                        try:
                            raw[i].append(float(token))
                        except ValueError:
                            raise TabularError(
                                f"{path.name}: line {line_no}: non-numeric value "
                                f"{token!r} in column {names[i]!r}"
                            ) from None
                elif role is ColumnRole.DAY:
                    try:
                        raw[i].append(int(token))
                    except ValueError:
                        raise TabularError(
                            f"{path.name}: line {line_no}: non-numeric value "
                            f"{token!r} in day column {names[i]!r}"
                        ) from None
                else:  # labels
                    if token == "":
                        raise TabularError(
                            f"{path.name}: line {line_no}: missing label value "
                            f"in column {names[i]!r}"
                        )
                    try:
                        value = int(float(token))
                    except ValueError:
                        raise TabularError(
                            f"{path.name}: line {line_no}: non-numeric value "
                            f"{token!r} in label column {names[i]!r}"
                        ) from None
                    if value not in (0, 1):
                        raise TabularError(
                            f"{path.name}: line {line_no}: label value {token!r} "
                            f"outside {{0,1}} in column {names[i]!r}"
                        )
                    raw[i].append(value)

    columns = {name: raw[i] for i, name in enumerate(names)}
    dicts = {name: tuple(dict_builders[name].tokens) for name, role in schema.columns
             if role is ColumnRole.CATEGORICAL}
    return Table.from_columns(schema, columns, dicts)


def ingest_csv(path: str | Path, schema: Schema) -> Table:
    """Parse one delimited file into a Table.

    Dictionaries are built in first-occurrence order; empty continuous fields
    and the literal token ``NaN`` become missing.  Malformed rows raise with
    the 1-based line number.
    """
    builders = {name: _DictBuilder() for name, role in schema.columns
                if role is ColumnRole.CATEGORICAL}
    return _parse_file(path, schema, builders)


def ingest_csv_group(paths: list[str | Path], schema: Schema) -> list[Table]:
    """Parse several files that share categorical dictionaries.

    Dictionaries are built over the union of all files (in path order, rows in
    file order) so codes agree across train/test; every returned table carries
    the same final dictionaries.
    """
    if not paths:
        raise TabularError("ingest_csv_group needs at least one path")
    builders = {name: _DictBuilder() for name, role in schema.columns
                if role is ColumnRole.CATEGORICAL}
    tables = [_parse_file(p, schema, builders) for p in paths]
    # earlier tables saw a prefix of the final dictionary; re-issue the full one
    dicts = {name: tuple(b.tokens) for name, b in builders.items()}
    return [Table(t.schema, t.n_rows, t._columns, dict(dicts)) for t in tables]


# ---------------------------------------------------------------------------
# Binary persistence ("RLT1": magic, little-endian, length-prefixed blocks)


def _pack_strings(values) -> bytes:
    blobs = [s.encode("utf-8") for s in values]
    offsets = np.zeros(len(blobs) + 1, dtype="<u8")
    np.cumsum([len(b) for b in blobs], out=offsets[1:])
    return (
        struct.pack("<Q", len(blobs))
        + offsets.tobytes()
        + b"".join(blobs)
    )


def _unpack_strings(buf: bytes) -> list[str]:
    (count,) = struct.unpack_from("<Q", buf, 0)
    offsets = np.frombuffer(buf, dtype="<u8", count=count + 1, offset=8)
    base = 8 + 8 * (count + 1)
    return [
        buf[base + offsets[i]: base + offsets[i + 1]].decode("utf-8")
        for i in range(count)
    ]


_ROLE_WIRE_DTYPES = {
    ColumnRole.CATEGORICAL: "<i4",
    ColumnRole.CONTINUOUS: "<f8",
    ColumnRole.BINARY: "<f8",
    ColumnRole.DAY: "<i4",
    ColumnRole.LABEL_CLICK: "u1",
    ColumnRole.LABEL_INSTALL: "u1",
}


def save_binary(table: Table, path: str | Path) -> None:
    """Write the table to the versioned little-endian cache format."""
    header = {
        "version": BINARY_VERSION,
        "schema": table.schema.to_json(),
        "n_rows": table.n_rows,
    }
    # no sort_keys: the schema's column mapping order is semantic
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<I", BINARY_VERSION))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for name, role in table.schema.columns:
            arr = table.col(name)
            if role is ColumnRole.ROW_ID:
                payload = _pack_strings(arr.tolist())
            else:
                payload = arr.astype(_ROLE_WIRE_DTYPES[role]).tobytes()
                if role is ColumnRole.CATEGORICAL:
                    payload += _pack_strings(table.dictionary(name))
            fh.write(struct.pack("<Q", len(payload)))
            fh.write(payload)


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise TabularError(f"truncated table file while reading {what}")
    return buf


def load_binary(path: str | Path) -> Table:
    """Read a table written by :func:`save_binary`; round-trip is bit-exact."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != BINARY_MAGIC:
            raise TabularError(
                f"not a {BINARY_MAGIC.decode()} table file (magic {magic!r})"
            )
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != BINARY_VERSION:
            raise TabularError(f"unsupported table format version {version}")
        (hlen,) = struct.unpack("<Q", _read_exact(fh, 8, "header length"))
        header = json.loads(_read_exact(fh, hlen, "header"))
        schema = Schema.from_json(header["schema"])
        n_rows = int(header["n_rows"])

        columns: dict[str, np.ndarray] = {}
        dicts: dict[str, tuple[str, ...]] = {}
        for name, role in schema.columns:
            (plen,) = struct.unpack("<Q", _read_exact(fh, 8, f"column {name!r}"))
            payload = _read_exact(fh, plen, f"column {name!r}")
            if role is ColumnRole.ROW_ID:
                columns[name] = np.asarray(_unpack_strings(payload), dtype=np.str_)
            else:
                wire = np.dtype(_ROLE_WIRE_DTYPES[role])
                arr_bytes = n_rows * wire.itemsize
                arr = np.frombuffer(payload[:arr_bytes], dtype=wire).astype(
                    _ROLE_DTYPES[role]
                )
                columns[name] = arr
                if role is ColumnRole.CATEGORICAL:
                    dicts[name] = tuple(_unpack_strings(payload[arr_bytes:]))
    # bypass from_columns NaN rewrite: bytes came from a canonicalized table
    out: dict[str, np.ndarray] = {}
    for name, role in schema.columns:
        out[name] = _freeze(columns[name])
    return Table(schema, n_rows, out, dicts)
