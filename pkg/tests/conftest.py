import numpy as np
import pytest

from resplite.tabular import ColumnRole, Schema, Table


@pytest.fixture
def small_schema():
    return Schema(
        (
            ("id", ColumnRole.ROW_ID),
            ("f1", ColumnRole.DAY),
            ("c1", ColumnRole.CATEGORICAL),
            ("x1", ColumnRole.CONTINUOUS),
            ("y", ColumnRole.LABEL_INSTALL),
        )
    )


def make_table(days, x, y, clicks=None, extra_cont=None):
    """Quick table builder: one continuous feature plus labels."""
    days = np.asarray(days)
    columns = {
        "day": days,
        "x0": np.asarray(x, dtype=np.float64),
        "y": np.asarray(y),
    }
    schema_cols = [("day", ColumnRole.DAY), ("x0", ColumnRole.CONTINUOUS)]
    if extra_cont is not None:
        for name, values in extra_cont.items():
            schema_cols.append((name, ColumnRole.CONTINUOUS))
            columns[name] = np.asarray(values, dtype=np.float64)
    if clicks is not None:
        schema_cols.append(("clk", ColumnRole.LABEL_CLICK))
        columns["clk"] = np.asarray(clicks)
    schema_cols.append(("y", ColumnRole.LABEL_INSTALL))
    return Table.from_columns(Schema(tuple(schema_cols)), columns)


def make_cat_table(days, codes, dictionary, y, clicks=None):
    """Table with one categorical feature, day, and labels."""
    columns = {
        "day": np.asarray(days),
        "cat": np.asarray(codes, dtype=np.int32),
        "y": np.asarray(y),
    }
    schema_cols = [("day", ColumnRole.DAY), ("cat", ColumnRole.CATEGORICAL)]
    if clicks is not None:
        schema_cols.append(("clk", ColumnRole.LABEL_CLICK))
        columns["clk"] = np.asarray(clicks)
    schema_cols.append(("y", ColumnRole.LABEL_INSTALL))
    return Table.from_columns(
        Schema(tuple(schema_cols)), columns, {"cat": tuple(dictionary)}
    )
