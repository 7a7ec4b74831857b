import hashlib

import numpy as np
import pytest

from resplite.tabular import (
    ColumnRole,
    MISSING_TOKEN,
    Schema,
    SplitPlan,
    Table,
    TabularError,
    ingest_csv,
    ingest_csv_group,
    load_binary,
    save_binary,
    split,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestSchema:
    def test_duplicate_names_rejected(self):
        with pytest.raises(TabularError, match="unique"):
            Schema((("a", ColumnRole.DAY), ("a", ColumnRole.CONTINUOUS)))

    def test_two_day_columns_rejected(self):
        with pytest.raises(TabularError, match="at most one day"):
            Schema((("a", ColumnRole.DAY), ("b", ColumnRole.DAY)))

    def test_json_round_trip_preserves_order(self):
        schema = Schema(
            (
                ("z", ColumnRole.ROW_ID),
                ("a", ColumnRole.DAY),
                ("m", ColumnRole.CONTINUOUS),
                ("y", ColumnRole.LABEL_INSTALL),
            ),
            delimiter=",",
        )
        again = Schema.from_json(schema.to_json())
        assert again == schema
        assert again.names == ("z", "a", "m", "y")

    def test_bare_mapping_accepted(self):
        schema = Schema.from_json({"f1": "day", "x": "continuous"})
        assert schema.delimiter == "\t"
        assert schema.role("f1") is ColumnRole.DAY

    def test_unknown_role_rejected(self):
        with pytest.raises(TabularError, match="unknown column role"):
            Schema.from_json({"f1": "date"})


class TestIngest:
    def test_three_row_file_first_occurrence_dictionary(self, tmp_path, small_schema):
        path = write(
            tmp_path,
            "t.tsv",
            "r1\t45\tbeta\t1.5\t0\n"
            "r2\t45\talpha\t2.5\t1\n"
            "r3\t46\tbeta\t0.5\t0\n",
        )
        table = ingest_csv(path, small_schema)
        assert table.n_rows == 3
        assert table.dictionary("c1") == (MISSING_TOKEN, "beta", "alpha")
        assert table.col("c1").tolist() == [1, 2, 1]
        assert table.col("x1").tolist() == [1.5, 2.5, 0.5]
        assert table.col("id").tolist() == ["r1", "r2", "r3"]

    def test_empty_continuous_field_becomes_missing(self, tmp_path, small_schema):
        path = write(tmp_path, "t.tsv", "r1\t45\ta\t\t0\nr2\t45\ta\tNaN\t1\n")
        table = ingest_csv(path, small_schema)
        assert np.isnan(table.col("x1")).all()

    def test_empty_categorical_field_is_code_zero(self, tmp_path, small_schema):
        path = write(tmp_path, "t.tsv", "r1\t45\t\t1.0\t0\nr2\t45\tq\t2.0\t1\n")
        table = ingest_csv(path, small_schema)
        assert table.col("c1").tolist() == [0, 1]

    def test_field_count_mismatch_names_line(self, tmp_path, small_schema):
        path = write(
            tmp_path, "t.tsv", "r1\t45\ta\t1.0\t0\nr2\t45\ta\t1.0\t0\textra\n"
        )
        with pytest.raises(TabularError, match="line 2"):
            ingest_csv(path, small_schema)

    def test_non_numeric_continuous_names_column_and_line(self, tmp_path, small_schema):
        path = write(tmp_path, "t.tsv", "r1\t45\ta\toops\t0\n")
        with pytest.raises(TabularError, match=r"line 1.*'x1'"):
            ingest_csv(path, small_schema)

    def test_missing_label_errors(self, tmp_path, small_schema):
        path = write(tmp_path, "t.tsv", "r1\t45\ta\t1.0\t\n")
        with pytest.raises(TabularError, match="missing label"):
            ingest_csv(path, small_schema)

    def test_label_outside_01_errors(self, tmp_path, small_schema):
        path = write(tmp_path, "t.tsv", "r1\t45\ta\t1.0\t2\n")
        with pytest.raises(TabularError, match="outside"):
            ingest_csv(path, small_schema)

    def test_dictionary_stability(self, tmp_path, small_schema):
        path = write(
            tmp_path, "t.tsv", "r1\t45\tc\t1.0\t0\nr2\t45\ta\t1.0\t1\nr3\t45\tc\t1.0\t0\n"
        )
        t1 = ingest_csv(path, small_schema)
        t2 = ingest_csv(path, small_schema)
        assert t1.dictionary("c1") == t2.dictionary("c1")
        assert np.array_equal(t1.col("c1"), t2.col("c1"))

    def test_group_ingest_shares_dictionaries(self, tmp_path, small_schema):
        a = write(tmp_path, "a.tsv", "r1\t45\tfoo\t1.0\t0\n")
        b = write(tmp_path, "b.tsv", "r2\t46\tbar\t1.0\t1\nr3\t46\tfoo\t1.0\t0\n")
        ta, tb = ingest_csv_group([a, b], small_schema)
        assert ta.dictionary("c1") == tb.dictionary("c1") == (MISSING_TOKEN, "foo", "bar")
        assert tb.col("c1").tolist() == [2, 1]

    def test_header_row_skipped(self, tmp_path):
        schema = Schema(
            (("f1", ColumnRole.DAY), ("y", ColumnRole.LABEL_INSTALL)),
            has_header=True,
        )
        path = write(tmp_path, "t.tsv", "f1\ty\n45\t1\n")
        table = ingest_csv(path, schema)
        assert table.n_rows == 1

    def test_columns_are_immutable(self, tmp_path, small_schema):
        path = write(tmp_path, "t.tsv", "r1\t45\ta\t1.0\t0\n")
        table = ingest_csv(path, small_schema)
        with pytest.raises(ValueError):
            table.col("x1")[0] = 9.0


class TestSplit:
    def make(self, days):
        n = len(days)
        return Table.from_columns(
            Schema((("day", ColumnRole.DAY), ("y", ColumnRole.LABEL_INSTALL))),
            {"day": np.asarray(days), "y": np.zeros(n, dtype=np.uint8)},
        )

    def test_basic_partition(self):
        table = self.make([64, 65, 66, 64, 66])
        parts = split(table, SplitPlan(frozenset({64, 65}), 66))
        assert parts.train.day_values.tolist() == [64, 65, 64]
        assert parts.valid.day_values.tolist() == [66, 66]
        assert parts.test.n_rows == 0

    def test_absent_valid_day_errors(self):
        table = self.make([64, 65])
        with pytest.raises(TabularError, match="zero rows"):
            split(table, SplitPlan(frozenset({64, 65}), 70))

    def test_plan_invariants(self):
        with pytest.raises(TabularError):
            SplitPlan(frozenset({66}), 66)
        with pytest.raises(TabularError):
            SplitPlan(frozenset({67}), 66)
        with pytest.raises(TabularError):
            SplitPlan(frozenset({60}), 66, test_day=65)

    def test_thousand_rows_against_brute_force(self):
        rng = np.random.Generator(np.random.PCG64(42))
        days = rng.integers(45, 68, size=1000)
        table = self.make(days)
        plan = SplitPlan(frozenset(range(45, 66)), 66, test_day=67)
        parts = split(table, plan)

        # independent oracle: plain row scan
        want_train = [i for i, d in enumerate(days) if 45 <= d <= 65]
        want_valid = [i for i, d in enumerate(days) if d == 66]
        want_test = [i for i, d in enumerate(days) if d == 67]
        assert parts.train.n_rows == len(want_train)
        assert parts.valid.n_rows == len(want_valid)
        assert parts.test.n_rows == len(want_test)
        assert parts.train.day_values.tolist() == [days[i] for i in want_train]
        assert set(parts.train.day_values.tolist()) <= set(range(45, 66))
        assert set(parts.valid.day_values.tolist()) == {66}
        assert set(parts.test.day_values.tolist()) == {67}
        total = parts.train.n_rows + parts.valid.n_rows + parts.test.n_rows
        assert total == np.isin(days, list(range(45, 68))).sum()

    def test_partition_property_uncovered_days_excluded(self):
        rng = np.random.Generator(np.random.PCG64(7))
        for trial in range(5):
            days = rng.integers(0, 10, size=200)
            table = self.make(days)
            plan = SplitPlan(frozenset({1, 2, 3}), 5, test_day=7)
            parts = split(table, plan) if (days == 5).any() else None
            if parts is None:
                continue
            counts = np.zeros(200, dtype=int)
            for part, day_set in (
                (parts.train, {1, 2, 3}),
                (parts.valid, {5}),
                (parts.test, {7}),
            ):
                assert set(part.day_values.tolist()) <= day_set
            covered = np.isin(days, [1, 2, 3, 5, 7])
            total = parts.train.n_rows + parts.valid.n_rows + parts.test.n_rows
            assert total == covered.sum()


class TestBinaryPersistence:
    def test_round_trip_structural_equality(self, tmp_path, small_schema):
        path = write(
            tmp_path, "t.tsv",
            "r1\t45\tbeta\t1.5\t0\nr2\t45\t\t\t1\nr3\t46\tbeta\t-0.5\t0\n",
        )
        table = ingest_csv(path, small_schema)
        dest = tmp_path / "t.rlt"
        save_binary(table, dest)
        again = load_binary(dest)
        assert again.equals(table)

    def test_wrong_magic_errors(self, tmp_path):
        path = tmp_path / "bad.rlt"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(TabularError, match="magic"):
            load_binary(path)

    def test_truncated_file_errors(self, tmp_path, small_schema):
        path = write(tmp_path, "t.tsv", "r1\t45\ta\t1.0\t0\n")
        table = ingest_csv(path, small_schema)
        dest = tmp_path / "t.rlt"
        save_binary(table, dest)
        blob = dest.read_bytes()
        dest.write_bytes(blob[: len(blob) - 10])
        with pytest.raises(TabularError, match="truncated"):
            load_binary(dest)

    def test_large_round_trip_checksums(self, tmp_path):
        rng = np.random.Generator(np.random.PCG64(3))
        n = 100_000
        x = rng.standard_normal(n)
        x[rng.random(n) < 0.05] = np.nan
        codes = rng.integers(1, 50, size=n).astype(np.int32)
        schema = Schema(
            (
                ("id", ColumnRole.ROW_ID),
                ("day", ColumnRole.DAY),
                ("c", ColumnRole.CATEGORICAL),
                ("x", ColumnRole.CONTINUOUS),
                ("y", ColumnRole.LABEL_INSTALL),
            )
        )
        table = Table.from_columns(
            schema,
            {
                "id": [str(i) for i in range(n)],
                "day": rng.integers(45, 68, size=n),
                "c": codes,
                "x": x,
                "y": rng.integers(0, 2, size=n).astype(np.uint8),
            },
            {"c": (MISSING_TOKEN,) + tuple(f"t{i}" for i in range(1, 50))},
        )
        # checksum oracle computed pre-save
        want = {
            name: hashlib.sha256(table.col(name).tobytes()).hexdigest()
            for name in schema.names
        }
        dest = tmp_path / "big.rlt"
        save_binary(table, dest)
        again = load_binary(dest)
        for name in schema.names:
            got = hashlib.sha256(again.col(name).tobytes()).hexdigest()
            assert got == want[name], name

    def test_nan_payloads_are_canonicalized(self):
        weird = np.frombuffer(
            np.uint64(0xFFF8000000000123).tobytes(), dtype=np.float64
        )
        table = Table.from_columns(
            Schema((("x", ColumnRole.CONTINUOUS),)), {"x": weird.copy()}
        )
        canonical = np.array([np.nan]).tobytes()
        assert table.col("x").tobytes() == canonical


class TestColumnOps:
    def test_drop_columns(self, small_schema, tmp_path):
        path = write(tmp_path, "t.tsv", "r1\t45\ta\t1.0\t0\n")
        table = ingest_csv(path, small_schema)
        out = table.drop_columns({"x1"})
        assert out.schema.names == ("id", "f1", "c1", "y")
        assert out.n_rows == 1

    def test_binary_column_values_validated(self):
        schema = Schema((("b", ColumnRole.BINARY),))
        with pytest.raises(TabularError, match="outside"):
            Table.from_columns(schema, {"b": np.array([0.0, 2.0])})
        table = Table.from_columns(schema, {"b": np.array([0.0, 1.0, np.nan])})
        assert table.n_rows == 3
