import numpy as np
import pytest

from resplite.synth import (
    ArithmeticFeature,
    CorrelatedPair,
    LabelModel,
    ShiftedFeature,
    SynthError,
    SynthSpec,
    default_spec,
    generate,
    split_train_test,
    write_csv,
)
from resplite.tabular import ingest_csv_group, load_binary, save_binary


def tiny_spec(**overrides):
    base = dict(
        n_rows_per_day=300,
        days=(45, 50),
        cat_cardinalities=(8,),
        n_cont=3,
        arithmetic=(ArithmeticFeature(index=1, delta=0.0385, max_multiplier=100),),
        label_model=LabelModel(-1.0, -0.3, continuous={0: 1.0}, categorical={0: 0.5}),
        seed=123,
    )
    base.update(overrides)
    return SynthSpec(**base)


class TestValidation:
    def test_out_of_range_arithmetic_index(self):
        with pytest.raises(SynthError, match="out of range"):
            generate(tiny_spec(arithmetic=(ArithmeticFeature(9, 0.1, 5),)))

    def test_out_of_range_shift_index(self):
        with pytest.raises(SynthError, match="out of range"):
            generate(tiny_spec(shifted=(ShiftedFeature(7, 1.0),)))

    def test_bad_cardinality(self):
        with pytest.raises(SynthError, match="cardinalities"):
            generate(tiny_spec(cat_cardinalities=(1,)))


class TestArithmeticPlanting:
    def test_values_are_exact_multiples_of_delta(self):
        table, truth = generate(tiny_spec())
        column = table.col("x1")
        k = truth.multipliers["x1"]
        assert truth.deltas["x1"] == 0.0385
        # value equals k * delta up to the single rounding of the product
        assert np.array_equal(column, k.astype(np.float64) * 0.0385)
        ratio = np.round(np.unique(column) / 0.0385).astype(int)
        assert ratio.min() >= 0 and ratio.max() <= 100

    def test_multipliers_within_range(self):
        _, truth = generate(tiny_spec())
        k = truth.multipliers["x1"]
        assert k.min() >= 0 and k.max() <= 100


class TestShift:
    def test_shift_applies_to_final_day_only(self):
        spec = tiny_spec(shifted=(ShiftedFeature(index=2, magnitude=2.0),))
        table, truth = generate(spec)
        days = table.day_values
        x = table.col("x2")
        final = days == 50
        assert abs(x[final].mean() - 2.0) < 0.2
        assert abs(x[~final].mean()) < 0.1
        assert truth.shifts == {"x2": 2.0}

    def test_no_shift_means_matching_distributions(self):
        table, _ = generate(tiny_spec(n_rows_per_day=2000))
        days = table.day_values
        x = table.col("x0")
        final = days == 50
        # both sides are N(0,1); means agree within a few standard errors
        se = np.sqrt(1 / final.sum() + 1 / (~final).sum())
        assert abs(x[final].mean() - x[~final].mean()) < 4 * se


class TestLabels:
    def test_calibration_within_three_standard_errors(self):
        table, truth = generate(tiny_spec(n_rows_per_day=5000))
        y = table.col("is_installed").astype(float)
        p = truth.install_probs
        se = np.sqrt((p * (1 - p)).sum()) / len(p)
        assert abs(y.mean() - p.mean()) <= 3 * se

    def test_click_rate_exceeds_install_rate(self):
        table, _ = generate(tiny_spec(n_rows_per_day=3000))
        assert table.col("is_clicked").mean() > table.col("is_installed").mean()


class TestDeterminism:
    def test_same_seed_identical_after_persistence(self, tmp_path):
        a, _ = generate(tiny_spec())
        b, _ = generate(tiny_spec())
        pa, pb = tmp_path / "a.rlt", tmp_path / "b.rlt"
        save_binary(a, pa)
        save_binary(b, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_different_seed_differs(self):
        a, _ = generate(tiny_spec())
        b, _ = generate(tiny_spec(seed=124))
        assert not a.equals(b)


class TestCorrelatedPair:
    def test_empirical_correlation_near_loading(self):
        spec = tiny_spec(
            n_rows_per_day=20000,
            correlated=(CorrelatedPair(base_index=0, index=2, loading=0.6),),
        )
        table, _ = generate(spec)
        r = np.corrcoef(table.col("x0"), table.col("x2"))[0, 1]
        assert r == pytest.approx(0.6, abs=0.02)


class TestCsvRoundTrip:
    def test_written_files_reingest_to_identical_tables(self, tmp_path):
        spec = default_spec(seed=3, n_rows_per_day=150)
        table, _ = generate(spec)
        train, test = split_train_test(table)
        write_csv(train, tmp_path / "train.csv")
        write_csv(test, tmp_path / "test.csv")
        again_train, again_test = ingest_csv_group(
            [tmp_path / "train.csv", tmp_path / "test.csv"], table.schema
        )
        assert again_train.equals(train)
        assert again_test.equals(test)

    def test_pseudo_test_day_is_final_day(self):
        table, truth = generate(tiny_spec())
        train, test = split_train_test(table)
        assert truth.test_day == 50
        assert set(test.day_values.tolist()) == {50}
        assert 50 not in set(train.day_values.tolist())

    def test_truth_json_dict_is_serializable(self):
        import json

        _, truth = generate(tiny_spec())
        blob = json.dumps(truth.to_json_dict())
        assert "install_probs" in blob
