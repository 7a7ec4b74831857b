"""Generate a synthetic benchmark dataset and inspect its planted
structure: covariate shift on the pseudo-test day, arithmetic lattices, and
a recorded logistic label model.

Run: python demos/01_synthetic_data.py
"""

import numpy as np

from resplite.synth import default_spec, generate, split_train_test

spec = default_spec(seed=42, n_rows_per_day=1000)
table, truth = generate(spec)
print(f"generated {table.n_rows} rows over days "
      f"{table.day_values.min()}..{table.day_values.max()}")
print(f"columns: {', '.join(table.schema.names)}")
print(f"install rate: {table.col('is_installed').mean():.4f} "
      f"(mean true probability {truth.install_probs.mean():.4f})")

train, test = split_train_test(table)
print(f"\ntrain file: {train.n_rows} rows, test file (day {truth.test_day}): "
      f"{test.n_rows} rows")

print("\nplanted covariate shift (x4 moves on the final day only):")
for name, shift in truth.shifts.items():
    col = table.col(name)
    final = table.day_values == truth.test_day
    print(f"  {name}: shift={shift}, train mean={col[~final].mean():+.3f}, "
          f"test mean={col[final].mean():+.3f}")

print("\nplanted arithmetic lattices:")
for name, delta in truth.deltas.items():
    uniques = np.unique(table.col(name))
    print(f"  {name}: delta={delta}, {len(uniques)} unique values, "
          f"first few: {np.round(uniques[:4], 4).tolist()}")

print("\nhigh-cardinality categoricals (dictionary sizes):")
for j, card in enumerate(spec.cat_cardinalities):
    name = f"c{j}"
    print(f"  {name}: nominal cardinality {card}, "
          f"observed {len(table.dictionary(name)) - 1}")
