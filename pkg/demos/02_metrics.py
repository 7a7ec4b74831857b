"""The evaluation metrics: log loss, ROC AUC, and normalized cross entropy.

NCE divides the model's average log loss by the log loss of always
predicting the background rate, so 1.0 means "no better than the base
rate" and lower is better.

Run: python demos/02_metrics.py
"""

import numpy as np

from resplite.metrics import EvalBatch, auc, logloss, nce

labels = np.array([1, 1, 0, 0])
preds = np.array([0.9, 0.8, 0.2, 0.1])
batch = EvalBatch(labels, preds)
result = nce(batch)
print("a small confident batch:")
print(f"  logloss = {logloss(batch):.7f}")
print(f"  auc     = {auc(batch):.4f}")
print(f"  nce     = {result.nce:.7f} "
      f"(= {result.mean_logloss:.7f} / {result.background_entropy:.7f})")

rng = np.random.Generator(np.random.PCG64(0))
y = (rng.random(10000) < 0.2).astype(np.uint8)
background = EvalBatch(y, np.full(10000, y.mean()))
print(f"\npredicting the empirical rate for every row: "
      f"nce = {nce(background).nce:.12f} (identity)")

sharp = np.clip(y * 0.7 + 0.1 + rng.normal(0, 0.05, 10000), 0.01, 0.99)
model = EvalBatch(y, sharp)
print(f"an informative model:                        "
      f"nce = {nce(model).nce:.4f} (below 1)")

noise = EvalBatch(y, np.clip(rng.random(10000), 0.01, 0.99))
print(f"uninformative noise predictions:             "
      f"nce = {nce(noise).nce:.4f} (above 1)")
