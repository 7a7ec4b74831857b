"""resplite: a lightweight user-response-prediction toolkit.

Adversarial-validation feature filtering, arithmetic-lattice denoising,
windowed frequency and time-aware target encoding, a from-scratch histogram
GBDT, and normalized-cross-entropy evaluation, runnable end-to-end on
synthetic benchmark data.
"""

__version__ = "0.1.0"
