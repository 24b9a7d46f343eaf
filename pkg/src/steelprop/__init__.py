"""steelprop: steel alloy property regression workbench.

Predicts hardness, tensile strength, yield strength and elongation from
chemical composition and processing route. Pipeline: range-grid data
augmentation, four model families (polynomial ridge, one-hidden-layer MLP,
epsilon-SVR, CART regression tree) evaluated on shared 10-fold splits and
compared with a Friedman test plus Bonferroni-corrected pairwise decisions.
"""

from ._accel import BACKEND, USE_NUMBA

__version__ = "0.1.0"

__all__ = ["BACKEND", "USE_NUMBA", "__version__"]
