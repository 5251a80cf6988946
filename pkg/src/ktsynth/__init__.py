"""Synthetic gradebook generation and knowledge-tracing evaluation toolkit.

Three statistical generators produce synthetic student learning paths from a
real template dataset; a continuous-grade recurrent model (DKT) and a
two-state HMM model (BKT) are trained on real/synthetic mixtures and scored
with MAE, accuracy and the Matthews correlation coefficient over a shared
test split.
"""

__version__ = "0.1.0"
