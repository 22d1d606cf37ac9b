"""Outlier-detection-enhanced active learning for ocean data quality assessment.

The package covers the full workflow: ingesting or synthesizing Argo-style
observation records, scoring the pool with outlier detectors to build a
compact initial set, running uncertainty-sampling active learning cycles
against a simulated or human oracle, and evaluating annotation-cost savings.
"""

__version__ = "0.1.0"

from .kernels import BACKEND as kernel_backend  # noqa: F401
