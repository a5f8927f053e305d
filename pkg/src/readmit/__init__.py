"""Shelter readmission pipeline.

Link raw intake records into labeled client profiles, encode the
predictor set, and evaluate logistic-regression and gradient-boosted
classifiers under a minority-oversampling ratio sweep.
"""

__version__ = "0.1.0"
