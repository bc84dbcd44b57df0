"""Fairness pre-processing (reweighing, learned fair representations,
optimized pre-processing), classifiers, ensembles and an experiment grid."""

__version__ = "0.1.0"
