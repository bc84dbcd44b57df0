"""Fairness pre-processing transformers: reweighing, learned fair
representations and optimized pre-processing."""

from .lfr import LFRModel, LFRParams, lfr_fit, lfr_objective, lfr_transform
from .optimized import OPDomain, OPModel, OPParams, op_fit, op_transform
from .reweighing import ReweighingModel, reweigh_apply, reweigh_fit

__all__ = [
    "LFRModel", "LFRParams", "OPDomain", "OPModel", "OPParams", "ReweighingModel",
    "lfr_fit", "lfr_objective", "lfr_transform", "op_fit", "op_transform",
    "reweigh_apply", "reweigh_fit",
]
