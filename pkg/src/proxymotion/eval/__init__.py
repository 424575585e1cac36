"""Losses for training and metrics for evaluation."""

from .losses import Estimate, LossReport, LossWeights, Targets, loss_desc, loss_rec
from .metrics import MetricsReport, metric_suite, procrustes

__all__ = ["Estimate", "LossReport", "LossWeights", "MetricsReport", "Targets", "loss_desc", "loss_rec",
           "metric_suite", "procrustes"]
