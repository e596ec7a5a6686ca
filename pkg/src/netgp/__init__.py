"""Gaussian-process classification, anomaly scoring and survival analysis
with networks as inputs."""

from .classifier import ClassifierConfig, LabeledDataset, fit, predict
from .distances import DistanceMatrix, cross_distances, distance_matrix
from .graph import Graph, GraphError
from .occ import elbow_threshold, occ_scores
from .survival import SurvivalConfig, SurvivalDataset, fit_survival, survival_surface

__version__ = "0.1.0"
