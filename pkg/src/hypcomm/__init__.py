"""Hyperbolic community embeddings: Poincaré-ball node embeddings trained
jointly with a Riemannian Gaussian mixture over communities."""

from .classify import GMMClassifier, HLRClassifier, MCCBaseline, NearestBarycenter
from .gaussian import GaussianComponent, ZetaTable, zeta, zeta_table
from .geometry import distance, exp_map, log_map, mobius_add, weighted_barycenter
from .graph import Graph, load_edge_list, load_graph
from .metrics import conductance, nmi, precision_at_n
from .mixture import MixtureModel, em_fit, kmeans_fit
from .trainer import TrainConfig, train

__all__ = [
    "GMMClassifier",
    "GaussianComponent",
    "Graph",
    "HLRClassifier",
    "MCCBaseline",
    "MixtureModel",
    "NearestBarycenter",
    "TrainConfig",
    "ZetaTable",
    "conductance",
    "distance",
    "em_fit",
    "exp_map",
    "kmeans_fit",
    "load_edge_list",
    "load_graph",
    "log_map",
    "mobius_add",
    "nmi",
    "precision_at_n",
    "train",
    "weighted_barycenter",
    "zeta",
    "zeta_table",
]
