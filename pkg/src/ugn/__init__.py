"""Graph neural networks with a convolutional decoder over latent outer products."""

from .datasets import generate_sbm, generate_translation_pairs, load_fixture
from .estimators import UGNEdgeClassifier, UGNLinkPredictor, UGNNodeClassifier, UGNTranslator
from .graph import Graph, build_graph
from .supernode import SupernodeFeaturizer, synthesize_features
from .training import Checkpoint, RunConfig, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "Checkpoint", "Graph", "RunConfig", "SupernodeFeaturizer", "UGNEdgeClassifier",
    "UGNLinkPredictor", "UGNNodeClassifier", "UGNTranslator", "build_graph", "evaluate",
    "generate_sbm", "generate_translation_pairs", "load_fixture", "synthesize_features", "train",
]
