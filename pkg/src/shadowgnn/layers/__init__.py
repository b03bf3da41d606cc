"""Neural layers: R-GCN, transformer / relation-aware transformer, graph projection."""
from .attention import RATLayer, TransformerLayer
from .projection import EncoderState, LinkingPrior, ProjectionLayer
from .rgcn import RGCN, graph_adjacency, relation_adjacency

__all__ = [name for name in dir() if not name.startswith("_")]
