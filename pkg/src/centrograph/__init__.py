"""Skip-Gram node embeddings with centrality-weighted positive sampling."""

from .graph import Graph, LabeledNodes, load_edge_list

__all__ = ["Graph", "LabeledNodes", "load_edge_list"]
__version__ = "0.1.0"
