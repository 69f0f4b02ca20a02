"""Ripple Walk Training for graph convolutional networks."""
from .graph import (
    DatasetError,
    Graph,
    NormalizedAdjacency,
    SplitMasks,
    Subgraph,
    generate_sbm,
    induced_subgraph,
    load_dataset,
    load_dataset_dir,
    normalize_adjacency,
    save_dataset,
)
from .kernels import BACKEND

__version__ = "0.1.0"
