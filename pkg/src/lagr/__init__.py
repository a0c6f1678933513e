"""Semantic parsing by labeling aligned multi-layer graphs."""

from .alignment import AlignmentConfig, candidate_alignments, hungarian, infer_alignment, select_map_alignment
from .graphs import NULL, AlignedGraph, Edge, LabelVocab, MRGraph, Node, UnalignedTarget
from .isomorphism import graph_isomorphic
from .kernels import BACKEND
from .model import LagrModel

__version__ = "0.1.0"

__all__ = [
    "AlignmentConfig", "candidate_alignments", "hungarian", "infer_alignment", "select_map_alignment",
    "NULL", "AlignedGraph", "Edge", "LabelVocab", "MRGraph", "Node", "UnalignedTarget",
    "graph_isomorphic", "BACKEND", "LagrModel",
]
