"""Dissimilarity self-organizing maps with exact fast representation schemes."""

__version__ = "0.1.0"

from .core import DsomConfig, Trainer, TrainingResult, train
from .dissimilarity import (
    DissimilarityMatrix,
    PointSet,
    build_from_vectors,
    build_from_words,
    generate_uniform_square,
    integerize,
    levenshtein,
    load_matrix,
    normalized_levenshtein,
    save_matrix,
)
from .topology import KernelSchedule, PriorGraph, hex_grid, rect_grid
