"""Deterministic synthetic datasets with a semantically continuous attribute."""

from .citation import generate_citation_graph
from .core import (
    Dataset,
    GraphSequence,
    ImageSequence,
    SplitSpec,
    Triplet,
    assign_splits,
    enumerate_triplets,
    make_triplet,
    split,
)
from .io import DatasetFormatError, load_dataset, save_dataset
from .shapes import generate_image_dataset, render_shape
