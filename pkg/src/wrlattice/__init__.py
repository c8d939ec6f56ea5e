"""Multitype Widom-Rowlinson lattice gases on periodic tori."""

from .lattice import Adjacency, Site, Torus, local_pattern, neighbors
from .model import (
    EMPTY, Color, Configuration, ModelSpec, Orientation, Variant,
    allowed_states, config_admissible, pair_admissible,
)

__version__ = "0.1.0"
