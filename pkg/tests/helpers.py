"""Small builders shared across test modules."""

import numpy as np

from motionseg.core import GridAdjacency, RgbImage, ScoreMap
from motionseg.energy import EnergyModel


def random_image(rng, height, width):
    return RgbImage(rng.random((height, width, 3)))


def random_scores(rng, height, width, channels):
    raw = rng.random((height, width, channels)) + 0.05
    return ScoreMap(raw / raw.sum(axis=2, keepdims=True))


def random_model(rng, height, width, labels, unary_scale=1.0, pairwise_scale=0.3,
                 nonnegative=False):
    """A random Potts EnergyModel on a small grid.

    With ``nonnegative`` the unaries are uniform in [0, unary_scale], so
    every labeling has nonnegative energy and multiplicative approximation
    bounds are meaningful.
    """
    adjacency = GridAdjacency(width, height)
    if nonnegative:
        unary = unary_scale * rng.random((height * width, len(labels)))
    else:
        unary = unary_scale * rng.standard_normal((height * width, len(labels)))
    pairwise = pairwise_scale * rng.random(adjacency.edge_count)
    return EnergyModel(tuple(labels), unary, pairwise, adjacency)


def random_flow_network(rng, max_nodes=12, max_extra_edges=20):
    """Random terminals and edges for a small flow network."""
    n = int(rng.integers(1, max_nodes + 1))
    terminals = [(float(rng.random() * 4), float(rng.random() * 4))
                 for _ in range(n)]
    edges = []
    if n >= 2:
        for _ in range(int(rng.integers(0, max_extra_edges + 1))):
            i, j = rng.choice(n, size=2, replace=False)
            edges.append((int(i), int(j),
                          float(rng.random() * 3), float(rng.random() * 3)))
    return n, terminals, edges
