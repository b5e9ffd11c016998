"""Stochastic block model benchmarks with planted clusters and sensitive groups."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from fairclust.graph import ClusterLabels, Graph, GroupAssignment


@dataclass(frozen=True)
class SbmSpec:
    n: int
    k: int
    g: int
    p_in: float = 0.25
    p_out: float = 0.02
    seed: int = 0
    # groups laid out in contiguous blocks instead of shuffled
    aligned_groups: bool = False

    def __post_init__(self):
        if self.n < 1 or self.k < 1 or self.g < 1:
            raise ValueError("n, k and g must be positive")
        if self.n % self.k:
            raise ValueError("n must be divisible by k")
        if self.n % self.g:
            raise ValueError("n must be divisible by g")
        if not 0.0 <= self.p_out < self.p_in <= 1.0:
            raise ValueError("probabilities must satisfy 0 <= p_out < p_in <= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def generate(spec: SbmSpec) -> tuple[Graph, ClusterLabels, GroupAssignment]:
    """Sample a graph, its planted block labels and the group labels."""
    edge_seq, group_seq = np.random.SeedSequence(spec.seed).spawn(2)
    rng = np.random.default_rng(edge_seq)
    size = spec.n // spec.k
    truth = np.repeat(np.arange(spec.k), size)

    rows, cols = [], []
    for a in range(spec.k):
        for b in range(a, spec.k):
            p = spec.p_in if a == b else spec.p_out
            hits = rng.random((size, size)) < p
            if a == b:
                hits = np.triu(hits, k=1)
            i, j = np.nonzero(hits)
            rows.append(i + a * size)
            cols.append(j + b * size)
    pairs = np.column_stack([np.concatenate(rows), np.concatenate(cols)])
    graph = Graph.from_edges(spec.n, pairs)

    base = np.repeat(np.arange(spec.g), spec.n // spec.g)
    if spec.aligned_groups:
        groups = base
    else:
        groups = np.random.default_rng(group_seq).permutation(base)
    return graph, ClusterLabels(truth, spec.k), GroupAssignment(groups)
