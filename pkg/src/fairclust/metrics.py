"""Clustering quality and fairness measures."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment

from fairclust.graph import ClusterLabels, Graph, GroupAssignment


def _labels(x) -> np.ndarray:
    if isinstance(x, (ClusterLabels, GroupAssignment)):
        return x.labels
    return np.asarray(x, dtype=np.int64)


def _ratio_min_max(counts: np.ndarray) -> float:
    hi = counts.max()
    if hi == 0:
        return 0.0
    return float(counts.min() / hi)


def balance_of_cluster(cluster_members, groups) -> float:
    """min over distinct group pairs of count ratios, i.e. smallest / largest count.

    A group missing from the cluster (or an empty cluster) gives 0.
    """
    g = _labels(groups)
    m = int(g.max()) + 1
    if m < 2:
        raise ValueError("balance needs at least two sensitive groups")
    members = np.asarray(cluster_members, dtype=np.int64)
    counts = np.bincount(g[members], minlength=m)
    return _ratio_min_max(counts)


def contingency(labels, groups, k: int | None = None) -> np.ndarray:
    """k x m table of group counts per cluster."""
    c = _labels(labels)
    g = _labels(groups)
    if c.size != g.size:
        raise ValueError(f"length mismatch: {c.size} labels vs {g.size} groups")
    if k is None:
        k = labels.k if isinstance(labels, ClusterLabels) else int(c.max()) + 1
    m = int(g.max()) + 1
    table = np.zeros((k, m), dtype=np.int64)
    np.add.at(table, (c, g), 1)
    return table


def average_balance(labels: ClusterLabels, groups) -> tuple[float, np.ndarray]:
    """Mean per-cluster balance over all k clusters; empty clusters count as 0."""
    g = _labels(groups)
    if int(g.max()) + 1 < 2:
        raise ValueError("balance needs at least two sensitive groups")
    table = contingency(labels, g)
    per_cluster = np.array([_ratio_min_max(row) for row in table])
    return float(per_cluster.mean()), per_cluster


def dataset_balance(groups) -> float:
    """Balance of the whole node set: smallest over largest group."""
    g = _labels(groups)
    return balance_of_cluster(np.arange(g.size), g)


def _adjacency(graph):
    if isinstance(graph, Graph):
        return graph.adjacency
    if sp.issparse(graph):
        return graph.tocsr()
    return sp.csr_matrix(np.asarray(graph, dtype=float))


def modularity(graph, labels) -> float:
    """Newman modularity: sum over clusters of e_c/m - (d_c / 2m)^2."""
    A = _adjacency(graph)
    c = _labels(labels)
    if c.size != A.shape[0]:
        raise ValueError(f"length mismatch: {c.size} labels vs {A.shape[0]} nodes")
    two_m = A.sum()
    if two_m == 0:
        raise ValueError("modularity is undefined on an edgeless graph")
    k = int(c.max()) + 1
    onehot = sp.csr_matrix((np.ones(c.size), (np.arange(c.size), c)), shape=(c.size, k))
    # entry (a, a) counts intra-cluster edges twice
    inner = np.asarray((onehot.T @ A @ onehot).diagonal()).ravel()
    degree = np.asarray(A.sum(axis=1)).ravel()
    vol = np.bincount(c, weights=degree, minlength=k)
    return float(np.sum(inner / two_m - (vol / two_m) ** 2))


def accuracy(labels, truth) -> float:
    """Fraction of nodes correct under the best one-to-one cluster matching."""
    a = _labels(labels)
    t = _labels(truth)
    if a.size != t.size:
        raise ValueError(f"length mismatch: {a.size} vs {t.size}")
    if a.size == 0:
        raise ValueError("empty labelling")
    confusion = np.zeros((int(a.max()) + 1, int(t.max()) + 1), dtype=np.int64)
    np.add.at(confusion, (a, t), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return float(confusion[rows, cols].sum() / a.size)


def rho_fairness(graph, labels: ClusterLabels) -> tuple[float, np.ndarray]:
    """Per-node smallest/largest neighbour count across the k clusters.

    Isolated nodes get NaN in the per-node vector and are left out of the mean.
    """
    A = _adjacency(graph)
    c = _labels(labels)
    k = labels.k if isinstance(labels, ClusterLabels) else int(c.max()) + 1
    n = c.size
    onehot = sp.csr_matrix((np.ones(n), (np.arange(n), c)), shape=(n, k))
    counts = np.asarray((A @ onehot).todense())
    hi = counts.max(axis=1)
    per_node = np.full(n, np.nan)
    has_nbrs = hi > 0
    per_node[has_nbrs] = counts[has_nbrs].min(axis=1) / hi[has_nbrs]
    avg = float(np.mean(per_node[has_nbrs])) if has_nbrs.any() else 0.0
    return avg, per_node


@dataclass
class MetricsReport:
    modularity: float
    avg_balance: float | None
    per_cluster_balance: list[float] | None
    accuracy: float | None
    rho_avg: float
    cluster_sizes: list[int]
    group_by_cluster: list[list[int]]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    CSV_FIELDS = ("Q", "B", "accuracy", "rho")

    def csv_row(self) -> dict:
        return {"Q": self.modularity, "B": self.avg_balance,
                "accuracy": self.accuracy, "rho": self.rho_avg}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerow({k: "" if v is None else repr(v) for k, v in self.csv_row().items()})
        return buf.getvalue()


def compute_report(graph: Graph, labels: ClusterLabels, groups: GroupAssignment,
                   truth: ClusterLabels | None = None) -> MetricsReport:
    if labels.n != graph.n or groups.n != graph.n:
        raise ValueError("graph, labels and groups must cover the same nodes")
    if groups.m >= 2:
        B, per_cluster = average_balance(labels, groups)
        per_cluster = per_cluster.tolist()
    else:
        B, per_cluster = None, None
    table = contingency(labels, groups)
    return MetricsReport(
        modularity=modularity(graph, labels),
        avg_balance=B,
        per_cluster_balance=per_cluster,
        accuracy=None if truth is None else accuracy(labels, truth),
        rho_avg=rho_fairness(graph, labels)[0],
        cluster_sizes=labels.sizes.tolist(),
        group_by_cluster=table.tolist(),
    )
