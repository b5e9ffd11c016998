"""Graph and group-label data model, text formats and structural validation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class GraphFormatError(ValueError):
    """Malformed edge-list, group or membership input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SelfLoopError(GraphFormatError):
    pass


class LengthMismatchError(GraphFormatError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected simple unweighted graph.

    ``adjacency`` is a symmetric CSR matrix of 0/1 floats with an empty
    diagonal. Use :meth:`from_edges` rather than the constructor.
    """

    n: int
    adjacency: sp.csr_matrix = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if len(pairs) and (pairs.min() < 0 or pairs.max() >= n):
            raise GraphFormatError(f"node id out of range [0, {n})")
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise SelfLoopError("self-loops are not allowed")
        rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
        cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        A = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
        # duplicates were summed by the conversion; collapse back to 0/1
        A.data[:] = 1.0
        A.sort_indices()
        return cls(n=n, adjacency=A)

    @classmethod
    def from_dense(cls, matrix) -> "Graph":
        M = np.asarray(matrix, dtype=float)
        report = validate(M)
        if not report.ok:
            raise GraphFormatError(f"not a simple undirected graph: {report.summary()}")
        if not np.all((M == 0) | (M == 1)):
            raise GraphFormatError("weighted adjacency is not supported")
        iu, ju = np.nonzero(np.triu(M, 1))
        return cls.from_edges(M.shape[0], zip(iu.tolist(), ju.tolist()))

    @property
    def edges(self) -> set[tuple[int, int]]:
        upper = sp.triu(self.adjacency, k=1).tocoo()
        return set(zip(upper.row.tolist(), upper.col.tolist()))

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    def dense(self) -> np.ndarray:
        return self.adjacency.toarray()


@dataclass(frozen=True)
class GroupAssignment:
    """Sensitive-group label per node, densely coded 0..m-1."""

    labels: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("group labels must be a nonempty 1-d vector")
        if labels.min() < 0:
            raise ValueError("group ids must be nonnegative")
        m = int(labels.max()) + 1
        if np.any(np.bincount(labels, minlength=m) == 0):
            raise ValueError("group ids must be dense: every group 0..m-1 nonempty")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if not self.names:
            object.__setattr__(self, "names", tuple(str(i) for i in range(m)))

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def m(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.m)


@dataclass(frozen=True)
class ClusterLabels:
    """Hard cluster assignment with ids in 0..k-1; clusters may be empty."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValueError("cluster labels must be a 1-d vector")
        if self.k < 1:
            raise ValueError("k must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ValueError(f"cluster label out of range [0, {self.k})")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def _content_lines(source: TextIO):
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def read_edge_pairs(source: TextIO) -> list[tuple[int, int, int]]:
    """Parse ``u v`` lines into ``(u, v, lineno)`` without enforcing graph rules."""
    pairs = []
    for lineno, line in _content_lines(source):
        tokens = line.split()
        if len(tokens) == 3:
            raise GraphFormatError("weighted edges are not supported", lineno)
        if len(tokens) != 2:
            raise GraphFormatError(f"expected 2 node ids, got {len(tokens)} tokens", lineno)
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphFormatError(f"non-integer node id in {line!r}", lineno) from None
        if u < 0 or v < 0:
            raise GraphFormatError("node ids must be nonnegative", lineno)
        pairs.append((u, v, lineno))
    return pairs


def load_edge_list(source: TextIO, n_hint: int | None = None) -> Graph:
    """Read an undirected edge list; duplicates and reversed pairs collapse."""
    pairs = read_edge_pairs(source)
    if not pairs:
        raise GraphFormatError("edge list contains no edges")
    for u, v, lineno in pairs:
        if u == v:
            raise SelfLoopError(f"self-loop on node {u}", lineno)
    n = max(max(u, v) for u, v, _ in pairs) + 1
    if n_hint is not None and n_hint > n:
        n = n_hint
    return Graph.from_edges(n, ((u, v) for u, v, _ in pairs))


def save_edge_list(graph: Graph, dest: TextIO) -> None:
    for u, v in sorted(graph.edges):
        dest.write(f"{u} {v}\n")


def load_groups(source: TextIO, n: int) -> GroupAssignment:
    """One group token per line; tokens get dense ids in first-appearance order."""
    tokens = [(lineno, raw.strip()) for lineno, raw in enumerate(source, start=1)]
    # trailing blank lines are tolerated, interior ones are not
    while tokens and not tokens[-1][1]:
        tokens.pop()
    for lineno, token in tokens:
        if not token:
            raise GraphFormatError("empty group token", lineno)
    if len(tokens) != n:
        raise LengthMismatchError(f"group file has {len(tokens)} entries, expected {n}")
    ids: dict[str, int] = {}
    labels = [ids.setdefault(token, len(ids)) for _, token in tokens]
    return GroupAssignment(np.array(labels), names=tuple(ids))


def save_groups(groups: GroupAssignment, dest: TextIO) -> None:
    for g in groups.labels:
        dest.write(f"{groups.names[g]}\n")


def write_membership(labels: ClusterLabels, dest: TextIO) -> None:
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(["node", "cluster"])
    writer.writerows(enumerate(labels.labels.tolist()))


def read_membership(source: TextIO, k: int | None = None) -> ClusterLabels:
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["node", "cluster"]:
        raise GraphFormatError("membership CSV must start with header 'node,cluster'", 1)
    rows = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            node, cluster = int(row[0]), int(row[1])
        except (ValueError, IndexError):
            raise GraphFormatError(f"bad membership row {row!r}", lineno) from None
        if cluster < 0:
            raise GraphFormatError("cluster ids must be nonnegative", lineno)
        rows[node] = cluster
    if sorted(rows) != list(range(len(rows))):
        raise GraphFormatError("membership nodes must cover 0..n-1 exactly once")
    labels = np.array([rows[i] for i in range(len(rows))], dtype=np.int64)
    inferred = int(labels.max()) + 1 if labels.size else 1
    if k is None:
        k = inferred
    elif inferred > k:
        raise GraphFormatError(f"cluster label {inferred - 1} out of range for k={k}")
    return ClusterLabels(labels, k)


def write_labels_csv(labels: np.ndarray, dest: TextIO, header=("node", "cluster")) -> None:
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(enumerate(np.asarray(labels).tolist()))


@dataclass
class ValidationReport:
    n: int
    symmetric: bool
    asymmetric_positions: list[tuple[int, int]]
    self_loops: list[int]
    isolated: list[int]
    components: int
    n_edges: int

    @property
    def ok(self) -> bool:
        return self.symmetric and not self.self_loops

    def summary(self) -> str:
        return (
            f"n={self.n} edges={self.n_edges} symmetric={self.symmetric} "
            f"self_loops={len(self.self_loops)} isolated={len(self.isolated)} "
            f"components={self.components}"
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "n_edges": self.n_edges,
            "symmetric": self.symmetric,
            "asymmetric_positions": [list(p) for p in self.asymmetric_positions],
            "self_loops": self.self_loops,
            "isolated": self.isolated,
            "components": self.components,
        }


def validate(graph, max_positions: int = 100) -> ValidationReport:
    """Structural diagnostics for a :class:`Graph` or any square adjacency-like matrix.

    Never raises on bad structure; the caller decides what to reject.
    """
    if isinstance(graph, Graph):
        M = graph.adjacency
    elif sp.issparse(graph):
        M = graph.tocsr()
    else:
        M = sp.csr_matrix(np.asarray(graph, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"adjacency must be square, got {M.shape}")
    n = M.shape[0]
    diff = (M - M.T).tocoo()
    nz = diff.data != 0
    asym = sorted(zip(diff.row[nz].tolist(), diff.col[nz].tolist()))
    loops = np.nonzero(M.diagonal())[0].tolist()
    off = M - sp.diags(M.diagonal())
    pattern = (abs(off) + abs(off.T)) != 0
    degree = np.asarray(pattern.sum(axis=1)).ravel()
    n_comp, _ = connected_components(pattern, directed=False)
    return ValidationReport(
        n=n,
        symmetric=not asym,
        asymmetric_positions=asym[:max_positions],
        self_loops=loops,
        isolated=np.nonzero(degree == 0)[0].tolist(),
        components=int(n_comp),
        n_edges=int(sp.triu(pattern, k=1).nnz),
    )


def graph_from_text(text: str, n_hint: int | None = None) -> Graph:
    return load_edge_list(io.StringIO(text), n_hint)
