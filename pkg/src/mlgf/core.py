"""Shared graph, label and feature containers plus input validation."""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from sklearn.utils import check_array


class GraphError(ValueError):
    """Raised for malformed edge input (self-loops, ids out of range)."""


class MultiLabelGraph:
    """Undirected simple graph on nodes ``0..n-1``.

    ``edges`` holds each unordered pair once as ``(u, v)`` with ``u < v``,
    sorted lexicographically. The adjacency is stored in CSR form
    (``indptr``, ``indices``) with ascending neighbor lists. Instances are
    read-only; use :func:`build_graph` to construct one.
    """

    __slots__ = ("n", "edges", "indptr", "indices")

    def __init__(self, n, edges):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.lexsort((dst, src))
        indices = dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        for arr in (edges, indices, indptr):
            arr.setflags(write=False)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    def __setattr__(self, name, value):
        raise AttributeError("MultiLabelGraph is immutable")

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def degrees(self):
        return np.diff(self.indptr)

    def neighbors(self, v):
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edge_list(self):
        return [(int(u), int(v)) for u, v in self.edges]

    def adjacency(self, dtype=np.float64):
        """Symmetric adjacency as a ``scipy.sparse.csr_matrix``."""
        data = np.ones(len(self.indices), dtype=dtype)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def density(self):
        pairs = self.n * (self.n - 1) / 2
        return self.n_edges / pairs if pairs else 0.0

    def __eq__(self, other):
        if not isinstance(other, MultiLabelGraph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self):
        return f"MultiLabelGraph(n={self.n}, n_edges={self.n_edges})"


def build_graph(n, edge_list):
    """Canonicalize an edge list into a :class:`MultiLabelGraph`.

    Pairs may appear in either orientation and more than once; duplicates
    are dropped. Self-loops and ids outside ``[0, n)`` raise
    :class:`GraphError` naming the first offending pair.

    >>> g = build_graph(3, [(0, 1), (1, 0)])
    >>> g.n_edges, g.neighbors(0).tolist()
    (1, [1])
    """
    n = int(n)
    if n < 0:
        raise GraphError(f"node count must be >= 0, got {n}")
    edges = np.asarray(edge_list, dtype=np.int64)
    if edges.size == 0:
        return MultiLabelGraph(n, np.empty((0, 2), dtype=np.int64))
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise GraphError("edge_list must be a sequence of (u, v) pairs")
    loops = np.flatnonzero(edges[:, 0] == edges[:, 1])
    if loops.size:
        u, v = edges[loops[0]]
        raise GraphError(f"self-loop ({u}, {v}) at position {loops[0]}")
    bad = np.flatnonzero((edges < 0).any(axis=1) | (edges >= n).any(axis=1))
    if bad.size:
        u, v = edges[bad[0]]
        raise GraphError(f"edge ({u}, {v}) at position {bad[0]} references a node outside [0, {n})")
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    codes = np.unique(lo * n + hi)
    return MultiLabelGraph(n, np.column_stack([codes // n, codes % n]))


def relabel(graph, perm):
    """Graph with node ``i`` renamed to ``perm[i]``."""
    perm = np.asarray(perm, dtype=np.int64)
    return build_graph(graph.n, perm[graph.edges])


def check_label_matrix(Y, n_labels=None):
    """Validate a binary ``n x C`` label matrix and return it as ``bool``."""
    Y = check_array(Y, dtype=None, ensure_2d=True, ensure_min_samples=0,
                    ensure_min_features=0, ensure_all_finite=True)
    if Y.dtype != bool:
        if not np.isin(Y, (0, 1)).all():
            raise ValueError("label matrix entries must be 0 or 1")
        Y = Y.astype(bool)
    if n_labels is not None and Y.shape[1] != n_labels:
        raise ValueError(f"label matrix has {Y.shape[1]} columns, expected {n_labels}")
    return Y


def check_feature_matrix(X, n_nodes=None):
    X = check_array(X, dtype=np.float64, ensure_min_samples=0, ensure_min_features=0)
    if n_nodes is not None and X.shape[0] != n_nodes:
        raise ValueError(f"feature matrix has {X.shape[0]} rows, expected {n_nodes}")
    return X


def check_scores(scores, shape=None):
    """Validate a real ``n x C`` prediction-score matrix."""
    scores = check_array(scores, dtype=np.float64, ensure_min_samples=0, ensure_min_features=0)
    if shape is not None and scores.shape != tuple(shape):
        raise ValueError(f"score matrix shape {scores.shape} does not match labels {tuple(shape)}")
    return scores


def label_sets(Y):
    """Per-node label id arrays (``l(i)``)."""
    Y = check_label_matrix(Y)
    return [np.flatnonzero(row) for row in Y]


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int

    def __post_init__(self):
        parts = [np.asarray(p, dtype=np.int64) for p in (self.train, self.val, self.test)]
        allidx = np.concatenate(parts)
        if len(np.unique(allidx)) != len(allidx):
            raise ValueError("split parts overlap")
        if len(allidx) and (allidx.min() != 0 or allidx.max() != len(allidx) - 1):
            raise ValueError("split parts must cover 0..n-1")
        for name, arr in zip(("train", "val", "test"), parts):
            object.__setattr__(self, name, arr)

    @property
    def n(self):
        return len(self.train) + len(self.val) + len(self.test)


@dataclass
class BundleReport:
    """Consistency report for a (graph, features, labels) triple."""

    n_nodes: int
    mismatches: list = field(default_factory=list)
    unlabeled: int = 0
    isolated: int = 0

    @property
    def ok(self):
        return not self.mismatches


def validate_bundle(graph, X, Y):
    """Report dimension mismatches, unlabeled rows and isolated nodes.

    Nothing is repaired; a mismatch only shows up in ``report.mismatches``.
    """
    report = BundleReport(n_nodes=graph.n)
    Y = np.asarray(Y)
    if Y.ndim != 2:
        report.mismatches.append(f"labels: expected a 2-d matrix, got {Y.ndim}-d")
    else:
        if Y.shape[0] != graph.n:
            report.mismatches.append(f"labels: {Y.shape[0]} rows vs graph n={graph.n}")
        report.unlabeled = int((~Y.astype(bool).any(axis=1)).sum())
    if X is not None:
        X = np.asarray(X)
        rows = X.shape[0] if X.ndim else 0
        if rows != graph.n:
            report.mismatches.append(f"features: {rows} rows vs graph n={graph.n}")
        elif X.ndim == 2 and not np.isfinite(X).all():
            report.mismatches.append("features: non-finite entries")
    report.isolated = int((graph.degrees == 0).sum())
    return report
