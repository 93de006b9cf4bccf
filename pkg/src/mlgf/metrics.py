"""Dataset characterization: label homophily, multi-label CCNS, clustering,
degree assortativity and label-count statistics.

Undefined quantities (homophily of an edgeless graph, assortativity with
zero degree variance, CCNS rows of empty classes) are reported as ``nan``.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .core import check_label_matrix

UNDEFINED = float("nan")

STATS_COLUMNS = ("|V|", "|E|", "|F|", "clus", "r_homo", "C", "l_med", "l_mean",
                 "l_max", "p25", "p50", "p75", "density", "assortativity", "unlabeled")


def _check_pair(graph, Y):
    Y = check_label_matrix(Y)
    if Y.shape[0] != graph.n:
        raise ValueError(f"label matrix has {Y.shape[0]} rows, graph has {graph.n} nodes")
    return Y


def edge_jaccard(graph, Y):
    """Jaccard similarity of endpoint label sets, one value per edge.

    Two empty label sets give 0.
    """
    Y = _check_pair(graph, Y)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    inter = (Y[u] & Y[v]).sum(axis=1)
    union = (Y[u] | Y[v]).sum(axis=1)
    out = np.zeros(len(u))
    np.divide(inter, union, out=out, where=union > 0)
    return out


def label_homophily(graph, Y):
    """Mean Jaccard similarity of endpoint label sets over all edges.

    Returns ``nan`` for a graph without edges.

    >>> from mlgf.core import build_graph
    >>> g = build_graph(3, [(0, 1), (0, 2)])
    >>> round(label_homophily(g, [[1, 1, 0], [0, 1, 0], [1, 0, 1]]), 4)
    0.4167
    """
    if graph.n_edges == 0:
        _check_pair(graph, Y)
        return UNDEFINED
    return float(edge_jaccard(graph, Y).mean())


def neighbor_histograms(graph, Y):
    """``n x C`` integer matrix; entry ``(i, c)`` counts neighbors of ``i`` labeled ``c``."""
    Y = _check_pair(graph, Y)
    A = graph.adjacency(dtype=np.int64)
    return np.asarray(A @ Y.astype(np.int64))


@dataclass
class CcnsMatrix:
    values: np.ndarray
    class_sizes: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _ccns_units(graph, Y):
    """Per-node vectors ``d_i / (|l(i)| * ||d_i||)``; zero for empty ``d_i`` or ``l(i)``."""
    hist = neighbor_histograms(graph, Y).astype(np.float64)
    norms = np.linalg.norm(hist, axis=1)
    counts = Y.sum(axis=1)
    denom = norms * counts
    scale = np.zeros(len(denom))
    np.divide(1.0, denom, out=scale, where=denom > 0)
    return hist * scale[:, None]


def ccns(graph, Y):
    """Multi-label cross-class neighborhood similarity.

    For classes ``c, c'`` this averages
    ``cos(d_i, d_j) / (|l(i)| |l(j)|)`` over ordered pairs ``i in V_c``,
    ``j in V_c'``, ``i != j``, normalized by ``|V_c| |V_c'|``. Nodes with a
    zero neighbor histogram contribute cosine 0. Computed through class sums
    of unit-scaled histograms, with the ``i == j`` terms subtracted.
    """
    Y = _check_pair(graph, Y)
    if Y.shape[1] == 0:
        raise ValueError("ccns needs at least one label")
    Yf = Y.astype(np.float64)
    U = _ccns_units(graph, Y)
    S = Yf.T @ U
    self_terms = Yf.T @ (Yf * (U * U).sum(axis=1)[:, None])
    raw = S @ S.T - self_terms
    raw = 0.5 * (raw + raw.T)
    sizes = Y.sum(axis=0)
    norm = np.outer(sizes, sizes).astype(np.float64)
    values = np.full(raw.shape, UNDEFINED)
    np.divide(raw, norm, out=values, where=norm > 0)
    values = np.where(norm > 0, np.maximum(values, 0.0), UNDEFINED)
    return CcnsMatrix(values=values, class_sizes=sizes)


def ccns_naive(graph, Y):
    """Direct double loop over node pairs; slow, used as a cross-check."""
    Y = _check_pair(graph, Y)
    hist = neighbor_histograms(graph, Y).astype(np.float64)
    n_labels = Y.shape[1]
    members = [np.flatnonzero(Y[:, c]) for c in range(n_labels)]
    counts = Y.sum(axis=1)
    norms = np.linalg.norm(hist, axis=1)
    values = np.full((n_labels, n_labels), UNDEFINED)
    for c in range(n_labels):
        for c2 in range(n_labels):
            if not len(members[c]) or not len(members[c2]):
                continue
            total = 0.0
            for i in members[c]:
                for j in members[c2]:
                    if i == j or norms[i] == 0 or norms[j] == 0:
                        continue
                    cos = hist[i] @ hist[j] / (norms[i] * norms[j])
                    total += cos / (counts[i] * counts[j])
            values[c, c2] = total / (len(members[c]) * len(members[c2]))
    return CcnsMatrix(values=values, class_sizes=Y.sum(axis=0))


def triangles_per_node(graph):
    A = graph.adjacency()
    return np.asarray((A @ A).multiply(A).sum(axis=1)).ravel() / 2.0


def clustering_coefficient(graph, variant="local"):
    """Clustering coefficient.

    ``variant="local"`` (default) averages the local coefficient over all
    nodes, with degree < 2 contributing 0. ``variant="global"`` returns
    transitivity (closed triplets / connected triplets).
    """
    if graph.n == 0:
        raise ValueError("clustering is undefined for an empty node set")
    tri = triangles_per_node(graph)
    deg = graph.degrees.astype(np.float64)
    wedges = deg * (deg - 1) / 2.0
    if variant == "local":
        local = np.zeros(graph.n)
        np.divide(tri, wedges, out=local, where=wedges > 0)
        return float(local.mean())
    if variant == "global":
        total = wedges.sum()
        return float(tri.sum() / total) if total > 0 else 0.0
    raise ValueError(f"unknown clustering variant {variant!r}")


def degree_assortativity(graph):
    """Pearson correlation of endpoint degrees over both edge orientations."""
    if graph.n_edges < 2:
        return UNDEFINED
    deg = graph.degrees.astype(np.float64)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    x = np.concatenate([deg[u], deg[v]])
    y = np.concatenate([deg[v], deg[u]])
    xc, yc = x - x.mean(), y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0:
        return UNDEFINED
    return float((xc * yc).sum() / denom)


def nearest_rank(values, q):
    """Lower nearest-rank percentile: the ``ceil(q/100 * N)``-th smallest value."""
    values = np.sort(np.asarray(values))
    if values.size == 0:
        return UNDEFINED
    rank = max(1, int(np.ceil(q / 100.0 * values.size - 1e-12)))
    return values[rank - 1].item()


@dataclass
class DatasetStats:
    n_nodes: int
    n_edges: int
    n_features: object
    clustering: float
    homophily: float
    n_labels: int
    label_median: float
    label_mean: float
    label_max: int
    p25: float
    p50: float
    p75: float
    edge_density: float
    assortativity: float
    unlabeled_count: int
    clustering_variant: str = "local"

    def row(self):
        """Values in ``STATS_COLUMNS`` order."""
        d = asdict(self)
        keys = ("n_nodes", "n_edges", "n_features", "clustering", "homophily", "n_labels",
                "label_median", "label_mean", "label_max", "p25", "p50", "p75",
                "edge_density", "assortativity", "unlabeled_count")
        return [d[k] for k in keys]


def dataset_statistics(graph, X=None, Y=None, clustering_variant="local", n_features=None):
    """Table-style summary of a multi-label graph dataset.

    Label-count percentiles run over every node, unlabeled ones included,
    using the lower nearest-rank rule. ``n_features`` overrides the width
    read from ``X`` (e.g. for identity features that are never materialized).
    """
    Y = _check_pair(graph, Y)
    counts = Y.sum(axis=1)
    if n_features is None:
        n_features = None if X is None else int(np.asarray(X).shape[1])
    return DatasetStats(
        n_nodes=graph.n,
        n_edges=graph.n_edges,
        n_features=n_features,
        clustering=clustering_coefficient(graph, clustering_variant) if graph.n else UNDEFINED,
        homophily=label_homophily(graph, Y),
        n_labels=int(Y.shape[1]),
        label_median=nearest_rank(counts, 50),
        label_mean=float(counts.mean()) if counts.size else UNDEFINED,
        label_max=int(counts.max()) if counts.size else 0,
        p25=nearest_rank(counts, 25),
        p50=nearest_rank(counts, 50),
        p75=nearest_rank(counts, 75),
        edge_density=graph.density(),
        assortativity=degree_assortativity(graph),
        unlabeled_count=int((counts == 0).sum()),
        clustering_variant=clustering_variant,
    )
