"""Dataset bundles on disk, random splits and feature-quality variants.

Bundle directory layout::

    edges.tsv      u<TAB>v per line, u < v
    labels.tsv     node_id<TAB>c1,c2,...   (empty second field = unlabeled)
    features.csv   D comma-separated reals per node (absent for identity features)
    meta.json      provenance, fixed key order
    splits/split_k.tsv
"""

import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import __version__
from ._rng import keyed_stream
from .core import GraphError, Split, build_graph, check_feature_matrix, check_label_matrix

META_KEYS = ("n", "C", "D", "seed", "alpha", "b", "generator_version", "clustering_variant",
             "kept_columns", "features", "provenance")


class BundleError(ValueError):
    """Missing or malformed bundle file."""


@dataclass
class DatasetBundle:
    graph: object
    labels: np.ndarray
    features: object = None
    identity_features: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.graph.n

    @property
    def n_labels(self):
        return self.labels.shape[1]

    @property
    def n_features(self):
        if self.identity_features:
            return self.n
        return None if self.features is None else self.features.shape[1]

    def feature_matrix(self):
        """Dense/sparse features; a sparse identity when declared so."""
        if self.identity_features:
            return identity_features(self.n)
        return self.features


def make_meta(n, C, D=None, seed=None, alpha=None, b=None, clustering_variant="local",
              kept_columns=None, features="dense", provenance=None):
    meta = dict(n=n, C=C, D=D, seed=seed, alpha=alpha, b=b, generator_version=__version__,
                clustering_variant=clustering_variant, kept_columns=kept_columns,
                features=features, provenance=provenance or {})
    return {k: meta[k] for k in META_KEYS}


def identity_features(n):
    """``n x n`` sparse identity feature matrix."""
    if n < 1:
        raise ValueError("identity features need n >= 1")
    return sp.identity(n, dtype=np.float64, format="csr")


def _fmt(x):
    return repr(float(x))


def write_labels(path, Y):
    Y = check_label_matrix(Y)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, row in enumerate(Y):
            fh.write(f"{i}\t{','.join(str(c) for c in np.flatnonzero(row))}\n")


def read_labels(path, n_labels=None, n_nodes=None):
    """Parse ``labels.tsv`` into a bool matrix.

    ``n_labels`` defaults to ``max label id + 1``; ``n_nodes`` to the row count.
    """
    path = Path(path)
    if not path.is_file():
        raise BundleError(f"missing file: {path.name}")
    rows = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            head, sep, tail = line.partition("\t")
            try:
                node = int(head)
                labs = [int(t) for t in tail.split(",") if t.strip()] if sep else []
            except ValueError:
                raise BundleError(f"{path.name}:{lineno}: malformed row {line!r}") from None
            if node < 0 or any(c < 0 for c in labs):
                raise BundleError(f"{path.name}:{lineno}: negative id in {line!r}")
            if node in rows:
                raise BundleError(f"{path.name}:{lineno}: node {node} listed twice")
            rows[node] = labs
    n = len(rows) if n_nodes is None else n_nodes
    if sorted(rows) != list(range(n)):
        raise BundleError(f"{path.name}: node ids must be exactly 0..{n - 1}, each once")
    max_label = max((max(v) for v in rows.values() if v), default=-1)
    C = max_label + 1 if n_labels is None else n_labels
    if max_label >= C:
        raise BundleError(f"{path.name}: label id {max_label} outside [0, {C})")
    Y = np.zeros((n, C), dtype=bool)
    for node, labs in rows.items():
        Y[node, labs] = True
    return Y


def write_edges(path, graph):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, v in graph.edges:
            fh.write(f"{u}\t{v}\n")


def read_edges(path, n):
    path = Path(path)
    if not path.is_file():
        raise BundleError(f"missing file: {path.name}")
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise BundleError(f"{path.name}:{lineno}: expected 2 fields, got {len(parts)}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise BundleError(f"{path.name}:{lineno}: malformed row {line.rstrip()!r}") from None
            if u == v:
                raise BundleError(f"{path.name}:{lineno}: self-loop ({u}, {v})")
            if not (0 <= u < n and 0 <= v < n):
                raise BundleError(f"{path.name}:{lineno}: node id outside [0, {n})")
            pairs.append((u, v))
    try:
        return build_graph(n, pairs)
    except GraphError as exc:
        raise BundleError(f"{path.name}: {exc}") from None


def write_features(path, X):
    X = check_feature_matrix(X)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in X:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def read_features(path):
    path = Path(path)
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(t) for t in line.split(",")]
            except ValueError:
                raise BundleError(f"{path.name}:{lineno}: malformed row") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise BundleError(f"{path.name}:{lineno}: {len(row)} columns, expected {width}")
            if not all(math.isfinite(x) for x in row):
                raise BundleError(f"{path.name}:{lineno}: non-finite value")
            rows.append(row)
    return np.array(rows, dtype=np.float64).reshape(len(rows), width or 0)


def write_split(path, split):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name in ("train", "val", "test"):
            ids = " ".join(str(i) for i in getattr(split, name))
            fh.write(f"{name}\t{ids}\n")


def read_split(path, seed=None):
    path = Path(path)
    if not path.is_file():
        raise BundleError(f"missing file: {path.name}")
    parts = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            name, _, ids = line.rstrip("\n").partition("\t")
            if name not in ("train", "val", "test"):
                raise BundleError(f"{path.name}:{lineno}: unknown part {name!r}")
            try:
                parts[name] = np.array([int(t) for t in ids.split()], dtype=np.int64)
            except ValueError:
                raise BundleError(f"{path.name}:{lineno}: malformed id list") from None
    missing = {"train", "val", "test"} - set(parts)
    if missing:
        raise BundleError(f"{path.name}: missing parts {sorted(missing)}")
    try:
        return Split(parts["train"], parts["val"], parts["test"], seed=seed)
    except ValueError as exc:
        raise BundleError(f"{path.name}: {exc}") from None


def save_bundle(bundle, directory, splits=None):
    """Write ``bundle`` (and optional splits) to ``directory``; returns written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    Y = check_label_matrix(bundle.labels)
    if Y.shape[0] != bundle.n:
        raise BundleError(f"labels have {Y.shape[0]} rows, graph has {bundle.n} nodes")
    written = []
    write_edges(directory / "edges.tsv", bundle.graph)
    write_labels(directory / "labels.tsv", Y)
    written += [directory / "edges.tsv", directory / "labels.tsv"]
    meta = dict(bundle.meta)
    meta.setdefault("n", bundle.n)
    meta.setdefault("C", Y.shape[1])
    if bundle.identity_features:
        meta["features"], meta["D"] = "identity", bundle.n
    elif bundle.features is not None:
        X = check_feature_matrix(bundle.features, n_nodes=bundle.n)
        write_features(directory / "features.csv", X)
        written.append(directory / "features.csv")
        meta["features"], meta["D"] = "dense", X.shape[1]
    else:
        meta["features"], meta["D"] = "none", None
    meta = make_meta(**{k: meta.get(k) for k in META_KEYS if k != "generator_version"})
    with open(directory / "meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    written.append(directory / "meta.json")
    for k, split in enumerate(splits or []):
        (directory / "splits").mkdir(exist_ok=True)
        write_split(directory / "splits" / f"split_{k}.tsv", split)
        written.append(directory / "splits" / f"split_{k}.tsv")
    return written


def load_bundle(directory):
    """Read a bundle written by :func:`save_bundle` (or by hand in the same layout)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise BundleError(f"not a directory: {directory}")
    meta_path = directory / "meta.json"
    meta = {}
    if meta_path.is_file():
        try:
            meta = json.loads(meta_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise BundleError(f"meta.json: {exc}") from None
    Y = read_labels(directory / "labels.tsv", n_labels=meta.get("C"), n_nodes=meta.get("n"))
    n = Y.shape[0]
    graph = read_edges(directory / "edges.tsv", n)
    features, identity = None, meta.get("features") == "identity"
    if not identity and (directory / "features.csv").is_file():
        features = read_features(directory / "features.csv")
        if features.shape[0] != n:
            raise BundleError(f"features.csv: {features.shape[0]} rows, expected {n}")
    return DatasetBundle(graph=graph, labels=Y, features=features, identity_features=identity,
                         meta=meta)


def load_splits(directory):
    split_dir = Path(directory) / "splits"
    if not split_dir.is_dir():
        return []
    paths = sorted(split_dir.glob("split_*.tsv"), key=lambda p: int(p.stem.split("_")[1]))
    return [read_split(p) for p in paths]


def make_splits(n, ratios=(0.6, 0.2, 0.2), k=3, seed=0):
    """``k`` random train/val/test splits; sizes ``floor(r0 n)``, ``floor(r1 n)``, rest."""
    if n < 3:
        raise ValueError("need at least 3 nodes to split")
    if len(ratios) != 3 or abs(sum(ratios) - 1) > 1e-9 or min(ratios) < 0:
        raise ValueError(f"ratios must be three non-negative values summing to 1, got {ratios}")
    n_train = int(math.floor(ratios[0] * n + 1e-9))
    n_val = int(math.floor(ratios[1] * n + 1e-9))
    splits = []
    for idx in range(k):
        perm = keyed_stream(seed, "split", idx).permutation(n)
        splits.append(Split(np.sort(perm[:n_train]), np.sort(perm[n_train:n_train + n_val]),
                            np.sort(perm[n_train + n_val:]), seed=seed))
    return splits


def kept_column_count(ratio, n_columns):
    """``round-half-up(ratio * n_columns)`` evaluated in decimal arithmetic."""
    if not 0 <= ratio <= 1:
        raise ValueError(f"relevant ratio must lie in [0, 1], got {ratio}")
    value = Decimal(str(ratio)) * n_columns
    return int(value.quantize(Decimal(1), rounding=ROUND_HALF_UP))


class FeatureDegrader(BaseEstimator, TransformerMixin):
    """Keep the first ``round(relevant_ratio * D)`` columns, randomize the rest.

    ``fit`` records each column's empirical range; ``transform`` replaces
    every dropped column by i.i.d. uniform noise over that range (or removes
    it when ``drop_columns=True``).
    """

    def __init__(self, relevant_ratio=1.0, drop_columns=False, random_state=0):
        self.relevant_ratio = relevant_ratio
        self.drop_columns = drop_columns
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_feature_matrix(X)
        self.n_features_in_ = X.shape[1]
        self.kept_columns_ = kept_column_count(self.relevant_ratio, X.shape[1])
        self.data_min_ = X.min(axis=0) if X.shape[0] else np.zeros(X.shape[1])
        self.data_max_ = X.max(axis=0) if X.shape[0] else np.zeros(X.shape[1])
        return self

    def transform(self, X):
        check_is_fitted(self, "kept_columns_")
        X = check_feature_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, fitted on {self.n_features_in_}")
        keep = self.kept_columns_
        if self.drop_columns:
            return X[:, :keep].copy()
        out = X.copy()
        for col in range(keep, X.shape[1]):
            rng = keyed_stream(self.random_state, "degrade", col)
            out[:, col] = rng.uniform(self.data_min_[col], self.data_max_[col], size=X.shape[0])
        return out


def degrade_features(X, relevant_ratio, seed=0, drop_columns=False):
    """Functional form of :class:`FeatureDegrader`."""
    return FeatureDegrader(relevant_ratio, drop_columns, seed).fit_transform(X)


def write_sweep_csv(path, curve):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("alpha,b,homophily_mean,homophily_std,edge_density_mean\n")
        for row in curve.rows():
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def read_scores(path):
    """``scores.csv``: one node per line, comma-separated reals."""
    path = Path(path)
    if not path.is_file():
        raise BundleError(f"missing file: {path.name}")
    return read_features(path)
