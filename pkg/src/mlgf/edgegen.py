"""Social distance attachment over label vectors, parameter sweeps and
homophily calibration.

Two nodes ``i, j`` are linked with probability
``1 / (1 + (d_ij / b) ** alpha)`` where ``d_ij`` is the normalized Hamming
distance between their label rows.
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._rng import chunked_map, derive_seed, keyed_stream
from .core import MultiLabelGraph, check_label_matrix
from .metrics import label_homophily

logger = logging.getLogger(__name__)

DEFAULT_ALPHA_GRID = tuple(0.5 * k for k in range(1, 21))
DEFAULT_B_GRID_DESC = tuple(0.0125 * k for k in range(20, 0, -1))


class CalibrationError(RuntimeError):
    """No grid point produced a graph with edges."""


@dataclass(frozen=True)
class AttachmentParams:
    """``alpha`` steepness and ``b`` characteristic distance (``p = 1/2`` at ``d = b``).

    ``alpha = 0`` is accepted as the degenerate limit (``p = 1`` at ``d = 0``,
    ``1/2`` elsewhere) so sweep grids may start at 0.
    """

    alpha: float
    b: float

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not 0 < self.b <= 1:
            raise ValueError(f"b must lie in (0, 1], got {self.b}")


def normalized_hamming(y_i, y_j):
    """Fraction of label positions where two binary rows differ."""
    y_i = np.asarray(y_i).astype(bool)
    y_j = np.asarray(y_j).astype(bool)
    if y_i.shape != y_j.shape or y_i.ndim != 1 or y_i.size == 0:
        raise ValueError("label rows must be 1-d and of equal, non-zero length")
    return float(np.count_nonzero(y_i != y_j) / y_i.size)


def connection_probability(d, params):
    """Edge probability for distance(s) ``d``; exactly 1 at ``d = 0``."""
    d = np.asarray(d, dtype=np.float64)
    if (d < 0).any():
        raise ValueError("distance must be non-negative")
    with np.errstate(over="ignore"):
        ratio = (d / params.b) ** params.alpha
    p = 1.0 / (1.0 + ratio)
    p = np.where(d == 0, 1.0, p)
    return p.item() if p.ndim == 0 else p


def attach_edges(Y, params, seed=0, threads=None):
    """Sample a graph with one Bernoulli draw per unordered pair ``i < j``.

    Row ``i`` consumes its own keyed stream (one uniform per ``j > i`` in
    ascending order), so the result depends only on ``(Y, params, seed)``.
    """
    Y = check_label_matrix(Y)
    n, n_labels = Y.shape
    if n_labels == 0:
        raise ValueError("label matrix needs at least one column")
    Yi = Y.astype(np.int16)

    def rows(start, stop):
        found = []
        for i in range(start, min(stop, n - 1)):
            diff = np.count_nonzero(Yi[i + 1:] != Yi[i], axis=1)
            p = connection_probability(diff / n_labels, params)
            draws = keyed_stream(seed, "edges", i).random(n - i - 1)
            j = np.flatnonzero(draws < p) + i + 1
            if j.size:
                found.append(np.column_stack([np.full(j.size, i, dtype=np.int64), j]))
        return np.concatenate(found) if found else np.empty((0, 2), dtype=np.int64)

    parts = chunked_map(rows, n, threads)
    edges = np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)
    return MultiLabelGraph(n, edges)


def expected_edge_count(Y, params):
    """``sum_{i<j} p_ij`` computed directly."""
    Y = check_label_matrix(Y)
    n, n_labels = Y.shape
    total = 0.0
    for i in range(n - 1):
        d = np.count_nonzero(Y[i + 1:] != Y[i], axis=1) / n_labels
        total += float(np.sum(connection_probability(d, params)))
    return total


@dataclass
class SweepCurve:
    """Seed-averaged homophily and edge density along a parameter grid.

    ``grid`` holds the swept values (alpha, b, or the pair index for a paired
    sweep). ``homophily`` is ``nan`` where every seed produced an empty graph.
    """

    grid: np.ndarray
    alpha: np.ndarray
    b: np.ndarray
    homophily: np.ndarray
    homophily_std: np.ndarray
    edge_density: np.ndarray

    def __len__(self):
        return len(self.grid)

    def rows(self):
        for k in range(len(self)):
            yield (float(self.alpha[k]), float(self.b[k]), float(self.homophily[k]),
                   float(self.homophily_std[k]), float(self.edge_density[k]))


def subsample_nodes(n, size, seed=0):
    """Sorted random subset of ``size`` node ids."""
    if size is None or size >= n:
        if size is not None and size > n:
            raise ValueError(f"subsample {size} exceeds node count {n}")
        return np.arange(n)
    if size < 2:
        raise ValueError("subsample must contain at least 2 nodes")
    perm = keyed_stream(seed, "subsample").permutation(n)
    return np.sort(perm[:size])


def _run_pairs(Y, pairs, seeds, subsample, subsample_seed, threads):
    Y = check_label_matrix(Y)
    nodes = subsample_nodes(Y.shape[0], subsample, subsample_seed)
    Ysub = Y[nodes]
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    h_mean, h_std, dens = [], [], []
    for alpha, b in pairs:
        params = AttachmentParams(alpha, b)
        hs, ds = [], []
        for s in seeds:
            # same seed across grid points: common random numbers per pair
            g = attach_edges(Ysub, params, seed=s, threads=threads)
            hs.append(label_homophily(g, Ysub))
            ds.append(g.density())
        hs = np.array(hs)
        defined = hs[~np.isnan(hs)]
        h_mean.append(defined.mean() if defined.size else np.nan)
        h_std.append(defined.std() if defined.size else np.nan)
        dens.append(float(np.mean(ds)))
        logger.debug("alpha=%g b=%g homophily=%.4f density=%.4f", alpha, b, h_mean[-1], dens[-1])
    pairs = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    return pairs[:, 0], pairs[:, 1], np.array(h_mean), np.array(h_std), np.array(dens)


def _check_grid(grid):
    grid = np.asarray(grid, dtype=np.float64).ravel()
    if grid.size == 0:
        raise ValueError("parameter grid is empty")
    return grid


def sweep_alpha(Y, b_fixed, alpha_grid, seeds=(0, 1, 2), subsample=500,
                subsample_seed=0, threads=None):
    """Homophily and density as ``alpha`` varies with ``b`` fixed."""
    grid = _check_grid(alpha_grid)
    a, b, h, hs, d = _run_pairs(Y, [(x, b_fixed) for x in grid], seeds, subsample,
                                subsample_seed, threads)
    return SweepCurve(grid, a, b, h, hs, d)


def sweep_b(Y, alpha_fixed, b_grid, seeds=(0, 1, 2), subsample=500,
            subsample_seed=0, threads=None):
    """Homophily and density as ``b`` varies with ``alpha`` fixed."""
    grid = _check_grid(b_grid)
    a, b, h, hs, d = _run_pairs(Y, [(alpha_fixed, x) for x in grid], seeds, subsample,
                                subsample_seed, threads)
    return SweepCurve(grid, a, b, h, hs, d)


def paired_sweep(Y, alpha_grid=DEFAULT_ALPHA_GRID, b_grid=DEFAULT_B_GRID_DESC, seeds=(0, 1, 2),
                 subsample=500, subsample_seed=0, threads=None):
    """One graph per ``(alpha_k, b_k)``; pass ``b_grid`` already in descending order."""
    ag, bg = _check_grid(alpha_grid), _check_grid(b_grid)
    if ag.size != bg.size:
        raise ValueError(f"alpha grid has {ag.size} values, b grid has {bg.size}")
    a, b, h, hs, d = _run_pairs(Y, list(zip(ag, bg)), seeds, subsample, subsample_seed, threads)
    return SweepCurve(np.arange(ag.size, dtype=np.float64), a, b, h, hs, d)


def _nearest(curve, target):
    h = curve.homophily
    ok = np.flatnonzero(~np.isnan(h))
    if ok.size == 0:
        raise CalibrationError("every grid point produced an empty graph")
    gap = np.abs(h[ok] - target)
    best = ok[gap == gap.min()]
    return best[np.argmin(curve.alpha[best])]


def calibrate_to_homophily(Y, target_h, alpha_grid=DEFAULT_ALPHA_GRID, b_grid=DEFAULT_B_GRID_DESC,
                           seeds=(0, 1, 2), subsample=500, subsample_seed=0, refine=0,
                           threads=None):
    """Pick the ``(alpha, b)`` pair whose seed-averaged homophily is nearest ``target_h``.

    Runs :func:`paired_sweep` on a node subsample. Ties go to the smaller
    alpha. With ``refine > 0`` the path between the chosen pair and its
    better-matching neighbor is bisected ``refine`` times (linear in both
    alpha and b) and the nearest evaluated pair wins.

    Returns ``(params, achieved_h, curve)`` where ``curve`` lists every
    evaluated pair.
    """
    if not 0 <= target_h <= 1:
        raise ValueError(f"target homophily must lie in [0, 1], got {target_h}")
    kw = dict(seeds=seeds, subsample=subsample, subsample_seed=subsample_seed, threads=threads)
    curve = paired_sweep(Y, alpha_grid, b_grid, **kw)
    k = _nearest(curve, target_h)
    evaluated = [curve]
    lo = hi = None
    if refine and len(curve) > 1:
        h = curve.homophily
        side = [j for j in (k - 1, k + 1) if 0 <= j < len(curve) and not np.isnan(h[j])
                and (h[j] - target_h) * (h[k] - target_h) <= 0]
        if side:
            lo = (curve.alpha[k], curve.b[k], h[k])
            hi = (curve.alpha[side[0]], curve.b[side[0]], h[side[0]])
    for _ in range(refine if lo is not None else 0):
        mid_a, mid_b = 0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])
        c = paired_sweep(Y, [mid_a], [mid_b], **kw)
        evaluated.append(c)
        hm = c.homophily[0]
        if np.isnan(hm):
            break
        if (hm - target_h) * (lo[2] - target_h) <= 0:
            hi = (mid_a, mid_b, hm)
        else:
            lo = (mid_a, mid_b, hm)
    merged = SweepCurve(*(np.concatenate([getattr(c, f) for c in evaluated])
                          for f in ("grid", "alpha", "b", "homophily", "homophily_std",
                                    "edge_density")))
    best = _nearest(merged, target_h)
    params = AttachmentParams(float(merged.alpha[best]), float(merged.b[best]))
    return params, float(merged.homophily[best]), merged


class SocialDistanceAttachment(BaseEstimator):
    """Sample a graph over the rows of a label matrix.

    >>> Y = np.array([[1, 0], [1, 0], [0, 1]])
    >>> g = SocialDistanceAttachment(alpha=5, b=0.05, random_state=0).fit(Y).graph_
    >>> g.edge_list()
    [(0, 1)]
    """

    def __init__(self, alpha=5.0, b=0.05, random_state=0):
        self.alpha = alpha
        self.b = b
        self.random_state = random_state

    def fit(self, Y, y=None, threads=None):
        Y = check_label_matrix(Y)
        self.params_ = AttachmentParams(float(self.alpha), float(self.b))
        self.graph_ = attach_edges(Y, self.params_, seed=int(self.random_state), threads=threads)
        self.homophily_ = label_homophily(self.graph_, Y)
        return self

    def fit_transform(self, Y, y=None, threads=None):
        return self.fit(Y, threads=threads).graph_


class HomophilyCalibrator(BaseEstimator):
    """Estimator wrapper for :func:`calibrate_to_homophily`.

    After ``fit(Y)``: ``alpha_``, ``b_``, ``achieved_homophily_``, ``curve_``.
    ``transform(Y)`` regenerates a full-size graph with the calibrated pair.
    """

    def __init__(self, target_homophily=0.5, alpha_grid=DEFAULT_ALPHA_GRID,
                 b_grid=DEFAULT_B_GRID_DESC, n_seeds=3, subsample=500, refine=6,
                 random_state=0):
        self.target_homophily = target_homophily
        self.alpha_grid = alpha_grid
        self.b_grid = b_grid
        self.n_seeds = n_seeds
        self.subsample = subsample
        self.refine = refine
        self.random_state = random_state

    def _seeds(self):
        return [derive_seed(self.random_state, "calibrate", k) for k in range(self.n_seeds)]

    def fit(self, Y, y=None, threads=None):
        Y = check_label_matrix(Y)
        subsample = min(self.subsample, Y.shape[0]) if self.subsample else None
        params, achieved, curve = calibrate_to_homophily(
            Y, self.target_homophily, self.alpha_grid, self.b_grid, seeds=self._seeds(),
            subsample=subsample, subsample_seed=derive_seed(self.random_state, "subsample"),
            refine=self.refine, threads=threads)
        self.params_ = params
        self.alpha_, self.b_ = params.alpha, params.b
        self.achieved_homophily_ = achieved
        self.curve_ = curve
        return self

    def transform(self, Y, seed=None, threads=None):
        seed = derive_seed(self.random_state, "graph") if seed is None else seed
        return attach_edges(Y, self.params_, seed=seed, threads=threads)
