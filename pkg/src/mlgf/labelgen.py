"""Hypersphere multi-label data generator.

Each label owns a ball contained in the unit ball. Points are drawn inside a
randomly chosen label ball, and a point carries every label whose ball
contains it.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._rng import chunked_map, keyed_stream

# closed-ball slack for membership tests
MEMBERSHIP_TOL = 1e-12


@dataclass(frozen=True)
class LabelSphere:
    center: np.ndarray
    radius: float

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return np.linalg.norm(np.asarray(x) - self.center) <= self.radius + tol


@dataclass(frozen=True)
class LabelGenConfig:
    n_points: int = 3000
    n_labels: int = 20
    n_features: int = 32
    r_min: float = 0.6
    r_max: float = 0.75
    seed: int = 0

    def validate(self):
        if self.n_points < 1 or self.n_labels < 1 or self.n_features < 1:
            raise ValueError("n_points, n_labels and n_features must all be >= 1")
        if not 0 < self.r_min <= self.r_max < 1:
            raise ValueError(
                f"radius bounds must satisfy 0 < r_min <= r_max < 1, got [{self.r_min}, {self.r_max}]")
        return self


def uniform_in_ball(center, radius, rng):
    """Draw one point uniformly from the closed ball ``B(center, radius)``."""
    center = np.asarray(center, dtype=np.float64)
    if radius < 0:
        raise ValueError("radius must be non-negative")
    dim = center.shape[0]
    while True:
        direction = rng.standard_normal(dim)
        norm = np.linalg.norm(direction)
        if norm > 0:
            break
    scale = radius * rng.random() ** (1.0 / dim)
    return center + direction * (scale / norm)


def generate_spheres(config, rng=None):
    """Draw ``config.n_labels`` label balls inside the unit ball.

    Radii are uniform on ``[r_min, r_max]``; each center is uniform in the
    ball of radius ``1 - radius`` so the label ball stays inside the unit
    ball.
    """
    config.validate()
    if rng is None:
        rng = keyed_stream(config.seed, "spheres")
    origin = np.zeros(config.n_features)
    spheres = []
    for _ in range(config.n_labels):
        radius = float(rng.uniform(config.r_min, config.r_max))
        center = uniform_in_ball(origin, 1.0 - radius, rng)
        spheres.append(LabelSphere(center=center, radius=radius))
    return spheres


def membership(X, spheres, tol=MEMBERSHIP_TOL):
    """Boolean ``n x C`` matrix: point ``i`` lies in sphere ``c``."""
    X = np.asarray(X, dtype=np.float64)
    centers = np.stack([s.center for s in spheres])
    radii = np.array([s.radius for s in spheres])
    dist = np.sqrt(((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1))
    return dist <= radii[None, :] + tol


def sample_points(spheres, n_points, seed=0, threads=None):
    """Sample ``n_points`` labeled points from ``spheres``.

    Point ``i`` uses its own stream keyed by ``(seed, i)``: it picks a seed
    sphere uniformly, then a uniform location inside it. Labels are the full
    sphere membership, so every point has at least one label.

    Returns ``(X, Y)`` with ``X`` float64 ``n x D`` and ``Y`` bool ``n x C``.
    """
    if not spheres:
        raise ValueError("need at least one sphere")
    n_labels = len(spheres)
    dim = spheres[0].center.shape[0]

    def draw(start, stop):
        out = np.empty((stop - start, dim))
        for row, i in enumerate(range(start, stop)):
            rng = keyed_stream(seed, "points", i)
            sphere = spheres[int(rng.integers(n_labels))]
            out[row] = uniform_in_ball(sphere.center, sphere.radius, rng)
        return out

    parts = chunked_map(draw, n_points, threads)
    X = np.concatenate(parts) if parts else np.empty((0, dim))
    return X, membership(X, spheres)


def generate_multilabel_data(config, threads=None):
    """Spheres plus sampled ``(X, Y)`` for a :class:`LabelGenConfig`."""
    spheres = generate_spheres(config)
    X, Y = sample_points(spheres, config.n_points, seed=config.seed, threads=threads)
    return spheres, X, Y


class HypersphereLabelGenerator(BaseEstimator):
    """Estimator-style wrapper around the hypersphere generator.

    ``fit`` draws the label spheres; ``sample`` populates them.

    >>> gen = HypersphereLabelGenerator(n_labels=4, n_features=3, random_state=1).fit()
    >>> X, Y = gen.sample(10)
    >>> X.shape, Y.shape
    ((10, 3), (10, 4))
    """

    def __init__(self, n_labels=20, n_features=32, r_min=0.6, r_max=0.75, random_state=0):
        self.n_labels = n_labels
        self.n_features = n_features
        self.r_min = r_min
        self.r_max = r_max
        self.random_state = random_state

    def _config(self, n_points=1):
        return LabelGenConfig(n_points=n_points, n_labels=self.n_labels,
                              n_features=self.n_features, r_min=self.r_min,
                              r_max=self.r_max, seed=int(self.random_state))

    def fit(self, X=None, y=None):
        self.spheres_ = generate_spheres(self._config())
        self.centers_ = np.stack([s.center for s in self.spheres_])
        self.radii_ = np.array([s.radius for s in self.spheres_])
        return self

    def sample(self, n_points, threads=None):
        check_is_fitted(self, "spheres_")
        return sample_points(self.spheres_, n_points, seed=int(self.random_state), threads=threads)

    def predict(self, X):
        """Label matrix for arbitrary points (sphere membership)."""
        check_is_fitted(self, "spheres_")
        return membership(X, self.spheres_)
