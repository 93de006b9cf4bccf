import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mlgf.labelgen import LabelGenConfig, generate_multilabel_data  # noqa: E402


@pytest.fixture(scope="session")
def synthetic_small():
    """500 points, 20 labels, 32 dims (the sweep subsample scale)."""
    _, X, Y = generate_multilabel_data(LabelGenConfig(n_points=500, seed=7))
    return X, Y


def random_graph_and_labels(rng, n, n_labels, p_edge=0.15, p_label=0.3):
    from mlgf.core import build_graph

    A = np.triu(rng.random((n, n)) < p_edge, 1)
    edges = np.argwhere(A)
    Y = rng.random((n, n_labels)) < p_label
    return build_graph(n, edges), Y


def sparsity_fixture(n=1000, labeled_fraction=0.1, n_labels=10, seed=0):
    """Mostly unlabeled label matrix: 10% of nodes carry labels, every class has
    prevalence <= 2%, and all positives sit on labeled nodes."""
    rng = np.random.default_rng(seed)
    labeled = np.sort(rng.permutation(n)[: int(n * labeled_fraction)])
    Y = np.zeros((n, n_labels), dtype=bool)
    for k, node in enumerate(labeled):
        Y[node, k % n_labels] = True
        if k < len(labeled) // 2:
            Y[node, (k + 3) % n_labels] = True
    return Y


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_mlgf_acceptance", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
