import json

import numpy as np
import pytest

from mlgf.core import build_graph
from mlgf.edgegen import AttachmentParams, attach_edges
from mlgf.io import (META_KEYS, BundleError, DatasetBundle, FeatureDegrader, degrade_features,
                     identity_features, kept_column_count, load_bundle, load_splits, make_meta,
                     make_splits, read_labels, save_bundle)
from mlgf.labelgen import LabelGenConfig, generate_multilabel_data
from mlgf.metrics import dataset_statistics


@pytest.fixture(scope="module")
def bundle():
    _, X, Y = generate_multilabel_data(LabelGenConfig(n_points=100, seed=3))
    g = attach_edges(Y, AttachmentParams(5, 0.05), seed=3)
    meta = make_meta(n=100, C=20, D=32, seed=3, alpha=5.0, b=0.05)
    return DatasetBundle(graph=g, labels=Y, features=X, meta=meta)


def test_round_trip(tmp_path, bundle):
    splits = make_splits(100, seed=1)
    save_bundle(bundle, tmp_path / "b", splits=splits)
    back = load_bundle(tmp_path / "b")
    assert back.graph.edges.tobytes() == bundle.graph.edges.tobytes()
    assert np.array_equal(back.labels, bundle.labels)
    np.testing.assert_allclose(back.features, bundle.features, atol=1e-15, rtol=0)
    assert np.array_equal(back.features, bundle.features)
    loaded = load_splits(tmp_path / "b")
    assert len(loaded) == 3
    for a, b in zip(loaded, splits):
        assert np.array_equal(a.train, b.train) and np.array_equal(a.test, b.test)


def test_meta_key_order(tmp_path, bundle):
    save_bundle(bundle, tmp_path / "b")
    meta = json.loads((tmp_path / "b" / "meta.json").read_text(encoding="utf-8"))
    assert tuple(meta) == META_KEYS
    assert meta["alpha"] == 5.0 and meta["features"] == "dense"


def test_resave_is_byte_identical(tmp_path, bundle):
    save_bundle(bundle, tmp_path / "a")
    save_bundle(load_bundle(tmp_path / "a"), tmp_path / "b")
    for name in ("edges.tsv", "labels.tsv", "features.csv", "meta.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_stats_survive_round_trip(tmp_path, bundle):
    save_bundle(bundle, tmp_path / "b")
    back = load_bundle(tmp_path / "b")
    s1 = dataset_statistics(bundle.graph, bundle.features, bundle.labels)
    s2 = dataset_statistics(back.graph, back.features, back.labels)
    assert s1.row() == s2.row()


def test_missing_labels_file(tmp_path, bundle):
    save_bundle(bundle, tmp_path / "b")
    (tmp_path / "b" / "labels.tsv").unlink()
    with pytest.raises(BundleError, match="labels.tsv"):
        load_bundle(tmp_path / "b")


def test_self_loop_line_number(tmp_path):
    d = tmp_path / "b"
    d.mkdir()
    (d / "labels.tsv").write_text("".join(f"{i}\t0\n" for i in range(6)))
    (d / "edges.tsv").write_text("0\t1\n5  5\n")
    with pytest.raises(BundleError, match=r"edges.tsv:2: self-loop"):
        load_bundle(d)


def test_malformed_label_row(tmp_path):
    p = tmp_path / "labels.tsv"
    p.write_text("0\t1,2\n1\tx\n")
    with pytest.raises(BundleError, match="labels.tsv:2"):
        read_labels(p)


def test_unlabeled_rows_and_duplicate_edges(tmp_path):
    d = tmp_path / "b"
    d.mkdir()
    (d / "labels.tsv").write_text("0\t\n1\t0,2\n2\t1\n")
    (d / "edges.tsv").write_text("0\t1\n1\t0\n1\t2\n")
    b = load_bundle(d)
    assert b.graph.n_edges == 2
    assert b.labels.tolist() == [[False] * 3, [True, False, True], [False, True, False]]


def test_feature_row_mismatch(tmp_path, bundle):
    save_bundle(bundle, tmp_path / "b")
    lines = (tmp_path / "b" / "features.csv").read_text().splitlines()
    (tmp_path / "b" / "features.csv").write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(BundleError, match="rows"):
        load_bundle(tmp_path / "b")


def test_identity_features(tmp_path):
    I3 = identity_features(3).toarray()
    assert np.array_equal(I3, np.eye(3))
    I100 = identity_features(100)
    assert np.all(np.asarray(I100.sum(axis=1)).ravel() == 1)
    g = build_graph(100, [(i, i + 1) for i in range(99)])
    b = DatasetBundle(graph=g, labels=np.eye(100, 4, dtype=bool), identity_features=True,
                      meta=make_meta(n=100, C=4))
    save_bundle(b, tmp_path / "b")
    assert not (tmp_path / "b" / "features.csv").exists()
    back = load_bundle(tmp_path / "b")
    assert back.identity_features and back.n_features == 100
    assert (back.feature_matrix() != identity_features(100)).nnz == 0


# --- splits -------------------------------------------------------------------

def test_split_sizes():
    (s,) = make_splits(10, k=1, seed=0)
    assert (len(s.train), len(s.val), len(s.test)) == (6, 2, 2)


def test_split_determinism():
    a, b = make_splits(50, seed=4), make_splits(50, seed=4)
    for x, y in zip(a, b):
        assert np.array_equal(x.train, y.train) and np.array_equal(x.val, y.val)


def test_pcg_scale_splits():
    n = 3233
    splits = make_splits(n, k=3, seed=0)
    assert len(splits) == 3
    for s in splits:
        parts = [set(s.train.tolist()), set(s.val.tolist()), set(s.test.tolist())]
        assert not parts[0] & parts[1] and not parts[0] & parts[2] and not parts[1] & parts[2]
        assert parts[0] | parts[1] | parts[2] == set(range(n))
        assert (len(s.train), len(s.val)) == (1939, 646)
    trains = [tuple(s.train) for s in splits]
    assert len(set(trains)) == 3


def test_split_ratio_validation():
    with pytest.raises(ValueError):
        make_splits(10, ratios=(0.5, 0.2, 0.2))
    with pytest.raises(ValueError):
        make_splits(2)


# --- feature degradation ----------------------------------------------------------

@pytest.fixture(scope="module")
def features():
    return generate_multilabel_data(LabelGenConfig(n_points=200, seed=5))[1]


def test_ratio_one_is_identity(features):
    assert np.array_equal(degrade_features(features, 1.0, seed=0), features)


def test_ratio_zero_within_ranges(features):
    out = degrade_features(features, 0.0, seed=0)
    assert out.shape == features.shape
    assert not np.any(np.all(out == features, axis=0))
    assert np.all(out >= features.min(axis=0)) and np.all(out <= features.max(axis=0))


def test_kept_column_rounding():
    assert kept_column_count(0.2, 32) == 6
    assert kept_column_count(0.5, 5) == 3
    assert kept_column_count(0.8, 32) == 26
    assert [kept_column_count(r, 32) for r in (0, 0.2, 0.5, 0.8, 1.0)] == [0, 6, 16, 26, 32]


@pytest.mark.parametrize("ratio", [0.2, 0.5, 0.8])
def test_kept_columns_unchanged(features, ratio):
    deg = FeatureDegrader(ratio, random_state=3)
    out = deg.fit_transform(features)
    k = deg.kept_columns_
    assert np.array_equal(out[:, :k], features[:, :k])
    assert out.shape == features.shape
    assert np.array_equal(out, FeatureDegrader(ratio, random_state=3).fit_transform(features))


def test_drop_columns_mode(features):
    out = degrade_features(features, 0.5, drop_columns=True)
    assert out.shape == (features.shape[0], 16)


def test_degrader_is_sklearn_compatible(features):
    from sklearn.base import clone
    from sklearn.pipeline import make_pipeline
    from sklearn.preprocessing import StandardScaler

    deg = FeatureDegrader(0.5, random_state=1)
    assert clone(deg).get_params() == deg.get_params()
    out = make_pipeline(deg, StandardScaler()).fit_transform(features)
    assert out.shape == features.shape
