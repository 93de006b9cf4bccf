import json

import numpy as np
import pytest

from conftest import sparsity_fixture
from mlgf.cli import MANIFEST_NAME, bundle_digest, main, parse_grid, replay_manifest
from mlgf.core import build_graph
from mlgf.io import DatasetBundle, make_meta, save_bundle, write_labels

SMALL = ["--nodes", "120", "--labels", "8", "--dim", "6"]


def _read_tsv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split("\t")
    return [dict(zip(header, line.split("\t"))) for line in lines[1:]]


def test_parse_grid():
    assert len(parse_grid("0:10:0.5")) == 21
    assert parse_grid("0.0125:0.25:0.0125")[-1] == 0.25
    assert parse_grid("0.25:0.0125:-0.0125")[0] == 0.25
    assert parse_grid("1,2,5") == [1.0, 2.0, 5.0]


def test_generate_passthrough_and_determinism(tmp_path, capsys):
    args = ["generate", *SMALL, "--alpha", "5", "--b", "0.05", "--seed", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    meta = json.loads((tmp_path / "a" / "meta.json").read_text())
    assert meta["alpha"] == 5 and meta["b"] == 0.05 and meta["seed"] == 1
    assert bundle_digest(tmp_path / "a") == bundle_digest(tmp_path / "b")
    manifest = json.loads((tmp_path / "a" / MANIFEST_NAME).read_text())
    assert manifest["command"] == "generate" and manifest["seeds"]["seed"] == 1


def test_generate_rejects_bad_target(tmp_path):
    assert main(["generate", *SMALL, "--target-homophily", "1.5", "--out", str(tmp_path)]) == 64


def test_generate_missing_params_is_usage_error(tmp_path):
    assert main(["generate", *SMALL, "--alpha", "5", "--out", str(tmp_path)]) == 64


def test_unknown_flag_exits_64():
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--bogus"])
    assert exc.value.code == 64


def test_generate_with_target(tmp_path):
    assert main(["generate", *SMALL, "--target-homophily", "0.6", "--calibration-subsample", "80",
                 "--refine", "2", "--out", str(tmp_path / "t")]) == 0
    meta = json.loads((tmp_path / "t" / "meta.json").read_text())
    assert meta["provenance"]["target_homophily"] == 0.6
    assert 0 < meta["alpha"] <= 10


def test_generate_calibration_failure_exit_2(tmp_path, monkeypatch):
    from mlgf import cli
    from mlgf.edgegen import CalibrationError

    def boom(self, Y, y=None, threads=None):
        raise CalibrationError("no edges")

    monkeypatch.setattr(cli.HomophilyCalibrator, "fit", boom)
    assert main(["generate", *SMALL, "--target-homophily", "0.5", "--out", str(tmp_path)]) == 2


def test_replay_manifest(tmp_path):
    assert main(["generate", *SMALL, "--alpha", "3", "--b", "0.1", "--seed", "9",
                 "--out", str(tmp_path / "a")]) == 0
    assert replay_manifest(tmp_path / "a" / MANIFEST_NAME, out=tmp_path / "r") == 0
    assert bundle_digest(tmp_path / "a") == bundle_digest(tmp_path / "r")


def test_sweep_alpha_rows(tmp_path):
    out = tmp_path / "alpha.csv"
    assert main(["sweep", "--sweep", "alpha", "--b", "0.05", "--grid", "0:10:0.5", "--seeds", "1",
                 *SMALL, "--subsample", "60", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "alpha,b,homophily_mean,homophily_std,edge_density_mean"
    assert len(lines) == 22


def test_sweep_paired_unequal_grids(tmp_path):
    assert main(["sweep", "--sweep", "paired", "--alpha-grid", "1,2,3", "--b-grid", "0.1,0.2",
                 *SMALL, "--out", str(tmp_path / "p.csv")]) == 64


def test_sweep_empty_grid(tmp_path):
    assert main(["sweep", "--sweep", "alpha", "--grid", "5:1:1", *SMALL]) == 64


def test_sweep_from_bundle(tmp_path, capsys):
    main(["generate", *SMALL, "--alpha", "5", "--b", "0.05", "--out", str(tmp_path / "a")])
    capsys.readouterr()
    assert main(["sweep", "--sweep", "b", "--bundle", str(tmp_path / "a"), "--grid", "0.05,0.1",
                 "--seeds", "1"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3


def _triangle_bundle(path):
    g = build_graph(3, [(0, 1), (1, 2), (0, 2)])
    b = DatasetBundle(graph=g, labels=np.array([[1, 0], [1, 1], [0, 1]], dtype=bool),
                      features=np.eye(3), meta=make_meta(n=3, C=2))
    save_bundle(b, path)


def test_analyze_triangle(tmp_path):
    _triangle_bundle(tmp_path / "tri")
    assert main(["analyze", str(tmp_path / "tri"), "--out", str(tmp_path / "an")]) == 0
    (row,) = _read_tsv(tmp_path / "an" / "stats.tsv")
    assert row["clus"] == "1"
    assert row["|V|"] == "3" and row["|E|"] == "3"
    ccns_lines = (tmp_path / "an" / "ccns.csv").read_text().splitlines()
    assert ccns_lines[0] == "label,0,1" and len(ccns_lines) == 3


def test_analyze_is_repeatable(tmp_path):
    main(["generate", *SMALL, "--alpha", "5", "--b", "0.05", "--out", str(tmp_path / "g")])
    main(["analyze", str(tmp_path / "g"), "--out", str(tmp_path / "x")])
    main(["analyze", str(tmp_path / "g"), "--out", str(tmp_path / "y")])
    for name in ("stats.tsv", "ccns.csv"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()
    (row,) = _read_tsv(tmp_path / "x" / "stats.tsv")
    assert 0 <= float(row["r_homo"]) <= 1


def test_analyze_unloadable(tmp_path):
    assert main(["analyze", str(tmp_path / "nope")]) == 66


def test_splits_command(tmp_path):
    assert main(["splits", "--nodes", "10", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "splits" / "split_0.tsv").read_text().splitlines()
    assert [len(l.split("\t")[1].split()) for l in lines] == [6, 2, 2]
    assert [l.split("\t")[0] for l in lines] == ["train", "val", "test"]


def test_degrade_command(tmp_path):
    main(["generate", *SMALL, "--alpha", "5", "--b", "0.05", "--out", str(tmp_path / "g")])
    assert main(["degrade", str(tmp_path / "g"), "--ratio", "0.5", "--out", str(tmp_path / "d")]) == 0
    meta = json.loads((tmp_path / "d" / "meta.json").read_text())
    assert meta["kept_columns"] == 3
    assert meta["provenance"]["relevant_ratio"] == 0.5
    assert main(["degrade", str(tmp_path / "g"), "--ratio", "1.2", "--out", str(tmp_path / "e")]) == 64


def _write_scores(path, S):
    path.write_text("".join(",".join(repr(float(x)) for x in row) + "\n" for row in S))


def test_evaluate_perfect(tmp_path, capsys):
    Y = np.array([[1, 0, 1], [0, 1, 1], [1, 1, 0], [0, 0, 1]], dtype=bool)
    write_labels(tmp_path / "labels.tsv", Y)
    _write_scores(tmp_path / "scores.csv", Y.astype(float))
    assert main(["evaluate", "--labels", str(tmp_path / "labels.tsv"), "--scores",
                 str(tmp_path / "scores.csv"), "--out", str(tmp_path / "r")]) == 0
    report = {r["metric"]: float(r["value"]) for r in _read_tsv(tmp_path / "r" / "report.tsv")}
    assert report["micro_f1"] == report["macro_f1"] == report["macro_auroc"] == report["macro_ap"] == 1
    assert (tmp_path / "r" / "per_class.csv").exists()
    assert (tmp_path / "r" / "skipped.tsv").exists()


def test_evaluate_percent_and_split(tmp_path, capsys):
    rng = np.random.default_rng(0)
    Y = rng.random((20, 3)) < 0.5
    write_labels(tmp_path / "labels.tsv", Y)
    _write_scores(tmp_path / "scores.csv", Y.astype(float))
    main(["splits", "--nodes", "20", "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["evaluate", "--labels", str(tmp_path / "labels.tsv"), "--scores",
                 str(tmp_path / "scores.csv"), "--split", str(tmp_path / "splits" / "split_0.tsv"),
                 "--percent"]) == 0
    out = capsys.readouterr().out
    assert "micro_f1\t100" in out


def test_evaluate_shape_mismatch(tmp_path):
    write_labels(tmp_path / "labels.tsv", np.eye(4, 2, dtype=bool))
    _write_scores(tmp_path / "scores.csv", np.zeros((5, 2)))
    assert main(["evaluate", "--labels", str(tmp_path / "labels.tsv"), "--scores",
                 str(tmp_path / "scores.csv")]) == 65


def test_evaluate_missing_input(tmp_path):
    write_labels(tmp_path / "labels.tsv", np.eye(4, 2, dtype=bool))
    assert main(["evaluate", "--labels", str(tmp_path / "labels.tsv"), "--scores",
                 str(tmp_path / "missing.csv")]) == 66


def _audit_lines(capsys):
    out = capsys.readouterr().out
    return {tuple(l.split("\t")[:-1]): float(l.split("\t")[-1]) for l in out.splitlines()}


def test_audit_fully_labeled(tmp_path, capsys):
    write_labels(tmp_path / "labels.tsv", np.eye(6, 3, dtype=bool) | np.eye(6, 3, k=-3, dtype=bool))
    assert main(["audit", "--labels", str(tmp_path / "labels.tsv")]) == 0
    vals = _audit_lines(capsys)
    assert vals[("all_negative", "macro_auroc")] == 0.5
    assert vals[("has_label", "macro_auroc")] == 0.5


def test_audit_sparsity_gap(tmp_path, capsys):
    write_labels(tmp_path / "labels.tsv", sparsity_fixture())
    assert main(["audit", "--labels", str(tmp_path / "labels.tsv"), "--out", str(tmp_path / "a")]) == 0
    vals = _audit_lines(capsys)
    assert vals[("has_label", "auroc_minus_ap")] >= 0.4
    assert (tmp_path / "a" / "audit.tsv").exists()


def test_env_thread_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("MLGF_THREADS", "3")
    assert main(["generate", *SMALL, "--alpha", "5", "--b", "0.05", "--out", str(tmp_path / "a")]) == 0
    monkeypatch.delenv("MLGF_THREADS")
    assert main(["generate", *SMALL, "--alpha", "5", "--b", "0.05", "--out", str(tmp_path / "b")]) == 0
    assert bundle_digest(tmp_path / "a") == bundle_digest(tmp_path / "b")
