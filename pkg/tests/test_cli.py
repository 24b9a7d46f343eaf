import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from steelprop import cli, pipeline, reports
from steelprop.dataset import CSV_HEADER
from steelprop.evalstat import EvalReport

from conftest import REFERENCE_FAMILIES, REFERENCE_FOLD_SCORES


SMALL_CONFIG = """\
[experiment]
seed = 424242

[dataset]
properties = ["hardness"]

[folds]
k = 5

[synth]
records = 25

[linear]
degrees = [1, 2]
lambdas = [0.0, 0.1]

[svr]
max_passes = 50000

[neural]
hidden = [2, 3]
max_epochs = 30
"""


@pytest.fixture
def workdir(tmp_path):
    cfg = tmp_path / "exp.toml"
    cfg.write_text(SMALL_CONFIG)
    return tmp_path


def run(args):
    return cli.main([str(a) for a in args])


class TestExitCodes:
    def test_usage_error_is_1(self, capsys):
        assert run(["train", "--family", "nope"]) == 1
        assert run(["no-such-command"]) == 1

    def test_data_error_is_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text(CSV_HEADER + "\nonly,three,cells\n")
        assert run(["validate", "--data", bad]) == 2

    def test_success_is_0(self, workdir):
        assert run(["config", "init", "--out", workdir / "c.toml"]) == 0


class TestConfigInit:
    def test_stdout(self, capsys):
        assert run(["config", "init"]) == 0
        out = capsys.readouterr().out
        assert "[experiment]" in out and "[svr]" in out

    def test_written_file_loads(self, workdir):
        path = workdir / "full.toml"
        assert run(["config", "init", "--out", path]) == 0
        from steelprop.config import load_config
        cfg = load_config(path)
        assert cfg.fold_k == 10
        assert cfg.svr_max_train == 2000


class TestSynthValidateAugment:
    def test_flow(self, workdir, capsys):
        data = workdir / "alloys.csv"
        assert run(["synth", "--config", workdir / "exp.toml", "--out", data]) == 0
        assert run(["validate", "--data", data]) == 0
        out = capsys.readouterr().out
        assert "25 records" in out
        assert run(["augment", "--config", workdir / "exp.toml",
                    "--data", data, "--out", workdir / "out"]) == 0
        test_csv = workdir / "out" / "augmented_hardness_test.csv"
        assert test_csv.exists()
        assert len(test_csv.read_text().strip().splitlines()) == 26  # header + 25

    def test_augment_manifest_hashes(self, workdir):
        data = workdir / "alloys.csv"
        run(["synth", "--config", workdir / "exp.toml", "--out", data])
        run(["augment", "--config", workdir / "exp.toml", "--data", data,
             "--out", workdir / "out"])
        manifest = json.loads((workdir / "out" / "augment_manifest.json").read_text())
        assert manifest["rng_algorithm"] == "numpy-PCG64"
        assert manifest["backend"] in ("numba", "numpy")
        from steelprop.manifest import sha256_file
        for name, digest in manifest["outputs"].items():
            assert sha256_file(workdir / "out" / name) == digest


class TestDeterminism:
    def test_rerun_byte_identical(self, workdir):
        data = workdir / "alloys.csv"
        run(["synth", "--config", workdir / "exp.toml", "--out", data])
        for out in ("out_a", "out_b"):
            run(["augment", "--config", workdir / "exp.toml", "--data", data,
                 "--out", workdir / out])
            run(["train", "--config", workdir / "exp.toml", "--family", "linear",
                 "--property", "hardness", "--out", workdir / out])
        for name in ("augmented_hardness_train_val.csv",
                     "augmented_hardness_test.csv",
                     "report_hardness_linear.csv",
                     "predictions_hardness_linear.csv",
                     "linear_hardness_curve.csv",
                     "augment_manifest.json",
                     "train_hardness_linear_manifest.json"):
            a = (workdir / "out_a" / name).read_bytes()
            b = (workdir / "out_b" / name).read_bytes()
            assert a == b, f"{name} differs between reruns"

    def test_parallel_jobs_bitwise_equal_serial(self, workdir):
        data = workdir / "alloys.csv"
        run(["synth", "--config", workdir / "exp.toml", "--out", data])
        for out, jobs in (("serial", "1"), ("parallel", "4")):
            run(["augment", "--config", workdir / "exp.toml", "--data", data,
                 "--out", workdir / out])
            run(["train", "--config", workdir / "exp.toml", "--family", "linear",
                 "--property", "hardness", "--out", workdir / out,
                 "--jobs", jobs])
        for name in ("report_hardness_linear.csv",
                     "predictions_hardness_linear.csv"):
            a = (workdir / "serial" / name).read_bytes()
            b = (workdir / "parallel" / name).read_bytes()
            assert a == b, f"{name} differs between serial and parallel"


def _write_reference_reports(out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for j, family in enumerate(REFERENCE_FAMILIES):
        report = EvalReport(family=family, property="hardness",
                            fold_r2=tuple(REFERENCE_FOLD_SCORES[:, j]),
                            fold_eqm=tuple(np.zeros(10)),
                            fold_val_r2=tuple(np.zeros(10)))
        path = out_dir / f"report_hardness_{family}.csv"
        path.write_text(reports.report_column_csv(report))
        paths.append(path)
    return paths


class TestCompare:
    def test_reference_fixture_decisions(self, tmp_path, capsys):
        paths = _write_reference_reports(tmp_path / "reports")
        assert run(["compare", "--reports", *paths, "--out", tmp_path / "cmp"]) == 0
        out = capsys.readouterr().out
        assert "27.12" in out
        text = (tmp_path / "cmp" / "friedman_hardness.csv").read_text()
        assert "svr,linear," in text
        lines = [ln for ln in text.splitlines() if ln.startswith("svr,linear")]
        assert lines[0].endswith(",1")        # significant
        nn_dt = [ln for ln in text.splitlines() if ln.startswith("nn,tree")]
        assert nn_dt[0].endswith(",0")        # not significant

    def test_matrix_layout(self, tmp_path):
        paths = _write_reference_reports(tmp_path / "reports")
        run(["compare", "--reports", *paths, "--out", tmp_path / "cmp"])
        lines = (tmp_path / "cmp" / "comparison_hardness.csv").read_text().splitlines()
        assert lines[0] == "fold," + ",".join(REFERENCE_FAMILIES)
        assert len(lines) == 12
        assert lines[-1].startswith("Média,")

    def test_identical_reports_full_ties(self, tmp_path, capsys):
        paths = _write_reference_reports(tmp_path / "reports")[:1]
        twin = tmp_path / "reports" / "report_hardness_twin.csv"
        twin.write_text(paths[0].read_text().replace("nn", "twin"))
        assert run(["compare", "--reports", paths[0], twin,
                    "--out", tmp_path / "cmp"]) == 0
        out = capsys.readouterr().out
        assert "chi2 = 0.0" in out
        assert "no significant pairs" in out

    def test_mismatched_fold_count_errors(self, tmp_path):
        paths = _write_reference_reports(tmp_path / "reports")
        short = tmp_path / "reports" / "report_hardness_short.csv"
        lines = paths[0].read_text().splitlines()
        short.write_text("\n".join(lines[:6] + [lines[-1]]) + "\n")
        assert run(["compare", "--reports", paths[0], short,
                    "--out", tmp_path / "cmp"]) == 2

    def test_mixed_properties_error(self, tmp_path):
        paths = _write_reference_reports(tmp_path / "reports")
        other = tmp_path / "reports" / "report_tensile_svr.csv"
        other.write_text(paths[1].read_text())
        assert run(["compare", "--reports", paths[0], other,
                    "--out", tmp_path / "cmp"]) == 2

    def test_reads_only_report_files(self, tmp_path, monkeypatch):
        paths = _write_reference_reports(tmp_path / "reports")
        seen = []
        original = pipeline._read_text

        def audit(path):
            seen.append(Path(path))
            return original(path)

        monkeypatch.setattr(pipeline, "_read_text", audit)
        run(["compare", "--reports", *paths, "--out", tmp_path / "cmp"])
        assert set(seen) == set(paths)


class TestReportCommand:
    def test_svg_from_predictions(self, tmp_path):
        pairs = tmp_path / "pairs.csv"
        pairs.write_text(reports.pairs_csv([(1.0, 1.1), (2.0, 1.9), (3.0, 3.0)]))
        svg = tmp_path / "scatter.svg"
        assert run(["report", "--pairs", pairs, "--svg", svg,
                    "--title", "demo"]) == 0
        ET.parse(svg)
        assert (tmp_path / "scatter_pairs.csv").read_text() == pairs.read_text()
