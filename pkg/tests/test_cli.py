import json
import subprocess
import sys

import numpy as np
import pytest

from mtsb.bicluster import bicluster_pipeline
from mtsb.cli import main
from mtsb.io import load_tensor_csv, read_matrix_csv, read_membership_csv


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--scenario", "I", "--p1", "20", "--q1", "20", "--seed", "3", "--out", str(d)]) == 0
    return d


def lines(capsys):
    return capsys.readouterr().out.strip().splitlines()


class TestSimulate:
    def test_outputs(self, simulated):
        s = load_tensor_csv(simulated / "series.csv")
        assert s.shape == (400, 60, 60)
        assert read_matrix_csv(simulated / "truth" / "Gamma.csv").shape == (60, 9)
        doc = json.loads((simulated / "truth" / "factor_numbers.json").read_text())
        assert doc == {"k0": 3, "k": 9, "r0": 2, "r": 6}
        labels, g = read_membership_csv(simulated / "truth" / "row_membership.csv")
        assert labels[0] == "r1" and g.tolist() == np.repeat([1, 2, 3], 20).tolist()


class TestBicluster:
    def test_recovers_truth(self, simulated, tmp_path, capsys):
        out = tmp_path / "bc"
        code = main(
            ["bicluster", str(simulated / "series.csv"), "--l0", "1", "--truth", str(simulated / "truth"), "--out", str(out)]
        )
        assert code == 0
        text = lines(capsys)
        assert text[0] == "factor numbers (k0,k,r0,r): 3 9 2 6"
        assert text[1] == "m_hat=3 n_hat=3"
        assert text[2].startswith("row misclustering=")
        rm = float(text[2].split()[1].split("=")[1])
        assert rm <= 0.05
        for name in ("row_membership.csv", "similarity_rows.csv", "R.csv", "ratios.csv", "row_gram_eigenvalues.csv"):
            assert (out / name).exists()
        S = read_matrix_csv(out / "similarity_cols.csv")
        np.testing.assert_allclose(S, S.T)

    def test_matches_library(self, simulated, tmp_path):
        out = tmp_path / "bc"
        fn = "3,9,2,6"
        assert main(["bicluster", str(simulated / "series.csv"), "--l0", "1", "--factor-numbers", fn, "--out", str(out)]) == 0
        X = load_tensor_csv(simulated / "series.csv")
        res, loadings, _ = bicluster_pipeline(X, 1, factor_numbers=(3, 9, 2, 6))
        _, rows = read_membership_csv(out / "row_membership.csv")
        _, cols = read_membership_csv(out / "col_membership.csv")
        np.testing.assert_array_equal(rows, res.row_membership)
        np.testing.assert_array_equal(cols, res.col_membership)
        np.testing.assert_array_equal(read_matrix_csv(out / "Gamma.csv"), loadings.Gamma)


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    d = tmp_path_factory.mktemp("small")
    assert main(["simulate", "--p1", "5", "--q1", "5", "--T", "80", "--seed", "2", "--out", str(d)]) == 0
    return d / "series.csv"


class TestOtherCommands:
    def test_factors(self, small, tmp_path, capsys):
        assert main(["factors", str(small), "--l0", "1", "--out", str(tmp_path)]) == 0
        vals = lines(capsys)[-1].split()
        assert len(vals) == 4 and all(v.isdigit() for v in vals)
        header = (tmp_path / "ratios.csv").read_text().splitlines()[0]
        assert header == "direction,j,eigenvalue,ratio,local_max,chosen"

    def test_loadings(self, small, tmp_path, capsys):
        assert main(["loadings", str(small), "--factor-numbers", "3,9,2,6", "--out", str(tmp_path)]) == 0
        R = read_matrix_csv(tmp_path / "R.csv")
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-10)

    def test_rolling(self, small, tmp_path, capsys):
        args = ["rolling", str(small), "--k0", "3", "--k", "9", "--r0", "2", "--r", "6", "--start", "76"]
        assert main(args + ["--l0", "1", "--out", str(tmp_path)]) == 0
        out = lines(capsys)
        assert len(out) == 1 and float(out[0]) > 0
        assert json.loads((tmp_path / "rolling.json").read_text())["n_evaluated"] == 5

    def test_replicate(self, tmp_path, capsys):
        args = ["replicate", "--p1", "4", "--q1", "4", "--T", "60", "--reps", "2", "--l0", "1,2", "--out", str(tmp_path)]
        assert main(args) == 0
        rows = [json.loads(x) for x in lines(capsys)]
        assert [r["l0"] for r in rows] == [1, 2]
        assert (tmp_path / "report.json").exists()

    def test_config_file(self, small, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"l0 = 2\noutdir = {tmp_path / 'o'}\n")
        assert main(["factors", str(small), "--config", str(cfg)]) == 0
        assert (tmp_path / "o" / "ratios.csv").exists()

    def test_threads_env(self, small, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("MTSB_THREADS", "1")
        assert main(["factors", str(small), "--l0", "1", "--out", str(tmp_path)]) == 0
        monkeypatch.setenv("MTSB_THREADS", "many")
        assert main(["factors", str(small), "--l0", "1", "--out", str(tmp_path)]) == 1


class TestErrors:
    def test_unknown_command(self, capsys):
        assert main(["frobnicate"]) == 2

    def test_unknown_flag(self, small, capsys):
        assert main(["factors", str(small), "--bogus"]) == 2

    def test_bad_factor_numbers(self, small, capsys):
        assert main(["loadings", str(small), "--factor-numbers", "1,2,3"]) == 2

    def test_missing_file(self, tmp_path, capsys):
        assert main(["factors", str(tmp_path / "none.csv")]) == 1
        err = capsys.readouterr().err
        assert "[ingest] IngestError" in err

    def test_impossible_factor_numbers(self, small, tmp_path, capsys):
        assert main(["loadings", str(small), "--factor-numbers", "30,30,1,1", "--out", str(tmp_path)]) == 1
        assert "[factor_numbers]" in capsys.readouterr().err

    def test_console_script(self, small, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "mtsb.cli", "factors", str(small), "--l0", "1", "--out", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert len(proc.stdout.split()) == 4
