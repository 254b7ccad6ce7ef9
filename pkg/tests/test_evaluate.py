import csv
import json

import numpy as np
import pytest

import mtsb.evaluate as ev
from mtsb.core import LoadingSet, space_distance
from mtsb.estimate import initial_global_loadings
from mtsb.exceptions import ConfigError, DimensionError
from mtsb.simulate import generate, make_scenario_preset
from mtsb.spectral import residual_series
from oracles import random_orthonormal


@pytest.fixture(scope="module")
def small_spec():
    return make_scenario_preset("I", 6, 6, seed=3, T=120)


class TestReplications:
    def test_bit_reproducible(self, small_spec):
        a = ev.run_replications(small_spec, 2, l0_set=(1, 2))
        b = ev.run_replications(small_spec, 2, l0_set=(1, 2))
        assert a.raw == b.raw
        assert a.to_json() == b.to_json()

    def test_frequencies_match_raw_counts(self, small_spec):
        rep = ev.run_replications(small_spec, 4, l0_set=(1,))
        row = rep.row(1)
        hits = sum(r["k0_hat"] == small_spec.k0 for r in rep.raw if not r["failed"])
        assert row["freq_k0"] == hits / row["n_ok"]
        assert row["n_ok"] + row["n_failed"] == 4
        for key in ("freq_k0", "freq_k", "freq_r0", "freq_r", "freq_k_and_r"):
            assert 0.0 <= row[key] <= 1.0
        # sds are NaN only when no replication qualifies (e.g. no exact m_hat)
        assert all(np.isnan(row[k]) or row[k] >= 0 for k in row if k.endswith("_sd"))

    def test_failures_counted(self, small_spec, monkeypatch):
        calls = {"n": 0}
        real = ev.estimate_cluster_loadings

        def flaky(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 1:
                raise DimensionError("boom")
            return real(*args, **kwargs)

        monkeypatch.setattr(ev, "estimate_cluster_loadings", flaky)
        rep = ev.run_replications(small_spec, 3)
        row = rep.row(1)
        assert row["n_failed"] == 1 and row["n_ok"] == 2
        failed = [r for r in rep.raw if r["failed"]]
        assert "DimensionError: boom" in failed[0]["error"]

    def test_seeds_are_independent(self):
        seeds = ev.replication_seeds(0, 5)
        assert len(set(seeds)) == 5
        assert seeds == ev.replication_seeds(0, 5)

    def test_write(self, small_spec, tmp_path):
        rep = ev.run_replications(small_spec, 1)
        rep.write(tmp_path)
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["n_reps"] == 1 and doc["rows"][0]["l0"] == 1
        with open(tmp_path / "report.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["metric"] for r in rows} >= {"freq_k0", "dist_R_mean", "acc_m_mean"}
        assert (tmp_path / "replications.csv").exists()

    def test_invalid_reps(self, small_spec):
        with pytest.raises(ConfigError):
            ev.run_replications(small_spec, 0)


class TestReconstruct:
    def test_zero_series(self, rng):
        ls = LoadingSet(
            random_orthonormal(rng, 4, 1),
            random_orthonormal(rng, 3, 1),
            random_orthonormal(rng, 4, 1),
            random_orthonormal(rng, 3, 1),
        )
        assert not ev.reconstruct(np.zeros((5, 4, 3)), ls).any()

    def test_noiseless_strong_only(self):
        spec = make_scenario_preset("I", 5, 5, seed=1, T=50, noise_innovation_variance=0.0, weak_scale=0.0)
        X, truth = generate(spec)
        ls = LoadingSet.strong_only(np.linalg.qr(truth.R)[0], np.linalg.qr(truth.C)[0])
        assert np.max(np.abs(ev.reconstruct(X, ls) - X.data)) < 1e-8

    def test_true_loadings_recover_noiseless_signal(self):
        spec = make_scenario_preset("I", 6, 6, seed=2, T=40, noise_innovation_variance=0.0, orthogonal_strong=True)
        X, truth = generate(spec)
        q = lambda A: np.linalg.qr(A)[0]  # noqa: E731
        ls = LoadingSet(q(truth.R), q(truth.C), q(truth.Gamma), q(truth.Lambda))
        assert np.max(np.abs(ev.reconstruct(X, ls) - X.data)) < 1e-8

    def test_contraction(self, rng):
        X = rng.standard_normal((6, 5, 4))
        ls = LoadingSet(
            random_orthonormal(rng, 5, 2),
            random_orthonormal(rng, 4, 1),
            random_orthonormal(rng, 5, 2),
            random_orthonormal(rng, 4, 2),
        )
        Xh = ev.reconstruct(X, ls)
        Y = residual_series(X, ls.R, ls.C)
        for t in range(6):
            assert np.linalg.norm(Xh[t]) <= np.linalg.norm(X[t]) + np.linalg.norm(Y[t]) + 1e-12

    def test_dimension_mismatch(self, rng):
        ls = LoadingSet.strong_only(random_orthonormal(rng, 4, 1), random_orthonormal(rng, 3, 1))
        with pytest.raises(DimensionError):
            ev.reconstruct(np.zeros((3, 5, 3)), ls)


class TestBaselines:
    def test_acce_equals_initial_step(self, small_spec):
        X, _ = generate(small_spec)
        ls = ev.baseline_loadings(X, "acce_baseline", 3, 2, 1)
        R0, C0 = initial_global_loadings(X, 3, 2, 1)
        np.testing.assert_array_equal(ls.R, R0)
        np.testing.assert_array_equal(ls.C, C0)
        assert ls.Gamma.shape == (small_spec.p, 0)

    def test_pca_on_iid_data_is_orthonormal(self, rng):
        X = rng.standard_normal((30, 6, 5))
        ls = ev.baseline_loadings(X, "pca_baseline", 2, 2)
        np.testing.assert_allclose(ls.R.T @ ls.R, np.eye(2), atol=1e-10)

    @pytest.mark.parametrize("method", ["acce_baseline", "pca_baseline"])
    def test_noiseless_exact(self, method):
        spec = make_scenario_preset("I", 6, 6, seed=7, T=80, noise_innovation_variance=0.0, weak_scale=0.0)
        X, truth = generate(spec)
        ls = ev.baseline_loadings(X, method, 3, 2, 1)
        assert space_distance(ls.R, truth.R) < 1e-6
        assert space_distance(ls.C, truth.C) < 1e-6

    def test_unknown(self, rng):
        with pytest.raises(ConfigError):
            ev.baseline_loadings(rng.standard_normal((5, 3, 3)), "pe", 1, 1)


class TestRolling:
    def test_zero_series(self):
        for method in ev.METHODS:
            rep = ev.rolling_validation(np.zeros((50, 4, 4)), method, (1, 1, 1, 1), 45, l0=1)
            assert rep.mse == 0.0 and rep.n_evaluated == 6

    def test_normalizers(self):
        X, _ = generate(make_scenario_preset("I", 5, 5, seed=3, T=60))
        rep = ev.rolling_validation(X, "ours", (3, 6, 2, 4), 56, l0=1)
        assert rep.n_evaluated == 5
        total = rep.mse * 5
        assert rep.mse_full_normalizer == pytest.approx(total / 60)
        assert np.mean(rep.per_time) == pytest.approx(rep.mse)

    def test_rotation_invariance(self, rng):
        X, _ = generate(make_scenario_preset("I", 4, 4, seed=5, T=50))
        Q = random_orthonormal(rng, X.p, X.p)
        rotated = np.einsum("ap,tpq->taq", Q, X.data)
        for method in ("acce_baseline", "ours"):
            a = ev.rolling_validation(X, method, (3, 3, 2, 2), 48, l0=1)
            b = ev.rolling_validation(rotated, method, (3, 3, 2, 2), 48, l0=1)
            assert a.mse == pytest.approx(b.mse, rel=1e-6)

    @pytest.mark.parametrize("start", [40, 10, 51])
    def test_start_out_of_range(self, start):
        with pytest.raises(ConfigError):
            ev.rolling_validation(np.zeros((50, 3, 3)), "ours", (1, 1, 1, 1), start)

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            ev.rolling_validation(np.zeros((50, 3, 3)), "pe", (1, 1, 1, 1), 45)
