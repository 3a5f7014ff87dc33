import json
from pathlib import Path

import numpy as np
import pytest

from sphereflow import __version__
from sphereflow.config import RunConfig, config_digest, load_config
from sphereflow.errors import ConfigurationError
from sphereflow.rng import derive_substream
from sphereflow.runner import exit_status_from_verdicts, run, sweep
from sphereflow.statistics import OBSERVABLE_COLUMNS, CheckResult


def small_config(tmp_path, **overrides):
    raw = {
        "model": {"kind": "llg_fluc_diss", "nu": 0.5,
                  "h": {"family": "cosine", "alpha": 0.1, "k": 1}},
        "grid": {"n": 64},
        "scheme": {"dt": 1e-3},
        "time": {"t_burn_in": 1.0, "t_total": 5.0, "sample_stride": 10},
        "ensemble": {"n_trajectories": 6, "master_seed": 3},
        "outputs": {"dir": str(tmp_path / "out")},
        "checks": [
            {"name": "moment_identity"},
            {"name": "positive_gradient", "floor": 1e-8, "max_trajectories": 6},
        ],
    }
    for key, val in overrides.items():
        raw[key] = val
    return RunConfig.from_dict(raw)


class TestConfig:
    def test_yaml_roundtrip(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text(
            """
model:
  kind: llg_fluc_diss
  nu: 0.5
  h: {family: cosine, alpha: 0.1, k: 1}
grid: {n: 64}
scheme: {dt: 2.0e-4}
time: {t_burn_in: 1.0, t_total: 2.0, sample_stride: 5}
ensemble: {n_trajectories: 4, master_seed: 7}
"""
        )
        cfg = load_config(path)
        assert cfg.model_kind == "llg_fluc_diss"
        assert cfg.grid_length == pytest.approx(2 * np.pi)  # implied by the cosine family
        assert cfg.dt == 2e-4

    def test_all_errors_reported_together(self):
        with pytest.raises(ConfigurationError) as err:
            RunConfig.from_dict(
                {
                    "model": {"kind": "nonsense", "nu": 3.0, "h": {"family": "what"}},
                    "grid": {"n": 1},
                    "scheme": {"dt": -1.0},
                    "time": {"t_burn_in": 5.0, "t_total": 1.0},
                    "ensemble": {"n_trajectories": 0},
                }
            )
        msg = str(err.value)
        for fragment in ("model.kind", "model.nu", "grid.n", "scheme.dt", "t_total", "n_trajectories"):
            assert fragment in msg

    def test_sweep_must_decrease(self, tmp_path):
        with pytest.raises(ConfigurationError, match="strictly decreasing"):
            small_config(tmp_path, sweep={"nu_values": [0.125, 0.25]})

    def test_empty_sweep_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError, match="non-empty"):
            small_config(tmp_path, sweep={"nu_values": []})

    def test_unknown_check_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError, match="unknown check"):
            small_config(tmp_path, checks=[{"name": "vibes"}])

    def test_unknown_section_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError, match="unknown top-level"):
            small_config(tmp_path, extra={"a": 1})

    def test_digest_stable_and_sensitive(self, tmp_path):
        cfg = small_config(tmp_path)
        assert config_digest(cfg) == config_digest(cfg)
        import dataclasses

        other = dataclasses.replace(cfg, master_seed=4)
        assert config_digest(other) != config_digest(cfg)


class TestRun:
    def test_artifacts_and_schema(self, tmp_path):
        cfg = small_config(tmp_path)
        res = run(cfg, threads=1)
        stats = Path(res.stats_path).read_text().splitlines()
        assert stats[0] == f"# config_digest={res.digest}"
        assert stats[1] == f"# code_version={__version__}"
        header = stats[2].split(",")
        assert header[:3] == ["run_id", "nu", "t"]
        expected_cols = 3 + 3 * len(OBSERVABLE_COLUMNS)
        assert len(header) == expected_cols
        for name in OBSERVABLE_COLUMNS:
            assert f"{name}_mean" in header
            assert f"{name}_stderr" in header
            assert f"{name}_count" in header
        # one row per sampled time
        assert len(stats) - 3 == len(res.times)

        doc = json.loads(Path(res.verdicts_path).read_text())
        assert doc["config_digest"] == res.digest
        assert doc["code_version"] == __version__
        for c in doc["checks"]:
            for key in ("check_name", "target", "estimate", "stderr", "allowance", "verdict"):
                assert key in c

    def test_rerun_byte_identical(self, tmp_path):
        cfg = small_config(tmp_path)
        run(cfg, threads=1, out_dir=str(tmp_path / "a"))
        run(cfg, threads=1, out_dir=str(tmp_path / "b"))
        assert (tmp_path / "a/stats.csv").read_bytes() == (tmp_path / "b/stats.csv").read_bytes()
        assert (tmp_path / "a/verdicts.json").read_bytes() == (tmp_path / "b/verdicts.json").read_bytes()

    def test_threads_do_not_change_bytes(self, tmp_path):
        cfg = small_config(tmp_path)
        run(cfg, threads=1, out_dir=str(tmp_path / "t1"))
        run(cfg, threads=2, out_dir=str(tmp_path / "t2"))
        assert (tmp_path / "t1/stats.csv").read_bytes() == (tmp_path / "t2/stats.csv").read_bytes()

    def test_seed_changes_results(self, tmp_path):
        import dataclasses

        cfg = small_config(tmp_path)
        r1 = run(cfg, threads=1, out_dir=str(tmp_path / "s1"))
        r2 = run(dataclasses.replace(cfg, master_seed=99), threads=1, out_dir=str(tmp_path / "s2"))
        assert r1.stationary.mean("grad_l2_sq") != r2.stationary.mean("grad_l2_sq")

    def test_positive_gradient_skipped_for_constant_h(self, tmp_path):
        cfg = small_config(
            tmp_path,
            model={"kind": "llg_fluc_diss", "nu": 0.5, "h": {"family": "constant", "value": 0.5}},
            grid={"length": 6.283185307179586, "n": 64},
            checks=[{"name": "positive_gradient"}],
        )
        res = run(cfg, threads=1)
        assert all(c.check_name != "positive_gradient" for c in res.checks)
        assert res.exit_status == 0

    def test_snapshots_written(self, tmp_path):
        cfg = small_config(
            tmp_path,
            time={"t_burn_in": 0.0, "t_total": 0.2, "sample_stride": 10},
            outputs={"dir": str(tmp_path / "snap"), "snapshots": True, "snapshot_stride": 5},
            checks=[],
        )
        run(cfg, threads=1)
        field_csv = (tmp_path / "snap" / "field_snapshots.csv").read_text().splitlines()
        assert field_csv[2] == "t,x,u1,u2,u3"
        assert (tmp_path / "snap" / "curve_snapshots.csv").exists()

    def test_sme_constant_field_all_observables_flat(self, tmp_path):
        cfg = small_config(
            tmp_path,
            model={"kind": "sme", "nu": 0.0, "h": {"family": "constant", "value": 0.0}},
            grid={"length": 6.283185307179586, "n": 64},
            time={"t_burn_in": 0.0, "t_total": 0.5, "sample_stride": 10},
            ensemble={"n_trajectories": 2, "master_seed": 5},
            checks=[],
        )
        res = run(cfg, threads=1)
        assert np.all(res.time_mean[:, 0] == 0.0)  # gradient stays identically zero
        np.testing.assert_array_equal(res.time_mean[0], res.time_mean[-1])


class TestSweep:
    def test_sweep_outputs(self, tmp_path):
        cfg = small_config(
            tmp_path,
            sweep={"nu_values": [0.5, 0.25]},
            ensemble={"n_trajectories": 4, "master_seed": 3},
        )
        res = sweep(cfg, threads=1)
        assert len(res.runs) == 2
        assert Path(res.summary_path).exists()
        summary = Path(res.summary_path).read_text().splitlines()
        assert summary[2].startswith("nu,cross_lap_l2_sq_mean")
        doc = json.loads((Path(res.summary_path).parent / "summary.json").read_text())
        assert doc["nu_values"] == [0.5, 0.25]

    def test_sweep_requires_list(self, tmp_path):
        cfg = small_config(tmp_path)
        with pytest.raises(ConfigurationError):
            sweep(cfg, threads=1)

    def test_sweep_constant_h_keeps_gradient_zero(self, tmp_path):
        # constant h from a constant field: the noise is one global rotation,
        # so the gradient never appears at any viscosity
        cfg = small_config(
            tmp_path,
            model={"kind": "llg_fluc_diss", "nu": 0.5, "h": {"family": "constant", "value": 0.5}},
            grid={"length": 6.283185307179586, "n": 64},
            sweep={"nu_values": [0.5]},
            checks=[{"name": "moment_identity"}],
        )
        res = sweep(cfg, threads=1)
        st = res.runs[0].stationary
        assert st.mean("grad_l2_sq") <= 1e-25
        assert res.runs[0].checks[0].verdict == "pass"  # target 0, estimate ~0


class TestExitStatus:
    def make(self, verdict):
        return CheckResult("x", 0.0, 0.0, None, None, verdict)

    def test_pass_and_report_ok(self):
        assert exit_status_from_verdicts([self.make("pass"), self.make("report")], strict=False) == 0

    def test_fail_fails(self):
        assert exit_status_from_verdicts([self.make("pass"), self.make("fail")], strict=False) == 1

    def test_inconclusive_ok_unless_strict(self):
        checks = [self.make("inconclusive")]
        assert exit_status_from_verdicts(checks, strict=False) == 0
        assert exit_status_from_verdicts(checks, strict=True) == 1


class TestSubstreams:
    def test_same_pair_same_increments(self):
        a = derive_substream(42, 7).standard_normal(1000)
        b = derive_substream(42, 7).standard_normal(1000)
        np.testing.assert_array_equal(a, b)

    def test_different_indices_uncorrelated(self):
        a = derive_substream(42, 0).standard_normal(20000)
        b = derive_substream(42, 1).standard_normal(20000)
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 0.03
        assert np.abs(a - b).max() > 1e-3

    def test_different_seeds_differ(self):
        a = derive_substream(1, 0).standard_normal(10)
        b = derive_substream(2, 0).standard_normal(10)
        assert np.abs(a - b).max() > 1e-6

    def test_equidistribution(self):
        # crude uniformity check of the normal CDF over one substream
        from math import erf

        x = derive_substream(0, 0).standard_normal(50000)
        u = 0.5 * (1.0 + np.vectorize(erf)(x / np.sqrt(2.0)))
        counts, _ = np.histogram(u, bins=20, range=(0, 1))
        expected = len(u) / 20
        chi2 = ((counts - expected) ** 2 / expected).sum()
        assert chi2 < 43.8  # chi-square_{0.999, 19}
