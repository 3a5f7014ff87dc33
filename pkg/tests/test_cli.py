import json

import pytest

from sphereflow.cli import main

CONFIG = """
model:
  kind: llg_fluc_diss
  nu: 0.5
  h: {family: cosine, alpha: 0.1, k: 1}
grid: {n: 64}
initial: {kind: great_circle_profile, amplitude: 0.5}
scheme: {dt: 1.0e-3}
time: {t_burn_in: 0.5, t_total: 3.0, sample_stride: 10}
ensemble: {n_trajectories: 4, master_seed: 11}
outputs: {dir: "%s"}
checks:
  - {name: positive_gradient, floor: 1.0e-8, max_trajectories: 4}
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(CONFIG % (tmp_path / "out"))
    return path


class TestCli:
    def test_run(self, config_path, tmp_path, capsys):
        rc = main(["run", "--config", str(config_path), "--threads", "1"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "positive_gradient" in out
        assert (tmp_path / "out" / "stats.csv").exists()
        assert (tmp_path / "out" / "verdicts.json").exists()

    def test_run_out_override(self, config_path, tmp_path):
        rc = main(["run", "--config", str(config_path), "--threads", "1",
                   "--out", str(tmp_path / "elsewhere")])
        assert rc == 0
        assert (tmp_path / "elsewhere" / "stats.csv").exists()

    def test_seed_override_changes_digest(self, config_path, tmp_path):
        main(["run", "--config", str(config_path), "--threads", "1",
              "--out", str(tmp_path / "a")])
        main(["run", "--config", str(config_path), "--threads", "1", "--seed", "999",
              "--out", str(tmp_path / "b")])
        da = json.loads((tmp_path / "a/verdicts.json").read_text())["config_digest"]
        db = json.loads((tmp_path / "b/verdicts.json").read_text())["config_digest"]
        assert da != db

    def test_bound_prints_reference_comparison(self, capsys):
        rc = main(["bound"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "0.2298" in out
        assert "0.2283" in out
        assert "lambda*" in out

    def test_verify_bound(self, capsys):
        rc = main(["verify", "bound"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "suite bound: PASS" in out

    def test_verify_identities(self, capsys):
        rc = main(["verify", "identities"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "suite identities: PASS" in out

    def test_transform(self, config_path, tmp_path, capsys):
        rc = main(["transform", "--config", str(config_path),
                   "--out", str(tmp_path / "tr"), "--evolve", "0.1"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "curve-flow residual" in out
        hashimoto = (tmp_path / "tr" / "hashimoto.csv").read_text().splitlines()
        assert hashimoto[2] == "x,k,tau,q_re,q_im,defined"
        assert (tmp_path / "tr" / "curve.csv").exists()

    def test_bad_config_reports_all_errors(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("model: {kind: bogus}\nscheme: {dt: -1}\ntime: {t_total: 0}\n")
        rc = main(["run", "--config", str(path)])
        err = capsys.readouterr().err
        assert rc == 2
        assert "model.kind" in err
        assert "scheme.dt" in err

    def test_unknown_suite_rejected(self):
        with pytest.raises(SystemExit):
            main(["verify", "nonsense"])
