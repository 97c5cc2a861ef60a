"""Tests for the ``mdl`` command-line runner."""

import json

import pytest

from mmsediv import cli


def _spec(tmp_path, name="spec.json", **data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


SMALL = dict(M=2, N=2, R=4, snr={"start_db": 0, "stop_db": 20, "step_db": 5}, trials=20_000, master_seed=11)


class TestSpec:
    def test_grid_inclusive(self):
        assert cli.snr_grid(0, 10, 2.5) == [0.0, 2.5, 5.0, 7.5, 10.0]

    def test_grid_step(self):
        with pytest.raises(cli.ConfigError) as exc:
            cli.snr_grid(0, 10, 0)
        assert exc.value.field == "snr.step_db"

    def test_seed_range(self):
        with pytest.raises(cli.ConfigError) as exc:
            cli.parse_spec({"M": 1, "N": 1, "R": 1, "master_seed": -1})
        assert exc.value.field == "master_seed"


class TestFormula:
    def test_three_by_three(self, tmp_path, capsys):
        code = cli.run(["formula", "--spec", _spec(tmp_path, M=3, N=3, R=3)])
        out = json.loads(capsys.readouterr().out)
        assert code == 0 and out["d"] == 4
        assert [round(t["R"], 5) for t in out["thresholds"]] == [1.75489, 4.75489]

    def test_missing_rate(self, tmp_path, capsys):
        code = cli.run(["formula", "--spec", _spec(tmp_path, M=3, N=3)])
        assert code == 1 and "R" in capsys.readouterr().err

    def test_bad_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert cli.run(["formula", "--spec", str(path)]) == 1

    def test_missing_file(self, tmp_path):
        assert cli.run(["formula", "--spec", str(tmp_path / "nope.json")]) == 1

    def test_missing_spec(self, capsys):
        assert cli.run(["formula"]) == 1
        assert "spec" in capsys.readouterr().err

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            cli.run(["plot"])
        assert exc.value.code == 1

    def test_invalid_field_named(self, tmp_path, capsys):
        code = cli.run(["formula", "--spec", _spec(tmp_path, M=2, N=2, R=1, scheme="ofdm")])
        assert code == 1 and "scheme" in capsys.readouterr().err


class TestSweep:
    def test_outputs_roundtrip(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert cli.run(["sweep", "--spec", _spec(tmp_path, **SMALL), "--out", str(out)]) == 0
        rows = (out / "sweep.csv").read_text().splitlines()
        assert rows[0] == "snr_db,trials,hits,p_hat,ci_low,ci_high" and len(rows) == 6
        prov = json.loads((out / "sweep.json").read_text())
        assert prov["master_seed"] == 11
        for line, point in zip(rows[1:], prov["points"]):
            snr, trials, hits = line.split(",")[:3]
            assert (float(snr), int(trials), int(hits)) == (point["snr_db"], point["trials"], point["hits"])

    def test_threads_invariant(self, tmp_path):
        spec = _spec(tmp_path, **SMALL)
        cli.run(["sweep", "--spec", spec, "--out", str(tmp_path / "a"), "--threads", "1"])
        cli.run(["sweep", "--spec", spec, "--out", str(tmp_path / "b"), "--threads", "8"])
        assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()

    def test_env_threads(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MDL_THREADS", "4")
        spec = _spec(tmp_path, **SMALL)
        assert cli.run(["sweep", "--spec", spec, "--out", str(tmp_path / "c")]) == 0

    def test_seed_override(self, tmp_path):
        spec = _spec(tmp_path, **SMALL)
        cli.run(["sweep", "--spec", spec, "--out", str(tmp_path), "--seed", "99"])
        assert json.loads((tmp_path / "sweep.json").read_text())["master_seed"] == 99

    def test_bad_threads(self, tmp_path):
        assert cli.run(["sweep", "--spec", _spec(tmp_path, **SMALL), "--threads", "0"]) == 1

    def test_zf_wide(self, tmp_path, capsys):
        spec = _spec(tmp_path, **{**SMALL, "M": 3, "receiver": "zf"})
        assert cli.run(["sweep", "--spec", spec, "--out", str(tmp_path)]) == 1
        assert "receiver" in capsys.readouterr().err

    def test_ser(self, tmp_path):
        assert cli.run(["ser", "--spec", _spec(tmp_path, **SMALL), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "ser.csv").exists()

    def test_ser_block_scheme(self, tmp_path, capsys):
        spec = _spec(tmp_path, **{**SMALL, "M": 1, "N": 1, "scheme": "cp", "nu": 1, "L_d": 2})
        assert cli.run(["ser", "--spec", spec]) == 1
        assert "scheme" in capsys.readouterr().err


class TestSlope:
    BASE = dict(M=1, N=1, R=1, snr={"start_db": 10, "stop_db": 30, "step_db": 5},
                trials=200_000, master_seed=3, window=[10, 30])

    def test_pass(self, tmp_path):
        spec = _spec(tmp_path, **self.BASE, tolerance=0.15)
        assert cli.run(["slope", "--spec", spec, "--out", str(tmp_path)]) == 0
        verdict = json.loads((tmp_path / "verdict.json").read_text())
        assert verdict["pass"] and verdict["predicted"] == 1

    def test_fail(self, tmp_path):
        spec = _spec(tmp_path, **self.BASE, predicted=3, tolerance=0.25)
        assert cli.run(["slope", "--spec", spec, "--out", str(tmp_path)]) == 3

    def test_insufficient_data(self, tmp_path, capsys):
        spec = _spec(tmp_path, **{**self.BASE, "trials": 100})
        assert cli.run(["slope", "--spec", spec, "--out", str(tmp_path)]) == 2
        assert "hit floor" in capsys.readouterr().err


class TestVerifyAndFigure:
    def test_verify_default(self, tmp_path, capsys):
        assert cli.run(["verify", "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "verify.json").read_text())
        assert report["passed"] and len(report["suites"]) == 7

    def test_verify_failure_exit(self, tmp_path, monkeypatch):
        from mmsediv import verification
        real = verification.run_all

        def broken(**kw):
            res = real(sandwich_trials=100)
            return res[:-1] + [verification.SuiteResult("mmse_vs_zf", False, 1, 1, "forced")]

        monkeypatch.setattr(verification, "run_all", broken)
        assert cli.run(["verify"]) == 3

    def test_figure_one(self, tmp_path):
        spec = _spec(tmp_path, M=1, N=1, R=1, trials=200,
                     snr={"start_db": 0, "stop_db": 10, "step_db": 5})
        assert cli.run(["figure", "fig1", "--spec", spec, "--out", str(tmp_path)]) == 0
        manifest = json.loads((tmp_path / "fig1_manifest.json").read_text())
        assert sorted(c["R"] for c in manifest["curves"]) == [1, 1.5, 2, 3, 4.5, 4.8, 5, 10]
        assert all(c["M"] == 3 and c["N"] == 3 for c in manifest["curves"])

    def test_figure_two_has_bounds(self, tmp_path):
        spec = _spec(tmp_path, M=1, N=1, R=1, trials=100,
                     snr={"start_db": 0, "stop_db": 5, "step_db": 5})
        assert cli.run(["figure", "fig2", "--spec", spec, "--out", str(tmp_path)]) == 0
        manifest = json.loads((tmp_path / "fig2_manifest.json").read_text())
        assert {c["event"] for c in manifest["curves"]} == {"outage", "jensen_upper", "jensen_lower"}

    def test_unknown_figure(self, tmp_path):
        assert cli.run(["figure", "fig9", "--out", str(tmp_path)]) == 1

    def test_figure_needs_name(self, tmp_path):
        assert cli.run(["figure", "--out", str(tmp_path)]) == 1
