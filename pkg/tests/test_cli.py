import csv
import json

import numpy as np
import pytest

from anensolar.cli import main

SMALL = [
    "--set", "synth.n_locations=4",
    "--set", "synth.n_days=30",
    "--set", "anen.search_days=24",
    "--set", "anen.members=8",
]


def run_cli(args, capsys=None):
    rc = main([str(a) for a in args])
    return rc


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture()
def outdir(tmp_path):
    return tmp_path / "out"


def run_small_chain(outdir, extra=()):
    base = ["-o", str(outdir), *SMALL, *extra]
    assert run_cli([*base, "synth"]) == 0
    assert run_cli([*base, "anen"]) == 0
    assert run_cli([*base, "simulate", "--source", "ensemble"]) == 0
    assert run_cli([*base, "simulate", "--source", "analysis"]) == 0
    assert run_cli([*base, "verify"]) == 0


class TestPipeline:
    def test_chain_produces_report_and_manifest(self, outdir):
        run_small_chain(outdir)
        report = read_csv(outdir / "report.csv")
        assert report[0] == ["group", "rmse", "bias", "crps", "spread", "count"]
        assert len(report) > 1
        manifest = json.loads((outdir / "manifest.json").read_text())
        for command in ("synth", "anen", "simulate", "verify"):
            assert command in manifest
            assert "config_hash" in manifest[command]
        assert any(str(outdir / "report.csv") in k for k in manifest["verify"]["outputs"])

    def test_rerun_bit_identical(self, tmp_path):
        out = tmp_path / "a"
        run_small_chain(out)
        first_report = (out / "report.csv").read_bytes()
        first_power = (out / "power.ansr").read_bytes()
        first_manifest = (out / "manifest.json").read_bytes()
        run_small_chain(out)
        assert (out / "report.csv").read_bytes() == first_report
        assert (out / "power.ansr").read_bytes() == first_power
        # identical manifests imply identical outputs
        assert (out / "manifest.json").read_bytes() == first_manifest


class TestValidation:
    def test_bad_weights_named_in_error(self, outdir, capsys):
        assert run_cli(["-o", str(outdir), *SMALL, "synth"]) == 0
        rc = main(["-o", str(outdir), *SMALL, "anen", "--weights", "0.5,0.4,0.2,0.2,0.2"])
        assert rc == 2
        err = capsys.readouterr().err.strip().splitlines()[-1]
        payload = json.loads(err)
        assert payload["error"] == "config-validation"
        assert any("anen.weights" in p for p in payload["problems"])

    def test_all_problems_enumerated(self, outdir, capsys):
        rc = main([
            "-o", str(outdir), "anen",
            "--weights", "0.9,0.9,0.9,0.9,0.9",
            "--members", "0",
        ])
        assert rc == 2
        payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        text = " ".join(payload["problems"])
        assert "paths.forecasts" in text
        assert "paths.observations" in text
        assert len(payload["problems"]) >= 2

    def test_missing_input_fails_nonzero(self, outdir, capsys):
        rc = main(["-o", str(outdir), "sigma"])
        assert rc == 2


class TestOverrides:
    def test_flag_overrides_config_file(self, tmp_path, outdir):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("synth:\n  n_days: 9999\n")
        rc = main(["-c", str(cfg), "-o", str(outdir), "--set", "synth.n_days=12",
                   "--set", "synth.n_locations=2", "synth"])
        assert rc == 0
        from anensolar.tensorio import read_tensor
        fc = read_tensor(outdir / "forecasts.ansr")
        assert len(fc.init_times) == 12

    def test_env_overrides_file(self, tmp_path, outdir, monkeypatch):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("synth:\n  n_days: 9999\n  n_locations: 2\n")
        monkeypatch.setenv("ANENSOLAR_SYNTH__N_DAYS", "11")
        rc = main(["-c", str(cfg), "-o", str(outdir), "synth"])
        assert rc == 0
        from anensolar.tensorio import read_tensor
        fc = read_tensor(outdir / "forecasts.ansr")
        assert len(fc.init_times) == 11

    def test_seed_flag_changes_outputs(self, tmp_path):
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        assert run_cli(["-o", out1, *SMALL, "--seed", "1", "synth"]) == 0
        assert run_cli(["-o", out2, *SMALL, "--seed", "2", "synth"]) == 0
        assert (out1 / "forecasts.ansr").read_bytes() != (out2 / "forecasts.ansr").read_bytes()


class TestCommands:
    def test_sigma_command(self, outdir):
        assert run_cli(["-o", outdir, *SMALL, "synth"]) == 0
        assert run_cli(["-o", outdir, *SMALL, "sigma"]) == 0
        from anensolar.anen import SigmaTensor
        sigma = SigmaTensor.read(outdir / "sigma.ansr")
        assert sigma.values.shape == (5, 4, 24)
        assert np.all(sigma.values[np.isfinite(sigma.values)] >= 0)

    def test_cluster_command(self, outdir):
        assert run_cli(["-o", outdir, *SMALL, "synth"]) == 0
        assert run_cli(["-o", outdir, *SMALL, "cluster", "--clusters", "2"]) == 0
        rows = read_csv(outdir / "clustering.csv")
        assert rows[0] == ["location", "label"]
        labels = {int(r[1]) for r in rows[1:]}
        assert labels == {1, 2}
        assert len(rows) == 1 + 4

    def test_optimize_weights_ew(self, outdir):
        assert run_cli(["-o", outdir, *SMALL, "synth"]) == 0
        assert run_cli(["-o", outdir, *SMALL, "optimize-weights", "--strategy", "EW"]) == 0
        rows = read_csv(outdir / "weights.csv")
        assert rows[0] == ["location", "ghi", "temperature", "wind_speed", "albedo", "cloud_cover"]
        assert len(rows) == 1 + 4
        for row in rows[1:]:
            np.testing.assert_allclose([float(v) for v in row[1:]], 0.2)

    def test_anen_with_weights_file(self, outdir):
        assert run_cli(["-o", outdir, *SMALL, "synth"]) == 0
        assert run_cli(["-o", outdir, *SMALL, "optimize-weights", "--strategy", "EW"]) == 0
        rc = run_cli(["-o", outdir, *SMALL, "anen",
                      "--weights-file", str(outdir / "weights.csv")])
        assert rc == 0
        assert (outdir / "ensemble.ansr").exists()

    def test_report_pivots_verify_output(self, outdir, tmp_path):
        run_small_chain(outdir)
        ref = outdir / "report.csv"
        alt = tmp_path / "alt.csv"
        alt.write_bytes(ref.read_bytes())
        rc = run_cli(["-o", outdir, "report", "--labels", "anen,raw",
                      "--metric", "rmse", ref, alt])
        assert rc == 0
        wide = read_csv(outdir / "report_wide.csv")
        assert wide[0] == ["group", "rmse_anen", "rmse_raw"]
        source = {r[0]: r[1] for r in read_csv(ref)[1:]}
        for row in wide[1:]:
            assert row[1] == source[row[0]]
            assert row[2] == source[row[0]]

    def test_raw_baseline_comparison_flow(self, outdir):
        # anen ensemble vs raw deterministic forecast, verified per lead slot
        base = ["-o", str(outdir), *SMALL]
        assert run_cli([*base, "synth"]) == 0
        assert run_cli([*base, "anen"]) == 0
        assert run_cli([*base, "simulate", "--source", "ensemble"]) == 0
        assert run_cli([*base, "simulate", "--source", "forecast", "--output", "raw_power.ansr"]) == 0
        assert run_cli([*base, "simulate", "--source", "analysis"]) == 0
        assert run_cli([*base, "verify"]) == 0
        assert run_cli([*base, "--set", "paths.report=report_raw.csv",
                        "verify", "--power", "raw_power.ansr"]) == 0
        assert run_cli(["-o", str(outdir), "report", "--labels", "anen,raw",
                        str(outdir / "report.csv"), str(outdir / "report_raw.csv")]) == 0
        wide = read_csv(outdir / "report_wide.csv")
        assert wide[0] == ["group", "rmse_anen", "rmse_raw"]
        assert len(wide) > 5
        # both method columns populated with finite metric values per lead slot
        values = [(float(r[1]), float(r[2])) for r in wide[1:] if r[1] and r[2]]
        assert len(values) > 5
        assert all(a >= 0 and b >= 0 for a, b in values)

    def test_optimize_weights_rb_parallel(self, outdir):
        base = ["-o", str(outdir), *SMALL,
                "--set", "optimize.step=0.5",
                "--set", "optimize.opt_days=8",
                "--set", "optimize.total_samples=2",
                "--set", "anen.members=6"]
        assert run_cli([*base, "synth"]) == 0
        rc = run_cli([*base, "--parallel", "2", "optimize-weights", "--strategy", "RB"])
        assert rc == 0
        rows = read_csv(outdir / "weights.csv")
        assert len(rows) == 1 + 4
        for row in rows[1:]:
            vec = [float(v) for v in row[1:]]
            assert abs(sum(vec) - 1.0) < 1e-9
        assert (outdir / "clustering.csv").exists()

    def test_workflow_run_command(self, outdir, tmp_path):
        wf = tmp_path / "wf.yaml"
        wf.write_text(
            "worker_budget: 2\n"
            "pipelines:\n"
            "  - id: p0\n"
            "    stages:\n"
            "      - id: s0\n"
            "        tasks:\n"
            "          - id: t0\n"
            "            command: [echo, one]\n"
            "          - id: t1\n"
            "            command: [echo, two]\n"
            "      - id: s1\n"
            "        tasks:\n"
            "          - id: t2\n"
            "            command: [echo, three]\n"
        )
        rc = run_cli(["-o", outdir, "workflow", "run", wf])
        assert rc == 0
        log = (outdir / "events.log").read_text().strip().splitlines()
        assert len(log) == 9  # three tasks x three transitions
        assert all(len(line.split()) == 4 for line in log)

    def test_workflow_run_failure_exit_code(self, outdir, tmp_path):
        wf = tmp_path / "wf.yaml"
        wf.write_text(
            "worker_budget: 1\n"
            "pipelines:\n"
            "  - id: p0\n"
            "    stages:\n"
            "      - id: s0\n"
            "        tasks:\n"
            "          - id: t0\n"
            "            command: [sh, -c, 'exit 2']\n"
            "            max_retries: 0\n"
        )
        rc = run_cli(["-o", outdir, "workflow", "run", wf])
        assert rc == 1
