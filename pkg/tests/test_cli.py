"""CLI contract tests: artifacts, determinism, exit codes, env overrides.

All invocations go through cli.main(argv) in process; exit codes follow
the contract 0 ok / 1 config / 2 invariant / 3 statistics.
"""

import json
import os

import pytest
import yaml

from pulsecollapse import cli

CONFIG_DIR = os.path.join(os.path.dirname(cli.__file__), "configs")


def cfg_path(name):
    return os.path.join(CONFIG_DIR, name)


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def write_yaml(tmp_path, name, mapping):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(mapping))
    return str(path)


def load_yaml(name):
    with open(cfg_path(name)) as fh:
        return yaml.safe_load(fh)


class TestRun:
    def test_writes_all_artifacts(self, tmp_path):
        out = tmp_path / "r"
        code = cli.main(["run", "--config", cfg_path("interaction.yaml"), "--out", str(out)])
        assert code == 0
        for name in ("trajectory.csv", "events.json", "summary.json", "manifest.json"):
            assert (out / name).exists()

    def test_rerun_is_byte_identical_outside_manifest(self, tmp_path):
        """Determinism contract: only the manifest may differ (timestamp)."""
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert cli.main(["run", "--config", cfg_path("interaction.yaml"), "--out", str(out)]) == 0
        for name in ("trajectory.csv", "events.json", "summary.json"):
            assert read(out1 / name) == read(out2 / name)

    def test_timestamp_only_in_manifest(self, tmp_path):
        out = tmp_path / "r"
        cli.main(["run", "--config", cfg_path("interaction.yaml"), "--out", str(out)])
        manifest = json.loads(read(out / "manifest.json"))
        assert "created_utc" in manifest
        for name in ("trajectory.csv", "events.json", "summary.json"):
            assert b"created_utc" not in read(out / name)

    def test_events_records_rng_draws(self, tmp_path):
        out = tmp_path / "r"
        cli.main(["run", "--config", cfg_path("interaction.yaml"), "--out", str(out)])
        events = json.loads(read(out / "events.json"))
        assert len(events) == 1
        assert len(events[0]["rng_draws"]) == 2
        assert all(0 <= d < 1 for d in events[0]["rng_draws"])

    def test_trajectory_floats_have_17_significant_digits(self, tmp_path):
        out = tmp_path / "r"
        cli.main(["run", "--config", cfg_path("interaction.yaml"), "--out", str(out)])
        lines = read(out / "trajectory.csv").decode().splitlines()
        header = lines[0].split(",")
        assert header[0] == "t"
        assert "cumulative_hit_budget" in header
        # a representative irrational-ish value must round-trip
        row = lines[40].split(",")
        assert float(row[0]) == float("%.17g" % float(row[0]))

    def test_seed_flag_changes_events(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cli.main(["run", "--config", cfg_path("interaction.yaml"), "--out", str(out1)])
        cli.main(["run", "--config", cfg_path("interaction.yaml"), "--seed", "99", "--out", str(out2)])
        assert read(out1 / "events.json") != read(out2 / "events.json")

    def test_refuses_nonempty_out_without_force(self, tmp_path):
        out = tmp_path / "r"
        assert cli.main(["run", "--config", cfg_path("interaction.yaml"), "--out", str(out)]) == 0
        assert cli.main(["run", "--config", cfg_path("interaction.yaml"), "--out", str(out)]) == 1
        assert (
            cli.main(
                ["run", "--config", cfg_path("interaction.yaml"), "--out", str(out), "--force"]
            )
            == 0
        )

    def test_emit_flags_suppress_files(self, tmp_path):
        out = tmp_path / "r"
        cli.main(
            [
                "run",
                "--config",
                cfg_path("interaction.yaml"),
                "--out",
                str(out),
                "--no-trajectory",
                "--no-events",
            ]
        )
        assert not (out / "trajectory.csv").exists()
        assert not (out / "events.json").exists()
        assert (out / "summary.json").exists()

    def test_drift_run_writes_trajectory(self, tmp_path):
        out = tmp_path / "r"
        assert cli.main(["run", "--config", cfg_path("pulse_drift.yaml"), "--out", str(out)]) == 0
        assert (out / "trajectory.csv").exists()


class TestExitCodes:
    def test_unknown_key_exits_1_and_names_it(self, tmp_path, capsys):
        mapping = load_yaml("interaction.yaml")
        mapping["scenario"]["typo_key"] = 3
        path = write_yaml(tmp_path, "bad.yaml", mapping)
        assert cli.main(["run", "--config", path, "--out", str(tmp_path / "o")]) == 1
        assert "typo_key" in capsys.readouterr().err

    def test_missing_config_exits_1(self, tmp_path):
        assert cli.main(["run", "--config", str(tmp_path / "no.yaml"), "--out", str(tmp_path / "o")]) == 1

    def test_guard_off_drift_injection_exits_2_naming_rule4(self, tmp_path, capsys):
        mapping = load_yaml("pulse_drift.yaml")
        mapping["debug"] = {"intra_ready_transfer": True}
        path = write_yaml(tmp_path, "inj.yaml", mapping)
        code = cli.main(["run", "--config", path, "--guard", "off", "--out", str(tmp_path / "o")])
        assert code == 2
        assert "Rule4Violation" in capsys.readouterr().err

    def test_coarse_grid_exits_2_naming_it(self, tmp_path, capsys):
        mapping = load_yaml("interaction.yaml")
        mapping["pulses"]["conscious_sigma"] = 0.15
        path = write_yaml(tmp_path, "coarse.yaml", mapping)
        assert cli.main(["verify", "--config", path, "--out", str(tmp_path / "o")]) == 2
        assert "GridTooCoarse" in capsys.readouterr().err

    def test_tampered_phantom_exits_2_naming_the_invariant(self, tmp_path, capsys):
        mapping = load_yaml("pulse_drift.yaml")
        mapping["debug"] = {"tamper_phantom": True}
        path = write_yaml(tmp_path, "tamper.yaml", mapping)
        assert cli.main(["verify", "--config", path, "--out", str(tmp_path / "o")]) == 2
        assert "phantom-freeze" in capsys.readouterr().err

    def test_biased_site_selection_exits_3(self, tmp_path, capsys):
        mapping = load_yaml("interaction.yaml")
        mapping["debug"] = {"bias_site_selection": True}
        mapping["scenario"]["trials"] = 20_000
        path = write_yaml(tmp_path, "biased.yaml", mapping)
        code = cli.main(["montecarlo", "--config", path, "--out", str(tmp_path / "o")])
        assert code == 3
        assert "chi2" in capsys.readouterr().err

    def test_montecarlo_requires_enough_trials(self, tmp_path):
        code = cli.main(
            [
                "montecarlo",
                "--config",
                cfg_path("interaction.yaml"),
                "--trials",
                "100",
                "--out",
                str(tmp_path / "o"),
            ]
        )
        assert code == 1


class TestMontecarlo:
    def test_report_written_and_passes(self, tmp_path):
        out = tmp_path / "mc"
        code = cli.main(
            [
                "montecarlo",
                "--config",
                cfg_path("interaction_halted.yaml"),
                "--trials",
                "20000",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        report = json.loads(read(out / "report.json"))
        assert report["passed"]
        assert report["summary"]["probability_pass"]
        assert report["summary"]["closed_form_p_hit"] == pytest.approx(0.3, abs=1e-12)

    def test_unsupported_scenario_rejected(self, tmp_path):
        code = cli.main(
            ["montecarlo", "--config", cfg_path("fade_in.yaml"), "--out", str(tmp_path / "o")]
        )
        assert code == 1


class TestEnvOverrides:
    def test_env_supplies_config_and_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PULSECOLLAPSE_CONFIG", cfg_path("interaction.yaml"))
        monkeypatch.setenv("PULSECOLLAPSE_SEED", "4242")
        out = tmp_path / "r"
        assert cli.main(["run", "--out", str(out)]) == 0
        manifest = json.loads(read(out / "manifest.json"))
        assert manifest["seed"] == 4242

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PULSECOLLAPSE_SEED", "4242")
        out = tmp_path / "r"
        cli.main(["run", "--config", cfg_path("interaction.yaml"), "--seed", "7", "--out", str(out)])
        manifest = json.loads(read(out / "manifest.json"))
        assert manifest["seed"] == 7

    def test_bad_env_value_exits_1(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PULSECOLLAPSE_TRIALS", "many")
        code = cli.main(
            ["run", "--config", cfg_path("interaction.yaml"), "--out", str(tmp_path / "o")]
        )
        assert code == 1


class TestVerify:
    def test_single_config_suite_passes(self, tmp_path, capsys):
        out = tmp_path / "v"
        code = cli.main(["verify", "--config", cfg_path("interaction.yaml"), "--out", str(out)])
        assert code == 0
        report = json.loads(read(out / "report.json"))
        assert report["passed"]
        names = {c["invariant"] for c in report["checks"]}
        assert {"normalization", "conservation", "determinism", "reduction-zeroing"} <= names
        assert "PASS" in capsys.readouterr().out

    def test_drift_config_covers_phantom_and_guard(self, tmp_path):
        out = tmp_path / "v"
        code = cli.main(["verify", "--config", cfg_path("pulse_drift.yaml"), "--out", str(out)])
        assert code == 0
        report = json.loads(read(out / "report.json"))
        names = {c["invariant"] for c in report["checks"]}
        assert {"phantom-freeze", "rule4-guard", "conservation"} <= names
