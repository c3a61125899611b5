"""Scenario parsing, CLI verbs, exit codes, and output determinism."""

import json
from pathlib import Path

import pytest

from twinsim.cli import main
from twinsim.env import ConfigError
from twinsim.scenario import (Scenario, load_scenario, make_reference_warehouse,
                              scenario_hash)

REFERENCE = Path(__file__).resolve().parent.parent / "scenarios" / "reference_warehouse.json"


def make_mini(seed=7) -> dict:
    """Small two-row aisle for fast CLI round trips."""
    doc = make_reference_warehouse(seed=seed)
    doc["name"] = "mini"
    doc["area"] = {"width": 8.0, "height": 6.0}
    for row, y in zip(doc["twin_rows"], (1.3, 3.3)):
        row.update(y=y, x_start=0.9, count=8)
        row["facing_y"] = 3.3 if y == 1.3 else 1.3
    doc["object"] = {"height": 1.70, "speed": 1.5,
                     "waypoints": [[0.0, 0.6, 2.3], [3.2, 5.4, 2.3]]}
    doc["tracker"].update(origin=[0.6, 2.3], n_particles=120)
    doc["train"]["runs_per_cell"] = 6
    doc["duration"] = 3.0
    return doc


@pytest.fixture()
def mini_path(tmp_path):
    p = tmp_path / "mini.json"
    p.write_text(json.dumps(make_mini()))
    return p


class TestScenarioFile:
    def test_reference_file_matches_generator(self):
        on_disk = json.loads(REFERENCE.read_text())
        assert on_disk == make_reference_warehouse()
        packaged = json.loads(
            (REFERENCE.parent.parent / "src" / "twinsim" / "data"
             / "reference_warehouse.json").read_text())
        assert packaged == on_disk

    def test_reference_builds(self):
        sc = load_scenario(REFERENCE)
        grid = sc.grid()
        assert len(grid.twins) == 96
        assert sc.poll_budget_ok()
        assert grid.nx == 50 and grid.ny == 34

    def test_hash_stable_under_key_order(self):
        doc = make_mini()
        shuffled = json.loads(json.dumps(doc, sort_keys=True))
        assert scenario_hash(doc) == scenario_hash(shuffled)

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_scenario("/nonexistent/path.json")

    def test_malformed_json_reports_location(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"schema_version": 1,\n  "seed": }')
        with pytest.raises(ConfigError, match=r"bad\.json:2:\d+"):
            load_scenario(p)

    def test_missing_section_rejected(self):
        doc = make_mini()
        del doc["polling"]
        with pytest.raises(ConfigError, match="polling"):
            Scenario(doc)

    def test_duration_beyond_walk_rejected(self):
        doc = make_mini()
        doc["duration"] = 99.0
        with pytest.raises(ConfigError, match="duration"):
            Scenario(doc)

    def test_mini_budget(self):
        assert Scenario(make_mini()).poll_budget_ok()


def run_cli(args):
    return main([str(a) for a in args])


class TestCliVerbs:
    def test_simulate_writes_outputs(self, mini_path, tmp_path):
        out = tmp_path / "out"
        assert run_cli(["simulate", "--scenario", mini_path, "--out", out]) == 0
        for name in ("events.csv", "truth.csv", "queries.csv", "intervals.csv"):
            text = (out / name).read_text()
            assert text.startswith("# twinsim scenario_sha256=")

    def test_malformed_scenario_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        assert run_cli(["simulate", "--scenario", bad, "--out", tmp_path]) == 2
        assert "error" in capsys.readouterr().err

    def test_missing_fingerprint_exit_2(self, mini_path, tmp_path):
        code = run_cli(["track", "--scenario", mini_path,
                        "--fingerprint", tmp_path / "nope.tsv", "--out", tmp_path])
        assert code == 2

    def test_train_track_evaluate_roundtrip(self, mini_path, tmp_path):
        out = tmp_path / "out"
        assert run_cli(["train", "--scenario", mini_path, "--out", out]) == 0
        fp = out / "fingerprint.tsv"
        assert fp.exists()
        assert run_cli(["track", "--scenario", mini_path,
                        "--fingerprint", fp, "--out", out]) == 0
        traj = (out / "trajectory.csv").read_text().splitlines()
        assert traj[1] == "t_s,x_est,y_est,x_true,y_true,error_m"
        assert len(traj) > 3
        report = json.loads((out / "report.json").read_text())
        assert report["mean_error_m"] <= report["max_error_m"]
        cdf = [e for _q, e in report["error_cdf"]]
        assert cdf == sorted(cdf)
        assert run_cli(["evaluate", "--scenario", mini_path, "--fingerprint", fp,
                        "--trials", "2", "--out", out]) == 0
        agg = json.loads((out / "evaluation.json").read_text())
        assert agg["n_trials"] == 2
        assert len(agg["trials"]) == 2

    def test_evaluate_single_trial_matches_track(self, mini_path, tmp_path):
        out = tmp_path / "out"
        run_cli(["train", "--scenario", mini_path, "--out", out])
        fp = out / "fingerprint.tsv"
        run_cli(["track", "--scenario", mini_path, "--fingerprint", fp, "--out", out])
        run_cli(["evaluate", "--scenario", mini_path, "--fingerprint", fp,
                 "--trials", "1", "--out", out])
        rep = json.loads((out / "report.json").read_text())
        agg = json.loads((out / "evaluation.json").read_text())
        assert agg["mean_error_m"] == rep["mean_error_m"]
        assert agg["trials"][0]["max_error_m"] == rep["max_error_m"]

    def test_sweep_kinds(self, mini_path, tmp_path):
        for kind in ("min_power_vs_d", "power_vs_D", "placement"):
            out = tmp_path / kind
            assert run_cli(["sweep", "--kind", kind, "--scenario", mini_path,
                            "--out", out]) == 0
            lines = (out / f"sweep_{kind}.csv").read_text().splitlines()
            assert len(lines) > 3

    def test_seed_flag_overrides(self, mini_path, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run_cli(["simulate", "--scenario", mini_path, "--seed", "1", "--out", out1])
        run_cli(["simulate", "--scenario", mini_path, "--seed", "2", "--out", out2])
        assert (out1 / "events.csv").read_text() != (out2 / "events.csv").read_text()

    def test_reference_scenario_verb(self, capsys):
        assert run_cli(["reference-scenario"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc == make_reference_warehouse()


class TestDeterminism:
    def verb_bytes(self, args, out, files):
        assert run_cli(args + ["--out", out]) == 0
        return {f: (Path(out) / f).read_bytes() for f in files}

    def test_simulate_and_train_byte_identical(self, mini_path, tmp_path):
        sim_files = ["events.csv", "truth.csv", "queries.csv", "intervals.csv"]
        a = self.verb_bytes(["simulate", "--scenario", mini_path], tmp_path / "s1", sim_files)
        b = self.verb_bytes(["simulate", "--scenario", mini_path], tmp_path / "s2", sim_files)
        assert a == b
        t1 = self.verb_bytes(["train", "--scenario", mini_path], tmp_path / "t1",
                             ["fingerprint.tsv"])
        t2 = self.verb_bytes(["train", "--scenario", mini_path], tmp_path / "t2",
                             ["fingerprint.tsv"])
        assert t1 == t2

    def test_track_and_evaluate_byte_identical(self, mini_path, tmp_path):
        out = tmp_path / "fp"
        run_cli(["train", "--scenario", mini_path, "--out", out])
        fp = out / "fingerprint.tsv"
        base = ["track", "--scenario", mini_path, "--fingerprint", fp]
        a = self.verb_bytes(base, tmp_path / "k1", ["trajectory.csv", "report.json"])
        b = self.verb_bytes(base, tmp_path / "k2", ["trajectory.csv", "report.json"])
        assert a == b
        ev = ["evaluate", "--scenario", mini_path, "--fingerprint", fp, "--trials", "2"]
        e1 = self.verb_bytes(ev, tmp_path / "e1", ["evaluation.json"])
        e2 = self.verb_bytes(ev, tmp_path / "e2", ["evaluation.json"])
        assert e1 == e2

    def test_sweep_byte_identical(self, mini_path, tmp_path):
        args = ["sweep", "--kind", "min_power_vs_d", "--scenario", mini_path]
        a = self.verb_bytes(args, tmp_path / "w1", ["sweep_min_power_vs_d.csv"])
        b = self.verb_bytes(args, tmp_path / "w2", ["sweep_min_power_vs_d.csv"])
        assert a == b
