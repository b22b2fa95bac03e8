import csv
import io
import json

import pytest

from dispflow.cli import main
from dispflow.reports import stable_view


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestHelp:
    def test_exit_codes_documented(self, capsys):
        with pytest.raises(SystemExit):
            main(["--help"])
        out = capsys.readouterr().out
        assert "exit codes" in out
        assert "0  success" in out

    def test_subcommands_listed(self, capsys):
        with pytest.raises(SystemExit):
            main(["--help"])
        out = capsys.readouterr().out
        for sub in ("regularity", "flow", "equiv", "bracket", "commute",
                    "straighten", "pendulum", "scenario"):
            assert sub in out


class TestFlow:
    def test_translation_trajectory(self, capsys):
        code, out, _ = run_cli(
            capsys, "flow", "--field", "translation", "--start", "0,0",
            "--time", "1", "--region=-2,-2:2,2", "--grid", "4",
        )
        assert code == 0
        data = json.loads(out)
        states = data["trajectory"]["states"]
        assert states[-1][0] == 1.0
        assert data["trajectory"]["iterations"][-1] == 64

    def test_csv_output(self, capsys, tmp_path):
        code, out, _ = run_cli(
            capsys, "flow", "--field", "rotation", "--start", "0.5,0",
            "--time", "1/2", "--region=-2,-2:2,2", "--grid", "4",
            "--out", str(tmp_path), "--format", "csv",
        )
        assert code == 0
        csv_path = next(tmp_path.glob("*trajectory.csv"))
        rows = list(csv.reader(io.StringIO(csv_path.read_text())))
        assert rows[0][:2] == ["t", "x1"]
        assert rows[0][-1] == "iteration"

    def test_domain_exit_recorded_in_trajectory(self, capsys):
        # leaving the box is a recorded outcome of the run, not a failure
        code, out, _ = run_cli(
            capsys, "flow", "--field", "translation", "--start", "0.9,0",
            "--time", "1", "--region=-1,-1:1,1",
        )
        assert code == 0
        data = json.loads(out)
        assert data["trajectory"]["exit"] is not None
        assert data["trajectory"]["exit"]["reason"] == "left domain box"

    def test_diverging_inverse_is_a_computation_error(self, capsys):
        code, _, err = run_cli(
            capsys, "flow", "--field", "( 3*x, 3*y )", "--kind", "displacement",
            "--start", "0.1,0.1", "--time=-1", "--region=-1,-1:1,1",
        )
        assert code == 3
        assert "computation error" in err


class TestSweepCommands:
    def test_equiv_of_euler_and_rotation_step(self, capsys):
        code, out, _ = run_cli(
            capsys, "equiv",
            "--field-a", "euler_rotation_step", "--field-b", "rotation_step",
            "--region=-1,-1:1,1", "--sweep", "4",
        )
        assert code == 0
        data = json.loads(out)
        assert data["equivalent"] is True

    def test_regularity_of_rotation(self, capsys):
        code, out, _ = run_cli(
            capsys, "regularity", "--field", "rotation",
            "--region=-1,-1:1,1", "--sweep", "4", "--num-samples", "12",
        )
        assert code == 0
        data = json.loads(out)
        assert data["estimate"]["k_hat"] == pytest.approx(1.0, abs=1e-6)
        assert data["d1_verdict"]["relation"] in ("prec", "prec_prec")

    def test_bracket_fixture_values(self, capsys):
        code, out, _ = run_cli(
            capsys, "bracket", "--field-a", "shift_x", "--field-b", "osc_e2",
            "--points", "0,0", "--region=-4,-4:4,4", "--scale", "64",
        )
        assert code == 0
        data = json.loads(out)
        assert data["bracket_values"][0][0] == pytest.approx(0.0, abs=1e-12)
        assert data["bracket_values"][0][1] == pytest.approx(1.0, abs=1e-12)

    def test_commute_translations(self, capsys):
        code, out, _ = run_cli(
            capsys, "commute", "--field-a", "translation", "--field-b", "rotation",
            "--region=-3,-3:3,3", "--start-region=-0.5,-0.5:0.5,0.5",
            "--horizon", "1/2", "--sweep", "4",
        )
        assert code == 0
        data = json.loads(out)
        assert data["commute"] is False
        assert data["agree"] is True

    def test_straighten_coordinate_fields(self, capsys):
        code, out, _ = run_cli(
            capsys, "straighten", "--field", "( 1, 0 )", "--field", "( 0, 1 )",
            "--point", "0,0", "--region=-1,-1:1,1", "--sweep", "4",
        )
        assert code == 0
        data = json.loads(out)
        assert data["straightened"] is True


class TestPendulumCommand:
    def test_quick_pendulum(self, capsys):
        code, out, _ = run_cli(
            capsys, "pendulum", "--scale", "1024", "--horizon", "1",
            "--amplitude", "1/100", "--amplitudes", "0.1,0.01", "--grid", "40",
        )
        assert code == 0
        data = json.loads(out)
        assert data["decreasing"] is True
        assert float(data["deviations"][-1][1]) < 0.01


class TestScenarioCommand:
    def test_run_bundled_by_name(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "scenario", "run", "e3", "--out", str(tmp_path))
        assert code == 0
        report = json.loads((tmp_path / "e3.json").read_text())
        assert report["ok"] is True

    def test_run_config_file(self, capsys, tmp_path):
        import importlib.resources as resources

        cfg = json.loads((resources.files("dispflow") / "data" / "e3.json").read_text())
        cfg["name"] = "custom"
        path = tmp_path / "custom.json"
        path.write_text(json.dumps(cfg))
        code, out, _ = run_cli(capsys, "scenario", "run", str(path))
        assert code == 0
        assert json.loads(out)["ok"] is True

    def test_failed_expectation_gives_exit_one(self, capsys, tmp_path):
        import importlib.resources as resources

        cfg = json.loads((resources.files("dispflow") / "data" / "e3.json").read_text())
        cfg["checks"][1]["expect_relation"] = "prec_prec"  # truly fails
        path = tmp_path / "broken.json"
        path.write_text(json.dumps(cfg))
        code, out, _ = run_cli(capsys, "scenario", "run", str(path))
        assert code == 1

    def test_unknown_scenario_gives_exit_two(self, capsys):
        code, _, err = run_cli(capsys, "scenario", "run", "missing_scenario")
        assert code == 2
        assert "config error" in err

    def test_stdout_json_stable_across_runs(self, capsys):
        _, out1, _ = run_cli(capsys, "scenario", "run", "e3")
        _, out2, _ = run_cli(capsys, "scenario", "run", "e3")
        assert stable_view(out1) == stable_view(out2)
