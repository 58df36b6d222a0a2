"""End-to-end tests for the command-line tools.

Commands run in-process through main() so exit codes and output files are
checked without subprocess overhead; one test drives the real module entry
point to make sure `python3 -m midair` works.
"""

import io
import subprocess
import sys
from contextlib import redirect_stdout

import pytest

from midair.cli import main
from midair.files import DATASET_COLUMNS, GOAL_COLUMNS, TRAJECTORY_COLUMNS
from midair.model import load_model

# enough battery shrinkage that a full scenario sweep stays in test budget
TINY_INI = """
[physics]
yaw_noise_std = 0.01

[planner]
n_samples = 48

[scenario.tt]
duration = 1.0
n_trials = 1
hold_time = 0.4
plan_window = 0.6

[scenario.rsc]
n_trials = 1
goals_per_trial = 1
goal_time_cap = 1.0
hold_time = 0.5
plan_window = 0.6

[scenario.tgr]
duration = 1.0
n_trials = 2
plan_window = 0.6

[scenario.ss]
duration = 1.0
n_trials = 1
disturbances = 0.3:roll_rate:0.4
plan_window = 0.6

[scenario.ramp]
n_trials = 1
launch_speed = 6.0
launch_rate_jitter = 0.3
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def tiny_ini(workdir):
    path = workdir / "tiny.ini"
    path.write_text(TINY_INI)
    return str(path)


@pytest.fixture(scope="module")
def dataset_file(workdir):
    path = workdir / "data.csv"
    assert main(["gen-data", "--duration", "2", "--dt-sensor", "0.02",
                 "--seed", "3", "--out", str(path)]) == 0
    return str(path)


@pytest.fixture(scope="module")
def trained(workdir, dataset_file):
    """(model path, train stdout) without letting capsys swallow the output."""
    model_path = workdir / "model.txt"
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(["train", "--data", dataset_file, "--out", str(model_path),
                     "--epochs", "3", "--batch", "32"])
    assert code == 0
    return str(model_path), buf.getvalue()


def first_line(path):
    with open(path) as fh:
        return fh.readline().rstrip("\n")


class TestGenData:
    def test_row_count_matches_duration_over_dt(self, tmp_path):
        out = tmp_path / "d.csv"
        assert main(["gen-data", "--duration", "60", "--dt-sensor", "0.02",
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 3002  # provenance + header + 3000 rows
        assert lines[1] == ",".join(DATASET_COLUMNS)

    def test_provenance_line_records_invocation_and_digest(self, dataset_file):
        line = first_line(dataset_file)
        assert line.startswith("# invocation: midair gen-data ")
        assert "--seed 3" in line
        assert line.endswith("| config: default")

    def test_reruns_are_byte_identical(self, tmp_path):
        out = tmp_path / "d.csv"
        argv = ["gen-data", "--duration", "0.5", "--seed", "9", "--out", str(out)]
        assert main(argv) == 0
        blob = out.read_bytes()
        assert main(argv) == 0
        assert out.read_bytes() == blob

    def test_noise_flag_changes_labels(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["gen-data", "--duration", "0.5", "--out", str(a)])
        main(["gen-data", "--duration", "0.5", "--noise", "0.05", "--out", str(b)])
        assert a.read_text().splitlines()[2:] != b.read_text().splitlines()[2:]

    def test_bad_config_key_exits_3(self, tmp_path, capsys):
        ini = tmp_path / "bad.ini"
        ini.write_text("[physics]\nwarp = 9\n")
        assert main(["gen-data", "--config", str(ini), "--out", str(tmp_path / "d.csv")]) == 3
        assert "unknown key 'warp'" in capsys.readouterr().err


class TestTrain:
    def test_model_and_loss_history_written(self, workdir, trained):
        model_path, stdout = trained
        assert "final val_mse = " in stdout
        model = load_model(model_path)
        assert model.dt == 0.2
        assert first_line(model_path).startswith("# invocation: midair train ")
        loss_lines = (workdir / "model_loss.csv").read_text().splitlines()
        assert loss_lines[1] == "epoch,train_mse,val_mse"
        assert len(loss_lines) == 5  # provenance + header + 3 epochs

    def test_malformed_dataset_exits_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        assert main(["train", "--data", str(bad), "--out", str(tmp_path / "m.txt")]) == 3
        assert "bad.csv" in capsys.readouterr().err

    def test_too_few_samples_exits_3(self, tmp_path, capsys):
        data = tmp_path / "small.csv"
        main(["gen-data", "--duration", "0.1", "--out", str(data)])
        assert main(["train", "--data", str(data), "--out", str(tmp_path / "m.txt")]) == 3
        assert "at least 10 samples" in capsys.readouterr().err


class TestEvalModel:
    def test_round_trip_reports_trainings_val_mse(self, dataset_file, trained, capsys):
        model_path, train_stdout = trained
        assert main(["eval-model", "--model", model_path, "--data", dataset_file]) == 0
        out = capsys.readouterr().out
        reported = [l for l in out.splitlines() if l.startswith("val_mse = ")]
        trained_line = [l for l in train_stdout.splitlines() if "val_mse" in l]
        assert reported[0].split(" = ")[1] == trained_line[0].split(" = ")[1]

    def test_per_axis_rms_lines(self, dataset_file, trained, capsys):
        model_path, _ = trained
        main(["eval-model", "--model", model_path, "--data", dataset_file])
        out = capsys.readouterr().out
        for name in ("roll_acc", "pitch_acc", "yaw_acc"):
            assert f"rms_{name} = " in out

    def test_config_adds_oracle_comparison(self, dataset_file, trained, tiny_ini, capsys):
        model_path, _ = trained
        assert main(["eval-model", "--model", model_path, "--data", dataset_file,
                     "--config", tiny_ini]) == 0
        out = capsys.readouterr().out
        assert "oracle_rms_roll_acc = " in out

    def test_corrupt_model_exits_3(self, dataset_file, tmp_path, capsys):
        bad = tmp_path / "m.txt"
        bad.write_text("not a model\n")
        assert main(["eval-model", "--model", str(bad), "--data", dataset_file]) == 3
        assert "format tag" in capsys.readouterr().err


class TestPlan:
    def test_goal_equal_state_lands_with_tiny_residuals(self, tmp_path, capsys):
        out = tmp_path / "hold.csv"
        assert main(["plan", "--model", "oracle",
                     "--state", "0,0,0,0,0,0,900,0", "--goal", "0,0,0,0,0,0,900,0",
                     "--airtime", "1.0", "--seed", "0", "--out", str(out)]) == 0
        lines = {l.split(" = ")[0]: l.split(" = ")[-1] for l in capsys.readouterr().out.splitlines() if " = " in l}
        assert abs(float(lines["terminal_roll_residual"])) < 0.01
        assert abs(float(lines["terminal_pitch_residual"])) < 0.01

    def test_trajectory_and_cycle_log_files(self, tmp_path):
        out = tmp_path / "run.csv"
        main(["plan", "--model", "oracle", "--state", "0.1,0,0,0,0,0,900,0",
              "--goal", "0,0,0,0,0,0,900,0", "--airtime", "0.5", "--out", str(out)])
        traj_lines = out.read_text().splitlines()
        assert traj_lines[1] == ",".join(TRAJECTORY_COLUMNS)
        assert len(traj_lines) == 2 + 26  # 25 cycles plus the terminal state
        cycles = (tmp_path / "run_cycles.csv").read_text().splitlines()
        assert cycles[1] == "cycle,t_remaining,H,best_rpm_rate,best_steer_rate,best_cost,feasible"
        first = cycles[2].split(",")
        assert first[0] == "0" and first[1] == "0.500000" and first[2] == "3"
        assert cycles[-1].split(",")[1] == "0.020000"

    def test_learned_model_drives_the_planner(self, trained, tiny_ini, tmp_path):
        model_path, _ = trained
        out = tmp_path / "hybrid.csv"
        assert main(["plan", "--config", tiny_ini, "--model", model_path,
                     "--state", "0,0,0,0,0,0,900,0", "--goal", "0,0,0,0,0,0,900,0",
                     "--airtime", "0.4", "--out", str(out)]) == 0
        assert out.exists()

    def test_model_dt_mismatch_exits_3(self, trained, tmp_path, capsys):
        model_path, _ = trained
        ini = tmp_path / "dt.ini"
        ini.write_text("[planner]\ndt = 0.1\n")
        assert main(["plan", "--config", str(ini), "--model", model_path,
                     "--state", "0,0,0,0,0,0,900,0", "--goal", "0,0,0,0,0,0,900,0",
                     "--airtime", "0.4", "--out", str(tmp_path / "x.csv")]) == 3
        assert "dt" in capsys.readouterr().err

    def test_byte_identical_reruns_with_workers(self, tmp_path):
        out = tmp_path / "w.csv"
        argv = ["plan", "--model", "oracle", "--state", "0.2,0,0.1,0,0,0,900,0",
                "--goal", "0,0,0,0,0,0,900,0", "--airtime", "0.5", "--seed", "4",
                "--out", str(out), "--workers", "2"]
        assert main(argv) == 0
        blob = out.read_bytes()
        cycles_blob = (tmp_path / "w_cycles.csv").read_bytes()
        assert main(argv) == 0
        assert out.read_bytes() == blob
        assert (tmp_path / "w_cycles.csv").read_bytes() == cycles_blob

    def test_worker_count_does_not_change_results(self, tmp_path):
        outs = []
        for tag, workers in (("a", "1"), ("b", "3")):
            out = tmp_path / f"{tag}.csv"
            main(["plan", "--model", "oracle", "--state", "0.2,0,0.1,0,0,0,900,0",
                  "--goal", "0,0,0,0,0,0,900,0", "--airtime", "0.5", "--seed", "4",
                  "--out", str(out), "--workers", workers])
            outs.append(out.read_text().splitlines()[1:])  # drop the invocation line
        assert outs[0] == outs[1]


class TestScenario:
    def test_dom_battery_writes_metrics_trials_and_trajectories(self, tiny_ini, tmp_path, capsys):
        out = tmp_path / "tgr"
        assert main(["scenario", "--config", tiny_ini, "--name", "tgr",
                     "--controller", "dom", "--seed", "7", "--out", str(out)]) == 0
        assert {p.name for p in out.iterdir()} == {
            "metrics.csv", "trials.csv", "trial_00.csv", "trial_01.csv"
        }
        metrics = (out / "metrics.csv").read_text().splitlines()
        assert metrics[1] == "scenario,controller,metric,mean,std,n"
        assert any(row.split(",")[2] == "success_rate" for row in metrics[2:])
        trial = (out / "trial_00.csv").read_text().splitlines()
        assert trial[1] == ",".join(TRAJECTORY_COLUMNS + GOAL_COLUMNS)
        assert len(trial) == 2 + 51  # 50 cycles plus terminal state
        assert "success_rate = " in capsys.readouterr().out

    def test_trials_flag_overrides_config(self, tiny_ini, tmp_path):
        out = tmp_path / "one"
        main(["scenario", "--config", tiny_ini, "--name", "tgr", "--controller", "dom",
              "--trials", "1", "--out", str(out)])
        assert {p.name for p in out.iterdir()} == {"metrics.csv", "trials.csv", "trial_00.csv"}

    def test_pid_needs_no_model(self, tiny_ini, tmp_path):
        out = tmp_path / "pid"
        assert main(["scenario", "--config", tiny_ini, "--name", "ss",
                     "--controller", "pid", "--out", str(out)]) == 0
        assert (out / "metrics.csv").exists()

    def test_rsc_trial_trajectory_stitches_segments(self, tiny_ini, tmp_path):
        out = tmp_path / "rsc"
        assert main(["scenario", "--config", tiny_ini, "--name", "rsc",
                     "--controller", "pid", "--out", str(out)]) == 0
        rows = (out / "trial_00.csv").read_text().splitlines()[2:]
        times = [float(r.split(",")[0]) for r in rows]
        assert times == sorted(times)
        assert len(set(times)) == len(times)

    def test_metrics_deterministic_across_runs(self, tiny_ini, tmp_path):
        blobs = []
        for tag in ("r1", "r2"):
            out = tmp_path / tag
            main(["scenario", "--config", tiny_ini, "--name", "ss", "--controller", "dom",
                  "--seed", "5", "--out", str(out)])
            # identical except the --out path inside the invocation comment
            blobs.append((out / "metrics.csv").read_text().splitlines()[1:])
        assert blobs[0] == blobs[1]

    def test_ramp_envelope_wider_than_authority_exits_4(self, tmp_path, capsys):
        ini = tmp_path / "doomed.ini"
        ini.write_text(
            "[scenario.ramp]\nlaunch_speed = 0.1\nlaunch_rate_jitter = 5.0\n"
            "max_certify_draws = 2\nn_trials = 1\n"
        )
        assert main(["scenario", "--config", str(ini), "--name", "ramp",
                     "--controller", "dom", "--out", str(tmp_path / "r")]) == 4
        assert "no certified-correctable launch state" in capsys.readouterr().err


class TestCompare:
    def test_full_table_shape(self, tiny_ini, tmp_path):
        out = tmp_path / "table.csv"
        assert main(["compare", "--config", tiny_ini, "--trials", "1",
                     "--seed", "2", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[1] == "scenario,metric,dom_mean,dom_std,dom_n,pid_mean,pid_std,pid_n"
        table = {(r.split(",")[0], r.split(",")[1]) for r in lines[2:]}
        for kind in ("tt", "rsc", "tgr", "ss", "ramp"):
            assert (kind, "success_rate") in table
        assert ("tt", "tracking_error") in table
        assert ("ramp", "landing_roll") in table


class TestUsageErrors:
    def test_no_command(self):
        assert main([]) == 2

    def test_unknown_command(self):
        assert main(["fly"]) == 2

    def test_missing_required_flag(self):
        assert main(["gen-data"]) == 2

    def test_state_needs_eight_values(self, tmp_path):
        assert main(["plan", "--model", "oracle", "--state", "1,2,3",
                     "--goal", "0,0,0,0,0,0,900,0", "--airtime", "1",
                     "--out", str(tmp_path / "x.csv")]) == 2

    def test_airtime_must_be_positive(self, tmp_path):
        assert main(["plan", "--model", "oracle", "--state", "0,0,0,0,0,0,900,0",
                     "--goal", "0,0,0,0,0,0,900,0", "--airtime", "-1",
                     "--out", str(tmp_path / "x.csv")]) == 2

    def test_unknown_scenario_name(self, tmp_path):
        assert main(["scenario", "--name", "loop", "--controller", "dom",
                     "--out", str(tmp_path / "x")]) == 2

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0


class TestModuleEntryPoint:
    def test_python_dash_m(self, tmp_path):
        out = tmp_path / "d.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "midair", "gen-data", "--duration", "0.5",
             "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert out.exists()
        assert "wrote 25 samples" in proc.stdout
