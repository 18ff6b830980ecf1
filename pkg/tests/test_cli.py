import json
from dataclasses import replace

import pytest

from stepwalk.cli import main
from stepwalk.config import RunConfig, config_hash, dumps, load
from stepwalk.evaluation import PeakReport, read_log, read_trial_reports
from stepwalk.plan import load_plan


def run(*argv):
    return main([str(a) for a in argv])


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_plan_command(tmp_path):
    assert run("plan", "--out", tmp_path, "--mode", "forward", "--steps", 4, "--step-length", 0.35,
               "--foot-spread", 0.15) == 0
    plan = load_plan(tmp_path / "plan.txt")
    assert len(plan) == 4 and plan.steps[-1].x == pytest.approx(1.4)
    m = manifest(tmp_path)
    assert m["command"] == "plan" and m["config_hash"] == config_hash(RunConfig())
    assert load(tmp_path / "config.ini") == RunConfig()


@pytest.mark.parametrize("mode", ["stairs", "stand", "turn", "curved", "lateral+"])
def test_plan_modes(tmp_path, mode):
    extra = ["--step-length", 0.2] if mode.startswith("lateral") else []
    assert run("plan", "--out", tmp_path, "--mode", mode, "--seed", 3, *extra) == 0
    assert len(load_plan(tmp_path / "plan.txt")) >= 1


def test_plan_bad_geometry(tmp_path, capsys):
    assert run("plan", "--out", tmp_path, "--step-length", -1) == 2
    assert "error" in capsys.readouterr().err


def test_sweeps_need_checkpoint(tmp_path):
    assert run("sweep-terrain", "--out", tmp_path) == 2
    assert run("sweep-obs", "--out", tmp_path) == 2
    assert run("eval", "--out", tmp_path) == 2
    assert run("eval", "--out", tmp_path, "--checkpoint", tmp_path / "missing.pt") == 2


def test_grf_log_and_report(tmp_path):
    assert run("grf-log", "--out", tmp_path, "--zero-action", "--duration", 1.0) == 0
    log = read_log(tmp_path / "grf_log.csv")
    assert log.shape[0] == 40
    out = tmp_path / "rep"
    assert run("report", "--out", out, "--log", tmp_path / "grf_log.csv") == 0
    rep = PeakReport.from_csv(out / "peaks.csv")
    assert len(rep.joints) == 6 and all(p >= 0 for p in rep.peak_torque)


def test_report_missing_log(tmp_path):
    assert run("report", "--out", tmp_path, "--log", tmp_path / "none.csv") == 2


def test_bad_config(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[ppo]\nlr = fast\n")
    assert run("plan", "--out", tmp_path, "--config", bad) == 2


def test_train_eval_sweep(tmp_path):
    cfg = RunConfig()
    cfg = replace(cfg, ppo=replace(cfg.ppo, rollouts_per_batch=16, rollout_len=20, minibatch=128),
                  eval=replace(cfg.eval, episode_steps=20))
    ini = tmp_path / "tiny.ini"
    ini.write_text(dumps(cfg))
    run_dir = tmp_path / "run"
    assert run("train", "--config", ini, "--out", run_dir, "--iterations", 2, "--seed", 5) == 0
    ckpt = run_dir / "checkpoint.pt"
    assert ckpt.is_file()
    assert len((run_dir / "training_curve.csv").read_text().splitlines()) == 3
    assert manifest(run_dir)["seed"] == 5

    sw = tmp_path / "sweep"
    assert run("sweep-terrain", "--out", sw, "--checkpoint", ckpt, "--levels", "0,0.02", "--trials", 4) == 0
    reps = read_trial_reports(sw / "terrain_sweep.csv")
    assert [r.noise_level for r in reps] == [0.0, 0.02] and all(r.n_trials == 4 for r in reps)
    first = (sw / "terrain_sweep.csv").read_text()
    assert run("sweep-terrain", "--out", sw, "--checkpoint", ckpt, "--levels", "0,0.02", "--trials", 4) == 0
    assert (sw / "terrain_sweep.csv").read_text() == first

    ob = tmp_path / "obs"
    assert run("sweep-obs", "--out", ob, "--checkpoint", ckpt, "--levels", "0,3", "--trials", 4) == 0
    assert len(read_trial_reports(ob / "obs_sweep.csv")) == 2

    ev = tmp_path / "eval"
    assert run("eval", "--out", ev, "--checkpoint", ckpt, "--episodes", 4) == 0
    assert (ev / "eval.csv").read_text().startswith("n_episodes,")

    lg = tmp_path / "log"
    assert run("grf-log", "--out", lg, "--checkpoint", ckpt, "--duration", 0.5) == 0
    assert read_log(lg / "grf_log.csv").shape[0] == 20
