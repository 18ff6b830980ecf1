"""Desk-scale acceptance suite, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
The learning smoke test (criterion 11) re-evaluates the training run
recorded under ``artifacts/smoke``; set ``STEPWALK_RETRAIN=1`` to train from
scratch instead (about an hour on one CPU core).
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import torch

from oracles import gae_brute_force, scoring_events
from stepwalk.config import RunConfig
from stepwalk.errors import PlanningFailure
from stepwalk.evaluation import (PeakReport, evaluate_walking, log_header, obs_noise_sweep, read_trial_reports, report_peaks,
                                 run_trials, stairs_plan, summarize, terrain_noise_sweep, write_trial_reports)
from stepwalk.env import make_plan
from stepwalk.gait import GaitSchedule, advance, clock_encode, indicator_lipschitz, indicators
from stepwalk.learn.networks import Actor, Critic
from stepwalk.learn.ppo import PPOConfig, RolloutBuffer, gae_advantages, ppo_update, surrogate_loss
from stepwalk.learn.trainer import Trainer, load_checkpoint, load_policy, read_curve, train
from stepwalk.plan import (Footstep, FootstepPlan, OccupancyGrid, apply_stairs, gen_line_plan, gen_stand, gen_turn_in_place, plan_curved,
                           sample_goal)
from stepwalk.reward import orientation_reward, quat_from_euler, shape_rewards, smoothness_rewards, step_reward
from stepwalk.sim.biped import BatchSim, PlanarBiped
from stepwalk.sim.mirror import MirrorMaps, mirror_action, mirror_sim_coordinates, mirror_state
from stepwalk.sim.model import Terrain, default_model
from stepwalk.sim.scripted import evaluate_scripted, scripted_walk_3d
from stepwalk.task import CurriculumState, ScoreTracker, curriculum_height, score_update

ROOT = Path(__file__).resolve().parents[1]
SMOKE = ROOT / "artifacts" / "smoke"
SCHEDULES = (GaitSchedule.preset("hrp5p"), GaitSchedule.preset("jvrc1"))


def test_01_reward_closed_forms(criterion):
    t0 = time.perf_counter()
    errs = [
        abs(step_reward(0.25, 2.0, 0.8) - math.exp(-1)),
        abs(orientation_reward(quat_from_euler(0, 0, 0), quat_from_euler(0, 0, math.pi / 2))
            - math.exp(-5)),
        abs(shape_rewards(0.85, 0.8, [0, 0], [0, 0])[0] - math.exp(-0.1)),
        abs(shape_rewards(0.8, 0.8, [0.1, 0.0], [0.0, 0.0])[1] - math.exp(-0.1)),
        abs(smoothness_rewards(np.full(6, 0.2), np.zeros(6), np.zeros(6), np.zeros(6))[0] - math.exp(-1)),
        abs(smoothness_rewards(np.zeros(6), np.zeros(6), np.array([4, -4, 4, -4, 4, -4.0]), np.zeros(6))[1]
            - math.exp(-1)),
        abs(shape_rewards(0.8, 0.8, [1, 2], [1, 2])[0] - 1.0),
    ]
    dt = time.perf_counter() - t0
    worst = max(float(e) for e in errs)
    criterion(1, "reward closed forms", worst <= 1e-12 and dt < 1.0, f"max error {worst:.2e}, {dt * 1e3:.1f} ms")


def test_02_indicators(criterion):
    t0 = time.perf_counter()
    ok = True
    worst_ratio = 0.0
    for sched in SCHEDULES:
        a = sched.ds_fraction
        mids = {"ds1": a / 2, "left": a + (0.5 - a) / 2, "ds2": 0.5 + a / 2, "right": 0.5 + a + (0.5 - a) / 2}
        ok &= tuple(float(v) for v in indicators(mids["left"], sched)) == (-1.0, 1.0, 1.0, -1.0)
        ok &= tuple(float(v) for v in indicators(mids["right"], sched)) == (1.0, -1.0, -1.0, 1.0)
        ok &= tuple(float(v) for v in indicators(mids["ds1"], sched)) == (1.0, 1.0, -1.0, -1.0)
        ok &= tuple(float(v) for v in indicators(mids["ds2"], sched)) == (1.0, 1.0, -1.0, -1.0)
        phase = np.linspace(0.0, 1.0, 100_000, endpoint=False)
        vals = np.stack(indicators(phase, sched))
        step = np.abs(np.diff(np.concatenate([vals, vals[:, :1]], axis=1), axis=1)).max()
        bound = indicator_lipschitz(sched) * (phase[1] - phase[0])
        worst_ratio = max(worst_ratio, step / bound)
        stand = np.stack(indicators(phase, sched.as_standing()))
        ok &= bool(np.all(stand == np.array([1.0, 1.0, -1.0, -1.0])[:, None]))
    dt = time.perf_counter() - t0
    criterion(2, "phase indicators", ok and worst_ratio <= 1.0 + 1e-9 and dt < 1.0,
              f"plateaus exact={ok}, worst step / bound = {worst_ratio:.3f}, {dt * 1e3:.0f} ms")


def test_03_clock_continuity(criterion):
    worst_excess, worst_norm = -np.inf, 0.0
    for sched in SCHEDULES:
        dt, L = sched.control_dt, sched.L
        n = int(round(L / dt))
        phase = np.empty(n + 1)
        phase[0] = 0.0
        for k in range(n):
            phase[k + 1] = advance(phase[k], dt, L)
        s, c = clock_encode(phase)
        jumps = np.hypot(np.diff(s), np.diff(c))
        worst_excess = max(worst_excess, jumps.max() - 2 * math.pi * dt / L)
        worst_norm = max(worst_norm, np.abs(np.hypot(s, c) - 1.0).max())
    criterion(3, "clock continuity", worst_excess <= 1e-9 and worst_norm <= 1e-12,
              f"max jump - bound = {worst_excess:.2e}, max | |clock| - 1 | = {worst_norm:.1e}")


def test_04_curriculum(criterion):
    rng = np.random.default_rng(0)
    vals = {itr: abs(curriculum_height(CurriculumState(itr), rng)) for itr in (0, 2999, 3000, 7000, 11000, 20000)}
    ok = (vals[0] == 0.0 and vals[2999] == 0.0 and vals[3000] == 0.0 and vals[7000] == 0.05
          and vals[11000] == 0.10 and vals[20000] == 0.10)
    ok &= CurriculumState(3001).magnitude() - CurriculumState(3000).magnitude() <= 0.1 / 8000 + 1e-18
    criterion(4, "curriculum schedule", ok, ", ".join(f"{k}:{v:g}" for k, v in vals.items()))


def test_05_scoring_oracle(criterion):
    rng = np.random.default_rng(99)
    spent = 0.0
    mismatches = 0
    total_scores = 0
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        plan = FootstepPlan(tuple(Footstep(*rng.uniform(-1, 1, 3), 0.0) for _ in range(n)), "curved")
        xyz = plan.as_array()[:, :3]
        dt = float(rng.choice([0.01, 0.025, 0.05]))
        delay = float(rng.uniform(0.05, 0.5))
        tracks, k = [], 0
        for _ in range(150):
            if rng.random() < 0.02:
                k = min(k + 1, n - 1)
            tracks.append([xyz[k] + rng.uniform(-1, 1, 3) * rng.choice([0.05, 0.15, 0.3, 0.6]) for _ in range(2)])
        tr = ScoreTracker(target_radius=0.2, target_delay=delay)
        got = []
        t0 = time.perf_counter()
        for t, feet in enumerate(tracks):
            tr, hit, _ = score_update(tr, feet, dt, plan)
            if hit:
                got.append(t)
        spent += time.perf_counter() - t0
        ref = scoring_events(xyz, tracks, dt, 0.2, delay)
        mismatches += got != ref
        total_scores += len(ref)
    criterion(5, "scoring vs event oracle", mismatches == 0 and spent < 10.0 and total_scores > 0,
              f"{mismatches} mismatches over 1000 trajectories ({total_scores} scores), {spent:.2f} s")


def test_06_planner(criterion):
    grid = OccupancyGrid.empty(-1.5, -1.5, 1.5, 1.5, 0.05)
    t0 = time.perf_counter()
    failures = 0
    for seed in range(1000):
        try:
            plan_curved(grid, (0.0, 0.0, 0.0), sample_goal(seed))
        except PlanningFailure:
            failures += 1
    straight = plan_curved(grid, (0, 0, 0), (1.0, 0, 0))
    line = gen_line_plan("forward", 0.35, 0.15, len(straight))
    dev = np.abs(straight.as_array()[:, :2] - line.as_array()[:, :2]).max()
    walled = OccupancyGrid.empty(-1.5, -1.5, 1.5, 1.5, 0.05)
    i, _ = walled.to_cell(0.5, 0.0)
    walled.cells[:, i] = True
    try:
        plan_curved(walled, (0, 0, 0), (1.0, 0, 0))
        blocked = False
    except PlanningFailure:
        blocked = True
    dt = time.perf_counter() - t0
    criterion(6, "footstep planner", failures == 0 and dev <= grid.resolution and blocked and dt < 60,
              f"{failures}/1000 failures, straight deviation {dev:.3f} m, wall blocks={blocked}, {dt:.1f} s")


def test_07_simulator(criterion):
    model = default_model()
    bp = PlanarBiped(model)
    s0 = bp.standing_state()
    s0.q[1] += 5.0
    s = s0
    for _ in range(500):
        s = bp.physics_step(s, np.zeros(6))
    drop = 0.5 * model.gravity * 0.5 ** 2
    ballistic = abs((s0.q[1] - s.q[1]) - drop) / drop

    s = bp.standing_state()
    for _ in range(400):
        s, grf, _ = bp.control_step(s, np.zeros(6))
    stand = abs(grf.sum() - model.weight) / model.weight

    bp0 = PlanarBiped(model.with_overrides(gravity=0.0))
    s = bp0.standing_state()
    s.q[1] += 5.0
    s.qd[:] = np.concatenate([[0.2, 0.1, 0.3], np.random.default_rng(0).uniform(-0.5, 0.5, 6)])
    e0 = bp0.energy(s)
    for _ in range(1000):
        s = bp0.physics_step(s, np.zeros(6))
    drift = abs(bp0.energy(s) - e0) / e0

    rng = np.random.default_rng(7)
    sim = BatchSim(model, [Terrain.flat()] * 16)
    for i in range(16):
        sim.place(i, model.nominal_joints + rng.uniform(-0.1, 0.1, 6))
    for _ in range(400):
        sim.step(rng.uniform(-1, 1, (16, 6)))
    cone = sim.force_stats[:, 1].max()
    ok = ballistic <= 0.01 and stand <= 0.02 and drift <= 0.005 and cone <= 1.0 + 1e-9 and not sim.status.any()
    criterion(7, "simulator physics", ok,
              f"ballistic {ballistic:.2e}, stand GRF {stand:.2e}, energy drift {drift:.2e}/s, "
              f"max |Ft|/(mu Fn) {cone:.4f}")


def test_08_mirror(criterion):
    rng = np.random.default_rng(0)
    s = rng.normal(size=(100, 27))
    a = rng.normal(size=(100, 6))
    involution = np.array_equal(mirror_state(mirror_state(s)), s) and np.array_equal(mirror_action(mirror_action(a)), a)
    model = default_model()
    sim = BatchSim(model, [Terrain.flat()] * 2)
    sim.place(0, model.nominal_joints + rng.uniform(-0.1, 0.1, 6))
    sim.Q[1] = mirror_sim_coordinates(sim.Q[0])
    worst = 0.0
    for _ in range(200):
        act = rng.uniform(-0.3, 0.3, 6)
        sim.step(np.stack([act, mirror_action(act)]))
        worst = max(worst, np.abs(mirror_sim_coordinates(sim.Q[1]) - sim.Q[0]).max(),
                    np.abs(mirror_sim_coordinates(sim.QD[1]) - sim.QD[0]).max())
    criterion(8, "mirror maps", involution and worst <= 1e-9 and not sim.status.any(),
              f"involution exact={involution}, mirrored rollout gap {worst:.1e}")


def _toy(seed):
    torch.manual_seed(seed)
    actor = Actor(27, 6, (16, 16), dtype=torch.float64)
    critic = Critic(27, (16, 16), dtype=torch.float64, value_scale=5.0)
    return actor, critic, torch.optim.Adam(actor.parameters(), 1e-3), torch.optim.Adam(critic.parameters(), 1e-3)


def test_09_learning_components(criterion):
    rng = np.random.default_rng(0)
    gae_err = 0.0
    for _ in range(200):
        T = int(rng.integers(1, 80))
        r, v = rng.normal(size=T), rng.normal(size=T + 1)
        d = np.zeros(T)
        d[-1] = float(rng.random() < 0.5)
        got = gae_advantages(r, v, d, 0.99, 0.95)
        ref = gae_brute_force(r, v, d, 0.99, 0.95)
        gae_err = max(gae_err, np.abs(got[0] - ref[0]).max(), np.abs(got[1] - ref[1]).max())

    actor = _toy(1)[0]
    obs = torch.as_tensor(rng.normal(size=(32, 27)))
    act = torch.as_tensor(rng.normal(size=(32, 6)) * 0.3)
    old = actor.log_prob(obs, act).detach() + torch.as_tensor(rng.normal(size=32) * 0.05)
    adv = torch.as_tensor(rng.normal(size=32))
    loss, _ = surrogate_loss(actor, obs, act, old, adv, 0.2)
    loss.backward()
    fd_err = 0.0
    eps = 1e-6
    for p in actor.parameters():
        flat, grad = p.data.view(-1), p.grad.view(-1)
        for i in range(0, flat.numel(), max(1, flat.numel() // 8)):
            orig = flat[i].item()
            flat[i] = orig + eps
            up = surrogate_loss(actor, obs, act, old, adv, 0.2)[0].item()
            flat[i] = orig - eps
            down = surrogate_loss(actor, obs, act, old, adv, 0.2)[0].item()
            flat[i] = orig
            fd = (up - down) / (2 * eps)
            fd_err = max(fd_err, abs(fd - grad[i].item()) / max(abs(fd), 1e-3))

    def buffer():
        g = np.random.default_rng(5)
        n = 256
        return RolloutBuffer(obs=g.normal(size=(n, 27)), act=g.normal(size=(n, 6)) * 0.3, logp=g.normal(size=n) - 3,
                             rew=g.random(n), val=g.normal(size=n), done=np.zeros(n), starts=np.array([0]),
                             lengths=np.array([n]), last_value=np.array([0.0]), codes=np.array([3]),
                             progress=np.zeros(1), scored=np.zeros(1, int), diverged=np.zeros(1, bool))

    cfg = PPOConfig(minibatch=64, sym_loss_weight=0.0)
    n1, n2 = _toy(3), _toy(3)
    ppo_update(buffer(), *n1, cfg, MirrorMaps.for_joints(6), np.random.default_rng(0))
    ppo_update(buffer(), *n2, cfg, None, np.random.default_rng(0))
    bitwise = all(torch.equal(p, q) for m1, m2 in zip(n1[:2], n2[:2])
                  for p, q in zip(m1.parameters(), m2.parameters()))
    criterion(9, "learning components", gae_err <= 1e-10 and fd_err < 1e-4 and bitwise,
              f"GAE error {gae_err:.1e}, gradient rel. error {fd_err:.1e}, zero-weight bitwise={bitwise}")


def test_10_scripted_oracle(criterion):
    sched = GaitSchedule.preset("jvrc1")
    grid = OccupancyGrid.empty(-1.5, -1.5, 1.5, 1.5, 0.05)
    plans = {
        "forward": gen_line_plan("forward", 0.35, 0.15, 6),
        "lateral": gen_line_plan("lateral+", 0.2, 0.15, 5),
        "turn": gen_turn_in_place(math.pi / 2, math.pi / 8, 0.15),
        "stand": gen_stand(),
        "curved": plan_curved(grid, (0, 0, 0), sample_goal(3)),
        "stairs": apply_stairs(gen_line_plan("forward", 0.3, 0.15, 5), 0.1),
    }
    notes, ok = [], True
    for name, plan in plans.items():
        ev = evaluate_scripted(scripted_walk_3d(plan, sched), plan)
        totals = np.array([b.total for b in ev.breakdowns])
        good = ev.final_index == len(plan) and totals.min() >= -0.3 and totals.max() <= 1.0
        ok &= good
        notes.append(f"{name} {ev.final_index}/{len(plan)}")
    criterion(10, "scripted 3D oracle", ok, ", ".join(notes))


def _smoke_run(tmp_path_factory):
    if os.environ.get("STEPWALK_RETRAIN"):
        out = tmp_path_factory.mktemp("smoke")
        train(RunConfig(), out)
        return out
    return SMOKE


def _monotone_ma(values, window=50):
    ma = np.convolve(values, np.ones(window) / window, mode="valid")
    return bool(np.all(np.diff(ma) >= 0)), ma


def test_11_learning_smoke(criterion, tmp_path_factory):
    run = _smoke_run(tmp_path_factory)
    ckpt, curve_path = run / "checkpoint.pt", run / "training_curve.csv"
    if not ckpt.is_file() or not curve_path.is_file():
        criterion(11, "learning smoke test", False, f"no recorded training run under {run}")
    curve = read_curve(curve_path)
    state = load_checkpoint(ckpt)
    snap, cfg = load_policy(ckpt)
    default_cfg = cfg == RunConfig()
    iterations = len(curve)
    hours = sum(r["seconds"] for r in curve) / 3600.0
    summary = evaluate_walking(snap, cfg.env, 16, seed=12345, episode_steps=400)
    returns = np.array([r["mean_return"] for r in curve[:300]])
    monotone, ma = _monotone_ma(returns)
    drops = int(np.sum(np.diff(ma) < 0))
    ok = (default_cfg and state["iteration"] == iterations <= 500 and hours <= 2.0 and len(returns) == 300
          and summary.mean_progress >= 1.0 and summary.mean_episode_length >= 8.0 and monotone)
    criterion(11, "learning smoke test", ok,
              f"{iterations} iterations in {hours:.2f} h (default config={default_cfg}); deterministic eval: "
              f"progress {summary.mean_progress:.2f} m, length {summary.mean_episode_length:.2f} s; "
              f"MA50 return drops in first 300 iterations: {drops}")


def test_12_robustness_harness(criterion, tmp_path):
    cfg = RunConfig()
    snap = Trainer(cfg, seed=3).snapshot()
    env = cfg.env
    dt = env.schedule.control_dt
    terrain = terrain_noise_sweep(snap, env, [0.0, 0.02], 16, seed=11, rise=0.05)
    clean_stairs = summarize(run_trials(snap, env, 16, 11, 400, stairs_plan(env, 0.05)), 0.0, dt)
    obs = obs_noise_sweep(snap, env, [0.0, 2.0], 16, seed=11)
    clean_walk = summarize(run_trials(snap, env, 16, 11, 400, make_plan("forward", env)), 0.0, dt)
    same = terrain[0] == clean_stairs and obs[0] == clean_walk
    repeat = write_trial_reports(terrain_noise_sweep(snap, env, [0.0, 0.02], 16, seed=11, rise=0.05))
    text = write_trial_reports(terrain, tmp_path / "t.csv")
    trips = write_trial_reports(read_trial_reports(tmp_path / "t.csv")) == text and repeat == text
    peaks = report_peaks(np.random.default_rng(0).normal(size=(20, len(log_header()))))
    ptext = peaks.to_csv(tmp_path / "p.csv")
    trips &= PeakReport.from_csv(tmp_path / "p.csv").to_csv() == ptext
    criterion(12, "robustness harness", same and trips, f"level-0 equals baseline={same}, round trips={trips}")
