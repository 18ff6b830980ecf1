"""Robustness sweeps, walking evaluation, GRF logging and peak reports."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .env import EnvConfig, WalkingEnv, make_plan
from .errors import UsageError
from .learn.networks import PolicySnapshot
from .learn.rollout import GROUP_SIZE, rollout_rng, run_group
from .plan import FootstepPlan, apply_stairs, gen_line_plan
from .task import TERMINATION_CODES, TERMINATION_NAMES, TIMEOUT


@dataclass(frozen=True)
class TrialReport:
    noise_level: float
    n_trials: int
    success_rate: float
    mean_episode_length: float
    causes: tuple

    FIELDS = ("noise_level", "n_trials", "success_rate", "mean_episode_length", "causes")

    def row(self) -> list[str]:
        return [repr(float(self.noise_level)), str(self.n_trials), repr(float(self.success_rate)),
                repr(float(self.mean_episode_length)), ";".join(self.causes)]


def write_trial_reports(reports, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TrialReport.FIELDS)
    for r in reports:
        w.writerow(r.row())
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_trial_reports(path_or_text) -> list[TrialReport]:
    text = _text(path_or_text)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TrialReport.FIELDS:
        raise UsageError("not a trial report file")
    return [TrialReport(float(a), int(b), float(c), float(d), tuple(e.split(";")) if e else ())
            for a, b, c, d, e in rows[1:]]


def _text(path_or_text) -> str:
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        p = Path(path_or_text)
        if not p.is_file():
            raise UsageError(f"file not found: {p}")
        return p.read_text()
    return path_or_text


# -- trials -------------------------------------------------------------------


def run_trials(snapshot: PolicySnapshot, env_cfg: EnvConfig, n_trials: int, seed: int,
               episode_steps: int = 400, plan: FootstepPlan | None = None, itr: int = 0) -> list[dict]:
    """Deterministic-policy episodes; trial k always uses generator (seed, itr, k)."""
    out = []
    for s in range(0, n_trials, GROUP_SIZE):
        idx = list(range(s, min(s + GROUP_SIZE, n_trials)))
        plans = None if plan is None else [plan] * len(idx)
        out.extend(run_group(snapshot, env_cfg, idx, seed, itr, episode_steps, deterministic=True, plans=plans))
    return out


def summarize(results, level: float, dt: float) -> TrialReport:
    codes = [r["code"] for r in results]
    ok = sum(c == TERMINATION_CODES[TIMEOUT] for c in codes)
    lengths = [r["rew"].size * dt for r in results]
    return TrialReport(level, len(results), ok / max(len(results), 1), float(np.mean(lengths)) if lengths else 0.0,
                       tuple(TERMINATION_NAMES[c] for c in codes))


def _check_policy(snapshot):
    if snapshot is None:
        raise UsageError("a trained policy checkpoint is required")


def stairs_plan(env_cfg: EnvConfig, rise: float) -> FootstepPlan:
    base = gen_line_plan("forward", env_cfg.step_length, env_cfg.foot_spread, env_cfg.plan_steps)
    return apply_stairs(base, rise)


def terrain_noise_sweep(snapshot, env_cfg: EnvConfig, noise_levels, n_trials: int = 100, seed: int = 0,
                        rise: float = 0.05, physical: bool = False, episode_steps: int = 400) -> list[TrialReport]:
    """Per-trial uniform noise on the stair heights, observed (default) or physical."""
    _check_policy(snapshot)
    plan = stairs_plan(env_cfg, rise)
    reports = []
    for lvl in noise_levels:
        cfg = replace(env_cfg, terrain_noise=float(lvl), terrain_noise_physical=physical)
        res = run_trials(snapshot, cfg, n_trials, seed, episode_steps, plan)
        reports.append(summarize(res, float(lvl), cfg.schedule.control_dt))
    return reports


def obs_noise_sweep(snapshot, env_cfg: EnvConfig, noise_deg_levels, n_trials: int = 100, seed: int = 0,
                    plan: FootstepPlan | None = None, episode_steps: int = 400) -> list[TrialReport]:
    """Uniform noise of the given size (degrees, and degrees/s) on measured joints."""
    _check_policy(snapshot)
    plan = plan or make_plan("forward", env_cfg)
    reports = []
    for lvl in noise_deg_levels:
        cfg = replace(env_cfg, obs_joint_noise=math.radians(float(lvl)))
        res = run_trials(snapshot, cfg, n_trials, seed, episode_steps, plan)
        reports.append(summarize(res, float(lvl), cfg.schedule.control_dt))
    return reports


@dataclass(frozen=True)
class WalkSummary:
    n_episodes: int
    mean_progress: float
    mean_episode_length: float
    success_rate: float
    mean_scored: float


def evaluate_walking(snapshot, env_cfg: EnvConfig, n_episodes: int = 16, seed: int = 0,
                     episode_steps: int = 400) -> WalkSummary:
    """Forward-plan episodes with the mean action."""
    _check_policy(snapshot)
    res = run_trials(snapshot, env_cfg, n_episodes, seed, episode_steps, make_plan("forward", env_cfg))
    dt = env_cfg.schedule.control_dt
    return WalkSummary(len(res), float(np.mean([r["progress"] for r in res])),
                       float(np.mean([r["rew"].size * dt for r in res])),
                       float(np.mean([r["code"] == TERMINATION_CODES[TIMEOUT] for r in res])),
                       float(np.mean([r["scored"] for r in res])))


# -- GRF / trajectory logs ------------------------------------------------------


def log_header(n_joints: int = 6) -> list[str]:
    q = ["x", "z", "pitch"] + [f"q{j}" for j in range(n_joints)]
    return (["t", "phase"] + q + [f"{n}_vel" for n in q] + [f"tau{j}" for j in range(n_joints)]
            + ["grf_left", "grf_right"])


def grf_log(snapshot, env_cfg: EnvConfig, plan: FootstepPlan, duration: float = 10.0, seed: int = 0,
            path=None) -> list[list[float]]:
    """Per-control-step log of state, mean torque and per-foot vertical GRF.

    ``snapshot=None`` holds the nominal posture (zero action).  The episode
    ignores termination so the full duration is always logged unless the
    simulator diverges.
    """
    n = int(round(duration / env_cfg.schedule.control_dt))
    cfg = replace(env_cfg, termination=replace(env_cfg.termination, max_control_steps=n + 1,
                                               min_root_height=1e-6))
    env = WalkingEnv(cfg, 1)
    obs = env.reset_row(0, rollout_rng(seed, 0, 0), plan=plan)[None]
    rows = []
    for k in range(n):
        act = np.zeros((1, 6)) if snapshot is None else snapshot.mean(obs)
        obs, _, done, _ = env.step(act)
        q, qd = env.sim.Q[0], env.sim.QD[0]
        rows.append([(k + 1) * cfg.schedule.control_dt, float(env.phase[0]), *q, *qd, *env.last_tau[0],
                     *env.last_grf[0]])
        if done[0]:
            break
    if path is not None:
        write_log(rows, path)
    return rows


def write_log(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(log_header())
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def read_log(path) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"log not found: {p}")
    with open(p, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != log_header():
        raise UsageError(f"{p} is not a trajectory log")
    return np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(rows[0]))


# -- peaks ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PeakReport:
    joints: tuple
    peak_torque: tuple
    peak_velocity: tuple
    torque_limit: tuple
    velocity_limit: tuple

    FIELDS = ("joint", "peak_torque", "torque_limit", "torque_exceeded", "peak_velocity", "velocity_limit",
              "velocity_exceeded")

    @property
    def torque_exceeded(self) -> tuple:
        return tuple(p > lim for p, lim in zip(self.peak_torque, self.torque_limit))

    @property
    def velocity_exceeded(self) -> tuple:
        return tuple(p > lim for p, lim in zip(self.peak_velocity, self.velocity_limit))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.FIELDS)
        for j in range(len(self.joints)):
            w.writerow([self.joints[j], repr(float(self.peak_torque[j])), repr(float(self.torque_limit[j])),
                        str(self.torque_exceeded[j]).lower(), repr(float(self.peak_velocity[j])),
                        repr(float(self.velocity_limit[j])), str(self.velocity_exceeded[j]).lower()])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "PeakReport":
        rows = list(csv.reader(io.StringIO(_text(path_or_text))))
        if not rows or tuple(rows[0]) != cls.FIELDS:
            raise UsageError("not a peak report file")
        body = rows[1:]
        return cls(tuple(r[0] for r in body), tuple(float(r[1]) for r in body), tuple(float(r[4]) for r in body),
                   tuple(float(r[2]) for r in body), tuple(float(r[5]) for r in body))


def report_peaks(log, model=None, joint_names=None) -> PeakReport:
    """Per-joint maxima of |torque| and |joint velocity| over a trajectory log."""
    from .sim.model import JOINT_NAMES, default_model
    arr = np.asarray(log, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise UsageError("trajectory log is empty")
    model = model or default_model()
    names = log_header()
    vel = arr[:, [names.index(f"q{j}_vel") for j in range(6)]]
    tau = arr[:, [names.index(f"tau{j}") for j in range(6)]]
    return PeakReport(tuple(joint_names or JOINT_NAMES),
                      tuple(float(v) for v in np.abs(tau).max(axis=0)),
                      tuple(float(v) for v in np.abs(vel).max(axis=0)),
                      tuple(float(v) for v in model.per_joint("torque_limit")),
                      tuple(float(v) for v in model.per_joint("velocity_limit")))
