"""Kinematic 3D walking oracle.

Feet follow cycloid swings that land exactly on successive plan targets in
step with the gait schedule; the root sits above the feet midpoint and its
yaw turns toward each step's heading during that step's swing.  No dynamics are involved, which makes the output a
clean reference for the scoring and reward machinery on any plan type.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InfeasiblePlan
from ..gait import GaitSchedule, indicators
from ..plan import EITHER, LEFT, FootstepPlan, wrap_angle
from ..reward import RewardBreakdown, RewardWeights, normalize_speed, orientation_reward, \
    periodic_rewards, shape_rewards, smoothness_rewards, step_reward, total_reward
from ..task import ScoreTracker, floor_distance, heading_quaternion, nearest_distance, plan_window, \
    score_update


@dataclass
class ScriptedTrajectory:
    t: np.ndarray          # (N,)
    phase: np.ndarray      # (N,)
    root: np.ndarray       # (N, 4) x, y, z, yaw
    feet: np.ndarray       # (N, 2, 4) left/right x, y, z, yaw
    feet_vel: np.ndarray   # (N, 2, 3)
    contact: np.ndarray    # (N, 2) bool
    schedule: GaitSchedule
    root_height: float

    def __len__(self) -> int:
        return self.t.size


def _cycloid(tau):
    return tau - np.sin(2.0 * np.pi * tau) / (2.0 * np.pi)


def _assign_sides(plan: FootstepPlan) -> list[int]:
    """0 = left, 1 = right for every step; unlabeled steps alternate."""
    out = []
    prev = None
    for k, s in enumerate(plan.steps):
        if s.side == EITHER:
            foot = 1 if prev is None else 1 - prev
        else:
            foot = 0 if s.side == LEFT else 1
        if prev is not None and foot == prev:
            raise InfeasiblePlan(f"step {k} reuses the {('left', 'right')[foot]} foot")
        out.append(foot)
        prev = foot
    return out


def scripted_walk_3d(plan: FootstepPlan, schedule: GaitSchedule, stance_width: float | None = None,
                     root_height: float = 0.80, swing_height: float = 0.08, max_stride: float = 0.9,
                     max_turn: float = math.pi / 4, hold: float | None = None) -> ScriptedTrajectory:
    """Sample the oracle at the schedule's control rate.

    The feet start beside the origin, ``stance_width`` to either side (the
    plan's foot spread by default).  Each plan step takes half a gait cycle:
    double support, then the assigned foot swings onto the target.  After the
    last landing the pose is held for ``hold`` seconds (one full cycle by
    default) so the final target can be scored.
    """
    width = stance_width if stance_width is not None else (plan.foot_spread or 0.12)
    dt = schedule.control_dt
    L = schedule.L
    half = 0.5 * L
    hold = L if hold is None else hold
    feet0 = np.array([[0.0, width, 0.0, 0.0], [0.0, -width, 0.0, 0.0]])

    if plan.is_stand:
        sched = schedule if schedule.standing else schedule.as_standing()
        n = int(round(hold / dt)) + 1
        t = np.arange(n) * dt
        feet = np.broadcast_to(feet0, (n, 2, 4)).copy()
        return _assemble(t, np.mod(t / L, 1.0), feet, np.zeros((n, 2, 3)), np.ones((n, 2), bool),
                         sched, root_height)

    sides = _assign_sides(plan)
    targets = plan.as_array()
    # landing sequence per foot
    pos = feet0.copy()
    swings = []
    for k, (foot, tgt) in enumerate(zip(sides, targets)):
        start = pos[foot].copy()
        other = pos[1 - foot]
        stride = math.hypot(tgt[0] - start[0], tgt[1] - start[1])
        span = math.hypot(tgt[0] - other[0], tgt[1] - other[1])
        if stride > max_stride or span > max_stride:
            raise InfeasiblePlan(f"step {k} is out of reach ({stride:.3f} m swing, {span:.3f} m span)")
        if abs(wrap_angle(tgt[3] - start[3])) > max_turn:
            raise InfeasiblePlan(f"step {k} turns the foot by more than {max_turn:.3f} rad")
        swings.append((foot, start, tgt.copy()))
        pos[foot] = tgt

    phase0 = 0.0 if sides[0] == 0 else 0.5
    t_end = len(swings) * half + hold
    n = int(round(t_end / dt)) + 1
    t = np.arange(n) * dt
    h = 1e-4

    def feet_at(tq):
        f = feet0.copy()
        contact = np.ones(2, bool)
        yaw = 0.0
        for k, (foot, a, b) in enumerate(swings):
            t_swing = k * half + schedule.L_DS
            if tq >= k * half + half:
                f[foot] = b
                yaw = b[3]
                continue
            if tq < t_swing:
                break
            tau = (tq - t_swing) / schedule.L_SS
            s = _cycloid(tau)
            f[foot, 0:2] = a[0:2] + (b[0:2] - a[0:2]) * s
            f[foot, 2] = a[2] + (b[2] - a[2]) * s + swing_height * 0.5 * (1.0 - math.cos(2.0 * math.pi * tau))
            f[foot, 3] = wrap_angle(a[3] + wrap_angle(b[3] - a[3]) * s)
            yaw = wrap_angle(yaw + wrap_angle(b[3] - yaw) * s)
            contact[foot] = False
            break
        return f, contact, yaw

    feet = np.empty((n, 2, 4))
    vel = np.empty((n, 2, 3))
    yaw = np.empty(n)
    contact = np.empty((n, 2), bool)
    for i, tq in enumerate(t):
        feet[i], contact[i], yaw[i] = feet_at(tq)
        fp = feet_at(tq + h)[0]
        fm = feet_at(max(tq - h, 0.0))[0]
        vel[i] = (fp[:, :3] - fm[:, :3]) / (tq + h - max(tq - h, 0.0))
    return _assemble(t, np.mod(phase0 + t / L, 1.0), feet, vel, contact, schedule, root_height, yaw)


def _assemble(t, phase, feet, vel, contact, schedule, root_height, yaw=None) -> ScriptedTrajectory:
    root = np.empty((t.size, 4))
    root[:, 0:2] = feet[:, :, 0:2].mean(axis=1)
    root[:, 2] = feet[:, :, 2].mean(axis=1) + root_height
    root[:, 3] = 0.0 if yaw is None else yaw
    return ScriptedTrajectory(t, phase, root, feet, vel, contact, schedule, root_height)


@dataclass
class ScriptedEvaluation:
    scored_steps: list          # trajectory sample index at which each step scored
    final_index: int
    final_window: np.ndarray
    breakdowns: list


def evaluate_scripted(traj: ScriptedTrajectory, plan: FootstepPlan, weights: RewardWeights | None = None,
                      tracker: ScoreTracker | None = None) -> ScriptedEvaluation:
    """Run the scoring state machine and the reward terms along a trajectory.

    Loads come from the contact flags (weight shared equally in double
    support); actions and torques are identically zero.
    """
    sched = traj.schedule
    tracker = tracker or ScoreTracker(target_delay=sched.L_SS)
    weights = weights or RewardWeights()
    scored, rows = [], []
    window = plan_window(plan, tracker.current_index)
    zeros = np.zeros(6)
    for i in range(1, len(traj)):
        feet_xyz = traj.feet[i, :, :3]
        t1 = window[0]
        n_contact = max(int(traj.contact[i].sum()), 1)
        grf = traj.contact[i] / n_contact
        speed = normalize_speed(np.linalg.norm(traj.feet_vel[i], axis=-1))
        ind = indicators(traj.phase[i], sched)
        r_grf, r_spd = periodic_rewards(grf, speed, ind)
        r_step = step_reward(nearest_distance(feet_xyz, t1[:3]), floor_distance(traj.root[i], t1))
        r_orient = orientation_reward(heading_quaternion(traj.root[i, 3]), heading_quaternion(t1[3]))
        root_h = traj.root[i, 2] - traj.feet[i, :, 2].mean()
        r_height, r_upper = shape_rewards(root_h, traj.root_height, traj.root[i, :2], traj.root[i, :2])
        r_action, r_torque = smoothness_rewards(zeros, zeros, zeros, zeros)
        terms = (r_grf, r_spd, r_step, r_orient, r_height, r_upper, r_action, r_torque)
        rows.append(RewardBreakdown(*map(float, terms), total=total_reward(terms, weights)))
        tracker, hit, window = score_update(tracker, feet_xyz, sched.control_dt, plan)
        if hit:
            scored.append(i)
    return ScriptedEvaluation(scored, tracker.current_index, window, rows)
