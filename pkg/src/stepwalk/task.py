"""Episode bookkeeping: target windowing in the root frame, observations,
step scoring, the stair-height curriculum, resets and termination."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgument
from .gait import clock_encode
from .plan import Footstep, FootstepPlan, wrap_angle

CONTINUE, FALL, SELF_COLLISION, TIMEOUT = "continue", "fall", "self_collision", "timeout"
# not a paper outcome: numerical blow-up inside the simulator
DIVERGED = "diverged"
TERMINATION_CODES = {CONTINUE: 0, FALL: 1, SELF_COLLISION: 2, TIMEOUT: 3, DIVERGED: 4}
TERMINATION_NAMES = {v: k for k, v in TERMINATION_CODES.items()}


def _as_target(step) -> np.ndarray:
    if isinstance(step, Footstep):
        return step.as_array()
    return np.asarray(step, dtype=np.float64)


def to_root_frame(step, root_pos, yaw):
    """Express a target (x, y, z, heading) relative to the root.

    Works on a single target or any (..., 4) array; ``root_pos`` is (x, y, z)
    with matching leading shape.
    """
    s = _as_target(step)
    p = np.asarray(root_pos, dtype=np.float64)
    yaw = np.asarray(yaw, dtype=np.float64)
    dx, dy, dz = s[..., 0] - p[..., 0], s[..., 1] - p[..., 1], s[..., 2] - p[..., 2]
    c, sn = np.cos(yaw), np.sin(yaw)
    return np.stack([c * dx + sn * dy, -sn * dx + c * dy, dz, wrap_angle(s[..., 3] - yaw)], axis=-1)


def from_root_frame(rel, root_pos, yaw):
    r = np.asarray(rel, dtype=np.float64)
    p = np.asarray(root_pos, dtype=np.float64)
    yaw = np.asarray(yaw, dtype=np.float64)
    c, sn = np.cos(yaw), np.sin(yaw)
    x = p[..., 0] + c * r[..., 0] - sn * r[..., 1]
    y = p[..., 1] + sn * r[..., 0] + c * r[..., 1]
    return np.stack([x, y, p[..., 2] + r[..., 2], wrap_angle(r[..., 3] + yaw)], axis=-1)


def observation_size(n_joints: int) -> int:
    return 2 * n_joints + 2 + 3 + 8 + 2


def observation_slices(n_joints: int) -> dict:
    n = n_joints
    return {
        "joint_pos": slice(0, n),
        "joint_vel": slice(n, 2 * n),
        "root_rp": slice(2 * n, 2 * n + 2),
        "root_angvel": slice(2 * n + 2, 2 * n + 5),
        "external": slice(2 * n + 5, 2 * n + 13),
        "clock": slice(2 * n + 13, 2 * n + 15),
    }


def build_observation(joint_pos, joint_vel, root_rp, root_angvel, window_rel, phase, stand=False):
    """Concatenate robot state, the two root-relative targets and the clock.

    Layout: joint positions, joint velocities, (roll, pitch), angular
    velocity (3), T1 (x, y, z, heading), T2 (same), clock (2).  Leading batch
    dimensions are allowed.  Standing episodes see zeros for the targets and
    the clock, which carry no information there.
    """
    jp = np.asarray(joint_pos, dtype=np.float64)
    jv = np.asarray(joint_vel, dtype=np.float64)
    rp = np.asarray(root_rp, dtype=np.float64)
    w = np.asarray(root_angvel, dtype=np.float64)
    win = np.asarray(window_rel, dtype=np.float64)
    batch = jp.shape[:-1]
    if jv.shape != jp.shape or rp.shape[-1] != 2 or w.shape[-1] != 3 or win.shape[-2:] != (2, 4):
        raise RuntimeError("observation component shapes do not match")
    ext = win.reshape(batch + (8,))
    s, c = clock_encode(phase)
    clock = np.stack([np.broadcast_to(s, batch), np.broadcast_to(c, batch)], axis=-1)
    stand = np.broadcast_to(np.asarray(stand, dtype=bool), batch)[..., None]
    ext = np.where(stand, 0.0, ext)
    clock = np.where(stand, 0.0, clock)
    obs = np.concatenate([jp, jv, rp, w, ext, clock], axis=-1)
    if obs.shape[-1] != observation_size(jp.shape[-1]):
        raise RuntimeError("observation has the wrong size")
    return obs


# -- scoring ------------------------------------------------------------------


@dataclass(frozen=True)
class ScoreTracker:
    current_index: int = 0
    in_radius_timer: float = 0.0
    target_radius: float = 0.20
    target_delay: float = 0.80


def window_indices(index, n_steps):
    """Indices of the two observed targets; past the end the last step repeats."""
    index = np.asarray(index)
    last = n_steps - 1
    return np.minimum(index, last), np.minimum(index + 1, last)


def plan_window(plan: FootstepPlan, index: int) -> np.ndarray:
    """(2, 4) world-frame targets observed while ``index`` steps are scored."""
    if len(plan) == 0:
        raise InvalidArgument("plan has no steps")
    a = plan.as_array()
    i1, i2 = window_indices(index, len(plan))
    return np.stack([a[int(i1)], a[int(i2)]])


def score_kernel(index, timer, target_xyz, feet_xyz, dt, radius, delay, n_steps, done=None):
    """Vectorized scoring update.

    index, timer: (B,); target_xyz: (B, 3) current T1; feet_xyz: (B, F, 3).
    Returns (new index, new timer, scored mask).  Rows whose plan is
    exhausted (index == n_steps) or flagged ``done`` are left untouched.
    """
    index = np.asarray(index)
    timer = np.asarray(timer, dtype=np.float64)
    d = np.linalg.norm(np.asarray(feet_xyz) - np.asarray(target_xyz)[:, None, :], axis=-1)
    inside = np.any(d <= radius, axis=-1)
    live = index < n_steps
    if done is not None:
        live &= ~np.asarray(done)
    new_timer = np.where(inside, timer + dt, 0.0)
    scored = live & (new_timer > delay + 1e-9)
    new_timer = np.where(scored, 0.0, new_timer)
    new_timer = np.where(live, new_timer, timer)
    return index + scored.astype(index.dtype), new_timer, scored


def score_update(tracker: ScoreTracker, feet_positions, dt: float, plan: FootstepPlan):
    """Advance the in-radius timer; slide the window once a foot has held T1
    for longer than the target delay.

    Returns (tracker', scored, window') with the window in world coordinates.
    """
    if len(plan) == 0:
        raise InvalidArgument("plan has no steps")
    if not dt > 0:
        raise InvalidArgument("dt must be positive")
    feet = np.asarray(feet_positions, dtype=np.float64).reshape(1, -1, 3)
    target = plan_window(plan, tracker.current_index)[0, :3]
    idx, tm, sc = score_kernel(np.array([tracker.current_index]), np.array([tracker.in_radius_timer]),
                               target[None], feet, dt, tracker.target_radius, tracker.target_delay,
                               len(plan))
    new = replace(tracker, current_index=int(idx[0]), in_radius_timer=float(tm[0]))
    return new, bool(sc[0]), plan_window(plan, new.current_index)


# -- curriculum -----------------------------------------------------------------


@dataclass(frozen=True)
class CurriculumState:
    itr: int = 0
    start_itr: int = 3000
    ramp_itrs: int = 8000
    max_height: float = 0.10

    def magnitude(self) -> float:
        if self.itr < self.start_itr:
            return 0.0
        return self.max_height * min(1.0, (self.itr - self.start_itr) / self.ramp_itrs)


def curriculum_height(state: CurriculumState, rng) -> float:
    """Stair rise for this iteration, with a random up/down sign."""
    if state.itr < 0:
        raise InvalidArgument("iteration must be non-negative")
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return sign * state.magnitude()


# -- reset and termination ---------------------------------------------------


def reset_state(rng, nominal_posture, joint_noise_mag: float = 0.02):
    """Noisy nominal joints and a starting phase of 0 or 0.5."""
    if joint_noise_mag < 0:
        raise InvalidArgument("noise magnitude must be non-negative")
    nominal = np.asarray(nominal_posture, dtype=np.float64)
    noise = rng.uniform(-joint_noise_mag, joint_noise_mag, size=nominal.shape)
    joints = nominal + noise if joint_noise_mag > 0 else nominal.copy()
    phase0 = 0.0 if rng.random() < 0.5 else 0.5
    return joints, phase0


@dataclass(frozen=True)
class TerminationConfig:
    min_root_height: float = 0.60
    max_control_steps: int = 400

    def __post_init__(self):
        if not self.min_root_height > 0:
            raise InvalidArgument("min_root_height must be positive")
        if self.max_control_steps < 1:
            raise InvalidArgument("max_control_steps must be at least 1")


def termination_kernel(root_clearance, self_collision, steps, cfg: TerminationConfig):
    """Batched termination codes; fall outranks self-collision outranks timeout."""
    clearance = np.asarray(root_clearance, dtype=np.float64)
    code = np.zeros(clearance.shape, dtype=np.int64)
    code = np.where(np.asarray(steps) >= cfg.max_control_steps, TERMINATION_CODES[TIMEOUT], code)
    code = np.where(np.asarray(self_collision, dtype=bool), TERMINATION_CODES[SELF_COLLISION], code)
    code = np.where(~(clearance >= cfg.min_root_height), TERMINATION_CODES[FALL], code)
    return code


def check_termination(root_clearance: float, self_collision: bool, t: int,
                      config: TerminationConfig | None = None) -> str:
    """``root_clearance`` is root height above the lowest foot contact point;
    ``t`` counts control steps taken."""
    cfg = config or TerminationConfig()
    return TERMINATION_NAMES[int(termination_kernel(root_clearance, self_collision, t, cfg))]


def heading_quaternion(yaw):
    h = 0.5 * np.asarray(yaw, dtype=np.float64)
    z = np.zeros_like(h)
    return np.stack([np.cos(h), z, z, np.sin(h)], axis=-1)


def nearest_distance(feet_xyz, target_xyz):
    d = np.linalg.norm(np.asarray(feet_xyz) - np.asarray(target_xyz)[..., None, :], axis=-1)
    return d.min(axis=-1)


def floor_distance(a_xy, b_xy):
    d = np.asarray(a_xy)[..., :2] - np.asarray(b_xy)[..., :2]
    return np.hypot(d[..., 0], d[..., 1])
