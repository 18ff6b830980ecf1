"""Reward terms for footstep-following locomotion and their weighted sum.

Every function accepts scalars or numpy arrays; batched callers pass a
leading batch axis.
"""

from __future__ import annotations

import math
from dataclasses import asdict, astuple, dataclass, fields

import numpy as np

from .errors import InvalidArgument

FOOT_SCALE = 0.25
ROOT_SCALE = 2.0
SPEED_REFERENCE = 1.0  # m/s treated as "fully moving"


@dataclass(frozen=True)
class RewardWeights:
    grf: float = 0.15
    spd: float = 0.15
    step: float = 0.45
    orient: float = 0.05
    height: float = 0.05
    upper: float = 0.05
    action: float = 0.05
    torque: float = 0.05

    def __post_init__(self):
        w = astuple(self)
        if any(not math.isfinite(v) or v < 0 for v in w):
            raise InvalidArgument("reward weights must be finite and non-negative")
        if abs(sum(w) - 1.0) > 1e-9:
            raise InvalidArgument(f"reward weights must sum to 1, got {sum(w)}")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self))


@dataclass(frozen=True)
class RewardBreakdown:
    r_grf: float
    r_spd: float
    r_step: float
    r_orient: float
    r_height: float
    r_upper: float
    r_action: float
    r_torque: float
    total: float

    TERMS = ("r_grf", "r_spd", "r_step", "r_orient", "r_height", "r_upper", "r_action", "r_torque")

    @classmethod
    def from_terms(cls, terms, weights: RewardWeights | None = None) -> "RewardBreakdown":
        terms = [float(t) for t in terms]
        return cls(*terms, total=total_reward(terms, weights))

    def terms(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.TERMS])

    def as_row(self) -> list[float]:
        return [getattr(self, f.name) for f in fields(self)]

    @staticmethod
    def header() -> list[str]:
        return [f.name for f in fields(RewardBreakdown)]


@dataclass
class RewardInputs:
    grf_norm: tuple           # (left, right) in [0, 1]
    speed_norm: tuple         # (left, right) in [0, 1]
    d_foot: float
    d_root: float
    quat: np.ndarray
    quat_target: np.ndarray
    root_height: float
    root_height_target: float
    head_xy: np.ndarray
    root_xy: np.ndarray
    action: np.ndarray
    prev_action: np.ndarray
    torque: np.ndarray
    prev_torque: np.ndarray
    indicators: tuple         # (I_left_grf, I_right_grf, I_left_spd, I_right_spd)


def normalize_grf(force, weight):
    """Vertical force as a clamped fraction of body weight."""
    return np.clip(np.asarray(force, dtype=np.float64) / weight, 0.0, 1.0)


def normalize_speed(speed, reference: float = SPEED_REFERENCE):
    return np.clip(np.asarray(speed, dtype=np.float64) / reference, 0.0, 1.0)


def _in_unit(name, *vals):
    for v in vals:
        v = np.asarray(v)
        if np.any(~np.isfinite(v)) or np.any(v < 0.0) or np.any(v > 1.0):
            raise InvalidArgument(f"{name} must lie in [0, 1]")


def periodic_rewards(grf_norm, speed_norm, ind):
    """Phase-signed force and speed terms, each halved into [-1, 1]."""
    fl, fr = grf_norm
    sl, sr = speed_norm
    _in_unit("normalized GRF", fl, fr)
    _in_unit("normalized foot speed", sl, sr)
    il_g, ir_g, il_s, ir_s = ind
    for i in ind:
        i = np.asarray(i)
        if np.any(np.abs(i) > 1.0 + 1e-12):
            raise InvalidArgument("phase indicators must lie in [-1, 1]")
    r_grf = 0.5 * (il_g * np.asarray(fl) + ir_g * np.asarray(fr))
    r_spd = 0.5 * (il_s * np.asarray(sl) + ir_s * np.asarray(sr))
    return r_grf, r_spd


def step_reward(d_foot, d_root, k_hit: float = 0.8, gate_radius: float | None = None):
    """Blend of foot-to-target and root-to-target proximity.

    With ``gate_radius`` set, the foot term only pays out while the nearest
    foot is inside that radius.
    """
    d_foot = np.asarray(d_foot, dtype=np.float64)
    d_root = np.asarray(d_root, dtype=np.float64)
    if np.any(d_foot < 0) or np.any(d_root < 0):
        raise InvalidArgument("distances must be non-negative")
    if not 0.0 <= k_hit <= 1.0:
        raise InvalidArgument("k_hit must lie in [0, 1]")
    hit = np.exp(-d_foot / FOOT_SCALE)
    if gate_radius is not None:
        hit = np.where(d_foot <= gate_radius, hit, 0.0)
    return k_hit * hit + (1.0 - k_hit) * np.exp(-d_root / ROOT_SCALE)


def orientation_reward(q, q_target, tol: float = 1e-6):
    """exp(-10 (1 - <q, q_target>^2)); quaternions are (w, x, y, z)."""
    q = np.asarray(q, dtype=np.float64)
    qt = np.asarray(q_target, dtype=np.float64)
    for name, v in (("q", q), ("q_target", qt)):
        if np.any(np.abs(np.linalg.norm(v, axis=-1) - 1.0) > tol):
            raise InvalidArgument(f"{name} is not a unit quaternion")
    dot = np.sum(q * qt, axis=-1)
    return np.exp(-10.0 * (1.0 - dot * dot))


def shape_rewards(root_height, root_height_target, head_xy, root_xy):
    dh = np.asarray(root_height, dtype=np.float64) - root_height_target
    diff = np.asarray(head_xy, dtype=np.float64) - np.asarray(root_xy, dtype=np.float64)
    r_height = np.exp(-40.0 * dh * dh)
    r_upper = np.exp(-10.0 * np.sum(diff * diff, axis=-1))
    return r_height, r_upper


def smoothness_rewards(action, prev_action, torque, prev_torque, n_joints: int | None = None):
    """Mean absolute change of actions and torques, exponentiated."""
    a, ap = np.asarray(action, dtype=np.float64), np.asarray(prev_action, dtype=np.float64)
    t, tp = np.asarray(torque, dtype=np.float64), np.asarray(prev_torque, dtype=np.float64)
    if a.shape != ap.shape or t.shape != tp.shape or a.shape[-1] != t.shape[-1]:
        raise InvalidArgument("action and torque vectors must have matching lengths")
    n = a.shape[-1] if n_joints is None else n_joints
    if n != a.shape[-1]:
        raise InvalidArgument(f"expected {n} joints, got {a.shape[-1]}")
    r_action = np.exp(-5.0 * np.sum(np.abs(a - ap), axis=-1) / n)
    r_torque = np.exp(-0.25 * np.sum(np.abs(t - tp), axis=-1) / n)
    return r_action, r_torque


def total_reward(terms, weights: RewardWeights | None = None):
    """Weighted sum of the eight terms, in RewardBreakdown.TERMS order.

    ``terms`` may be a breakdown, a length-8 sequence, or an array whose last
    axis has length 8.
    """
    w = (weights or RewardWeights()).as_array()
    if isinstance(terms, RewardBreakdown):
        terms = terms.terms()
    arr = np.asarray(terms, dtype=np.float64)
    if arr.shape[-1] != 8:
        raise InvalidArgument("expected 8 reward terms")
    out = arr @ w
    return float(out) if out.ndim == 0 else out


def compute_rewards(inp: RewardInputs, weights: RewardWeights | None = None, k_hit: float = 0.8,
                    gate_radius: float | None = None) -> RewardBreakdown:
    r_grf, r_spd = periodic_rewards(inp.grf_norm, inp.speed_norm, inp.indicators)
    r_step = step_reward(inp.d_foot, inp.d_root, k_hit, gate_radius)
    r_orient = orientation_reward(inp.quat, inp.quat_target)
    r_height, r_upper = shape_rewards(inp.root_height, inp.root_height_target, inp.head_xy, inp.root_xy)
    r_action, r_torque = smoothness_rewards(inp.action, inp.prev_action, inp.torque, inp.prev_torque)
    return RewardBreakdown.from_terms(
        (r_grf, r_spd, r_step, r_orient, r_height, r_upper, r_action, r_torque), weights)


# -- quaternion helpers -----------------------------------------------------


def quat_from_euler(roll, pitch, yaw):
    """(w, x, y, z) for intrinsic z-y-x (yaw, then pitch, then roll)."""
    cr, sr = np.cos(0.5 * np.asarray(roll)), np.sin(0.5 * np.asarray(roll))
    cp, sp = np.cos(0.5 * np.asarray(pitch)), np.sin(0.5 * np.asarray(pitch))
    cy, sy = np.cos(0.5 * np.asarray(yaw)), np.sin(0.5 * np.asarray(yaw))
    return np.stack([
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    ], axis=-1)


def quat_multiply(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def breakdown_csv_header() -> str:
    return ",".join(["step"] + RewardBreakdown.header())


def breakdown_csv_row(step: int, b: RewardBreakdown) -> str:
    return ",".join([str(step)] + [repr(float(v)) for v in b.as_row()])


def breakdown_dict(b: RewardBreakdown) -> dict:
    return asdict(b)
