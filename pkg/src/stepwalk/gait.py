"""Gait-cycle timing, clock encoding and smoothed phase indicators.

The cycle is laid out as DS, SS (left foot swinging), DS, SS (right foot
swinging).  Phase is stored normalized to [0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

# (single support, double support) seconds
PRESETS = {
    "hrp5p": (0.75, 0.35),
    "jvrc1": (0.80, 0.20),
}


@dataclass(frozen=True)
class GaitSchedule:
    L_SS: float
    L_DS: float
    control_dt: float = 1.0 / 40.0
    standing: bool = False
    # width of each cosine transition, as a fraction of the cycle
    ramp: float = 0.05

    def __post_init__(self):
        if not self.standing and (self.L_SS <= 0 or self.L_DS <= 0):
            raise InvalidArgument("phase durations must be positive")
        if self.control_dt <= 0:
            raise InvalidArgument("control_dt must be positive")
        if not 0.0 < self.ramp:
            raise InvalidArgument("ramp width must be positive")
        if not self.standing and self.ramp > 2.0 * min(self.ds_fraction, self.ss_fraction):
            raise InvalidArgument("ramp wider than a gait phase")

    @property
    def L(self) -> float:
        return 2.0 * (self.L_DS + self.L_SS)

    @property
    def ds_fraction(self) -> float:
        return self.L_DS / self.L

    @property
    def ss_fraction(self) -> float:
        return self.L_SS / self.L

    @classmethod
    def preset(cls, name: str, **kw) -> "GaitSchedule":
        try:
            ss, ds = PRESETS[name]
        except KeyError:
            raise InvalidArgument(f"unknown gait preset {name!r}") from None
        return cls(ss, ds, **kw)

    def as_standing(self) -> "GaitSchedule":
        return GaitSchedule(self.L_SS, self.L_DS, self.control_dt, True, self.ramp)

    def boundaries(self) -> tuple[float, float, float, float]:
        """Phase values where DS1, left SS, DS2 and right SS begin."""
        a = self.ds_fraction
        return 0.0, a, 0.5, 0.5 + a


def clock_encode(phase):
    """Map phase to a point on the unit circle, (sin 2 pi phase, cos 2 pi phase)."""
    ang = 2.0 * np.pi * np.asarray(phase, dtype=np.float64)
    return np.sin(ang), np.cos(ang)


def advance(phase, dt, period):
    if np.any(np.asarray(dt) < 0):
        raise InvalidArgument("dt must be non-negative")
    return np.mod(np.asarray(phase, dtype=np.float64) + np.asarray(dt) / period, 1.0)


def _smooth_box(phase, start, end, width):
    """~1 on [start, end) of the unit circle with cosine edges centered on the
    boundaries; the ramps must not overlap."""
    half = 0.5 * width
    length = np.mod(end - start, 1.0)
    u = np.mod(phase - start + half, 1.0)  # distance past the rising ramp's start
    rise = np.clip(u / width, 0.0, 1.0)
    fall = np.clip((u - length) / width, 0.0, 1.0)
    up = 0.5 - 0.5 * np.cos(np.pi * rise)
    down = 0.5 - 0.5 * np.cos(np.pi * fall)
    return up - down


def swing_fractions(phase, schedule: GaitSchedule):
    """Smoothed membership of the left-swing and right-swing phases."""
    phase = np.asarray(phase, dtype=np.float64)
    if schedule.standing:
        z = np.zeros_like(phase)
        return z, z.copy()
    _, l0, d2, r0 = schedule.boundaries()
    left = _smooth_box(phase, l0, d2, schedule.ramp)
    right = _smooth_box(phase, r0, 1.0, schedule.ramp)
    return left, right


def indicators(phase, schedule: GaitSchedule):
    """(I_left_grf, I_right_grf, I_left_spd, I_right_spd), each in [-1, 1].

    A swinging foot has its force penalized and speed rewarded; a supporting
    foot the opposite.
    """
    left, right = swing_fractions(phase, schedule)
    l_grf = 1.0 - 2.0 * left
    r_grf = 1.0 - 2.0 * right
    return l_grf, r_grf, -l_grf, -r_grf


def indicator_lipschitz(schedule: GaitSchedule) -> float:
    """Largest slope of any indicator with respect to phase."""
    return 0.0 if schedule.standing else math.pi / schedule.ramp


def swing_side(phase, schedule: GaitSchedule) -> str | None:
    """Which foot swings at this phase (unsmoothed), or None in double support."""
    if schedule.standing:
        return None
    _, l0, d2, r0 = schedule.boundaries()
    p = float(phase) % 1.0
    if l0 <= p < d2:
        return "left"
    if r0 <= p < 1.0:
        return "right"
    return None
