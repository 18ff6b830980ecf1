"""Left/right mirror maps for observations, actions and planar sim states.

Mirroring swaps the left and right joint blocks, flips every lateral
quantity (roll, roll and yaw rates, target y and heading) and shifts the
clock by half a cycle, which negates both of its components.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..task import observation_slices


def _swap_blocks(n_joints: int) -> np.ndarray:
    h = n_joints // 2
    return np.concatenate([np.arange(h, n_joints), np.arange(0, h)])


@dataclass(frozen=True)
class MirrorMaps:
    """Signed permutations: ``mirrored[i] = sign[i] * x[perm[i]]``."""

    obs_perm: np.ndarray
    obs_sign: np.ndarray
    act_perm: np.ndarray
    act_sign: np.ndarray

    @classmethod
    def for_joints(cls, n_joints: int = 6) -> "MirrorMaps":
        if n_joints % 2:
            raise ValueError("joints must come in left/right pairs")
        sl = observation_slices(n_joints)
        size = sl["clock"].stop
        perm = np.arange(size)
        sign = np.ones(size)
        swap = _swap_blocks(n_joints)
        perm[sl["joint_pos"]] = sl["joint_pos"].start + swap
        perm[sl["joint_vel"]] = sl["joint_vel"].start + swap
        rp = sl["root_rp"].start
        sign[rp] = -1.0                       # roll
        w = sl["root_angvel"].start
        sign[w] = sign[w + 2] = -1.0          # roll rate, yaw rate
        e = sl["external"].start
        for k in (0, 4):
            sign[e + k + 1] = -1.0            # target y
            sign[e + k + 3] = -1.0            # target heading
        sign[sl["clock"]] = -1.0
        return cls(perm, sign, swap, np.ones(n_joints))

    def state_matrix(self) -> np.ndarray:
        return _as_matrix(self.obs_perm, self.obs_sign)

    def action_matrix(self) -> np.ndarray:
        return _as_matrix(self.act_perm, self.act_sign)

    def mirror_state(self, s):
        s = np.asarray(s)
        return s[..., self.obs_perm] * self.obs_sign

    def mirror_action(self, a):
        a = np.asarray(a)
        return a[..., self.act_perm] * self.act_sign


def _as_matrix(perm, sign) -> np.ndarray:
    n = perm.size
    m = np.zeros((n, n))
    m[np.arange(n), perm] = sign
    return m


_DEFAULT = MirrorMaps.for_joints(6)


def mirror_state(s, maps: MirrorMaps | None = None):
    return (maps or _DEFAULT).mirror_state(s)


def mirror_action(a, maps: MirrorMaps | None = None):
    return (maps or _DEFAULT).mirror_action(a)


def mirror_sim_coordinates(q):
    """Swap the leg blocks of planar generalized coordinates (or velocities).

    The sagittal model has no lateral coordinates, so nothing changes sign.
    """
    q = np.asarray(q)
    out = q.copy()
    out[..., 3:6] = q[..., 6:9]
    out[..., 6:9] = q[..., 3:6]
    return out
