"""Planar 7-link biped description.

Generalized coordinates (9): root x, root z, torso pitch, then
left hip/knee/ankle and right hip/knee/ankle pitch angles.  Angles follow a
right-handed rotation about +y with x forward and z up, so a positive torso
pitch leans forward, a negative hip angle swings the thigh forward and a
positive knee angle bends the knee.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

JOINT_NAMES = ("l_hip", "l_knee", "l_ankle", "r_hip", "r_knee", "r_ankle")
N_JOINTS = 6
N_DOF = 9


@dataclass(frozen=True)
class PlanarBipedModel:
    torso_mass: float = 36.0
    torso_length: float = 0.70
    torso_com: float = 0.30
    torso_inertia: float = 1.5
    thigh_mass: float = 7.0
    thigh_length: float = 0.40
    thigh_com: float = 0.18
    thigh_inertia: float = 0.10
    shank_mass: float = 3.5
    shank_length: float = 0.40
    shank_com: float = 0.18
    shank_inertia: float = 0.05
    foot_mass: float = 1.0
    foot_com_x: float = 0.05
    foot_com_z: float = -0.03
    foot_inertia: float = 0.01
    heel_x: float = -0.06
    toe_x: float = 0.16
    ankle_height: float = 0.06
    # lateral offset of each leg from the sagittal plane; only used when the
    # planar state is lifted to 3D for targets and rewards
    hip_half_width: float = 0.12
    gravity: float = 9.81
    armature: tuple[float, float, float] = (0.10, 0.10, 0.05)
    joint_lower: tuple[float, float, float] = (-1.6, 0.0, -0.8)
    joint_upper: tuple[float, float, float] = (0.6, 2.4, 0.6)
    kp: tuple[float, float, float] = (300.0, 800.0, 600.0)
    kd: tuple[float, float, float] = (30.0, 80.0, 60.0)
    torque_limit: tuple[float, float, float] = (200.0, 250.0, 150.0)
    velocity_limit: tuple[float, float, float] = (10.0, 10.0, 10.0)
    nominal: tuple[float, float, float] = (-0.32, 0.70, -0.38)
    contact_stiffness: float = 1.0e5
    contact_damping: float = 1.0e3
    friction_damping: float = 1.0e4
    friction_coef: float = 0.8
    limit_stiffness: float = 1000.0
    joint_damping: float = 0.0
    max_speed: float = 200.0
    action_scale: float = 0.5

    def __post_init__(self):
        masses = (self.torso_mass, self.thigh_mass, self.shank_mass, self.foot_mass)
        if min(masses) <= 0:
            raise ValueError("link masses must be positive")

    @property
    def total_mass(self) -> float:
        return self.torso_mass + 2.0 * (self.thigh_mass + self.shank_mass + self.foot_mass)

    @property
    def weight(self) -> float:
        return self.total_mass * self.gravity

    def per_joint(self, name: str) -> np.ndarray:
        """Expand a (hip, knee, ankle) triple to the 6 actuated joints."""
        vals = getattr(self, name)
        return np.array(tuple(vals) * 2, dtype=np.float64)

    @property
    def nominal_joints(self) -> np.ndarray:
        return self.per_joint("nominal")

    def packed(self) -> np.ndarray:
        """Scalar parameters in the order the kernels index them."""
        return np.array([getattr(self, f) for f in PACKED_FIELDS], dtype=np.float64)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kw) -> "PlanarBipedModel":
        return replace(self, **kw)


PACKED_FIELDS = (
    "torso_mass", "torso_length", "torso_com", "torso_inertia",
    "thigh_mass", "thigh_length", "thigh_com", "thigh_inertia",
    "shank_mass", "shank_length", "shank_com", "shank_inertia",
    "foot_mass", "foot_com_x", "foot_com_z", "foot_inertia",
    "heel_x", "toe_x", "ankle_height", "gravity",
    "contact_stiffness", "contact_damping", "friction_damping", "friction_coef",
    "limit_stiffness", "joint_damping", "max_speed",
)


def default_model() -> PlanarBipedModel:
    """About 59 kg and 1.56 m tall, proportions close to a small humanoid."""
    return PlanarBipedModel()


@dataclass
class Terrain:
    """Piecewise-constant ground profile along x.

    ``height(x) = levels[i]`` where ``i`` counts the edges at or left of x,
    so ``levels`` has one more entry than ``edges``.
    """

    edges: np.ndarray = field(default_factory=lambda: np.zeros(0))
    levels: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.float64)
        self.levels = np.asarray(self.levels, dtype=np.float64)
        if self.levels.shape != (self.edges.size + 1,):
            raise ValueError("levels must have len(edges) + 1 entries")
        if self.edges.size > 1 and np.any(np.diff(self.edges) <= 0):
            raise ValueError("terrain edges must be strictly increasing")

    @classmethod
    def flat(cls) -> "Terrain":
        return cls()

    @classmethod
    def stairs(cls, step_x, step_z, run: float) -> "Terrain":
        """One tread per target, each centered on its target x and ``run`` long."""
        step_x = np.asarray(step_x, dtype=np.float64)
        step_z = np.asarray(step_z, dtype=np.float64)
        if step_x.size == 0:
            return cls.flat()
        edges = step_x - 0.5 * run
        return cls(edges=edges, levels=np.concatenate([[0.0], step_z]))

    def height(self, x):
        i = np.searchsorted(self.edges, x, side="right")
        return self.levels[i]
