"""Object-level simulator API around the compiled kernels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SimulationDiverged
from . import dynamics as dyn
from .model import N_DOF, N_JOINTS, PlanarBipedModel, Terrain, default_model

CONTROL_DT = 1.0 / 40.0
PHYSICS_DT = 1.0e-3
N_SUBSTEPS = 25


def pd_torque(q_des, q, qd, kp, kd, torque_limits):
    """Joint-space PD law with symmetric saturation."""
    tau = np.asarray(kp) * (np.asarray(q_des) - q) - np.asarray(kd) * qd
    return np.clip(tau, -np.asarray(torque_limits), torque_limits)


@dataclass
class PlanarBipedState:
    q: np.ndarray
    qd: np.ndarray
    t: float = 0.0
    # per contact point (normal force, tangential force, normal x, normal z)
    contact: np.ndarray = field(default_factory=lambda: np.zeros((4, 4)))
    grf: np.ndarray = field(default_factory=lambda: np.zeros(2))
    tau: np.ndarray = field(default_factory=lambda: np.zeros(N_JOINTS))
    self_collision: bool = False

    def copy(self) -> "PlanarBipedState":
        return PlanarBipedState(self.q.copy(), self.qd.copy(), self.t, self.contact.copy(),
                                self.grf.copy(), self.tau.copy(), self.self_collision)

    @property
    def joints(self) -> np.ndarray:
        return self.q[3:]

    @property
    def joint_vel(self) -> np.ndarray:
        return self.qd[3:]


class PlanarBiped:
    """Single planar biped instance (tests, logging, evaluation helpers).

    Training uses :class:`BatchSim`, which drives the same kernels over many
    rows at once.
    """

    def __init__(self, model: PlanarBipedModel | None = None, terrain: Terrain | None = None):
        self.model = model or default_model()
        self.terrain = terrain or Terrain.flat()
        self._P = self.model.packed()
        self._jp = dyn.joint_params(self.model)

    def standing_state(self, joints=None, x: float = 0.0, pitch: float = 0.0) -> PlanarBipedState:
        """Place the robot so its lowest sole point rests on the terrain."""
        q = np.zeros(N_DOF)
        q[0] = x
        q[2] = pitch
        q[3:] = self.model.nominal_joints if joints is None else joints
        q[1] = root_height_on_ground(q, self._P, self.terrain)
        return PlanarBipedState(q, np.zeros(N_DOF))

    def physics_step(self, state: PlanarBipedState, tau, dt: float = PHYSICS_DT) -> PlanarBipedState:
        if not 0.0 < dt <= 2e-3:
            raise ValueError("dt must lie in (0, 2e-3]")
        s = state.copy()
        tau = np.ascontiguousarray(tau, dtype=np.float64)
        status = dyn.physics_step_kernel(s.q, s.qd, tau, self._P, self._jp, self.terrain.edges,
                                         self.terrain.levels, self.terrain.edges.size, dt,
                                         s.contact, s.grf)
        if status:
            raise SimulationDiverged(f"state diverged at t={state.t + dt:.4f}")
        s.tau = tau.copy()
        s.t = state.t + dt
        s.self_collision = bool(dyn.self_collision(s.q, self._P))
        return s

    def desired_joints(self, action) -> np.ndarray:
        a = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        return self.model.nominal_joints + self.model.action_scale * a

    def control_step(self, state: PlanarBipedState, action, n_sub: int = N_SUBSTEPS):
        """One 40 Hz policy step: ``n_sub`` PD + physics substeps at 1 kHz.

        Returns (new state, mean per-foot vertical GRF, mean applied torque).
        """
        sim = BatchSim(self.model, [self.terrain])
        sim.Q[0] = state.q
        sim.QD[0] = state.qd
        grf, tau = sim.step(np.asarray(action, dtype=np.float64)[None, :], n_sub=n_sub)
        if sim.status[0]:
            raise SimulationDiverged(f"state diverged near t={state.t:.3f}")
        s = PlanarBipedState(sim.Q[0].copy(), sim.QD[0].copy(), state.t + n_sub * PHYSICS_DT,
                             grf=grf[0].copy(), tau=tau[0].copy(),
                             self_collision=bool(sim.collision[0]))
        return s, grf[0].copy(), tau[0].copy()

    def energy(self, state: PlanarBipedState) -> float:
        return float(dyn.energy(state.q, state.qd, self._P, self._jp))

    def skeleton(self, q) -> np.ndarray:
        pts = np.empty((10, 2))
        dyn.skeleton(np.asarray(q, dtype=np.float64), self._P, pts)
        return pts


def root_height_on_ground(q, P, terrain: Terrain) -> float:
    pts = np.empty((10, 2))
    qq = np.array(q, dtype=np.float64)
    qq[1] = 0.0
    dyn.skeleton(qq, P, pts)
    soles = pts[[4, 5, 8, 9]]
    ground = terrain.height(soles[:, 0])
    return float(np.max(ground - soles[:, 1]))


class BatchSim:
    """Many independent bipeds sharing one model, each with its own terrain."""

    def __init__(self, model: PlanarBipedModel, terrains):
        self.model = model
        self.P = model.packed()
        self.jp = dyn.joint_params(model)
        B = len(terrains)
        self.B = B
        self.Q = np.zeros((B, N_DOF))
        self.QD = np.zeros((B, N_DOF))
        self.status = np.zeros(B, dtype=np.int64)
        self.collision = np.zeros(B, dtype=bool)
        self.force_stats = np.zeros((B, 2))
        self.set_terrains(terrains)

    def set_terrains(self, terrains):
        K = max(1, max(t.edges.size for t in terrains))
        self.edges = np.full((self.B, K), np.inf)
        self.levels = np.zeros((self.B, K + 1))
        self.n_edges = np.zeros(self.B, dtype=np.int64)
        self.terrains = list(terrains)
        for i, t in enumerate(terrains):
            n = t.edges.size
            self.edges[i, :n] = t.edges
            self.levels[i, : n + 1] = t.levels
            self.levels[i, n + 1:] = t.levels[-1]
            self.n_edges[i] = n

    def set_terrain(self, i: int, terrain: Terrain):
        terrains = list(self.terrains)
        terrains[i] = terrain
        if terrain.edges.size > self.edges.shape[1]:
            self.set_terrains(terrains)
            return
        self.terrains = terrains
        n = terrain.edges.size
        self.edges[i] = np.inf
        self.edges[i, :n] = terrain.edges
        self.levels[i, : n + 1] = terrain.levels
        self.levels[i, n + 1:] = terrain.levels[-1]
        self.n_edges[i] = n

    def place(self, i: int, joints, x: float = 0.0, pitch: float = 0.0):
        q = np.zeros(N_DOF)
        q[0] = x
        q[2] = pitch
        q[3:] = joints
        q[1] = root_height_on_ground(q, self.P, self.terrains[i])
        self.Q[i] = q
        self.QD[i] = 0.0
        self.status[i] = 0
        self.collision[i] = False
        self.force_stats[i] = 0.0

    def step(self, actions, n_sub: int = N_SUBSTEPS, dt: float = PHYSICS_DT):
        actions = np.clip(np.asarray(actions, dtype=np.float64), -1.0, 1.0)
        qdes = self.model.nominal_joints[None, :] + self.model.action_scale * actions
        grf = np.zeros((self.B, 2))
        tau = np.zeros((self.B, N_JOINTS))
        dyn.control_steps(self.Q, self.QD, np.ascontiguousarray(qdes), self.jp, self.P, self.edges,
                          self.levels, self.n_edges, n_sub, dt, grf, tau, self.collision,
                          self.status, self.force_stats)
        return grf, tau

    def feet(self) -> np.ndarray:
        """(B, 2, 4) sole-center x, z, vx, vz per foot (left, right)."""
        out = np.empty((self.B, 2, 4))
        for i in range(self.B):
            dyn.foot_kinematics(self.Q[i], self.QD[i], self.P, out[i])
        return out

    def head_x(self) -> np.ndarray:
        return self.Q[:, 0] + self.model.torso_length * np.sin(self.Q[:, 2])
