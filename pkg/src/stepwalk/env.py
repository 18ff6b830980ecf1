"""Vectorized footstep-following environment on the planar biped.

A batch of independent episodes advances in lockstep; each row owns its
plan, terrain, gait phase, scoring state and random generator.  The planar
robot is lifted to 3D for targets and rewards: root at (x, 0, z) with zero
yaw and roll, feet at y = +/- hip_half_width.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import task
from .gait import GaitSchedule, advance, indicators
from .plan import FootstepPlan, apply_stairs, gen_line_plan, gen_stand
from .reward import RewardWeights, normalize_grf, normalize_speed, orientation_reward, periodic_rewards, \
    quat_from_euler, shape_rewards, smoothness_rewards, step_reward
from .sim import dynamics as dyn
from .sim.biped import BatchSim, root_height_on_ground
from .sim.model import N_JOINTS, PlanarBipedModel, Terrain, default_model

PLANAR_MODES = ("forward", "backward", "stairs", "stand")


@dataclass(frozen=True)
class EnvConfig:
    model: PlanarBipedModel = field(default_factory=default_model)
    schedule: GaitSchedule = field(default_factory=lambda: GaitSchedule.preset("jvrc1"))
    step_length: float = 0.25
    plan_steps: int = 20
    # relative frequency of each plan type when an episode is reset
    mode_mix: tuple = (("forward", 1.0),)
    target_radius: float = 0.20
    target_delay: float | None = None    # defaults to the single-support duration
    score_requires_contact: bool = False
    joint_noise: float = 0.02
    termination: task.TerminationConfig = field(default_factory=task.TerminationConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)
    k_hit: float = 0.8
    hit_gate_radius: float | None = None
    curriculum_start: int = 3000
    curriculum_ramp: int = 8000
    curriculum_max: float = 0.10
    # robustness protocols
    obs_joint_noise: float = 0.0         # rad and rad/s, uniform each step
    terrain_noise: float = 0.0           # m, uniform per step target
    terrain_noise_physical: bool = False

    @property
    def delay(self) -> float:
        return self.schedule.L_SS if self.target_delay is None else self.target_delay

    @property
    def foot_spread(self) -> float:
        return self.model.hip_half_width

    def with_overrides(self, **kw) -> "EnvConfig":
        return replace(self, **kw)


def make_plan(mode: str, cfg: EnvConfig, rise: float = 0.0) -> FootstepPlan:
    if mode == "stand":
        return gen_stand()
    if mode in ("forward", "stairs"):
        plan = gen_line_plan("forward", cfg.step_length, cfg.foot_spread, cfg.plan_steps)
        return apply_stairs(plan, rise) if mode == "stairs" else plan
    if mode == "backward":
        return gen_line_plan("backward", cfg.step_length, cfg.foot_spread, cfg.plan_steps)
    raise ValueError(f"plan mode {mode!r} cannot be walked by the planar model")


def stairs_terrain(plan: FootstepPlan) -> Terrain:
    if plan.mode != "stairs":
        return Terrain.flat()
    a = plan.as_array()
    return Terrain.stairs(a[:, 0], a[:, 2], plan.step_length)


class WalkingEnv:
    """``n_envs`` episodes of the footstep task.

    Call :meth:`reset_row` for every row before stepping; rows that finish
    stay frozen (their ``done`` flag set) until reset again.
    """

    def __init__(self, cfg: EnvConfig | None = None, n_envs: int = 1):
        self.cfg = cfg or EnvConfig()
        m = self.cfg.model
        self.B = n_envs
        self.sim = BatchSim(m, [Terrain.flat()] * n_envs)
        self.n_joints = N_JOINTS
        self.obs_dim = task.observation_size(N_JOINTS)
        self.weight = m.weight
        # root height above flat ground in the nominal posture
        q0 = np.zeros(9)
        q0[3:] = m.nominal_joints
        self.nominal_height = root_height_on_ground(q0, self.sim.P, Terrain.flat())
        K = max(self.cfg.plan_steps, 1)
        self.targets = np.zeros((n_envs, K, 4))
        self.obs_targets = np.zeros((n_envs, K, 4))
        self.n_steps = np.ones(n_envs, dtype=np.int64)
        self.stand = np.zeros(n_envs, dtype=bool)
        self.phase = np.zeros(n_envs)
        self.index = np.zeros(n_envs, dtype=np.int64)
        self.timer = np.zeros(n_envs)
        self.t = np.zeros(n_envs, dtype=np.int64)
        self.prev_action = np.zeros((n_envs, N_JOINTS))
        self.prev_tau = np.zeros((n_envs, N_JOINTS))
        self.done = np.ones(n_envs, dtype=bool)
        self.code = np.zeros(n_envs, dtype=np.int64)
        self.start_x = np.zeros(n_envs)
        self.rngs = [np.random.default_rng(i) for i in range(n_envs)]
        self.plans: list[FootstepPlan | None] = [None] * n_envs
        self._feet = np.zeros((n_envs, 2, 4))
        self._low = np.zeros(n_envs)
        self.last_terms = np.zeros((n_envs, 8))
        self.last_grf = np.zeros((n_envs, 2))
        self.last_tau = np.zeros((n_envs, N_JOINTS))

    # -- episode setup ------------------------------------------------------

    def sample_mode(self, rng) -> str:
        names = [m for m, _ in self.cfg.mode_mix]
        w = np.array([float(v) for _, v in self.cfg.mode_mix])
        return names[int(rng.choice(len(names), p=w / w.sum()))]

    def reset_row(self, i: int, rng: np.random.Generator, itr: int = 0,
                  plan: FootstepPlan | None = None) -> np.ndarray:
        cfg = self.cfg
        self.rngs[i] = rng
        if plan is None:
            mode = self.sample_mode(rng)
            rise = 0.0
            if mode == "stairs":
                cur = task.CurriculumState(itr, cfg.curriculum_start, cfg.curriculum_ramp, cfg.curriculum_max)
                rise = task.curriculum_height(cur, rng)
                if rise == 0.0:
                    mode = "forward"
            plan = make_plan(mode, cfg, rise)
        if len(plan) > self.targets.shape[1]:
            self._grow(len(plan))
        self.plans[i] = plan
        a = plan.as_array()
        n = len(plan)
        self.targets[i, :n] = a
        self.targets[i, n:] = a[-1]
        self.n_steps[i] = n
        self.stand[i] = plan.is_stand
        terrain = stairs_terrain(plan)
        obs_t = self.targets[i].copy()
        if cfg.terrain_noise > 0 and plan.mode == "stairs":
            noise = rng.uniform(-cfg.terrain_noise, cfg.terrain_noise, size=n)
            if cfg.terrain_noise_physical:
                terrain = Terrain(terrain.edges, terrain.levels + np.concatenate([[0.0], noise]))
            else:
                obs_t[:n, 2] += noise
                obs_t[n:, 2] = obs_t[n - 1, 2]
        self.obs_targets[i] = obs_t
        self.sim.set_terrain(i, terrain)
        joints, phase0 = task.reset_state(rng, cfg.model.nominal_joints, cfg.joint_noise)
        self.sim.place(i, joints)
        self.phase[i] = phase0
        self.index[i] = 0
        self.timer[i] = 0.0
        self.t[i] = 0
        self.prev_action[i] = 0.0
        self.prev_tau[i] = 0.0
        self.done[i] = False
        self.code[i] = 0
        self.start_x[i] = self.sim.Q[i, 0]
        return self.observe()[i]

    def _grow(self, K: int):
        for name in ("targets", "obs_targets"):
            old = getattr(self, name)
            new = np.repeat(old[:, -1:], K, axis=1)
            new[:, : old.shape[1]] = old
            setattr(self, name, new)

    # -- readouts ---------------------------------------------------------------

    def _readouts(self):
        dyn.batch_readouts(self.sim.Q, self.sim.QD, self.sim.P, self._feet, self._low)
        return self._feet, self._low

    def feet_xyz(self) -> np.ndarray:
        feet, _ = self._readouts()
        w = self.cfg.model.hip_half_width
        out = np.empty((self.B, 2, 3))
        out[:, :, 0] = feet[:, :, 0]
        out[:, 0, 1] = w
        out[:, 1, 1] = -w
        out[:, :, 2] = feet[:, :, 1]
        return out

    def root_xyz(self) -> np.ndarray:
        q = self.sim.Q
        return np.stack([q[:, 0], np.zeros(self.B), q[:, 1]], axis=-1)

    def window(self, observed: bool = True) -> np.ndarray:
        src = self.obs_targets if observed else self.targets
        i1, i2 = task.window_indices(self.index, self.n_steps)
        rows = np.arange(self.B)
        return np.stack([src[rows, i1], src[rows, i2]], axis=1)

    def observe(self) -> np.ndarray:
        q, qd = self.sim.Q, self.sim.QD
        jp, jv = q[:, 3:].copy(), qd[:, 3:].copy()
        lvl = self.cfg.obs_joint_noise
        if lvl > 0:
            for i in range(self.B):
                if not self.done[i]:
                    jp[i] += self.rngs[i].uniform(-lvl, lvl, N_JOINTS)
                    jv[i] += self.rngs[i].uniform(-lvl, lvl, N_JOINTS)
        zeros = np.zeros(self.B)
        rp = np.stack([zeros, q[:, 2]], axis=-1)
        w = np.stack([zeros, qd[:, 2], zeros], axis=-1)
        rel = task.to_root_frame(self.window(observed=True), self.root_xyz()[:, None, :], zeros[:, None])
        return task.build_observation(jp, jv, rp, w, rel, self.phase, self.stand)

    # -- stepping ---------------------------------------------------------------------

    def step(self, actions):
        """Advance every live row by one control step.

        Returns (obs, reward, done, info); finished rows get zero reward.
        """
        cfg = self.cfg
        actions = np.clip(np.asarray(actions, dtype=np.float64), -1.0, 1.0)
        live = ~self.done
        grf, tau = self.sim.step(actions)
        self.last_grf, self.last_tau = grf, tau
        self.phase = np.where(live, advance(self.phase, cfg.schedule.control_dt, cfg.schedule.L), self.phase)
        feet, low = self._readouts()
        feet_xyz = self.feet_xyz()
        root = self.root_xyz()
        q = self.sim.Q

        # reward against the window in force before this step's scoring
        t1 = self.window(observed=False)[:, 0]
        sched = cfg.schedule
        ind = np.stack([np.asarray(x) for x in indicators(self.phase, sched)])
        ind_stand = np.stack([np.asarray(x) for x in indicators(self.phase, sched.as_standing())])
        ind = np.where(self.stand[None, :], ind_stand, ind)
        F = normalize_grf(grf, self.weight)
        S = normalize_speed(np.hypot(feet[:, :, 2], feet[:, :, 3]))
        r_grf, r_spd = periodic_rewards((F[:, 0], F[:, 1]), (S[:, 0], S[:, 1]), tuple(ind))
        d_foot = task.nearest_distance(feet_xyz, t1[:, :3])
        d_root = task.floor_distance(root, t1)
        r_step = step_reward(d_foot, d_root, cfg.k_hit, cfg.hit_gate_radius)
        zeros = np.zeros(self.B)
        r_orient = orientation_reward(quat_from_euler(zeros, q[:, 2], zeros), task.heading_quaternion(t1[:, 3]))
        ground = np.array([self.sim.terrains[i].height(q[i, 0]) for i in range(self.B)])
        head_dx = cfg.model.torso_length * np.sin(q[:, 2])
        r_height, r_upper = shape_rewards(q[:, 1] - ground, self.nominal_height,
                                          np.stack([head_dx, zeros], -1), np.zeros((self.B, 2)))
        r_action, r_torque = smoothness_rewards(actions, self.prev_action, tau, self.prev_tau)
        terms = np.stack([r_grf, r_spd, r_step, r_orient, r_height, r_upper, r_action, r_torque], axis=-1)
        reward = terms @ cfg.weights.as_array()
        self.last_terms = terms

        # scoring
        feet_for_score = feet_xyz
        if cfg.score_requires_contact:
            # a foot off the ground is pushed out of every radius
            loaded = grf > 1e-3 * self.weight
            feet_for_score = np.where(loaded[:, :, None], feet_xyz, np.inf)
        self.index, self.timer, scored = task.score_kernel(
            self.index, self.timer, t1[:, :3], feet_for_score, sched.control_dt, cfg.target_radius,
            cfg.delay, self.n_steps, done=self.done)

        self.t = np.where(live, self.t + 1, self.t)
        self.prev_action = np.where(live[:, None], actions, self.prev_action)
        self.prev_tau = np.where(live[:, None], tau, self.prev_tau)
        code = task.termination_kernel(q[:, 1] - low, self.sim.collision, self.t, cfg.termination)
        code = np.where(self.sim.status != 0, task.TERMINATION_CODES[task.DIVERGED], code)
        newly = live & (code != 0)
        self.code = np.where(newly, code, self.code)
        self.done = self.done | newly
        reward = np.where(live, reward, 0.0)
        if np.any(self.sim.status != 0):
            reward = np.where(self.sim.status != 0, 0.0, reward)
        obs = self.observe()
        info = {"scored": scored, "code": self.code.copy(), "live": live, "terms": terms}
        return obs, reward, self.done.copy(), info

    def forward_progress(self) -> np.ndarray:
        return self.sim.Q[:, 0] - self.start_x
