"""Training loop, checkpoints and the training-curve log."""

from __future__ import annotations

import csv
import logging
import time
from pathlib import Path

import numpy as np
import torch

from ..config import RunConfig, dumps, loads
from ..errors import UsageError
from ..sim.mirror import MirrorMaps
from ..task import TERMINATION_CODES, TIMEOUT
from .networks import Actor, Critic, PolicySnapshot, obs_normalizer
from .ppo import NonFiniteLoss, ppo_update
from .rollout import collect_rollouts

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "stepwalk-checkpoint"
CHECKPOINT_VERSION = 1
CURVE_FIELDS = ("iteration", "mean_return", "mean_episode_length", "mean_progress", "mean_scored",
                "timeout_frac", "policy_loss", "value_loss", "sym_loss", "approx_kl", "clip_frac",
                "diverged", "aborted", "seconds")


def build_networks(cfg: RunConfig, seed: int, dtype=torch.float32):
    torch.manual_seed(seed)
    obs_dim, act_dim = 27, 6
    offset, scale = obs_normalizer(cfg.env.model)
    actor = Actor(obs_dim, act_dim, cfg.ppo.hidden, cfg.ppo.init_std, offset, scale, dtype)
    critic = Critic(obs_dim, cfg.ppo.hidden, offset, scale, dtype, value_scale=cfg.ppo.value_scale)
    return actor, critic


class Trainer:
    def __init__(self, cfg: RunConfig, seed: int | None = None):
        self.cfg = cfg
        self.seed = cfg.train.seed if seed is None else seed
        self.actor, self.critic = build_networks(cfg, self.seed)
        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=cfg.ppo.lr)
        self.critic_opt = torch.optim.Adam(self.critic.parameters(), lr=cfg.ppo.lr)
        self.mirror = MirrorMaps.for_joints(6)
        self.iteration = 0

    def snapshot(self) -> PolicySnapshot:
        return PolicySnapshot.of(self.actor, self.critic)

    def step(self, n_workers: int | None = None) -> dict:
        """Collect one batch with the current policy and update on it."""
        cfg = self.cfg
        t0 = time.perf_counter()
        itr = self.iteration
        buf = collect_rollouts(self.snapshot(), cfg.env, cfg.ppo.rollouts_per_batch, cfg.ppo.rollout_len,
                               self.seed, itr, n_workers or cfg.train.n_workers, policy_version=itr)
        rng = np.random.default_rng([self.seed, itr, 2 ** 32 - 1])
        aborted = 0
        try:
            stats = ppo_update(buf, self.actor, self.critic, self.actor_opt, self.critic_opt, cfg.ppo,
                               self.mirror, rng, policy_version=itr)
        except NonFiniteLoss as exc:
            log.warning("iteration %d aborted: %s", itr, exc)
            stats = {k: float("nan") for k in ("policy_loss", "value_loss", "sym_loss", "approx_kl", "clip_frac")}
            aborted = 1
        self.iteration += 1
        dt = cfg.env.schedule.control_dt
        row = {
            "iteration": itr,
            "mean_return": float(buf.episode_returns().mean()),
            "mean_episode_length": float(buf.lengths.mean() * dt),
            "mean_progress": float(buf.progress.mean()),
            "mean_scored": float(buf.scored.mean()),
            "timeout_frac": float(np.mean(buf.codes == TERMINATION_CODES[TIMEOUT])),
            **stats,
            "diverged": int(buf.diverged.sum()),
            "aborted": aborted,
            "seconds": time.perf_counter() - t0,
        }
        return row

    # -- persistence ------------------------------------------------------------

    def state(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "iteration": self.iteration,
            "seed": self.seed,
            "config": dumps(self.cfg),
            "actor": self.actor.state_dict(),
            "critic": self.critic.state_dict(),
            "actor_opt": self.actor_opt.state_dict(),
            "critic_opt": self.critic_opt.state_dict(),
        }

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        torch.save(self.state(), tmp)
        tmp.replace(path)

    @classmethod
    def load(cls, path, cfg: RunConfig | None = None) -> "Trainer":
        state = load_checkpoint(path)
        tr = cls(cfg or loads(state["config"]), seed=state["seed"])
        tr.actor.load_state_dict(state["actor"])
        tr.critic.load_state_dict(state["critic"])
        tr.actor_opt.load_state_dict(state["actor_opt"])
        tr.critic_opt.load_state_dict(state["critic_opt"])
        tr.iteration = state["iteration"]
        return tr


def load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"checkpoint not found: {path}")
    try:
        state = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:  # corrupt or foreign file
        raise UsageError(f"cannot read checkpoint {path}: {exc}") from None
    if not isinstance(state, dict) or state.get("format") != CHECKPOINT_FORMAT:
        raise UsageError(f"{path} is not a training checkpoint")
    if state.get("version") != CHECKPOINT_VERSION:
        raise UsageError(f"unsupported checkpoint version {state.get('version')}")
    return state


def load_policy(path) -> tuple[PolicySnapshot, RunConfig]:
    tr = Trainer.load(path)
    return tr.snapshot(), tr.cfg


def train(cfg: RunConfig, out_dir, iterations: int | None = None, resume=None, n_workers: int | None = None,
          progress=None) -> Trainer:
    """Run PPO, appending to ``training_curve.csv`` and checkpointing into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trainer = Trainer.load(resume, cfg) if resume else Trainer(cfg)
    total = cfg.train.iterations if iterations is None else iterations
    curve = out / "training_curve.csv"
    new_file = not curve.exists() or trainer.iteration == 0
    with open(curve, "w" if new_file else "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CURVE_FIELDS)
        if new_file:
            w.writeheader()
        while trainer.iteration < total:
            row = trainer.step(n_workers)
            w.writerow({k: _cell(row[k]) for k in CURVE_FIELDS})
            fh.flush()
            if progress:
                progress(row)
            every = cfg.train.checkpoint_every
            if every and trainer.iteration % every == 0:
                trainer.save(out / "checkpoint.pt")
    trainer.save(out / "checkpoint.pt")
    return trainer


def _cell(v):
    return repr(float(v)) if isinstance(v, float) else v


def read_curve(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]
