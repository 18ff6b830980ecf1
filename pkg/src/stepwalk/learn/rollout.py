"""Deterministic, optionally multi-process rollout collection.

Rollouts are simulated in fixed groups that share one batched simulator.
Group membership depends only on the rollout index and every rollout draws
from its own generator seeded by (master seed, iteration, index), so the
collected batch does not depend on how many workers run the groups.
"""

from __future__ import annotations

import multiprocessing as mp

import numpy as np

from ..env import EnvConfig, WalkingEnv
from ..task import DIVERGED, TERMINATION_CODES, TIMEOUT
from .networks import PolicySnapshot
from .ppo import RolloutBuffer

GROUP_SIZE = 16


def rollout_rng(seed: int, itr: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, itr, index])


def run_group(snapshot: PolicySnapshot, env_cfg: EnvConfig, indices, seed: int, itr: int,
              rollout_len: int, deterministic: bool = False, plans=None) -> list[dict]:
    """Simulate the rollouts ``indices`` side by side; one dict per rollout."""
    B = len(indices)
    env = WalkingEnv(env_cfg, B)
    rngs = [rollout_rng(seed, itr, int(k)) for k in indices]
    obs = np.stack([env.reset_row(i, rngs[i], itr, None if plans is None else plans[i]) for i in range(B)])
    n_act = env.n_joints
    std = snapshot.std
    rec = {k: [] for k in ("obs", "act", "logp", "rew", "val", "live")}
    for _ in range(rollout_len):
        live = ~env.done
        if not live.any():
            break
        mean = snapshot.mean(obs)
        if deterministic:
            act = mean
        else:
            noise = np.stack([rngs[i].standard_normal(n_act) if live[i] else np.zeros(n_act) for i in range(B)])
            act = mean + std * noise
        logp = snapshot.log_prob(obs, act)
        val = snapshot.value(obs)
        nxt, rew, done, info = env.step(act)
        for k, v in (("obs", obs), ("act", act), ("logp", logp), ("rew", rew), ("val", val), ("live", live)):
            rec[k].append(v)
        obs = nxt
    final_val = snapshot.value(obs)
    live = np.array(rec["live"])  # (T, B)
    out = []
    for i in range(B):
        steps = np.flatnonzero(live[:, i])
        code = int(env.code[i])
        terminal = code not in (0, TERMINATION_CODES[TIMEOUT])
        done = np.zeros(steps.size)
        if terminal and steps.size:
            done[-1] = 1.0
        out.append({
            "index": int(indices[i]),
            "obs": np.array([rec["obs"][t][i] for t in steps]).reshape(-1, env.obs_dim),
            "act": np.array([rec["act"][t][i] for t in steps]).reshape(-1, n_act),
            "logp": np.array([rec["logp"][t][i] for t in steps]),
            "rew": np.array([rec["rew"][t][i] for t in steps]),
            "val": np.array([rec["val"][t][i] for t in steps]),
            "done": done,
            "last_value": 0.0 if terminal else float(final_val[i]),
            "code": code,
            "progress": float(env.forward_progress()[i]),
            "scored": int(env.index[i]),
            "diverged": code == TERMINATION_CODES[DIVERGED],
        })
    return out


def _group_task(args):
    return run_group(*args)


def collect_rollouts(snapshot: PolicySnapshot, env_cfg: EnvConfig, n_rollouts: int = 64, rollout_len: int = 400,
                     seed: int = 0, itr: int = 0, n_workers: int = 1, group_size: int = GROUP_SIZE,
                     deterministic: bool = False, policy_version: int = 0) -> RolloutBuffer:
    if n_workers < 1:
        raise ValueError("n_workers must be at least 1")
    groups = [list(range(s, min(s + group_size, n_rollouts))) for s in range(0, n_rollouts, group_size)]
    tasks = [(snapshot, env_cfg, g, seed, itr, rollout_len, deterministic) for g in groups]
    if n_workers == 1 or len(groups) == 1:
        results = [_group_task(t) for t in tasks]
    else:
        ctx = mp.get_context("fork")
        with ctx.Pool(min(n_workers, len(groups))) as pool:
            results = pool.map(_group_task, tasks)
    rollouts = sorted((r for g in results for r in g), key=lambda r: r["index"])
    return assemble_buffer(rollouts, policy_version)


def assemble_buffer(rollouts: list[dict], policy_version: int = 0) -> RolloutBuffer:
    lengths = np.array([r["rew"].size for r in rollouts], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64)

    def cat(k):
        return np.concatenate([r[k] for r in rollouts])

    return RolloutBuffer(
        obs=cat("obs"), act=cat("act"), logp=cat("logp"), rew=cat("rew"), val=cat("val"), done=cat("done"),
        starts=starts, lengths=lengths,
        last_value=np.array([r["last_value"] for r in rollouts]),
        codes=np.array([r["code"] for r in rollouts], dtype=np.int64),
        progress=np.array([r["progress"] for r in rollouts]),
        scored=np.array([r["scored"] for r in rollouts], dtype=np.int64),
        diverged=np.array([r["diverged"] for r in rollouts], dtype=bool),
        policy_version=policy_version,
    )
