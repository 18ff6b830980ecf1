"""Clipped-surrogate PPO with GAE and a mirror-symmetry penalty."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import InvalidArgument


class NonFiniteLoss(FloatingPointError):
    """Raised when a loss goes NaN/inf; the update is rolled back."""


@dataclass(frozen=True)
class PPOConfig:
    rollout_len: int = 400
    rollouts_per_batch: int = 64
    lr: float = 1e-4
    clip: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    epochs: int = 3
    minibatch: int = 4096
    sym_loss_weight: float = 4.0
    value_coef: float = 1.0
    value_scale: float = 50.0
    max_grad_norm: float = 0.0
    init_std: float = 0.3
    hidden: tuple = (256, 256)

    def __post_init__(self):
        if not (0 < self.gamma <= 1 and 0 < self.lam <= 1):
            raise InvalidArgument("gamma and lambda must lie in (0, 1]")
        if not self.lr > 0:
            raise InvalidArgument("learning rate must be positive")


def gae_advantages(rewards, values, dones, gamma: float, lam: float, normalize: bool = False):
    """Generalized advantage estimates and value targets for one trajectory.

    ``values`` has one more entry than ``rewards``: the last is the bootstrap
    value of the state after the final step.  ``dones[t]`` marks a terminal
    transition, after which nothing is bootstrapped.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    d = np.asarray(dones, dtype=np.float64)
    T = r.size
    if v.size != T + 1 or d.size != T:
        raise InvalidArgument("values must have len(rewards) + 1 entries")
    adv = np.zeros(T)
    last = 0.0
    for t in range(T - 1, -1, -1):
        nonterminal = 1.0 - d[t]
        delta = r[t] + gamma * v[t + 1] * nonterminal - v[t]
        last = delta + gamma * lam * nonterminal * last
        adv[t] = last
    ret = adv + v[:T]
    if normalize:
        adv = normalize_advantages(adv)
    return adv, ret


def normalize_advantages(adv):
    adv = np.asarray(adv, dtype=np.float64)
    return (adv - adv.mean()) / (adv.std() + 1e-8)


@dataclass
class RolloutBuffer:
    obs: np.ndarray
    act: np.ndarray
    logp: np.ndarray
    rew: np.ndarray
    val: np.ndarray
    done: np.ndarray
    # per rollout
    starts: np.ndarray
    lengths: np.ndarray
    last_value: np.ndarray
    codes: np.ndarray
    progress: np.ndarray
    scored: np.ndarray
    diverged: np.ndarray
    policy_version: int = 0
    adv: np.ndarray | None = field(default=None)
    ret: np.ndarray | None = field(default=None)

    def __len__(self) -> int:
        return self.rew.size

    def compute_returns(self, gamma: float, lam: float):
        adv = np.empty_like(self.rew)
        ret = np.empty_like(self.rew)
        for s, n, lv in zip(self.starts, self.lengths, self.last_value):
            sl = slice(s, s + n)
            a, r = gae_advantages(self.rew[sl], np.append(self.val[sl], lv), self.done[sl], gamma, lam)
            adv[sl], ret[sl] = a, r
        self.adv, self.ret = adv, ret
        return adv, ret

    def episode_returns(self) -> np.ndarray:
        return np.array([self.rew[s:s + n].sum() for s, n in zip(self.starts, self.lengths)])


def symmetry_loss(actor, obs, mirror):
    """Mean squared gap between the mirrored-state mean and the mirrored mean."""
    perm_s = torch.as_tensor(mirror.obs_perm)
    sign_s = torch.as_tensor(mirror.obs_sign, dtype=obs.dtype)
    perm_a = torch.as_tensor(mirror.act_perm)
    sign_a = torch.as_tensor(mirror.act_sign, dtype=obs.dtype)
    mu = actor(obs)
    mu_m = actor(obs[:, perm_s] * sign_s)
    gap = mu_m - mu[:, perm_a] * sign_a
    return (gap * gap).sum(-1).mean()


def surrogate_loss(actor, obs, act, old_logp, adv, clip: float):
    logp = actor.log_prob(obs, act)
    ratio = torch.exp(logp - old_logp)
    unclipped = ratio * adv
    clipped = torch.clamp(ratio, 1.0 - clip, 1.0 + clip) * adv
    return -torch.min(unclipped, clipped).mean(), ratio


def ppo_update(buf: RolloutBuffer, actor, critic, actor_opt, critic_opt, cfg: PPOConfig, mirror=None,
               rng: np.random.Generator | None = None, policy_version: int | None = None) -> dict:
    """Several epochs of minibatch updates over one freshly collected batch.

    The symmetry term is left out entirely when its weight is zero or no
    mirror maps are given.  A non-finite loss restores the networks and
    optimizers to their state before the call and raises NonFiniteLoss.
    """
    if policy_version is not None and buf.policy_version != policy_version:
        raise InvalidArgument("buffer was collected by a different policy version")
    rng = rng or np.random.default_rng(0)
    if buf.adv is None:
        buf.compute_returns(cfg.gamma, cfg.lam)
    dtype = next(actor.parameters()).dtype
    obs = torch.as_tensor(buf.obs, dtype=dtype)
    act = torch.as_tensor(buf.act, dtype=dtype)
    old_logp = torch.as_tensor(buf.logp, dtype=dtype)
    adv = torch.as_tensor(normalize_advantages(buf.adv), dtype=dtype)
    ret = torch.as_tensor(buf.ret, dtype=dtype)
    use_sym = mirror is not None and cfg.sym_loss_weight != 0.0

    backup = _snapshot(actor, critic, actor_opt, critic_opt)
    N = len(buf)
    mb = min(cfg.minibatch, N)
    sums = {"policy_loss": 0.0, "value_loss": 0.0, "sym_loss": 0.0, "approx_kl": 0.0, "clip_frac": 0.0}
    count = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(N)
        for start in range(0, N, mb):
            idx = torch.as_tensor(perm[start:start + mb])
            o, a = obs[idx], act[idx]
            pl, ratio = surrogate_loss(actor, o, a, old_logp[idx], adv[idx], cfg.clip)
            loss = pl
            sl = None
            if use_sym:
                sl = symmetry_loss(actor, o, mirror)
                loss = loss + cfg.sym_loss_weight * sl
            vl = ((critic(o) - ret[idx]) ** 2).mean()
            if not (torch.isfinite(loss) and torch.isfinite(vl)):
                _restore(backup, actor, critic, actor_opt, critic_opt)
                raise NonFiniteLoss(f"non-finite loss at epoch {epoch}, sample {start}: "
                                    f"policy={pl.item()}, value={vl.item()}, sym={None if sl is None else sl.item()}")
            actor_opt.zero_grad()
            loss.backward()
            if cfg.max_grad_norm:
                torch.nn.utils.clip_grad_norm_(actor.parameters(), cfg.max_grad_norm)
            actor_opt.step()
            critic_opt.zero_grad()
            (cfg.value_coef * vl).backward()
            if cfg.max_grad_norm:
                torch.nn.utils.clip_grad_norm_(critic.parameters(), cfg.max_grad_norm)
            critic_opt.step()
            with torch.no_grad():
                log_ratio = torch.log(ratio)
                sums["approx_kl"] += float(((ratio - 1.0) - log_ratio).mean())
                sums["clip_frac"] += float(((ratio - 1.0).abs() > cfg.clip).to(dtype).mean())
            sums["policy_loss"] += pl.item()
            sums["value_loss"] += vl.item()
            sums["sym_loss"] += 0.0 if sl is None else sl.item()
            count += 1
    return {k: v / max(count, 1) for k, v in sums.items()}


def _snapshot(actor, critic, actor_opt, critic_opt):
    import copy
    return (copy.deepcopy(actor.state_dict()), copy.deepcopy(critic.state_dict()),
            copy.deepcopy(actor_opt.state_dict()), copy.deepcopy(critic_opt.state_dict()))


def _restore(backup, actor, critic, actor_opt, critic_opt):
    a, c, ao, co = backup
    actor.load_state_dict(a)
    critic.load_state_dict(c)
    actor_opt.load_state_dict(ao)
    critic_opt.load_state_dict(co)
