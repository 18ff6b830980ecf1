"""Gaussian policy and value networks, plus numpy snapshots for rollouts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


def obs_normalizer(model, n_joints: int = 6):
    """Fixed (offset, scale) for the observation layout; mirror-symmetric."""
    from ..task import observation_slices
    sl = observation_slices(n_joints)
    size = sl["clock"].stop
    offset = np.zeros(size)
    scale = np.ones(size)
    offset[sl["joint_pos"]] = model.nominal_joints
    scale[sl["joint_pos"]] = 0.5
    scale[sl["joint_vel"]] = 5.0
    scale[sl["root_angvel"]] = 2.0
    e = sl["external"].start
    for k in (0, 4):
        offset[e + k + 2] = -0.8   # targets sit about one root height below the root
        scale[e + k: e + k + 3] = 0.5
    return offset, scale


def _mlp(sizes, out_act=None):
    layers = []
    for i in range(len(sizes) - 1):
        layers.append(nn.Linear(sizes[i], sizes[i + 1]))
        if i < len(sizes) - 2:
            layers.append(nn.ReLU())
    if out_act is not None:
        layers.append(out_act)
    return nn.Sequential(*layers)


class _Normalized(nn.Module):
    def __init__(self, obs_dim, offset, scale, dtype):
        super().__init__()
        off = torch.zeros(obs_dim, dtype=dtype) if offset is None else torch.as_tensor(offset, dtype=dtype)
        sc = torch.ones(obs_dim, dtype=dtype) if scale is None else torch.as_tensor(scale, dtype=dtype)
        self.register_buffer("obs_offset", off.clone())
        self.register_buffer("obs_scale", sc.clone())

    def norm(self, obs):
        return (obs - self.obs_offset) / self.obs_scale


class Actor(_Normalized):
    """tanh-squashed mean with a state-independent log standard deviation."""

    def __init__(self, obs_dim, act_dim, hidden=(256, 256), init_std=0.3, offset=None, scale=None,
                 dtype=torch.float32):
        super().__init__(obs_dim, offset, scale, dtype)
        self.body = _mlp([obs_dim, *hidden, act_dim], nn.Tanh()).to(dtype)
        # start close to the nominal posture: tiny output weights, zero bias
        last = self.body[-2]
        with torch.no_grad():
            last.weight.mul_(0.01)
            last.bias.zero_()
        self.log_std = nn.Parameter(torch.full((act_dim,), math.log(init_std), dtype=dtype))

    def forward(self, obs):
        return self.body(self.norm(obs))

    def log_prob(self, obs, act):
        mean = self(obs)
        std = self.log_std.exp()
        z = (act - mean) / std
        return (-0.5 * z * z - self.log_std - 0.5 * math.log(2.0 * math.pi)).sum(-1)


class Critic(_Normalized):
    """Value network; the raw output is multiplied by ``value_scale`` so that
    discounted returns of order 1 / (1 - gamma) are reachable with small
    weights."""

    def __init__(self, obs_dim, hidden=(256, 256), offset=None, scale=None, dtype=torch.float32,
                 value_scale: float = 1.0):
        super().__init__(obs_dim, offset, scale, dtype)
        self.body = _mlp([obs_dim, *hidden, 1]).to(dtype)
        self.value_scale = float(value_scale)

    def forward(self, obs):
        return self.value_scale * self.body(self.norm(obs)).squeeze(-1)


def _layers(seq: nn.Sequential):
    return [(m.weight.detach().cpu().double().numpy().copy(), m.bias.detach().cpu().double().numpy().copy())
            for m in seq if isinstance(m, nn.Linear)]


@dataclass(frozen=True)
class PolicySnapshot:
    """Immutable float64 copy of the networks, safe to ship to worker processes."""

    actor: list
    critic: list
    log_std: np.ndarray
    offset: np.ndarray
    scale: np.ndarray
    c_offset: np.ndarray
    c_scale: np.ndarray

    @classmethod
    def of(cls, actor: Actor, critic: Critic) -> "PolicySnapshot":
        c_layers = _layers(critic.body)
        W, b = c_layers[-1]
        c_layers[-1] = (W * critic.value_scale, b * critic.value_scale)
        return cls(_layers(actor.body), c_layers,
                   actor.log_std.detach().double().numpy().copy(),
                   actor.obs_offset.double().numpy().copy(), actor.obs_scale.double().numpy().copy(),
                   critic.obs_offset.double().numpy().copy(), critic.obs_scale.double().numpy().copy())

    @staticmethod
    def _run(layers, x):
        for k, (W, b) in enumerate(layers):
            x = x @ W.T + b
            if k < len(layers) - 1:
                x = np.maximum(x, 0.0)
        return x

    def mean(self, obs):
        return np.tanh(self._run(self.actor, (obs - self.offset) / self.scale))

    def value(self, obs):
        return self._run(self.critic, (obs - self.c_offset) / self.c_scale)[..., 0]

    @property
    def std(self):
        return np.exp(self.log_std)

    def log_prob(self, obs, act):
        z = (act - self.mean(obs)) / self.std
        return np.sum(-0.5 * z * z - self.log_std - 0.5 * math.log(2.0 * math.pi), axis=-1)
