"""Run configuration: sectioned ``key = value`` files mapped onto dataclasses."""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields, replace

from .env import EnvConfig
from .errors import UsageError
from .gait import GaitSchedule
from .learn.ppo import PPOConfig
from .reward import RewardWeights
from .sim.model import PlanarBipedModel
from .task import TerminationConfig


@dataclass(frozen=True)
class TrainSettings:
    iterations: int = 500
    seed: int = 0
    n_workers: int = 1
    checkpoint_every: int = 25
    eval_episodes: int = 16


@dataclass(frozen=True)
class EvalSettings:
    n_trials: int = 100
    episode_steps: int = 400
    stairs_rise: float = 0.05
    terrain_levels: tuple = (0.0, 0.01, 0.02, 0.03, 0.04)
    obs_levels_deg: tuple = (0.0, 1.0, 2.0, 3.0, 4.0)
    walk_seconds: float = 10.0


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    train: TrainSettings = field(default_factory=TrainSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)


# section -> (getter, rebuilder) pairs over the nested dataclasses
_ENV_KEYS = ("step_length", "plan_steps", "mode_mix", "target_radius", "target_delay", "score_requires_contact",
             "joint_noise", "k_hit", "hit_gate_radius", "curriculum_start", "curriculum_ramp", "curriculum_max",
             "obs_joint_noise", "terrain_noise", "terrain_noise_physical")


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{a}:{_fmt(b)}" for a, b in v)
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(text: str, default, name: str):
    t = text.strip()
    try:
        if t.lower() == "none":
            return None
        if isinstance(default, bool):
            if t.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(t)
            return t.lower() in ("true", "1", "yes")
        if isinstance(default, int):
            return int(t)
        if isinstance(default, float) or default is None:
            return float(t)
        if isinstance(default, tuple):
            parts = [p.strip() for p in t.split(",") if p.strip()]
            if default and isinstance(default[0], tuple) or any(":" in p for p in parts):
                return tuple((a.strip(), float(b)) for a, b in (p.split(":") for p in parts))
            proto = default[0] if default else 0.0
            return tuple(_parse(p, proto, name) for p in parts)
        return t
    except ValueError:
        raise UsageError(f"bad value for {name}: {text!r}") from None


def to_sections(cfg: RunConfig) -> dict:
    e = cfg.env
    return {
        "model": {f.name: getattr(e.model, f.name) for f in fields(e.model)},
        "gait": {"single_support": e.schedule.L_SS, "double_support": e.schedule.L_DS,
                 "control_dt": e.schedule.control_dt, "ramp": e.schedule.ramp},
        "task": {k: getattr(e, k) for k in _ENV_KEYS} | {
            "min_root_height": e.termination.min_root_height,
            "max_control_steps": e.termination.max_control_steps},
        "reward": {f.name: getattr(e.weights, f.name) for f in fields(e.weights)},
        "ppo": {f.name: getattr(cfg.ppo, f.name) for f in fields(cfg.ppo)},
        "train": {f.name: getattr(cfg.train, f.name) for f in fields(cfg.train)},
        "eval": {f.name: getattr(cfg.eval, f.name) for f in fields(cfg.eval)},
    }


def dumps(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser()
    for sec, vals in to_sections(cfg).items():
        cp[sec] = {k: _fmt(v) for k, v in vals.items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def loads(text: str, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"unreadable configuration: {exc}") from None
    defaults = to_sections(base)
    got = {}
    for sec in cp.sections():
        if sec not in defaults:
            raise UsageError(f"unknown section [{sec}]")
        got[sec] = {}
        for k, v in cp[sec].items():
            if k not in defaults[sec]:
                raise UsageError(f"unknown key {k!r} in [{sec}]")
            got[sec][k] = _parse(v, defaults[sec][k], f"{sec}.{k}")
    vals = {sec: defaults[sec] | got.get(sec, {}) for sec in defaults}

    try:
        model = PlanarBipedModel(**vals["model"])
        g = vals["gait"]
        schedule = GaitSchedule(g["single_support"], g["double_support"], g["control_dt"], ramp=g["ramp"])
        t = dict(vals["task"])
        term = TerminationConfig(t.pop("min_root_height"), t.pop("max_control_steps"))
        env = replace(base.env, model=model, schedule=schedule, termination=term,
                      weights=RewardWeights(**vals["reward"]), **t)
        return RunConfig(env, PPOConfig(**vals["ppo"]), TrainSettings(**vals["train"]),
                         EvalSettings(**vals["eval"]))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def load(path) -> RunConfig:
    try:
        with open(path) as fh:
            return loads(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read configuration {path}: {exc}") from None


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(dumps(cfg).encode()).hexdigest()
