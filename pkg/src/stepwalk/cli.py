"""Command-line entry points.

Every command writes its CSV outputs plus ``manifest.json`` (command line,
configuration hash, seeds) into ``--out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

from . import config as config_mod
from .errors import InvalidArgument, PlanningFailure, UsageError

log = logging.getLogger("stepwalk")


def _load_config(args):
    cfg = config_mod.load(args.config) if args.config else config_mod.RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, train=replace(cfg.train, seed=args.seed))
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, args, cfg, extra=None):
    from . import __version__
    data = {
        "command": args.command,
        "argv": sys.argv[1:],
        "version": __version__,
        "config_hash": config_mod.config_hash(cfg),
        "seed": cfg.train.seed,
        "checkpoint": getattr(args, "checkpoint", None),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    data.update(extra or {})
    (out / "manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    (out / "config.ini").write_text(config_mod.dumps(cfg))


def _policy(args, cfg, required=True):
    from .learn.trainer import load_policy
    if not args.checkpoint:
        if required:
            raise UsageError("--checkpoint is required for this command")
        return None, cfg
    snap, ckpt_cfg = load_policy(args.checkpoint)
    return snap, (cfg if args.config else ckpt_cfg)


def cmd_train(args):
    from .learn.trainer import train
    cfg = _load_config(args)
    out = _out_dir(args)
    _manifest(out, args, cfg, {"iterations": args.iterations or cfg.train.iterations})

    def progress(row):
        log.info("itr %d return %.2f length %.2fs progress %.2fm", row["iteration"], row["mean_return"],
                 row["mean_episode_length"], row["mean_progress"])

    train(cfg, out, args.iterations, resume=args.checkpoint, n_workers=args.workers, progress=progress)
    print(out / "checkpoint.pt")


def cmd_eval(args):
    from .evaluation import evaluate_walking
    cfg = _load_config(args)
    snap, cfg = _policy(args, cfg)
    cfg = replace(cfg, train=replace(cfg.train, seed=args.seed if args.seed is not None else cfg.train.seed))
    out = _out_dir(args)
    s = evaluate_walking(snap, cfg.env, args.episodes, cfg.train.seed, cfg.eval.episode_steps)
    lines = ["n_episodes,mean_progress,mean_episode_length,success_rate,mean_scored",
             f"{s.n_episodes},{s.mean_progress!r},{s.mean_episode_length!r},{s.success_rate!r},{s.mean_scored!r}"]
    (out / "eval.csv").write_text("\n".join(lines) + "\n")
    _manifest(out, args, cfg)
    print(json.dumps(asdict(s)))


def cmd_plan(args):
    from . import plan as P
    cfg = _load_config(args)
    out = _out_dir(args)
    e = cfg.env
    length = args.step_length or e.step_length
    spread = args.foot_spread or e.foot_spread
    try:
        if args.mode in P.LINE_DIRECTIONS:
            plan = P.gen_line_plan(args.mode, length, spread, args.steps)
        elif args.mode == "stairs":
            plan = P.apply_stairs(P.gen_line_plan("forward", length, spread, args.steps), args.rise)
        elif args.mode == "stand":
            plan = P.gen_stand()
        elif args.mode == "turn":
            plan = P.gen_turn_in_place(math.radians(args.total_yaw), math.radians(args.yaw_step), spread)
        else:
            grid = P.load_grid(args.grid) if args.grid else P.OccupancyGrid.empty(-1.5, -1.5, 1.5, 1.5, 0.05)
            goal = tuple(args.goal) if args.goal else P.sample_goal(cfg.train.seed)
            plan = P.plan_curved(grid, (0.0, 0.0, 0.0), goal, P.PlannerParams(step_length=length, foot_spread=spread))
    except (InvalidArgument, PlanningFailure) as exc:
        raise UsageError(str(exc)) from None
    P.save_plan(plan, out / "plan.txt")
    _manifest(out, args, cfg, {"mode": args.mode, "n_steps": len(plan)})
    print(out / "plan.txt")


def _levels(text, default):
    if not text:
        return default
    return tuple(float(v) for v in text.split(","))


def cmd_sweep_terrain(args):
    from .evaluation import terrain_noise_sweep, write_trial_reports
    cfg = _load_config(args)
    snap, cfg = _policy(args, cfg)
    seed = args.seed if args.seed is not None else cfg.train.seed
    levels = _levels(args.levels, cfg.eval.terrain_levels)
    out = _out_dir(args)
    reps = terrain_noise_sweep(snap, cfg.env, levels, args.trials or cfg.eval.n_trials, seed,
                               args.rise if args.rise is not None else cfg.eval.stairs_rise, args.physical,
                               cfg.eval.episode_steps)
    write_trial_reports(reps, out / "terrain_sweep.csv")
    _manifest(out, args, cfg, {"levels": list(levels), "sweep_seed": seed})
    print(out / "terrain_sweep.csv")


def cmd_sweep_obs(args):
    from .evaluation import obs_noise_sweep, write_trial_reports
    cfg = _load_config(args)
    snap, cfg = _policy(args, cfg)
    seed = args.seed if args.seed is not None else cfg.train.seed
    levels = _levels(args.levels, cfg.eval.obs_levels_deg)
    out = _out_dir(args)
    reps = obs_noise_sweep(snap, cfg.env, levels, args.trials or cfg.eval.n_trials, seed,
                           episode_steps=cfg.eval.episode_steps)
    write_trial_reports(reps, out / "obs_sweep.csv")
    _manifest(out, args, cfg, {"levels": list(levels), "sweep_seed": seed})
    print(out / "obs_sweep.csv")


def cmd_grf_log(args):
    from .env import make_plan
    from .evaluation import grf_log
    from .plan import load_plan
    cfg = _load_config(args)
    snap, cfg = _policy(args, cfg, required=not args.zero_action)
    if args.plan:
        plan = load_plan(args.plan)
    else:
        plan = make_plan("stand" if args.zero_action else "forward", cfg.env)
    seed = args.seed if args.seed is not None else cfg.train.seed
    out = _out_dir(args)
    rows = grf_log(snap, cfg.env, plan, args.duration or cfg.eval.walk_seconds, seed, out / "grf_log.csv")
    _manifest(out, args, cfg, {"rows": len(rows)})
    print(out / "grf_log.csv")


def cmd_report(args):
    from .evaluation import read_log, report_peaks
    cfg = _load_config(args)
    out = _out_dir(args)
    rep = report_peaks(read_log(args.log), cfg.env.model)
    rep.to_csv(out / "peaks.csv")
    _manifest(out, args, cfg, {"log": args.log})
    print(out / "peaks.csv")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stepwalk", description="Footstep-following biped locomotion toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, checkpoint=True):
        sp.add_argument("--config", help="run configuration file")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", required=True, help="output directory")
        if checkpoint:
            sp.add_argument("--checkpoint", help="training checkpoint")

    sp = sub.add_parser("train", help="train a policy with PPO")
    common(sp)
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate forward walking")
    common(sp)
    sp.add_argument("--episodes", type=int, default=16)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("plan", help="generate a footstep plan file")
    common(sp, checkpoint=False)
    sp.add_argument("--mode", default="forward",
                    choices=["forward", "backward", "lateral+", "lateral-", "stairs", "stand", "turn", "curved"])
    sp.add_argument("--steps", type=int, default=10)
    sp.add_argument("--step-length", type=float)
    sp.add_argument("--foot-spread", type=float)
    sp.add_argument("--rise", type=float, default=0.10)
    sp.add_argument("--total-yaw", type=float, default=90.0, help="degrees")
    sp.add_argument("--yaw-step", type=float, default=22.5, help="degrees")
    sp.add_argument("--grid", help="occupancy grid file for curved plans")
    sp.add_argument("--goal", type=float, nargs=3, metavar=("X", "Y", "YAW"))
    sp.set_defaults(func=cmd_plan)

    for name, func, help_ in (("sweep-terrain", cmd_sweep_terrain, "stair-height noise sweep"),
                              ("sweep-obs", cmd_sweep_obs, "joint-measurement noise sweep")):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        sp.add_argument("--levels", help="comma-separated noise levels")
        sp.add_argument("--trials", type=int)
        if name == "sweep-terrain":
            sp.add_argument("--rise", type=float)
            sp.add_argument("--physical", action="store_true", help="perturb the stairs instead of the observation")
        sp.set_defaults(func=func)

    sp = sub.add_parser("grf-log", help="log ground reaction forces along a walk")
    common(sp)
    sp.add_argument("--plan", help="plan file (default: forward line plan)")
    sp.add_argument("--duration", type=float)
    sp.add_argument("--zero-action", action="store_true", help="hold the nominal posture instead of a policy")
    sp.set_defaults(func=cmd_grf_log)

    sp = sub.add_parser("report", help="peak torque / velocity report from a log")
    common(sp, checkpoint=False)
    sp.add_argument("--log", required=True)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
