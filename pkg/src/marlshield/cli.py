"""Operator entry point: train runs, evaluate checkpoints, summarize results.

Subcommands:

    marlshield train  --config cfg.json --runs 5 [--no-shield] [--episodes N]
    marlshield eval   --checkpoint ckpt.bin [--config cfg.json] [--episodes N]
    marlshield report --dir out/

Every artifact embeds the resolved config and seed. Exit codes: 0 success,
1 configuration error, 2 runtime divergence, 3 artifact mismatch.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checkpoint import (
    CheckpointError,
    CheckpointMismatchError,
    attach_networks,
    load_checkpoint,
    save_checkpoint,
)
from .config import ConfigError, default_run_config, load_run_config, resolved_json, run_config_from_dict
from .maddpg import MaddpgTrainer, TrainingDivergenceError
from .patrol import PatrolEnv, collision_audit
from .svgplot import render_arena, render_curves

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGENCE = 2
EXIT_ARTIFACT = 3

METRICS_SCHEMA = "# marlshield metrics v1"
TRAJECTORY_SCHEMA = "# marlshield trajectory v1"

METRICS_COLUMNS = (
    "episode,reward_I,reward_II,collisions_step,collisions_episode,min_dist,slack_events"
)
TRAJECTORY_COLUMNS = (
    "step,agent_id,px,py,vx,vy,ax_nominal,ay_nominal,ax_safe,ay_safe,reward,min_dist,shield_status"
)


def _g(x) -> str:
    return f"{float(x):.10g}"


class ArtifactError(RuntimeError):
    pass


def _resolve_out_dir(args, config) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    env_dir = os.environ.get("CBF_SHIELD_OUT")
    if env_dir:
        return Path(env_dir)
    return Path(config.out_dir)


def _apply_overrides(config, args):
    if getattr(args, "runs", None) is not None:
        config = replace(config, runs=args.runs, seeds=())
    if getattr(args, "episodes", None) is not None:
        config = replace(config, trainer=replace(config.trainer, episodes=args.episodes))
    if getattr(args, "seed", None) is not None:
        config = replace(
            config,
            trainer=replace(config.trainer, seed=args.seed),
            seeds=tuple(args.seed + i for i in range(config.runs)),
        )
    if getattr(args, "no_shield", False):
        config = replace(config, shield_enabled=False)
    return config


def _write_metrics_csv(path: Path, rows, config_json: str, seed: int) -> None:
    lines = [METRICS_SCHEMA, f"# seed={seed} config={config_json}", METRICS_COLUMNS]
    for r in rows:
        lines.append(
            ",".join(
                [
                    str(r["episode"]),
                    _g(r["reward_I"]),
                    _g(r["reward_II"]),
                    str(r["collisions_step"]),
                    str(r["collisions_episode"]),
                    _g(r["min_dist"]),
                    str(r["slack_events"]),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_trajectory_csv(path: Path, rows, config_json: str, seed: int) -> None:
    lines = [TRAJECTORY_SCHEMA, f"# seed={seed} config={config_json}", TRAJECTORY_COLUMNS]
    for r in rows:
        lines.append(
            ",".join(
                [
                    str(r.step),
                    str(r.agent_id),
                    _g(r.position[0]),
                    _g(r.position[1]),
                    _g(r.velocity[0]),
                    _g(r.velocity[1]),
                    _g(r.u_nominal[0]),
                    _g(r.u_nominal[1]),
                    _g(r.u_safe[0]),
                    _g(r.u_safe[1]),
                    _g(r.reward),
                    _g(r.min_entity_distance),
                    r.shield_status,
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_train(args) -> int:
    config = load_run_config(args.config) if args.config else default_run_config()
    config = _apply_overrides(config, args)
    out_dir = _resolve_out_dir(args, config)
    variant = "shielded" if config.shield_enabled else "unshielded"
    variant_dir = out_dir / variant
    variant_dir.mkdir(parents=True, exist_ok=True)
    config_json = resolved_json(config)

    run_rows = []
    total_steps_collisions = 0
    total_episode_collisions = 0
    total_episodes = 0
    for i, seed in enumerate(config.seeds):
        trainer_cfg = replace(config.trainer, seed=seed)
        env = PatrolEnv(
            config.world, config.shield, episode_len=config.trainer.episode_len
        )
        trainer = MaddpgTrainer(env, trainer_cfg, shield_enabled=config.shield_enabled)
        rows = trainer.train()
        run_dir = variant_dir / f"run{i:02d}_seed{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        _write_metrics_csv(run_dir / "metrics.csv", rows, config_json, seed)
        save_checkpoint(run_dir / "checkpoint.bin", trainer, config_json)
        steps_c = sum(r["collisions_step"] for r in rows)
        eps_c = sum(r["collisions_episode"] for r in rows)
        run_rows.append(
            {
                "run": i,
                "seed": seed,
                "episodes": len(rows),
                "collisions_step": steps_c,
                "collision_episodes": eps_c,
            }
        )
        total_steps_collisions += steps_c
        total_episode_collisions += eps_c
        total_episodes += len(rows)
        print(
            f"[{variant}] run {i} seed {seed}: episodes={len(rows)} "
            f"collision_episodes={eps_c} collision_steps={steps_c}"
        )

    ratio = total_episode_collisions / total_episodes if total_episodes else 0.0
    summary = {
        "variant": variant,
        "runs": run_rows,
        "episodes_total": total_episodes,
        "collision_episodes_total": total_episode_collisions,
        "collision_steps_total": total_steps_collisions,
        "collision_ratio": ratio,
        "config": json.loads(config_json),
    }
    (variant_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    print(
        f"[{variant}] total: {total_episode_collisions}/{total_episodes} collision episodes "
        f"({100.0 * ratio:.3f}%)"
    )
    return EXIT_OK


def _zoom_views(rows, world, pad=0.12):
    """Two non-overlapping windows around the closest approaches of an episode."""
    by_step = {}
    for r in rows:
        by_step.setdefault(r.step, []).append(r)
    ranked = sorted(by_step, key=lambda s: min(r.min_entity_distance for r in by_step[s]))
    separation = max(1, len(by_step) // 4)
    half = max(2, min(15, len(by_step) // 2))
    picks = []
    for s in ranked:
        if all(abs(s - p) > separation for p in picks):
            picks.append(s)
        if len(picks) == 2:
            break
    views = []
    for s in sorted(picks):
        window = [r for r in rows if s - half <= r.step <= s + half]
        xs = [float(r.position[0]) for r in window]
        ys = [float(r.position[1]) for r in window]
        e = world.wall_half_extent
        views.append(
            (
                s,
                (
                    max(min(xs) - pad, -e),
                    min(max(xs) + pad, e),
                    max(min(ys) - pad, -e),
                    min(max(ys) + pad, e),
                ),
                window,
            )
        )
    return views


def cmd_eval(args) -> int:
    ckpt_config_json, agents = load_checkpoint(args.checkpoint)
    if args.config:
        config = load_run_config(args.config)
    else:
        config = run_config_from_dict(json.loads(ckpt_config_json))
    # --episodes means evaluation episodes here; only the seed override
    # touches the embedded config
    if args.seed is not None:
        config = replace(config, trainer=replace(config.trainer, seed=args.seed))
    out_dir = _resolve_out_dir(args, config)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_json = resolved_json(config)
    seed = args.seed if args.seed is not None else config.trainer.seed

    env = PatrolEnv(config.world, config.shield, episode_len=config.trainer.episode_len)
    trainer = MaddpgTrainer(env, replace(config.trainer, seed=seed), shield_enabled=True)
    attach_networks(trainer, agents)

    episodes = args.episodes if args.episodes is not None else 1
    totals = []
    all_metrics = []
    for ep in range(episodes):
        metrics, rows = trainer.run_episode(seed + ep, sigma=0.0, learn=False, record=True)
        _write_trajectory_csv(out_dir / f"trajectory_ep{ep:03d}.csv", rows, config_json, seed + ep)
        audited = collision_audit(rows, d_s=config.shield.d_s)
        all_metrics.append(
            {
                "episode": ep,
                "reward_I": metrics["reward_I"],
                "reward_II": metrics["reward_II"],
                "collisions_step": audited.collision_count,
                "min_dist": audited.min_pairwise_distance,
                "checkins": audited.checkins_reached,
            }
        )
        totals.append(metrics["reward_I"] + metrics["reward_II"])
        paths = {
            f"patrolman {i + 1}": np.array(
                [r.position for r in rows if r.agent_id == i]
            )
            for i in range(env.n_agents)
        }
        svg = render_arena(
            config.world,
            paths,
            d_s=config.shield.d_s,
            title=f"episode {ep}: trajectories",
            metadata=config_json,
        )
        (out_dir / f"trajectory_ep{ep:03d}.svg").write_text(svg, encoding="utf-8")
        if ep == 0 and rows:
            for k, (step, view, window) in enumerate(_zoom_views(rows, config.world)):
                zoom_paths = {
                    f"patrolman {i + 1}": np.array(
                        [r.position for r in window if r.agent_id == i]
                    )
                    for i in range(env.n_agents)
                }
                svg = render_arena(
                    config.world,
                    zoom_paths,
                    d_s=config.shield.d_s,
                    title=f"episode 0 segment around step {step}",
                    metadata=config_json,
                    view=view,
                )
                (out_dir / f"trajectory_ep000_zoom{k}.svg").write_text(svg, encoding="utf-8")
    if episodes == 0:
        _write_trajectory_csv(out_dir / "trajectory_ep000.csv", [], config_json, seed)
    curve = render_curves(
        {"total reward": (list(range(len(totals))), totals)},
        title="evaluation total reward per episode",
        metadata=config_json,
        y_label="reward",
    )
    (out_dir / "eval_rewards.svg").write_text(curve, encoding="utf-8")
    (out_dir / "eval_summary.json").write_text(
        json.dumps(
            {"episodes": all_metrics, "seed": seed, "config": json.loads(config_json)},
            sort_keys=True,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    for m in all_metrics:
        print(
            f"eval episode {m['episode']}: checkins={m['checkins']} "
            f"collisions={m['collisions_step']} min_dist={m['min_dist']:.4f}"
        )
    return EXIT_OK


def _read_metrics_csv(path: Path):
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != METRICS_SCHEMA:
        raise ArtifactError(f"{path}: unsupported metrics schema (expected '{METRICS_SCHEMA}')")
    rows = []
    for line in lines[1:]:
        if line.startswith("#") or line == METRICS_COLUMNS or not line.strip():
            continue
        parts = line.split(",")
        rows.append(
            {
                "episode": int(parts[0]),
                "reward_I": float(parts[1]),
                "reward_II": float(parts[2]),
                "collisions_step": int(parts[3]),
                "collisions_episode": int(parts[4]),
                "min_dist": float(parts[5]),
                "slack_events": int(parts[6]),
            }
        )
    return rows


def cmd_report(args) -> int:
    root = Path(args.dir)
    if not root.exists():
        raise ArtifactError(f"run directory {root} does not exist")
    summaries = sorted(root.glob("*/summary.json"))
    if not summaries:
        raise ArtifactError(f"no */summary.json artifacts under {root}")
    variants = {}
    curves = {}
    missing = []
    for spath in summaries:
        summary = json.loads(spath.read_text(encoding="utf-8"))
        variant = summary["variant"]
        variants[variant] = summary
        per_episode = []
        for run in summary["runs"]:
            mpath = spath.parent / f"run{run['run']:02d}_seed{run['seed']}" / "metrics.csv"
            if not mpath.exists():
                missing.append(str(mpath))
                continue
            rows = _read_metrics_csv(mpath)
            per_episode.append([r["reward_I"] + r["reward_II"] for r in rows])
        if per_episode:
            n = min(len(x) for x in per_episode)
            mean = [sum(run[e] for run in per_episode) / len(per_episode) for e in range(n)]
            curves[variant] = (list(range(n)), mean)
    if missing:
        raise ArtifactError("missing artifacts: " + ", ".join(missing))

    order = [v for v in ("shielded", "unshielded") if v in variants]
    order += [v for v in sorted(variants) if v not in order]
    lines = ["# Run report", "", "| | " + " | ".join(order) + " |"]
    lines.append("|---" * (len(order) + 1) + "|")
    lines.append(
        "| Number of collisions | "
        + " | ".join(str(variants[v]["collision_episodes_total"]) for v in order)
        + " |"
    )
    lines.append(
        "| Number of episodes | "
        + " | ".join(str(variants[v]["episodes_total"]) for v in order)
        + " |"
    )
    lines.append(
        "| Collision ratio | "
        + " | ".join(f"{100.0 * variants[v]['collision_ratio']:.3f}%" for v in order)
        + " |"
    )
    report_path = root / "report.md"
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if curves:
        svg = render_curves(
            {v: curves[v] for v in order if v in curves},
            title="average total reward of both agents per episode",
            y_label="reward",
        )
        (root / "rewards.svg").write_text(svg, encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marlshield", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one or more training runs")
    p_train.add_argument("--config", help="JSON run configuration")
    p_train.add_argument("--runs", type=int, help="number of runs (seeds derived)")
    p_train.add_argument("--episodes", type=int, help="episodes per run")
    p_train.add_argument("--seed", type=int, help="base seed; run i uses seed+i")
    p_train.add_argument("--no-shield", action="store_true", help="disable the safety filter")
    p_train.add_argument("--out", help="output directory (else $CBF_SHIELD_OUT, else config)")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="greedy shielded rollouts from a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--config", help="JSON config; defaults to the checkpoint's embedded one")
    p_eval.add_argument("--episodes", type=int, help="evaluation episodes (default 1)")
    p_eval.add_argument("--seed", type=int, help="evaluation reset seed")
    p_eval.add_argument("--out", help="output directory")
    p_eval.set_defaults(func=cmd_eval)

    p_report = sub.add_parser("report", help="summarize a finished output directory")
    p_report.add_argument("--dir", required=True, help="directory holding */summary.json")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (CheckpointMismatchError, CheckpointError, ArtifactError) as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT


if __name__ == "__main__":
    sys.exit(main())
