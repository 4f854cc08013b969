"""Episodic MADDPG training against a scripted evader.

Rollouts run in ground-truth observation mode (detection-gated true
target blocks); the filter-in-the-loop deploy behavior is exercised by
``scenario.run_episode`` at evaluation and deployment time.  Runs are
fully seeded: world spawns and exploration noise derive from
(seed, episode), so a resumed run continues exactly where the
checkpoint left off.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from ..errors import CheckpointError
from ..evaders import make_evader
from ..policy import (
    lipschitz_upper_bound,
    load_weights,
    save_weights,
)
from ..simworld import Command, tick

if TYPE_CHECKING:  # scenario imports this package; break the cycle
    from ..scenario import RunMode, ScenarioConfig
from .maddpg import MaddpgHyper, MaddpgTeam
from .observations import (
    TeamView,
    build_observation,
    detect_flags,
    explore,
    obs_dim,
    reward,
    true_target_rel,
)
from .replay import ReplayBuffer

logger = logging.getLogger("bearing_pursuit.train")

CURVE_HEADER_PREFIX = "episode"


@dataclass
class TrainResult:
    episodes_run: int
    weights_dir: Path
    curve_path: Path
    checkpoint_dir: Path
    final_eval_reward: float | None


def _episode_rng(seed: int, episode: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed, episode, tag])


def _build_team(config: "ScenarioConfig") -> MaddpgTeam:
    tcfg = config.training
    hyper = MaddpgHyper(
        gamma=tcfg.gamma, tau=tcfg.tau,
        actor_lr=tcfg.actor_lr, critic_lr=tcfg.critic_lr,
        batch_size=tcfg.batch_size, grad_clip=tcfg.grad_clip,
        lipschitz=tcfg.lipschitz,
        actor_hidden=tcfg.actor_hidden, critic_hidden=tcfg.critic_hidden,
        action_reg=tcfg.action_reg,
        reward_scale=tcfg.reward_scale,
    )
    return MaddpgTeam(
        n_agents=len(config.pursuers),
        obs_dim=obs_dim(len(config.pursuers)),
        act_dim=3,
        action_scale=config.action_bounds(),
        hyper=hyper,
        rng=np.random.default_rng([config.seed, 0, 0]),
        with_unconstrained_twin=tcfg.unconstrained_twin,
    )


def _ground_truth_observations(world, sensor_cos_half, n):
    detections = detect_flags(world, sensor_cos_half)
    view = TeamView.of(world)
    return detections, np.stack([
        build_observation(view, i, detections, true_target_rel(world, i))
        .vector()
        for i in range(n)
    ])


def rollout_training_episode(
    config: "ScenarioConfig",
    team: MaddpgTeam,
    replay: ReplayBuffer,
    episode: int,
    noise_scale: float,
    total_ticks: int,
    replay_rng: np.random.Generator,
) -> tuple[np.ndarray, int, int]:
    """One exploration episode; returns (per-agent return, ticks, updates)."""
    from ..scenario import build_world

    tcfg = config.training
    n = len(config.pursuers)
    bounds = config.action_bounds()
    cos_half = float(np.cos(0.5 * config.fov))

    spawn_rng = _episode_rng(config.seed, episode, 1)
    near = None
    if (tcfg.near_spawn_fraction > 0
            and spawn_rng.random() < tcfg.near_spawn_fraction):
        near = (tcfg.near_spawn_r_min, tcfg.near_spawn_r_max,
                tcfg.near_spawn_face_noise)
    world = build_world(config, spawn_rng, near_spawn=near)
    script = make_evader(config.target.script, config.target.script_params,
                         _episode_rng(config.seed, episode, 2))
    noise_rng = _episode_rng(config.seed, episode, 3)
    noise_sigma = noise_scale * bounds  # same fraction of every axis range
    ou_state = np.zeros((n, 3))

    weights = config.reward_weights
    if tcfg.collision_ramp_episodes > 0:
        frac = min(1.0, episode / tcfg.collision_ramp_episodes)
        ramped = (tcfg.collision_start
                  + frac * (weights.collision - tcfg.collision_start))
        weights = replace(weights, collision=ramped)

    detections, obs = _ground_truth_observations(world, cos_half, n)
    returns = np.zeros(n)
    updates = 0
    losses = {"critic": 0.0, "actor": 0.0}
    for _ in range(tcfg.episode_ticks):
        if tcfg.noise_theta > 0.0:
            ou_state += (-tcfg.noise_theta * ou_state
                         + noise_sigma * noise_rng.standard_normal((n, 3)))
            actions = np.stack([
                np.clip(team.act_single(i, obs[i]) + ou_state[i],
                        -bounds, bounds)
                for i in range(n)
            ])
        else:
            actions = np.stack([
                explore(team.act_single(i, obs[i]), noise_sigma, noise_rng,
                        bounds)
                for i in range(n)
            ])
        commands = [Command(*a) for a in actions]
        commands.append(script.command(world.t, world.target))
        collided = tick(world, commands)

        detections, next_obs = _ground_truth_observations(world, cos_half, n)
        rewards = np.array([
            reward(world, i, detections, collided, weights)
            for i in range(n)
        ])
        replay.push(obs, actions, rewards, next_obs, 0.0)
        returns += rewards
        obs = next_obs
        total_ticks += 1

        if (len(replay) >= tcfg.warmup_transitions
                and total_ticks % tcfg.update_every == 0):
            out = team.update(replay.sample(tcfg.batch_size, replay_rng))
            losses["critic"] += float(np.mean(out["critic"]))
            losses["actor"] += float(np.mean(out["actor"]))
            updates += 1
    if updates:
        losses = {k: v / updates for k, v in losses.items()}
    return returns / tcfg.episode_ticks, total_ticks, updates, losses


def evaluate_team(
    config: "ScenarioConfig", policies, episodes: int, seed_base: int,
    mode=None,
) -> dict:
    """Noise-free evaluation; returns mean per-tick reward and range error."""
    from ..scenario import RunMode, run_episode

    if mode is None:
        mode = RunMode.GROUND_TRUTH
    rewards = []
    range_errors = []
    duration = config.training.episode_ticks / config.decision_hz
    for e in range(episodes):
        metrics = run_episode(
            config, policies, mode=mode, seed=seed_base + e,
            duration_s=duration,
        )
        rewards.append(float(metrics.reward_per_agent.mean()))
        tail = len(metrics) - max(1, len(metrics) // 4)
        range_errors.append(float(np.abs(metrics.range_error[tail:]).mean()))
    return {
        "mean_reward": float(np.mean(rewards)),
        "mean_final_range_error": float(np.mean(range_errors)),
        "per_episode_reward": rewards,
        "per_episode_range_error": range_errors,
    }


# --------------------------------------------------------------------------
# Checkpointing
# --------------------------------------------------------------------------

def save_checkpoint(ckpt_dir: Path, team: MaddpgTeam, replay: ReplayBuffer,
                    episode: int, noise_scale: float, total_ticks: int,
                    replay_rng: np.random.Generator) -> None:
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    for i in range(team.n_agents):
        save_weights(team.actors[i], ckpt_dir / f"actor_{i}.json")
        save_weights(team.critics[i], ckpt_dir / f"critic_{i}.json")
        save_weights(team.target_actors[i], ckpt_dir / f"target_actor_{i}.json")
        save_weights(team.target_critics[i],
                     ckpt_dir / f"target_critic_{i}.json")
        if team.twins is not None:
            save_weights(team.twins[i],
                         ckpt_dir / f"actor_{i}_unconstrained.json")
    arrays = {}
    for i in range(team.n_agents):
        arrays.update(team.actor_opts[i].state_arrays(f"actor{i}"))
        arrays.update(team.critic_opts[i].state_arrays(f"critic{i}"))
        if team.twin_opts is not None:
            arrays.update(team.twin_opts[i].state_arrays(f"twin{i}"))
    np.savez_compressed(ckpt_dir / "optimizer.npz", **arrays)
    np.savez_compressed(ckpt_dir / "replay.npz", **replay.state_arrays())
    state = {
        "format_version": 1,
        "episode": episode,
        "noise_scale": noise_scale,
        "total_ticks": total_ticks,
        "replay_rng": replay_rng.bit_generator.state,
        "pre_norm_sigmas": team.pre_norm_sigmas,
        "n_agents": team.n_agents,
        "has_twin": team.twins is not None,
    }
    (ckpt_dir / "state.json").write_text(
        json.dumps(state, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_checkpoint(ckpt_dir: Path, config: "ScenarioConfig",
                    team: MaddpgTeam, replay: ReplayBuffer,
                    replay_rng: np.random.Generator) -> tuple[int, float, int]:
    state_path = ckpt_dir / "state.json"
    if not state_path.exists():
        raise CheckpointError(f"no checkpoint at {ckpt_dir}")
    state = json.loads(state_path.read_text(encoding="utf-8"))
    if state.get("n_agents") != team.n_agents:
        raise CheckpointError(
            f"checkpoint trained {state.get('n_agents')} agents, "
            f"config has {team.n_agents}"
        )
    if state.get("has_twin") and team.twins is None:
        raise CheckpointError(
            "checkpoint carries an unconstrained twin; enable "
            "training.unconstrained_twin to resume it"
        )
    try:
        for i in range(team.n_agents):
            team.actors[i] = load_weights(ckpt_dir / f"actor_{i}.json")
            team.critics[i] = load_weights(ckpt_dir / f"critic_{i}.json")
            team.target_actors[i] = load_weights(
                ckpt_dir / f"target_actor_{i}.json")
            team.target_critics[i] = load_weights(
                ckpt_dir / f"target_critic_{i}.json")
            if team.twins is not None:
                team.twins[i] = load_weights(
                    ckpt_dir / f"actor_{i}_unconstrained.json")
        with np.load(ckpt_dir / "optimizer.npz") as arrays:
            for i in range(team.n_agents):
                team.actor_opts[i].load_state_arrays(arrays, f"actor{i}")
                team.critic_opts[i].load_state_arrays(arrays, f"critic{i}")
                if team.twin_opts is not None:
                    team.twin_opts[i].load_state_arrays(arrays, f"twin{i}")
        with np.load(ckpt_dir / "replay.npz") as arrays:
            replay.load_state_arrays(arrays)
    except (OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"corrupt checkpoint at {ckpt_dir}: {exc}") from exc
    team.pre_norm_sigmas = state["pre_norm_sigmas"]
    replay_rng.bit_generator.state = state["replay_rng"]
    return state["episode"], state["noise_scale"], state["total_ticks"]


def _write_final_weights(weights_dir: Path, team: MaddpgTeam) -> None:
    weights_dir.mkdir(parents=True, exist_ok=True)
    bounds = []
    for i in range(team.n_agents):
        save_weights(team.actors[i], weights_dir / f"actor_{i}.json")
        save_weights(team.critics[i], weights_dir / f"critic_{i}.json")
        if team.twins is not None:
            save_weights(team.twins[i],
                         weights_dir / f"actor_{i}_unconstrained.json")
        bounds.append(lipschitz_upper_bound(team.actors[i]))
    meta = {
        "format_version": 1,
        "n_agents": team.n_agents,
        "actor_lipschitz_bounds": bounds,
        "lipschitz_budget": team.hyper.lipschitz,
    }
    (weights_dir / "meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


# --------------------------------------------------------------------------
# Main loop
# --------------------------------------------------------------------------

def train(config: "ScenarioConfig", out_dir: str | Path,
          resume: bool = False) -> TrainResult:
    """Run (or resume) the full training schedule under ``out_dir``.

    Writes ``weights/`` (final actors/critics), ``curves.csv`` (one row
    per episode) and ``checkpoint/`` (resumable state).
    """
    from ..scenario import ActorPolicy

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_dir = out_dir / "checkpoint"
    weights_dir = out_dir / "weights"
    curve_path = out_dir / "curves.csv"

    tcfg = config.training
    n = len(config.pursuers)
    team = _build_team(config)
    replay = ReplayBuffer(tcfg.buffer_capacity, n, obs_dim(n))
    replay_rng = np.random.default_rng([config.seed, 0, 4])

    start_episode = 0
    noise_scale = tcfg.noise_scale
    total_ticks = 0
    curve_rows: list[str] = []
    if resume:
        start_episode, noise_scale, total_ticks = load_checkpoint(
            ckpt_dir, config, team, replay, replay_rng
        )
        if curve_path.exists():
            kept = []
            for line in curve_path.read_text(encoding="utf-8").splitlines():
                if line.startswith(CURVE_HEADER_PREFIX):
                    continue
                ep = int(line.split(",", 1)[0])
                if ep <= start_episode:
                    kept.append(line)
            curve_rows = kept
        logger.info("resumed from episode %d", start_episode)

    header = (
        [CURVE_HEADER_PREFIX]
        + [f"reward_agent{i}" for i in range(n)]
        + ["eval_reward", "eval_range_error", "actor_lipschitz_max",
           "critic_loss", "actor_loss"]
    )

    def flush_curves() -> None:
        body = "\n".join([",".join(header)] + curve_rows)
        curve_path.write_text(body + "\n", encoding="utf-8")

    flush_curves()
    last_eval: dict | None = None

    for episode in range(start_episode + 1, tcfg.episodes + 1):
        mean_rewards, total_ticks, n_updates, losses = rollout_training_episode(
            config, team, replay, episode, noise_scale, total_ticks,
            replay_rng,
        )
        noise_scale *= tcfg.noise_decay

        eval_cells = ["", ""]
        if tcfg.eval_every > 0 and episode % tcfg.eval_every == 0:
            policies = [ActorPolicy(a) for a in team.actors]
            last_eval = evaluate_team(
                config, policies, tcfg.eval_episodes,
                seed_base=config.seed * 1_000_003 + episode,
            )
            eval_cells = [
                repr(last_eval["mean_reward"]),
                repr(last_eval["mean_final_range_error"]),
            ]
            logger.info(
                "episode %d: train reward %.3f, eval reward %.3f, "
                "range err %.3f",
                episode, float(mean_rewards.mean()),
                last_eval["mean_reward"],
                last_eval["mean_final_range_error"],
            )
        lip = max(lipschitz_upper_bound(a) for a in team.actors)
        curve_rows.append(",".join(
            [str(episode)]
            + [repr(float(r)) for r in mean_rewards]
            + eval_cells
            + [repr(lip), repr(losses["critic"]), repr(losses["actor"])]
        ))
        if episode % 20 == 0 or episode == tcfg.episodes:
            flush_curves()
        if (tcfg.checkpoint_every > 0
                and episode % tcfg.checkpoint_every == 0):
            save_checkpoint(ckpt_dir, team, replay, episode, noise_scale,
                            total_ticks, replay_rng)

    save_checkpoint(ckpt_dir, team, replay, tcfg.episodes, noise_scale,
                    total_ticks, replay_rng)
    _write_final_weights(weights_dir, team)
    flush_curves()
    return TrainResult(
        episodes_run=tcfg.episodes - start_episode,
        weights_dir=weights_dir,
        curve_path=curve_path,
        checkpoint_dir=ckpt_dir,
        final_eval_reward=None if last_eval is None
        else last_eval["mean_reward"],
    )
