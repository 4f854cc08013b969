"""Observation assembly, reward terms and action-space exploration noise.

The observation for pursuer i concatenates its ego state, every ally's
state relative to it, and a detection-gated target block:

    ego     [p(2), v(2), cos(theta), sin(theta)]                    6
    ally j  [p_j - p_i (2), v_j - v_i (2), cos, sin, detect_j]      7 each
    target  [p_T - p_i (2), v_T - v_i (2), valid]                   5

The target block is zero-masked whenever the agent itself does not
detect the target.  Builders receive a :class:`TeamView` (pursuers
only); the target block is supplied by the caller, so a deploy-mode
caller that only has the estimator output physically cannot leak target
ground truth.

The per-tick reward is a sum of five terms: a search-spin bonus while
undetecting, an FoV-alignment bonus, a team range-proximity bonus, the
observability determinant of the detecting pursuers' bearings, and a
collision penalty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..simworld import AgentState, WorldState

OBS_EGO_DIM = 6
OBS_ALLY_DIM = 7
OBS_TARGET_DIM = 5
ACTION_DIM = 3  # [v_h, v_x, v_y]


def obs_dim(n_pursuers: int) -> int:
    return OBS_EGO_DIM + OBS_ALLY_DIM * (n_pursuers - 1) + OBS_TARGET_DIM


@dataclass(frozen=True)
class TeamView:
    """Pursuer states only; what an observation builder may see."""

    agents: tuple[AgentState, ...]

    @staticmethod
    def of(world: WorldState) -> "TeamView":
        return TeamView(agents=tuple(a.copy() for a in world.pursuers))


@dataclass(frozen=True)
class Observation:
    ego: np.ndarray
    allies: np.ndarray  # (n_allies, OBS_ALLY_DIM)
    target: np.ndarray

    def vector(self) -> np.ndarray:
        return np.concatenate([self.ego, self.allies.ravel(), self.target])


def build_observation(
    view: TeamView,
    agent_index: int,
    detections: Sequence[bool],
    target_rel: tuple[np.ndarray, np.ndarray] | None,
) -> Observation:
    """Assemble the observation for one pursuer.

    ``target_rel`` is the (relative position, relative velocity) pair for
    the target block, or None when unknown; the block is zero-masked
    unless the agent detects the target AND a block was supplied.
    """
    me = view.agents[agent_index]
    ego = np.array([
        me.p[0], me.p[1], me.v[0], me.v[1],
        np.cos(me.theta), np.sin(me.theta),
    ])
    allies = np.zeros((len(view.agents) - 1, OBS_ALLY_DIM))
    row = 0
    for j, ally in enumerate(view.agents):
        if j == agent_index:
            continue
        allies[row] = [
            ally.p[0] - me.p[0], ally.p[1] - me.p[1],
            ally.v[0] - me.v[0], ally.v[1] - me.v[1],
            np.cos(ally.theta), np.sin(ally.theta),
            1.0 if detections[j] else 0.0,
        ]
        row += 1
    target = np.zeros(OBS_TARGET_DIM)
    if detections[agent_index] and target_rel is not None:
        rel_p, rel_v = target_rel
        target[:2] = rel_p
        target[2:4] = rel_v
        target[4] = 1.0
    return Observation(ego=ego, allies=allies, target=target)


def true_target_rel(
    world: WorldState, agent_index: int
) -> tuple[np.ndarray, np.ndarray]:
    """Ground-truth relative target state (training mode)."""
    me = world.pursuers[agent_index]
    return world.target.p - me.p, world.target.v - me.v


def estimated_target_rel(
    target_estimate: np.ndarray, view: TeamView, agent_index: int
) -> tuple[np.ndarray, np.ndarray]:
    """Relative target state from a 6-dim filter estimate (deploy mode)."""
    me = view.agents[agent_index]
    return target_estimate[:2] - me.p, target_estimate[3:5] - me.v


def detect_flags(world: WorldState, cos_half_fov: float) -> list[bool]:
    """Geometric FoV detection for every pursuer (boundary inclusive)."""
    flags = []
    for agent in world.pursuers:
        rel = world.target.p - agent.p
        dist = float(np.linalg.norm(rel))
        if dist <= 1e-9:
            flags.append(False)
            continue
        flags.append(
            float(rel @ agent.heading()) / dist >= cos_half_fov - 1e-12
        )
    return flags


# --------------------------------------------------------------------------
# Reward
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RewardWeights:
    """Per-term weights and thresholds of the pursuit reward."""

    search_rotation: float = 0.2        # paid while spinning CCW undetected
    fov_alignment: float = 1.0          # target inside the FoV cone
    range_proximity: float = 1.0        # closest pursuer within threshold
    observability_gain: float = 1.0     # multiplies det of the bearing sum
    collision: float = -10.0
    fov_dot_threshold: float = float(np.cos(np.deg2rad(15.0)))
    range_threshold: float = 1.0        # m, contains the r_d setpoint
    ccw_omega_min: float = 0.1          # rad/s

    def __post_init__(self) -> None:
        if not (self.collision < 0.0 < self.search_rotation):
            raise ValueError("need collision < 0 < search_rotation")


def observability(bearings_2d: Sequence[np.ndarray]) -> float:
    """det of the summed planar projectors, det(sum_i (I2 - lam_i lam_i^T)).

    Zero for fewer than two bearings; maximized by spread-out viewing
    geometry (2.25 for three bearings at 120 degrees).
    """
    acc = np.zeros((2, 2))
    for lam in bearings_2d:
        lam = np.asarray(lam, dtype=float)
        acc += np.eye(2) - np.outer(lam, lam)
    return float(np.linalg.det(acc))


def team_bearings(
    world: WorldState, detections: Sequence[bool]
) -> list[np.ndarray]:
    """True unit planar bearings of the currently detecting pursuers."""
    out = []
    for agent, det in zip(world.pursuers, detections):
        if not det:
            continue
        rel = world.target.p - agent.p
        dist = float(np.linalg.norm(rel))
        if dist > 1e-9:
            out.append(rel / dist)
    return out


def reward(
    world: WorldState,
    agent_index: int,
    detections: Sequence[bool],
    collided: Sequence[int],
    weights: RewardWeights = RewardWeights(),
) -> float:
    agent = world.pursuers[agent_index]
    own_detect = bool(detections[agent_index])

    r = 0.0
    if agent.omega >= weights.ccw_omega_min and not own_detect:
        r += weights.search_rotation

    rel = world.target.p - agent.p
    dist = float(np.linalg.norm(rel))
    if dist > 1e-9:
        if float(rel @ agent.heading()) / dist >= weights.fov_dot_threshold:
            r += weights.fov_alignment

    min_range = min(
        float(np.linalg.norm(world.target.p - a.p)) for a in world.pursuers
    )
    if min_range <= weights.range_threshold:
        r += weights.range_proximity

    r += weights.observability_gain * observability(
        team_bearings(world, detections)
    )

    if collided[agent_index]:
        r += weights.collision
    return r


def explore(
    action: np.ndarray,
    noise_scale: float | np.ndarray,
    rng: np.random.Generator,
    bounds: np.ndarray,
) -> np.ndarray:
    """Uncorrelated Gaussian action noise, clipped to actuator bounds.

    ``noise_scale`` may be a scalar (isotropic) or a per-axis vector;
    the trainer scales it by the actuator bounds so every axis explores
    the same fraction of its range.
    """
    noise_scale = np.asarray(noise_scale, dtype=float)
    if np.any(noise_scale < 0):
        raise ValueError("noise_scale must be non-negative")
    action = np.asarray(action, dtype=float)
    if np.all(noise_scale == 0.0):
        return np.clip(action, -bounds, bounds)
    return np.clip(
        action + noise_scale * rng.standard_normal(action.shape),
        -bounds, bounds,
    )
