"""Observation/reward assembly and the spectral-normalized MADDPG trainer."""

from .observations import (
    ACTION_DIM,
    Observation,
    RewardWeights,
    TeamView,
    build_observation,
    detect_flags,
    estimated_target_rel,
    explore,
    obs_dim,
    observability,
    reward,
    team_bearings,
    true_target_rel,
)
from .backprop import backprop, backprop_from_cache, forward_cache
from .replay import ReplayBuffer
from .maddpg import Adam, MaddpgHyper, MaddpgTeam, maddpg_update, soft_update
from .train import TrainResult, evaluate_team, train

__all__ = [
    "ACTION_DIM",
    "Adam",
    "MaddpgHyper",
    "MaddpgTeam",
    "Observation",
    "ReplayBuffer",
    "RewardWeights",
    "TeamView",
    "TrainResult",
    "backprop",
    "backprop_from_cache",
    "build_observation",
    "detect_flags",
    "estimated_target_rel",
    "evaluate_team",
    "explore",
    "forward_cache",
    "maddpg_update",
    "obs_dim",
    "observability",
    "reward",
    "soft_update",
    "team_bearings",
    "train",
    "true_target_rel",
]
