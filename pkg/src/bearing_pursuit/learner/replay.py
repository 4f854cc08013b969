"""Uniform-sampling replay memory over joint transitions."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Fixed-capacity ring buffer of joint (obs, act, rew, next, done)."""

    def __init__(self, capacity: int, n_agents: int, obs_dim: int,
                 act_dim: int = 3) -> None:
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, n_agents, obs_dim))
        self.act = np.zeros((capacity, n_agents, act_dim))
        self.rew = np.zeros((capacity, n_agents))
        self.next_obs = np.zeros((capacity, n_agents, obs_dim))
        self.done = np.zeros(capacity)
        self.size = 0
        self.pos = 0

    def __len__(self) -> int:
        return self.size

    def push(self, obs, act, rew, next_obs, done) -> None:
        i = self.pos
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.done[i] = done
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, size=batch)

    def sample(self, batch: int, rng: np.random.Generator) -> dict:
        idx = self.sample_indices(batch, rng)
        return {
            "obs": self.obs[idx],
            "act": self.act[idx],
            "rew": self.rew[idx],
            "next_obs": self.next_obs[idx],
            "done": self.done[idx],
        }

    def state_arrays(self) -> dict:
        """Dense arrays for checkpointing (trimmed to size)."""
        return {
            "obs": self.obs[: self.size],
            "act": self.act[: self.size],
            "rew": self.rew[: self.size],
            "next_obs": self.next_obs[: self.size],
            "done": self.done[: self.size],
            "pos": np.array([self.pos]),
        }

    def load_state_arrays(self, arrays: dict) -> None:
        n = arrays["obs"].shape[0]
        if n > self.capacity:
            raise ValueError("checkpointed buffer larger than capacity")
        self.obs[:n] = arrays["obs"]
        self.act[:n] = arrays["act"]
        self.rew[:n] = arrays["rew"]
        self.next_obs[:n] = arrays["next_obs"]
        self.done[:n] = arrays["done"]
        self.size = n
        self.pos = int(arrays["pos"][0]) % self.capacity
