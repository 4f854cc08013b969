"""Spectral-normalized MADDPG: centralized critics, decentralized actors.

Per update and per agent the critic regresses the TD target
r + gamma * Q_target(next joint obs, target-actor actions), the actor
ascends its critic through its own action slice, and afterwards every
online actor is projected back onto the Lipschitz budget
(:func:`bearing_pursuit.policy.normalize_actor`); target copies are
soft-updated from the *normalized* online nets.

An optional unconstrained twin actor per agent receives the same
gradient signal from the same critic but is never normalized; it exists
so a trained policy can be compared against its own unconstrained
counterpart (action smoothness under observation noise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalFailure, ZeroLayer
from ..policy import (
    DenseLayer,
    DenseNet,
    LipschitzBudget,
    _power_iterate,
    forward,
    make_net,
    normalize_actor,
    spectral_norm,
)
from .backprop import backprop_from_cache, forward_cache


@dataclass
class MaddpgHyper:
    gamma: float = 0.95
    tau: float = 0.01
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    batch_size: int = 256
    grad_clip: float = 0.5
    lipschitz: float = 2.5
    actor_hidden: tuple[int, ...] = (64, 64)
    critic_hidden: tuple[int, ...] = (128, 128)
    # L2 penalty on the actor's pre-tanh output; keeps actions off the
    # saturation rails where gradients vanish
    action_reg: float = 1e-3
    # rewards are multiplied by this inside the TD targets only; keeps
    # critic outputs O(1) when per-tick rewards are persistent
    reward_scale: float = 1.0


class Adam:
    """Standard Adam over a DenseNet's (w, b) parameter list."""

    def __init__(self, net: DenseNet, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [(np.zeros_like(l.w), np.zeros_like(l.b)) for l in net.layers]
        self.v = [(np.zeros_like(l.w), np.zeros_like(l.b)) for l in net.layers]

    def step(self, net: DenseNet, grads) -> DenseNet:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        layers = []
        for k, layer in enumerate(net.layers):
            new_params = []
            for which, (param, grad) in enumerate(
                zip((layer.w, layer.b), grads[k])
            ):
                m = self.m[k][which]
                v = self.v[k][which]
                m *= self.beta1
                m += (1 - self.beta1) * grad
                v *= self.beta2
                v += (1 - self.beta2) * grad * grad
                step = self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
                new_params.append(param - step)
            layers.append(DenseLayer(w=new_params[0], b=new_params[1]))
        return DenseNet(layers=tuple(layers), head=net.head,
                        action_scale=net.action_scale, lipschitz=net.lipschitz)

    def state_arrays(self, prefix: str) -> dict:
        out = {f"{prefix}_t": np.array([self.t])}
        for k in range(len(self.m)):
            out[f"{prefix}_m_w{k}"] = self.m[k][0]
            out[f"{prefix}_m_b{k}"] = self.m[k][1]
            out[f"{prefix}_v_w{k}"] = self.v[k][0]
            out[f"{prefix}_v_b{k}"] = self.v[k][1]
        return out

    def load_state_arrays(self, arrays: dict, prefix: str) -> None:
        self.t = int(arrays[f"{prefix}_t"][0])
        for k in range(len(self.m)):
            self.m[k] = (arrays[f"{prefix}_m_w{k}"], arrays[f"{prefix}_m_b{k}"])
            self.v[k] = (arrays[f"{prefix}_v_w{k}"], arrays[f"{prefix}_v_b{k}"])


def clip_grads(grads, max_norm: float):
    """Global-norm gradient clipping across all layers of one net."""
    total = 0.0
    for dw, db in grads:
        total += float((dw * dw).sum() + (db * db).sum())
    norm = np.sqrt(total)
    if norm <= max_norm or norm == 0.0:
        return grads
    scale = max_norm / norm
    return [(dw * scale, db * scale) for dw, db in grads]


def soft_update(target: DenseNet, online: DenseNet, tau: float) -> DenseNet:
    layers = tuple(
        DenseLayer(w=tau * o.w + (1 - tau) * t.w, b=tau * o.b + (1 - tau) * t.b)
        for t, o in zip(target.layers, online.layers)
    )
    return DenseNet(layers=layers, head=online.head,
                    action_scale=online.action_scale,
                    lipschitz=online.lipschitz)


class MaddpgTeam:
    """Online/target actors and critics for one pursuer team."""

    def __init__(self, n_agents: int, obs_dim: int, act_dim: int,
                 action_scale: np.ndarray, hyper: MaddpgHyper,
                 rng: np.random.Generator,
                 with_unconstrained_twin: bool = False) -> None:
        self.n_agents = n_agents
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.hyper = hyper
        self.budget = LipschitzBudget(hyper.lipschitz)
        joint_dim = n_agents * (obs_dim + act_dim)

        actor_sizes = [obs_dim, *hyper.actor_hidden, act_dim]
        critic_sizes = [joint_dim, *hyper.critic_hidden, 1]
        self.actors = [
            normalize_actor(
                make_net(actor_sizes, "tanh", rng, action_scale=action_scale,
                         lipschitz=hyper.lipschitz),
                self.budget,
            )
            for _ in range(n_agents)
        ]
        self.critics = [
            make_net(critic_sizes, "linear", rng) for _ in range(n_agents)
        ]
        self.target_actors = [a for a in self.actors]
        self.target_critics = [c for c in self.critics]
        self.actor_opts = [Adam(a, hyper.actor_lr) for a in self.actors]
        self.critic_opts = [Adam(c, hyper.critic_lr) for c in self.critics]
        self.twins = (
            [a for a in self.actors] if with_unconstrained_twin else None
        )
        self.twin_opts = (
            [Adam(a, hyper.actor_lr) for a in self.actors]
            if with_unconstrained_twin else None
        )
        # spectral norms the optimizer produced before the last projection
        self.pre_norm_sigmas: list[list[float]] = [
            [spectral_norm(l.w)[0] for l in a.layers] for a in self.actors
        ]
        # warm-start vectors for the per-update power iterations
        self._power_u: list[list[np.ndarray]] = [
            [
                rng.standard_normal(l.w.shape[1]) for l in a.layers
            ]
            for a in self.actors
        ]
        for us in self._power_u:
            for u in us:
                u /= np.sqrt(u @ u)

    def act(self, observations: np.ndarray) -> np.ndarray:
        """Greedy joint action, one row per agent."""
        return np.stack([
            forward(self.actors[i], observations[i])
            for i in range(self.n_agents)
        ])

    def act_single(self, agent_index: int, observation: np.ndarray) -> np.ndarray:
        return forward(self.actors[agent_index], observation)

    def update(self, batch: dict) -> dict:
        """One gradient step on every critic and actor; returns losses."""
        h = self.hyper
        obs = batch["obs"]            # (B, n, d_o)
        act = batch["act"]            # (B, n, d_a)
        rew = batch["rew"]            # (B, n)
        next_obs = batch["next_obs"]
        done = batch["done"]          # (B,)
        b = obs.shape[0]
        if b == 0:
            raise ValueError("update requires a nonempty batch")

        joint = np.concatenate(
            [obs.reshape(b, -1), act.reshape(b, -1)], axis=1
        )
        next_actions = np.stack([
            forward(self.target_actors[j], next_obs[:, j])
            for j in range(self.n_agents)
        ], axis=1)
        next_joint = np.concatenate(
            [next_obs.reshape(b, -1), next_actions.reshape(b, -1)], axis=1
        )

        critic_losses = []
        actor_losses = []
        for i in range(self.n_agents):
            q_next = forward(self.target_critics[i], next_joint)[:, 0]
            target = (h.reward_scale * rew[:, i]
                      + h.gamma * (1.0 - done) * q_next)

            q, cache = forward_cache(self.critics[i], joint)
            td = q[:, 0] - target
            critic_loss = float((td * td).mean())
            upstream = (2.0 / b) * td[:, None]
            grads, _ = backprop_from_cache(self.critics[i], cache, upstream)
            grads = clip_grads(grads, h.grad_clip)
            self.critics[i] = self.critic_opts[i].step(self.critics[i], grads)
            critic_losses.append(critic_loss)

            actor_losses.append(self._actor_step(
                self.actors[i], self.actor_opts[i], i, obs, act, b,
            ))
            if self.twins is not None:
                self._actor_step(self.twins[i], self.twin_opts[i], i, obs,
                                 act, b, store_twin=True)

        for i in range(self.n_agents):
            self.actors[i] = self._normalize_warm(i)
            self.target_actors[i] = soft_update(
                self.target_actors[i], self.actors[i], h.tau
            )
            self.target_critics[i] = soft_update(
                self.target_critics[i], self.critics[i], h.tau
            )

        losses = {
            "critic": critic_losses,
            "actor": actor_losses,
        }
        if not all(np.isfinite(v) for vs in losses.values() for v in vs):
            raise NumericalFailure(f"non-finite training loss: {losses}")
        return losses

    def _actor_step(self, actor, opt, i, obs, act, b, store_twin=False):
        """Ascend Q_i through agent i's action slice; returns the loss."""
        h = self.hyper
        a_i, actor_cache = forward_cache(actor, obs[:, i])
        act_pi = act.copy()
        act_pi[:, i] = a_i
        joint_pi = np.concatenate(
            [obs.reshape(b, -1), act_pi.reshape(b, -1)], axis=1
        )
        q_pi, critic_cache = forward_cache(self.critics[i], joint_pi)
        prehead = actor_cache[3]
        actor_loss = float(
            -q_pi.mean() + h.action_reg * (prehead * prehead).sum() / b
        )
        upstream_q = np.full((b, 1), -1.0 / b)
        _, d_joint = backprop_from_cache(
            self.critics[i], critic_cache, upstream_q
        )
        offset = self.n_agents * self.obs_dim + i * self.act_dim
        d_action = d_joint[:, offset:offset + self.act_dim]
        grads, _ = backprop_from_cache(
            actor, actor_cache, d_action,
            prehead_extra=(2.0 * h.action_reg / b) * prehead,
        )
        grads = clip_grads(grads, h.grad_clip)
        updated = opt.step(actor, grads)
        if store_twin:
            self.twins[i] = updated
        else:
            self.actors[i] = updated
        return actor_loss


    def _normalize_warm(self, i: int) -> DenseNet:
        """Project actor i onto the budget, warm-starting the power method."""
        actor = self.actors[i]
        target = self.budget.per_layer(len(actor.layers))
        layers = []
        for k, layer in enumerate(actor.layers):
            sigma, u, _ = _power_iterate(
                layer.w, self._power_u[i][k], max_iters=100, tol=1e-12
            )
            if sigma == 0.0:
                raise ZeroLayer(f"actor {i} layer {k} is zero")
            self._power_u[i][k] = u
            self.pre_norm_sigmas[i][k] = sigma
            layers.append(DenseLayer(w=layer.w * (target / sigma), b=layer.b))
        return DenseNet(layers=tuple(layers), head=actor.head,
                        action_scale=actor.action_scale,
                        lipschitz=self.budget.L)


def maddpg_update(team: MaddpgTeam, batch: dict) -> dict:
    """Module-level alias for :meth:`MaddpgTeam.update`."""
    return team.update(batch)
