"""Dense actor/critic networks with Lipschitz-bounded spectral normalization.

A network is a stack of affine layers with ReLU between them and an output
head: ``tanh`` scaled to the actuator bounds for actors, identity for
critics.  Since ReLU and tanh are 1-Lipschitz, the product of the layers'
spectral norms upper-bounds the Lipschitz constant of the pre-head stack;
actors are kept inside a global budget L by rescaling every layer to
spectral norm L^(1/K).  The budget therefore covers the pre-head stack;
the tanh head preserves it and the constant action scaling is reported
alongside (see ``lipschitz_upper_bound``).

Weight files are self-describing JSON with canonical float formatting:
write -> read -> write is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ShapeMismatch, ZeroLayer

POWER_ITERS = 50
POWER_TOL = 1e-8


@dataclass(frozen=True)
class DenseLayer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise ShapeMismatch(f"layer shapes {w.shape} / {b.shape} do not chain")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer weights contain non-finite entries")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class DenseNet:
    """Immutable affine/ReLU stack with a tanh or linear head."""

    layers: tuple[DenseLayer, ...]
    head: str = "linear"  # "tanh" | "linear"
    action_scale: np.ndarray | None = None
    lipschitz: float | None = None

    def __post_init__(self) -> None:
        if self.head not in ("tanh", "linear"):
            raise ValueError(f"unknown head {self.head!r}")
        layers = tuple(self.layers)
        for prev, nxt in zip(layers, layers[1:]):
            if nxt.w.shape[1] != prev.w.shape[0]:
                raise ShapeMismatch(
                    f"layer shapes {prev.w.shape} -> {nxt.w.shape} do not chain"
                )
        object.__setattr__(self, "layers", layers)
        if self.action_scale is not None:
            scale = np.asarray(self.action_scale, dtype=float).reshape(-1)
            if scale.shape[0] != layers[-1].w.shape[0]:
                raise ShapeMismatch("action_scale length does not match output")
            object.__setattr__(self, "action_scale", scale)

    @property
    def in_dim(self) -> int:
        return self.layers[0].w.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].w.shape[0]


@dataclass(frozen=True)
class LipschitzBudget:
    """Global bound L, distributed as L^(1/K) per layer."""

    L: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"Lipschitz budget must be positive, got {self.L}")

    def per_layer(self, n_layers: int) -> float:
        return float(self.L ** (1.0 / n_layers))


def make_net(
    sizes: list[int],
    head: str,
    rng: np.random.Generator,
    action_scale: np.ndarray | None = None,
    lipschitz: float | None = None,
) -> DenseNet:
    """He-uniform initialized network with the given layer sizes."""
    layers = []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append(DenseLayer(w=w, b=np.zeros(fan_out)))
    return DenseNet(
        layers=tuple(layers), head=head,
        action_scale=action_scale, lipschitz=lipschitz,
    )


def forward_prehead(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Affine/ReLU stack output before the head is applied."""
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != net.in_dim:
        raise ShapeMismatch(f"input dim {h.shape[1]} != expected {net.in_dim}")
    for layer in net.layers[:-1]:
        h = np.maximum(h @ layer.w.T + layer.b, 0.0)
    last = net.layers[-1]
    h = h @ last.w.T + last.b
    return h[0] if squeeze else h


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Network output with the head applied."""
    z = forward_prehead(net, x)
    if net.head == "tanh":
        z = np.tanh(z)
        if net.action_scale is not None:
            z = z * net.action_scale
    return z


def _power_iterate(
    w: np.ndarray,
    u: np.ndarray,
    max_iters: int,
    tol: float,
) -> tuple[float, np.ndarray, bool]:
    """Power iteration on W^T W from ``u``; returns (sigma, u, converged)."""
    sigma = 0.0
    for _ in range(max_iters):
        wu = w @ u
        sigma_new = float(np.sqrt(wu @ wu))
        if sigma_new == 0.0:
            return 0.0, u, True
        u_new = w.T @ wu
        n = float(np.sqrt(u_new @ u_new))
        if n == 0.0:
            return sigma_new, u, True
        u = u_new / n
        if abs(sigma_new - sigma) <= tol * max(sigma_new, 1e-300):
            return sigma_new, u, True
        sigma = sigma_new
    return sigma, u, False


def spectral_norm(
    w: np.ndarray,
    max_iters: int = POWER_ITERS,
    tol: float = POWER_TOL,
    seed: int = 0,
    u0: np.ndarray | None = None,
) -> tuple[float, bool]:
    """Largest singular value by power iteration on W^T W.

    Deterministic given ``seed`` (or an explicit warm-start vector
    ``u0``).  Returns (estimate, converged); a non-converged run still
    returns the best estimate.
    """
    w = np.asarray(w, dtype=float)
    if u0 is not None:
        u = np.asarray(u0, dtype=float).copy()
    else:
        u = np.random.default_rng(seed).standard_normal(w.shape[1])
    norm_u = float(np.sqrt(u @ u))
    if norm_u == 0.0:
        u = np.ones(w.shape[1])
        norm_u = float(np.sqrt(u @ u))
    sigma, _, converged = _power_iterate(w, u / norm_u, max_iters, tol)
    return sigma, converged


def lipschitz_upper_bound(net: DenseNet) -> float:
    """Product of per-layer spectral norms (pre-head stack).

    ReLU contributes a factor of 1; the tanh head preserves the bound and
    the actuator scaling multiplies it per-component (reported separately
    in ``action_scale``).
    """
    prod = 1.0
    for layer in net.layers:
        sigma, _ = spectral_norm(layer.w)
        prod *= sigma
    return prod


def normalize_actor(net: DenseNet, budget: LipschitzBudget) -> DenseNet:
    """Rescale every layer to spectral norm L^(1/K): W <- L^(1/K) W / |W|_2.

    Idempotent, and invariant to any positive pre-scaling of a layer.
    Raises :class:`ZeroLayer` on an identically zero layer.
    """
    target = budget.per_layer(len(net.layers))
    layers = []
    for idx, layer in enumerate(net.layers):
        sigma, _ = spectral_norm(layer.w)
        if sigma == 0.0:
            raise ZeroLayer(f"layer {idx} is zero; cannot normalize")
        layers.append(DenseLayer(w=layer.w * (target / sigma), b=layer.b))
    return replace(net, layers=tuple(layers), lipschitz=budget.L)


# --------------------------------------------------------------------------
# Weight files
# --------------------------------------------------------------------------

def _net_to_obj(net: DenseNet) -> dict:
    return {
        "layers": [
            {
                "rows": layer.w.shape[0],
                "cols": layer.w.shape[1],
                "w": [float(v) for v in layer.w.ravel()],
                "b": [float(v) for v in layer.b],
            }
            for layer in net.layers
        ],
        "activation": "relu",
        "head": net.head,
        "action_scale": (
            None if net.action_scale is None
            else [float(v) for v in net.action_scale]
        ),
        "lipschitz": None if net.lipschitz is None else float(net.lipschitz),
    }


def dumps_weights(net: DenseNet) -> str:
    return json.dumps(_net_to_obj(net), sort_keys=True, separators=(",", ":")) + "\n"


def save_weights(net: DenseNet, path: str | Path) -> None:
    Path(path).write_text(dumps_weights(net), encoding="utf-8")


def load_weights(path: str | Path) -> DenseNet:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    layers = tuple(
        DenseLayer(
            w=np.array(spec["w"], dtype=float).reshape(spec["rows"], spec["cols"]),
            b=np.array(spec["b"], dtype=float),
        )
        for spec in obj["layers"]
    )
    scale = obj.get("action_scale")
    return DenseNet(
        layers=layers,
        head=obj["head"],
        action_scale=None if scale is None else np.array(scale, dtype=float),
        lipschitz=obj.get("lipschitz"),
    )
