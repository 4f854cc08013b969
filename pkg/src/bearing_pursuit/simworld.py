"""2D physics world: heterogeneous agents, contacts, FoV bearing sensing.

Agents follow second-order integrator dynamics with a first-order
velocity lag standing in for the real vehicles' inner velocity loop:

    a = k_v (R v_d - v),    alpha = k_omega (omega_d - omega),

where v_d = [v_x, v_y] is the commanded body-frame velocity (lateral
component forced to zero in unicycle mode) and omega_d = v_h.  Contacts
between agent discs and with the arena boundary are Hooke's-law penalty
forces.  Integration is semi-implicit Euler at ``dt_phys`` (100 Hz by
default), with the decision layer issuing held commands every
``n_substeps`` substeps (10 Hz).

The world is 2D; bearings are lifted to 3D with z = 0 and 3D noise is
applied, so the estimator sees the same measurement model as the
hardware experiment.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import NumericalFailure
from .estimator import BearingMeasurement
from .geometry import rotation2d, wrap_angle


class Mode(enum.Enum):
    OMNI = "omni"
    UNICYCLE = "unicycle"


@dataclass
class AgentState:
    """Planar pose/twist of one disc-shaped agent."""

    p: np.ndarray
    v: np.ndarray
    theta: float = 0.0
    omega: float = 0.0
    mode: Mode = Mode.OMNI
    radius: float = 0.15
    mass: float = 1.0

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=float).reshape(2).copy()
        self.v = np.asarray(self.v, dtype=float).reshape(2).copy()
        self.theta = wrap_angle(float(self.theta))
        self.omega = float(self.omega)
        if self.radius <= 0 or self.mass <= 0:
            raise ValueError("agent radius and mass must be positive")

    def heading(self) -> np.ndarray:
        return np.array([np.cos(self.theta), np.sin(self.theta)])

    def copy(self) -> "AgentState":
        return replace(self, p=self.p.copy(), v=self.v.copy())


@dataclass(frozen=True)
class Command:
    """Body-frame command: heading rate v_h, linear v_x / v_y."""

    v_h: float = 0.0
    v_x: float = 0.0
    v_y: float = 0.0

    def clipped(self, v_h_max: float, v_xy_max: float) -> "Command":
        return Command(
            v_h=float(np.clip(self.v_h, -v_h_max, v_h_max)),
            v_x=float(np.clip(self.v_x, -v_xy_max, v_xy_max)),
            v_y=float(np.clip(self.v_y, -v_xy_max, v_xy_max)),
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.v_h, self.v_x, self.v_y])


@dataclass(frozen=True)
class SensorModel:
    """Limited field of view plus additive 3D bearing noise."""

    fov: float  # full cone angle, radians
    sigma: np.ndarray  # 3x3 noise covariance

    def __post_init__(self) -> None:
        if not 0 < self.fov < 2 * np.pi:
            raise ValueError(f"fov must be in (0, 2*pi), got {self.fov}")
        sigma = np.asarray(self.sigma, dtype=float).reshape(3, 3)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "_chol", np.linalg.cholesky(
            sigma + 1e-18 * np.eye(3)
        ))
        object.__setattr__(self, "_cos_half_fov", float(np.cos(0.5 * self.fov)))


@dataclass(frozen=True)
class WorldParams:
    """Gains, stiffnesses and bounds shared by every agent in a world."""

    arena_half: float = 2.5
    k_v: float = 5.0
    k_omega: float = 5.0
    k_agent: float = 100.0
    k_wall: float = 100.0
    dt_phys: float = 0.01
    n_substeps: int = 10
    v_xy_max: float = 1.0
    v_h_max: float = 2.0
    evader_v_max: float = 1.0


@dataclass
class WorldState:
    """Pursuers, target, arena bounds and simulated time."""

    pursuers: list[AgentState]
    target: AgentState
    params: WorldParams = field(default_factory=WorldParams)
    t: float = 0.0

    @property
    def agents(self) -> list[AgentState]:
        return self.pursuers + [self.target]

    def copy(self) -> "WorldState":
        return WorldState(
            pursuers=[a.copy() for a in self.pursuers],
            target=self.target.copy(),
            params=self.params,
            t=self.t,
        )


def low_level_accel(
    agent: AgentState, cmd: Command, gains: tuple[float, float]
) -> tuple[np.ndarray, float]:
    """Reference first-order-lag control law (the kernel inlines this)."""
    k_v, k_omega = gains
    if k_v <= 0 or k_omega <= 0:
        raise ValueError("control gains must be positive")
    v_d = np.array([cmd.v_x, 0.0 if agent.mode is Mode.UNICYCLE else cmd.v_y])
    a = k_v * (rotation2d(agent.theta) @ v_d - agent.v)
    alpha = k_omega * (cmd.v_h - agent.omega)
    return a, alpha


def contact_forces(
    world: WorldState, stiffness: tuple[float, float] | None = None
) -> np.ndarray:
    """Per-agent Hooke's-law forces (agent-agent plus boundary), summed.

    Reference implementation used for testing; the stepping kernel
    computes the same forces inline.
    """
    k_agent, k_wall = stiffness if stiffness is not None else (
        world.params.k_agent, world.params.k_wall
    )
    if k_agent <= 0 or k_wall <= 0:
        raise ValueError("contact stiffnesses must be positive")
    agents = world.agents
    n = len(agents)
    half = world.params.arena_half
    forces = np.zeros((n, 2))
    for i in range(n):
        for j in range(i + 1, n):
            d = agents[i].p - agents[j].p
            dist = float(np.linalg.norm(d))
            pen = agents[i].radius + agents[j].radius - dist
            if pen > 0:
                normal = d / dist if dist > 1e-12 else np.array([1.0, 0.0])
                forces[i] += k_agent * pen * normal
                forces[j] -= k_agent * pen * normal
    for i, agent in enumerate(agents):
        for axis in (0, 1):
            lo = agent.p[axis] - agent.radius
            hi = agent.p[axis] + agent.radius
            if lo < -half:
                forces[i, axis] += k_wall * (-half - lo)
            if hi > half:
                forces[i, axis] -= k_wall * (hi - half)
    return forces


def _pack(world: WorldState):
    agents = world.agents
    n = len(agents)
    p = np.empty((n, 2))
    v = np.empty((n, 2))
    theta = np.empty(n)
    omega = np.empty(n)
    radius = np.empty(n)
    mass = np.empty(n)
    unicycle = np.zeros(n, dtype=np.uint8)
    for i, a in enumerate(agents):
        p[i] = a.p
        v[i] = a.v
        theta[i] = a.theta
        omega[i] = a.omega
        radius[i] = a.radius
        mass[i] = a.mass
        unicycle[i] = 1 if a.mode is Mode.UNICYCLE else 0
    return p, v, theta, omega, radius, mass, unicycle


def _unpack(world: WorldState, p, v, theta, omega) -> None:
    for i, a in enumerate(world.agents):
        a.p[:] = p[i]
        a.v[:] = v[i]
        a.theta = float(theta[i])
        a.omega = float(omega[i])


def tick(
    world: WorldState,
    commands: list[Command],
    n_substeps: int | None = None,
) -> np.ndarray:
    """Advance one decision tick (held commands, ``n_substeps`` substeps).

    ``commands`` lists one command per agent, pursuers first, target last;
    each is clipped to the world's actuator bounds before stepping.
    Returns the per-agent collision flags accumulated over the tick.
    Mutates ``world`` in place.
    """
    params = world.params
    substeps = params.n_substeps if n_substeps is None else n_substeps
    agents = world.agents
    if len(commands) != len(agents):
        raise ValueError(f"expected {len(agents)} commands, got {len(commands)}")

    cmd = np.empty((len(agents), 3))
    for i, (agent, c) in enumerate(zip(agents, commands)):
        bound = params.evader_v_max if agent is world.target else params.v_xy_max
        cmd[i] = c.clipped(params.v_h_max, bound).as_array()

    p, v, theta, omega, radius, mass, unicycle = _pack(world)
    collided = np.zeros(len(agents), dtype=np.uint8)
    _kernels.step_agents(
        p, v, theta, omega, radius, mass, unicycle, cmd, collided,
        params.k_v, params.k_omega, params.k_agent, params.k_wall,
        -params.arena_half, params.arena_half,
        -params.arena_half, params.arena_half,
        params.dt_phys, substeps,
    )
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(v))):
        raise NumericalFailure(f"non-finite world state at t={world.t:.2f}")
    _unpack(world, p, v, theta, omega)
    world.t += params.dt_phys * substeps
    return collided


def step(world: WorldState, commands: list[Command], dt_phys: float) -> np.ndarray:
    """Single semi-implicit Euler substep (see :func:`tick`)."""
    if dt_phys <= 0:
        raise ValueError("dt_phys must be positive")
    saved = world.params.dt_phys
    if dt_phys != saved:
        world.params = replace(world.params, dt_phys=dt_phys)
    try:
        return tick(world, commands, n_substeps=1)
    finally:
        if dt_phys != saved:
            world.params = replace(world.params, dt_phys=saved)


def sense(
    world: WorldState,
    pursuer_index: int,
    rng: np.random.Generator,
    sensor: SensorModel,
) -> BearingMeasurement | None:
    """Bearing measurement of the target, or None outside the FoV.

    Detection iff lam^T h >= cos(fov/2), with the true planar bearing lam
    lifted to 3D (z = 0) and h the heading direction.  The comparison
    carries a 1e-12 slack so the boundary is inclusive under floating
    point.  Noise is drawn in 3D and NOT renormalized.
    """
    pursuer = world.pursuers[pursuer_index]
    rel = world.target.p - pursuer.p
    dist = float(np.linalg.norm(rel))
    if dist <= 1e-9:
        return None
    lam2 = rel / dist
    if float(lam2 @ pursuer.heading()) < sensor._cos_half_fov - 1e-12:
        return None
    lam3 = np.array([lam2[0], lam2[1], 0.0])
    noise = sensor._chol @ rng.standard_normal(3)
    x_p = np.array([
        pursuer.p[0], pursuer.p[1], 0.0,
        pursuer.v[0], pursuer.v[1], 0.0,
    ])
    return BearingMeasurement(
        lambda_tilde=lam3 + noise, pursuer_state=x_p, sigma=sensor.sigma
    )


def sense_all(
    world: WorldState, rng: np.random.Generator, sensor: SensorModel
) -> list[BearingMeasurement | None]:
    """Sense with every pursuer, in index order (fixed RNG draw order)."""
    return [sense(world, i, rng, sensor) for i in range(len(world.pursuers))]
