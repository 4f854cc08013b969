"""Configuration ingestion, closed-loop episodes, metrics and persistence.

Config files are TOML; the schema is validated strictly (unknown keys
rejected, errors name the offending field).  ``run_episode`` wires the
full deployment loop at the decision rate: sense every pursuer, filter
predict/correct, build observations (estimate-fed in deploy mode),
policy forward, then the physics tick with held commands.  Trajectory
CSV and summary JSON writers produce byte-deterministic output for a
fixed (config, seed, weights) triple.
"""

from __future__ import annotations

import csv
import enum
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import (
    EmptyRun,
    NotYetObservable,
    NumericalFailure,
    ParseError,
    ValidationError,
)
from .estimator import (
    FilterParams,
    FilterTraceWriter,
    correct,
    estimate,
    predict,
)
from .evaders import make_evader
from .learner.observations import (
    RewardWeights,
    TeamView,
    build_observation,
    detect_flags,
    estimated_target_rel,
    obs_dim,
    observability,
    reward,
    team_bearings,
    true_target_rel,
)
from .policy import DenseNet, forward
from .simworld import (
    AgentState,
    Command,
    Mode,
    SensorModel,
    WorldParams,
    WorldState,
    sense_all,
    tick,
)

FORMAT_VERSION = 1


class RunMode(enum.Enum):
    DEPLOY = "deploy"
    GROUND_TRUTH = "ground-truth"


# --------------------------------------------------------------------------
# Config schema
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpawnSpec:
    kind: str = "uniform"            # "uniform" | "fixed"
    p: tuple[float, float] = (0.0, 0.0)
    theta: float = 0.0
    box: tuple[float, float, float, float] | None = None  # xmin,xmax,ymin,ymax


@dataclass(frozen=True)
class PursuerSpec:
    mode: Mode = Mode.OMNI
    radius: float = 0.15
    mass: float = 1.0
    spawn: SpawnSpec = field(default_factory=SpawnSpec)


@dataclass(frozen=True)
class TargetSpec:
    radius: float = 0.15
    mass: float = 1.0
    spawn: SpawnSpec = field(default_factory=SpawnSpec)
    script: str = "waypoint_circle"
    script_params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TrainingConfig:
    episodes: int = 2000
    episode_ticks: int = 100
    gamma: float = 0.95
    tau: float = 0.01
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    batch_size: int = 256
    buffer_capacity: int = 100_000
    noise_scale: float = 0.2
    noise_decay: float = 0.9995
    warmup_transitions: int = 1000
    update_every: int = 1
    eval_every: int = 100
    eval_episodes: int = 5
    checkpoint_every: int = 500
    actor_hidden: tuple[int, ...] = (64, 64)
    critic_hidden: tuple[int, ...] = (128, 128)
    lipschitz: float = 2.5
    grad_clip: float = 10.0
    action_reg: float = 1e-3
    reward_scale: float = 0.1
    # Ornstein-Uhlenbeck mean-reversion rate for exploration noise;
    # 0 recovers white noise.  The vehicle lag filters white noise away,
    # so correlated noise explores much better.
    noise_theta: float = 0.15
    # collision penalty ramps linearly from collision_start to the
    # configured weight over this many episodes (0 disables the ramp);
    # evaluation always uses the configured weights
    collision_ramp_episodes: int = 0
    collision_start: float = -2.0
    unconstrained_twin: bool = False
    # fraction of episodes spawned on an annulus around the target,
    # heading roughly at it (advantage starts for the skill curriculum)
    near_spawn_fraction: float = 0.0
    near_spawn_r_min: float = 0.5
    near_spawn_r_max: float = 1.4
    near_spawn_face_noise: float = 0.5


@dataclass(frozen=True)
class ScenarioConfig:
    arena_half: float = 2.5
    pursuers: tuple[PursuerSpec, ...] = (PursuerSpec(),)
    target: TargetSpec = field(default_factory=TargetSpec)
    fov: float = float(np.deg2rad(30.0))        # radians, full angle
    noise_var: float = 1e-4                     # Sigma = noise_var * I3
    filter_dt: float = 0.1
    process_noise: float = 0.25                 # Q = process_noise * I3
    initial_estimate: tuple[float, ...] = (0.0,) * 6
    initial_information: float = 1e-2           # Y0 = c * I6
    k_v: float = 5.0
    k_omega: float = 5.0
    k_agent: float = 100.0
    k_wall: float = 100.0
    v_xy_max: float = 1.0
    v_h_max: float = 2.0
    evader_v_max: float = 1.0
    reward_weights: RewardWeights = field(default_factory=RewardWeights)
    r_d: float = 0.75
    decision_hz: float = 10.0
    physics_substeps: int = 10
    duration_s: float = 30.0
    seed: int = 0
    training: TrainingConfig = field(default_factory=TrainingConfig)

    def __post_init__(self) -> None:
        if len(self.pursuers) < 1:
            raise ValidationError("team: at least one pursuer required")
        if self.r_d <= 0:
            raise ValidationError("run.r_d: must be positive")

    @property
    def decision_dt(self) -> float:
        return 1.0 / self.decision_hz

    def world_params(self) -> WorldParams:
        return WorldParams(
            arena_half=self.arena_half,
            k_v=self.k_v, k_omega=self.k_omega,
            k_agent=self.k_agent, k_wall=self.k_wall,
            dt_phys=self.decision_dt / self.physics_substeps,
            n_substeps=self.physics_substeps,
            v_xy_max=self.v_xy_max, v_h_max=self.v_h_max,
            evader_v_max=self.evader_v_max,
        )

    def sensor(self) -> SensorModel:
        return SensorModel(fov=self.fov, sigma=self.noise_var * np.eye(3))

    def filter_params(self) -> FilterParams:
        return FilterParams(
            dt=self.filter_dt,
            q=self.process_noise * np.eye(3),
            initial_estimate=np.asarray(self.initial_estimate),
            initial_information=self.initial_information * np.eye(6),
        )

    def action_bounds(self) -> np.ndarray:
        return np.array([self.v_h_max, self.v_xy_max, self.v_xy_max])


def _check(cond: bool, name: str, msg: str) -> None:
    if not cond:
        raise ValidationError(f"{name}: {msg}")


def _take(table: dict, known: dict, where: str) -> dict:
    """Pop known keys with defaults; reject anything left over."""
    out = {}
    table = dict(table)
    for key, default in known.items():
        out[key] = table.pop(key, default)
    if table:
        extra = ", ".join(sorted(table))
        raise ValidationError(f"{where}: unknown key(s) {extra}")
    return out


def _spawn_from(table: dict, where: str) -> SpawnSpec:
    vals = _take(table, {"kind": "uniform", "p": (0.0, 0.0), "theta": 0.0,
                         "box": None}, where)
    _check(vals["kind"] in ("uniform", "fixed"), f"{where}.kind",
           "must be 'uniform' or 'fixed'")
    p = tuple(float(x) for x in vals["p"])
    _check(len(p) == 2, f"{where}.p", "must have two entries")
    box = vals["box"]
    if box is not None:
        box = tuple(float(x) for x in box)
        _check(len(box) == 4 and box[0] < box[1] and box[2] < box[3],
               f"{where}.box", "must be [xmin, xmax, ymin, ymax]")
    return SpawnSpec(kind=vals["kind"], p=p, theta=float(vals["theta"]),
                     box=box)


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a parsed TOML tree into a :class:`ScenarioConfig`."""
    top = _take(data, {
        "format_version": FORMAT_VERSION, "arena": {}, "team": {},
        "target": {}, "sensor": {}, "filter": {}, "gains": {},
        "contact": {}, "limits": {}, "reward": {}, "run": {}, "training": {},
    }, "config")
    _check(top["format_version"] == FORMAT_VERSION, "format_version",
           f"expected {FORMAT_VERSION}")

    arena = _take(top["arena"], {"half_extent": 2.5}, "arena")
    _check(arena["half_extent"] > 0, "arena.half_extent", "must be positive")

    team = _take(top["team"], {"pursuers": [{}]}, "team")
    _check(isinstance(team["pursuers"], list) and team["pursuers"],
           "team.pursuers", "must be a nonempty list of tables")
    pursuers = []
    for i, entry in enumerate(team["pursuers"]):
        where = f"team.pursuers[{i}]"
        vals = _take(entry, {"mode": "omni", "radius": 0.15, "mass": 1.0,
                             "spawn": {}}, where)
        _check(vals["mode"] in ("omni", "unicycle"), f"{where}.mode",
               "must be 'omni' or 'unicycle'")
        _check(vals["radius"] > 0, f"{where}.radius", "must be positive")
        _check(vals["mass"] > 0, f"{where}.mass", "must be positive")
        pursuers.append(PursuerSpec(
            mode=Mode(vals["mode"]), radius=float(vals["radius"]),
            mass=float(vals["mass"]),
            spawn=_spawn_from(vals["spawn"], f"{where}.spawn"),
        ))

    tgt = _take(top["target"], {"radius": 0.15, "mass": 1.0, "spawn": {},
                                "script": "waypoint_circle",
                                "script_params": {}}, "target")
    _check(tgt["radius"] > 0, "target.radius", "must be positive")
    target = TargetSpec(
        radius=float(tgt["radius"]), mass=float(tgt["mass"]),
        spawn=_spawn_from(tgt["spawn"], "target.spawn"),
        script=str(tgt["script"]), script_params=dict(tgt["script_params"]),
    )

    sensor = _take(top["sensor"], {"fov": 30.0, "noise_var": 1e-4}, "sensor")
    _check(0 < sensor["fov"] < 360, "sensor.fov",
           "degrees, must be in (0, 360)")
    _check(sensor["noise_var"] > 0, "sensor.noise_var", "must be positive")

    filt = _take(top["filter"], {
        "dt": 0.1, "process_noise": 0.25,
        "initial_estimate": [0.0] * 6, "initial_information": 1e-2,
    }, "filter")
    _check(filt["dt"] > 0, "filter.dt", "must be positive")
    _check(filt["process_noise"] >= 0, "filter.process_noise",
           "must be non-negative")
    _check(len(filt["initial_estimate"]) == 6, "filter.initial_estimate",
           "must have six entries")
    _check(filt["initial_information"] > 0, "filter.initial_information",
           "must be positive")

    gains = _take(top["gains"], {"k_v": 5.0, "k_omega": 5.0}, "gains")
    _check(gains["k_v"] > 0 and gains["k_omega"] > 0, "gains",
           "control gains must be positive")
    contact = _take(top["contact"], {"k_agent": 100.0, "k_wall": 100.0},
                    "contact")
    _check(contact["k_agent"] > 0 and contact["k_wall"] > 0, "contact",
           "stiffnesses must be positive")
    limits = _take(top["limits"], {"v_xy_max": 1.0, "v_h_max": 2.0,
                                   "evader_v_max": 1.0}, "limits")
    for key, val in limits.items():
        _check(val > 0, f"limits.{key}", "must be positive")

    rw = _take(top["reward"], {
        "search_rotation": 0.2, "fov_alignment": 1.0, "range_proximity": 1.0,
        "observability_gain": 1.0, "collision": -10.0,
        "fov_dot_threshold_deg": 15.0, "range_threshold": 1.0,
        "ccw_omega_min": 0.1,
    }, "reward")
    try:
        weights = RewardWeights(
            search_rotation=float(rw["search_rotation"]),
            fov_alignment=float(rw["fov_alignment"]),
            range_proximity=float(rw["range_proximity"]),
            observability_gain=float(rw["observability_gain"]),
            collision=float(rw["collision"]),
            fov_dot_threshold=float(
                np.cos(np.deg2rad(rw["fov_dot_threshold_deg"]))
            ),
            range_threshold=float(rw["range_threshold"]),
            ccw_omega_min=float(rw["ccw_omega_min"]),
        )
    except ValueError as exc:
        raise ValidationError(f"reward: {exc}") from exc

    run = _take(top["run"], {
        "r_d": 0.75, "decision_hz": 10.0, "physics_substeps": 10,
        "duration_s": 30.0, "seed": 0,
    }, "run")
    _check(run["r_d"] > 0, "run.r_d", "must be positive")
    _check(run["decision_hz"] > 0, "run.decision_hz", "must be positive")
    _check(int(run["physics_substeps"]) >= 1, "run.physics_substeps",
           "must be >= 1")
    _check(run["duration_s"] >= 0, "run.duration_s", "must be >= 0")

    tr = _take(top["training"], {
        "episodes": 2000, "episode_ticks": 100, "gamma": 0.95, "tau": 0.01,
        "actor_lr": 1e-4, "critic_lr": 1e-3, "batch_size": 256,
        "buffer_capacity": 100_000, "noise_scale": 0.2,
        "noise_decay": 0.9995, "warmup_transitions": 1000, "update_every": 1,
        "eval_every": 100, "eval_episodes": 5, "checkpoint_every": 500,
        "actor_hidden": [64, 64], "critic_hidden": [128, 128],
        "lipschitz": 2.5, "grad_clip": 10.0, "action_reg": 1e-3,
        "reward_scale": 0.1, "noise_theta": 0.15,
        "collision_ramp_episodes": 0, "collision_start": -2.0,
        "unconstrained_twin": False, "near_spawn_fraction": 0.0,
        "near_spawn_r_min": 0.5, "near_spawn_r_max": 1.4,
        "near_spawn_face_noise": 0.5,
    }, "training")
    _check(0 <= tr["near_spawn_fraction"] <= 1,
           "training.near_spawn_fraction", "must be in [0, 1]")
    _check(0 <= tr["gamma"] < 1, "training.gamma", "must be in [0, 1)")
    _check(0 < tr["tau"] <= 1, "training.tau", "must be in (0, 1]")
    _check(tr["lipschitz"] > 0, "training.lipschitz", "must be positive")
    training = TrainingConfig(
        episodes=int(tr["episodes"]), episode_ticks=int(tr["episode_ticks"]),
        gamma=float(tr["gamma"]), tau=float(tr["tau"]),
        actor_lr=float(tr["actor_lr"]), critic_lr=float(tr["critic_lr"]),
        batch_size=int(tr["batch_size"]),
        buffer_capacity=int(tr["buffer_capacity"]),
        noise_scale=float(tr["noise_scale"]),
        noise_decay=float(tr["noise_decay"]),
        warmup_transitions=int(tr["warmup_transitions"]),
        update_every=int(tr["update_every"]),
        eval_every=int(tr["eval_every"]),
        eval_episodes=int(tr["eval_episodes"]),
        checkpoint_every=int(tr["checkpoint_every"]),
        actor_hidden=tuple(int(x) for x in tr["actor_hidden"]),
        critic_hidden=tuple(int(x) for x in tr["critic_hidden"]),
        lipschitz=float(tr["lipschitz"]), grad_clip=float(tr["grad_clip"]),
        action_reg=float(tr["action_reg"]),
        reward_scale=float(tr["reward_scale"]),
        noise_theta=float(tr["noise_theta"]),
        collision_ramp_episodes=int(tr["collision_ramp_episodes"]),
        collision_start=float(tr["collision_start"]),
        unconstrained_twin=bool(tr["unconstrained_twin"]),
        near_spawn_fraction=float(tr["near_spawn_fraction"]),
        near_spawn_r_min=float(tr["near_spawn_r_min"]),
        near_spawn_r_max=float(tr["near_spawn_r_max"]),
        near_spawn_face_noise=float(tr["near_spawn_face_noise"]),
    )

    return ScenarioConfig(
        arena_half=float(arena["half_extent"]),
        pursuers=tuple(pursuers),
        target=target,
        fov=float(np.deg2rad(sensor["fov"])),
        noise_var=float(sensor["noise_var"]),
        filter_dt=float(filt["dt"]),
        process_noise=float(filt["process_noise"]),
        initial_estimate=tuple(float(x) for x in filt["initial_estimate"]),
        initial_information=float(filt["initial_information"]),
        k_v=float(gains["k_v"]), k_omega=float(gains["k_omega"]),
        k_agent=float(contact["k_agent"]), k_wall=float(contact["k_wall"]),
        v_xy_max=float(limits["v_xy_max"]),
        v_h_max=float(limits["v_h_max"]),
        evader_v_max=float(limits["evader_v_max"]),
        reward_weights=weights,
        r_d=float(run["r_d"]),
        decision_hz=float(run["decision_hz"]),
        physics_substeps=int(run["physics_substeps"]),
        duration_s=float(run["duration_s"]),
        seed=int(run["seed"]),
        training=training,
    )


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return parse_config(data)


# --------------------------------------------------------------------------
# World construction
# --------------------------------------------------------------------------

def _draw_spawn(spec: SpawnSpec, radius: float, arena_half: float,
                placed: list[tuple[np.ndarray, float]],
                rng: np.random.Generator) -> tuple[np.ndarray, float]:
    if spec.kind == "fixed":
        return np.asarray(spec.p, dtype=float), spec.theta
    if spec.box is not None:
        xmin, xmax, ymin, ymax = spec.box
    else:
        lim = arena_half - radius - 0.05
        xmin, xmax, ymin, ymax = -lim, lim, -lim, lim
    for _ in range(200):
        p = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
        theta = float(rng.uniform(-np.pi, np.pi))
        if all(np.linalg.norm(p - q) > radius + r + 0.05
               for q, r in placed):
            return p, theta
    return p, theta  # crowded arena: accept the last draw


def build_world(
    config: ScenarioConfig,
    rng: np.random.Generator,
    near_spawn: tuple[float, float, float] | None = None,
) -> WorldState:
    """Spawn a world; the target is placed first so pursuers can spawn
    relative to it.

    ``near_spawn = (r_min, r_max, face_noise)`` overrides every pursuer's
    spawn with a placement on an annulus around the target, heading
    roughly at it (curriculum advantage starts).
    """
    placed: list[tuple[np.ndarray, float]] = []
    tp, ttheta = _draw_spawn(config.target.spawn, config.target.radius,
                             config.arena_half, placed, rng)
    placed.append((tp, config.target.radius))
    target = AgentState(
        p=tp, v=[0.0, 0.0], theta=ttheta, omega=0.0,
        mode=Mode.OMNI, radius=config.target.radius, mass=config.target.mass,
    )
    n = len(config.pursuers)
    # stratified ring sectors so advantage spawns never crowd each other
    base_phi = rng.uniform(-np.pi, np.pi)
    sector = 2.0 * np.pi / n
    pursuers = []
    for idx, spec in enumerate(config.pursuers):
        if near_spawn is not None:
            r_min, r_max, face_noise = near_spawn
            lim = config.arena_half - spec.radius - 0.05
            for _ in range(200):
                r = rng.uniform(r_min, r_max)
                phi = (base_phi + sector * idx
                       + rng.uniform(-0.35, 0.35) * sector)
                p = tp + r * np.array([np.cos(phi), np.sin(phi)])
                p = np.clip(p, -lim, lim)
                if all(np.linalg.norm(p - q) > spec.radius + rr + 0.05
                       for q, rr in placed):
                    break
            to_target = tp - p
            theta = float(np.arctan2(to_target[1], to_target[0])
                          + rng.uniform(-face_noise, face_noise))
        else:
            p, theta = _draw_spawn(spec.spawn, spec.radius, config.arena_half,
                                   placed, rng)
        placed.append((p, spec.radius))
        pursuers.append(AgentState(
            p=p, v=[0.0, 0.0], theta=theta, omega=0.0,
            mode=spec.mode, radius=spec.radius, mass=spec.mass,
        ))
    return WorldState(pursuers=pursuers, target=target,
                      params=config.world_params())


# --------------------------------------------------------------------------
# Policies
# --------------------------------------------------------------------------

class ActorPolicy:
    """Deterministic policy backed by a dense actor network."""

    def __init__(self, net: DenseNet):
        self.net = net

    def act(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return forward(self.net, obs)


class RandomPolicy:
    """Uniform random actions inside the actuator bounds (baseline)."""

    def __init__(self, bounds: np.ndarray):
        self.bounds = np.asarray(bounds, dtype=float)

    def act(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-self.bounds, self.bounds)


def load_policies(weights_dir: str | Path, n_agents: int) -> list[ActorPolicy]:
    from .policy import load_weights

    weights_dir = Path(weights_dir)
    policies = []
    for i in range(n_agents):
        path = weights_dir / f"actor_{i}.json"
        if not path.exists():
            raise ValidationError(f"weights: missing {path}")
        policies.append(ActorPolicy(load_weights(path)))
    return policies


# --------------------------------------------------------------------------
# Episode loop
# --------------------------------------------------------------------------

@dataclass
class RunMetrics:
    """Per-tick series plus enough context to summarize a run."""

    t: np.ndarray
    detection_count: np.ndarray
    range_error: np.ndarray          # min_i |p_T - p_i| - r_d  (signed)
    observability: np.ndarray
    pos_error: np.ndarray            # |p^ - p_T| (ground truth diagnostic)
    vel_error: np.ndarray
    reward_per_agent: np.ndarray     # (ticks, n)
    commands: np.ndarray             # (ticks, n, 3)
    r_d: float

    def __len__(self) -> int:
        return len(self.t)


TRAJECTORY_COMMENT = f"# format_version {FORMAT_VERSION}"


def _fmt(x: float) -> str:
    return repr(float(x))


class TrajectoryWriter:
    """CSV log: t, per-pursuer (p, v, theta, detected), target (p, v)."""

    def __init__(self, stream: IO[str], n_pursuers: int) -> None:
        stream.write(TRAJECTORY_COMMENT + "\n")
        self._writer = csv.writer(stream, lineterminator="\n")
        cols = ["t"]
        for i in range(n_pursuers):
            cols += [f"p{i}_x", f"p{i}_y", f"v{i}_x", f"v{i}_y",
                     f"theta{i}", f"det{i}"]
        cols += ["target_x", "target_y", "target_vx", "target_vy"]
        self._writer.writerow(cols)

    def write_state(self, world: WorldState, detections: Sequence[bool]) -> None:
        row = [_fmt(world.t)]
        for agent, det in zip(world.pursuers, detections):
            row += [_fmt(agent.p[0]), _fmt(agent.p[1]),
                    _fmt(agent.v[0]), _fmt(agent.v[1]),
                    _fmt(agent.theta), str(int(det))]
        row += [_fmt(world.target.p[0]), _fmt(world.target.p[1]),
                _fmt(world.target.v[0]), _fmt(world.target.v[1])]
        self._writer.writerow(row)


@dataclass
class TickRecord:
    """Everything one deploy tick produced (for logs, metrics, frames)."""

    k: int
    t: float
    detections: list[bool]
    estimate: np.ndarray          # 6-dim [p; v]
    cov_diag: np.ndarray          # 6-dim
    actions: np.ndarray           # (n, 3)
    rewards: np.ndarray           # (n,)
    range_error: float
    observability: float
    pos_error: float
    vel_error: float
    detection_count: int
    n_filter_measurements: int


class EpisodeStepper:
    """Stepwise closed loop: sense -> filter -> observe -> act -> tick.

    Shared by the batch episode runner and the live bridge so both paths
    run exactly the same control architecture.  In Deploy mode the
    observation target blocks come exclusively from the filter estimate
    (the builder receives a pursuer-only view of the world).
    """

    def __init__(
        self,
        config: ScenarioConfig,
        policies: Sequence,
        mode: RunMode = RunMode.DEPLOY,
        seed: int | None = None,
        evader_script=None,
    ) -> None:
        n = len(config.pursuers)
        for policy in policies:
            net = getattr(policy, "net", None)
            if net is not None and net.in_dim != obs_dim(n):
                raise ValidationError(
                    f"weights: actor expects {net.in_dim} inputs, "
                    f"observation has {obs_dim(n)}"
                )
        self.config = config
        self.policies = list(policies)
        self.mode = mode
        self.n = n

        seed = config.seed if seed is None else seed
        root = np.random.SeedSequence(seed)
        spawn_seq, sensor_seq, policy_seq, script_seq = root.spawn(4)
        self.world = build_world(config, np.random.default_rng(spawn_seq))
        self.sensor_rng = np.random.default_rng(sensor_seq)
        self.policy_rng = np.random.default_rng(policy_seq)
        self.sensor = config.sensor()
        self.script = (evader_script if evader_script is not None
                       else make_evader(config.target.script,
                                        config.target.script_params,
                                        np.random.default_rng(script_seq)))
        self.fparams = config.filter_params()
        self.fstate = self.fparams.initial_state()
        self.k = 0

    def step(self) -> TickRecord:
        config, world, n = self.config, self.world, self.n
        measurements = sense_all(world, self.sensor_rng, self.sensor)
        detections = [m is not None for m in measurements]

        self.fstate = predict(self.fstate, self.fparams)
        self.fstate = correct(
            self.fstate, [m for m in measurements if m is not None]
        )
        try:
            x_hat, cov = estimate(self.fstate)
        except NotYetObservable:
            # long target loss can degrade Y past the condition guard;
            # run without a point estimate until bearings resume
            x_hat, cov = None, None

        view = TeamView.of(world)
        obs = []
        for i in range(n):
            if self.mode is RunMode.DEPLOY:
                rel = (estimated_target_rel(x_hat, view, i)
                       if x_hat is not None else None)
            else:
                rel = true_target_rel(world, i)
            vec = build_observation(view, i, detections, rel).vector()
            if not np.all(np.isfinite(vec)):
                raise NumericalFailure(
                    f"non-finite observation at tick {self.k}"
                )
            obs.append(vec)

        actions = np.stack([
            self.policies[i].act(obs[i], self.policy_rng) for i in range(n)
        ])
        commands = [Command(*a) for a in actions]
        commands.append(self.script.command(world.t, world.target))
        pre_step_detections = detections

        collided = tick(world, commands)

        detections_post = detect_flags(world, self.sensor._cos_half_fov)
        rewards = np.array([
            reward(world, i, detections_post, collided, config.reward_weights)
            for i in range(n)
        ])
        min_range = min(np.linalg.norm(world.target.p - a.p)
                        for a in world.pursuers)
        true_state = np.array([
            world.target.p[0], world.target.p[1], 0.0,
            world.target.v[0], world.target.v[1], 0.0,
        ])
        if x_hat is None:
            est = np.full(6, np.nan)
            cov_diag = np.full(6, np.nan)
            pos_error = vel_error = float("nan")
        else:
            est = x_hat
            cov_diag = np.diag(cov).copy()
            pos_error = float(np.linalg.norm(x_hat[:3] - true_state[:3]))
            vel_error = float(np.linalg.norm(x_hat[3:] - true_state[3:]))
        record = TickRecord(
            k=self.k, t=world.t,
            detections=pre_step_detections,
            estimate=est, cov_diag=cov_diag,
            actions=actions, rewards=rewards,
            range_error=float(min_range - config.r_d),
            observability=float(observability(
                team_bearings(world, detections_post)
            )),
            pos_error=pos_error,
            vel_error=vel_error,
            detection_count=int(sum(pre_step_detections)),
            n_filter_measurements=int(sum(pre_step_detections)),
        )
        self.k += 1
        return record


def run_episode(
    config: ScenarioConfig,
    policies: Sequence,
    mode: RunMode = RunMode.DEPLOY,
    seed: int | None = None,
    trajectory_stream: IO[str] | None = None,
    filter_trace_stream: IO[str] | None = None,
    duration_s: float | None = None,
) -> RunMetrics:
    """Closed-loop episode at the decision rate (Deploy or GroundTruth).

    Deploy mode feeds the observation target blocks exclusively from the
    filter estimate; ground-truth mode feeds true relative target state.
    Fully deterministic for a fixed (config, seed, policies) triple.
    """
    stepper = EpisodeStepper(config, policies, mode=mode, seed=seed)
    n = stepper.n
    duration = config.duration_s if duration_s is None else duration_s
    n_ticks = int(round(duration * config.decision_hz))

    traj = (TrajectoryWriter(trajectory_stream, n)
            if trajectory_stream is not None else None)
    ftrace = (FilterTraceWriter(filter_trace_stream)
              if filter_trace_stream is not None else None)

    cols = {name: np.zeros(n_ticks) for name in
            ("t", "detection_count", "range_error", "observability",
             "pos_error", "vel_error")}
    reward_series = np.zeros((n_ticks, n))
    command_series = np.zeros((n_ticks, n, 3))

    for k in range(n_ticks):
        if traj is not None:
            # log the pre-step state so row k pairs with the commands
            # chosen at tick k
            pre_world = stepper.world.copy()
        record = stepper.step()
        if traj is not None:
            traj.write_state(pre_world, record.detections)
        if ftrace is not None:
            ftrace.write(stepper.fstate, record.n_filter_measurements)

        cols["t"][k] = record.t
        cols["detection_count"][k] = record.detection_count
        cols["range_error"][k] = record.range_error
        cols["observability"][k] = record.observability
        cols["pos_error"][k] = record.pos_error
        cols["vel_error"][k] = record.vel_error
        reward_series[k] = record.rewards
        command_series[k] = record.actions

    return RunMetrics(
        t=cols["t"], detection_count=cols["detection_count"],
        range_error=cols["range_error"], observability=cols["observability"],
        pos_error=cols["pos_error"], vel_error=cols["vel_error"],
        reward_per_agent=reward_series, commands=command_series,
        r_d=config.r_d,
    )


def summarize(metrics: RunMetrics) -> dict:
    """Steady-state aggregates over the last 50% of ticks."""
    if len(metrics) == 0:
        raise EmptyRun("cannot summarize a run with no ticks")
    half = len(metrics) // 2
    tail = slice(half, None)

    def stats(series: np.ndarray) -> dict:
        view = series[tail]
        if np.all(np.isnan(view)):
            return {"mean": float("nan"), "max": float("nan")}
        # nan entries mark ticks where no estimate existed
        return {
            "mean": float(np.nanmean(view)),
            "max": float(np.nanmax(np.abs(view))),
        }

    return {
        "format_version": FORMAT_VERSION,
        "ticks": len(metrics),
        "duration_s": float(metrics.t[-1] - metrics.t[0] + (
            metrics.t[1] - metrics.t[0] if len(metrics) > 1 else 0.0
        )),
        "steady_state": {
            "pos_error": stats(metrics.pos_error),
            "vel_error": stats(metrics.vel_error),
            "range_error": stats(np.abs(metrics.range_error)),
            "detection_count": stats(metrics.detection_count),
            "observability": stats(metrics.observability),
        },
        "reward": {
            "mean_per_agent": [
                float(v) for v in metrics.reward_per_agent.mean(axis=0)
            ],
            "team_mean": float(metrics.reward_per_agent.mean()),
        },
    }


def write_summary(path: str | Path, summary: dict) -> None:
    Path(path).write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


# --------------------------------------------------------------------------
# Kinematic estimation scenario (ring riders around a scripted target)
# --------------------------------------------------------------------------

@dataclass
class EstimationMetrics:
    t: np.ndarray
    pos_error: np.ndarray
    vel_error: np.ndarray
    n_measurements: np.ndarray
    observability: np.ndarray


def run_estimation_ring(
    seed: int,
    n_pursuers: int = 3,
    ring_radius: float = 0.75,
    duration_s: float = 10.0,
    decision_hz: float = 10.0,
    process_noise: float = 0.25,
    noise_var: float = 1e-4,
    dropout_ticks: tuple[int, int] | None = None,
    script=None,
) -> EstimationMetrics:
    """Pure-filter scenario: pursuers ride a rigid ring around the target.

    The target follows the irregular-circle script kinematically; each
    pursuer holds a fixed offset on a ring of ``ring_radius`` and always
    faces the target, so every tick yields one noisy bearing per pursuer
    (except inside the forced ``dropout_ticks`` window, which models a
    temporary target loss).
    """
    from .evaders import IrregularCircle
    from .estimator import BearingMeasurement

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if script is None:
        script = IrregularCircle(center=(1.0, 1.0))
    dt = 1.0 / decision_hz
    params = FilterParams(dt=dt, q=process_noise * np.eye(3))
    state = params.initial_state()
    sigma = noise_var * np.eye(3)
    chol = np.sqrt(noise_var)

    offsets = [
        np.array([np.cos(2 * np.pi * i / n_pursuers),
                  np.sin(2 * np.pi * i / n_pursuers)])
        for i in range(n_pursuers)
    ]

    n_ticks = int(round(duration_s * decision_hz))
    out = EstimationMetrics(
        t=np.zeros(n_ticks), pos_error=np.zeros(n_ticks),
        vel_error=np.zeros(n_ticks), n_measurements=np.zeros(n_ticks),
        observability=np.zeros(n_ticks),
    )

    for k in range(n_ticks):
        t = (k + 1) * dt
        p_t = script.position(t)
        v_t = script.velocity(t)

        in_dropout = (dropout_ticks is not None
                      and dropout_ticks[0] <= k < dropout_ticks[1])
        measurements = []
        bearings_2d = []
        if not in_dropout:
            for u in offsets:
                p_i = p_t + ring_radius * u
                lam2 = -u  # ring rider always faces the target
                bearings_2d.append(lam2)
                lam3 = np.array([lam2[0], lam2[1], 0.0])
                noise = chol * rng.standard_normal(3)
                measurements.append(BearingMeasurement(
                    lambda_tilde=lam3 + noise,
                    pursuer_state=np.array([
                        p_i[0], p_i[1], 0.0, v_t[0], v_t[1], 0.0,
                    ]),
                    sigma=sigma,
                ))

        state = predict(state, params)
        state = correct(state, measurements)
        x_hat, _ = estimate(state)

        truth = np.array([p_t[0], p_t[1], 0.0, v_t[0], v_t[1], 0.0])
        out.t[k] = t
        out.pos_error[k] = np.linalg.norm(x_hat[:3] - truth[:3])
        out.vel_error[k] = np.linalg.norm(x_hat[3:] - truth[3:])
        out.n_measurements[k] = len(measurements)
        out.observability[k] = observability(bearings_2d)

    return out
