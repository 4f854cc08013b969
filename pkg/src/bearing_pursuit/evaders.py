"""Scripted evader behaviors.

Physics-integrated scripts emit velocity commands for the target agent
(fed through the same first-order command lag as every other agent);
the irregular-circle script additionally exposes analytic position and
velocity so estimation scenarios can run it kinematically.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .simworld import AgentState, Command


def world_velocity_command(v_world, state: AgentState) -> Command:
    """Body-frame command realizing a world-frame desired velocity.

    Commands pass through the agent's body rotation, so scripts (which
    think in world coordinates) counter-rotate by the current heading.
    """
    c = np.cos(state.theta)
    s = np.sin(state.theta)
    return Command(
        v_h=0.0,
        v_x=float(c * v_world[0] + s * v_world[1]),
        v_y=float(-s * v_world[0] + c * v_world[1]),
    )


class WaypointCircle:
    """Track a circular path of waypoints at constant speed.

    ``center_jitter`` and ``random_phase`` randomize the path per
    construction (given an rng), so policies cannot memorize a fixed
    route during training.
    """

    def __init__(self, center=(0.0, 0.0), radius=0.8, speed=0.3,
                 kp=1.5, phase=0.0, ccw=True,
                 center_jitter=0.0, random_phase=False, rng=None):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.speed = float(speed)
        self.kp = float(kp)
        self.phase = float(phase)
        self.sign = 1.0 if ccw else -1.0
        if rng is not None:
            if center_jitter > 0.0:
                ang = rng.uniform(-np.pi, np.pi)
                rad = center_jitter * np.sqrt(rng.random())
                self.center = self.center + rad * np.array(
                    [np.cos(ang), np.sin(ang)]
                )
            if random_phase:
                self.phase = float(rng.uniform(-np.pi, np.pi))
                self.sign = 1.0 if rng.random() < 0.5 else -1.0

    def _angle(self, t: float) -> float:
        if self.radius <= 0:
            return self.phase
        return self.phase + self.sign * self.speed / self.radius * t

    def position(self, t: float) -> np.ndarray:
        a = self._angle(t)
        return self.center + self.radius * np.array([np.cos(a), np.sin(a)])

    def velocity(self, t: float) -> np.ndarray:
        a = self._angle(t)
        return self.sign * self.speed * np.array([-np.sin(a), np.cos(a)])

    def command(self, t: float, state: AgentState) -> Command:
        v = self.velocity(t) + self.kp * (self.position(t) - state.p)
        return world_velocity_command(v, state)


class RandomAccel:
    """Bounded random-walk velocity commands."""

    def __init__(self, rng: np.random.Generator, v_max=0.5, accel_scale=0.3,
                 decision_dt=0.1):
        self.rng = rng
        self.v_max = float(v_max)
        self.accel_scale = float(accel_scale)
        self.dt = float(decision_dt)
        self._v = np.zeros(2)

    def command(self, t: float, state: AgentState) -> Command:
        self._v = self._v + self.rng.normal(0.0, self.accel_scale, 2) * self.dt
        speed = np.linalg.norm(self._v)
        if speed > self.v_max:
            self._v *= self.v_max / speed
        return world_velocity_command(self._v, state)


class AggressiveTurn(WaypointCircle):
    """Circle that snaps to the opposite direction at ``t_turn``.

    The sudden maneuver briefly breaks pursuers' lines of sight, which is
    the detection-count dip scenario.
    """

    def __init__(self, center=(0.0, 0.0), radius=0.8, speed=0.3, kp=1.5,
                 phase=0.0, t_turn=12.0, center_jitter=0.0,
                 random_phase=False, rng=None):
        super().__init__(center, radius, speed, kp, phase, ccw=True,
                         center_jitter=center_jitter,
                         random_phase=random_phase, rng=rng)
        self.sign = 1.0  # the scripted turn flips it at t_turn
        self.t_turn = float(t_turn)

    def command(self, t: float, state: AgentState) -> Command:
        if t >= self.t_turn:
            self.sign = -1.0
        return super().command(t, state)


class IrregularCircle:
    """Roughly circular path with breathing radius and uneven phase rate.

    p(t) = c + R(t) [cos phi(t), sin phi(t)],
    R(t) = r0 (1 + rho sin(w_r t)),  phi(t) = phi0 + w0 t + a sin(w1 t).
    Closed-form velocity; usable kinematically or as a command script.
    """

    def __init__(self, center=(1.0, 1.0), r0=0.5, rho=0.3, w_r=0.4,
                 w0=0.35, a=0.6, w1=0.5, phi0=0.0, kp=1.5,
                 center_jitter=0.0, random_phase=False, rng=None):
        self.center = np.asarray(center, dtype=float)
        self.r0, self.rho, self.w_r = float(r0), float(rho), float(w_r)
        self.w0, self.a, self.w1 = float(w0), float(a), float(w1)
        self.phi0 = float(phi0)
        self.kp = float(kp)
        if rng is not None:
            if center_jitter > 0.0:
                ang = rng.uniform(-np.pi, np.pi)
                rad = center_jitter * np.sqrt(rng.random())
                self.center = self.center + rad * np.array(
                    [np.cos(ang), np.sin(ang)]
                )
            if random_phase:
                self.phi0 = float(rng.uniform(-np.pi, np.pi))

    def position(self, t: float) -> np.ndarray:
        r = self.r0 * (1.0 + self.rho * np.sin(self.w_r * t))
        phi = self.phi0 + self.w0 * t + self.a * np.sin(self.w1 * t)
        return self.center + r * np.array([np.cos(phi), np.sin(phi)])

    def velocity(self, t: float) -> np.ndarray:
        r = self.r0 * (1.0 + self.rho * np.sin(self.w_r * t))
        dr = self.r0 * self.rho * self.w_r * np.cos(self.w_r * t)
        phi = self.phi0 + self.w0 * t + self.a * np.sin(self.w1 * t)
        dphi = self.w0 + self.a * self.w1 * np.cos(self.w1 * t)
        c, s = np.cos(phi), np.sin(phi)
        return np.array([dr * c - r * s * dphi, dr * s + r * c * dphi])

    def command(self, t: float, state: AgentState) -> Command:
        v = self.velocity(t) + self.kp * (self.position(t) - state.p)
        return world_velocity_command(v, state)


class Drive:
    """Externally driven evader (live bridge); latest command wins."""

    def __init__(self):
        self._v = np.zeros(2)

    def set_velocity(self, v) -> None:
        self._v = np.asarray(v, dtype=float).reshape(2)

    def command(self, t: float, state: AgentState) -> Command:
        return world_velocity_command(self._v, state)


SCRIPTS = {
    "waypoint_circle": WaypointCircle,
    "random_accel": RandomAccel,
    "aggressive_turn": AggressiveTurn,
    "irregular_circle": IrregularCircle,
    "drive": Drive,
}


def make_evader(name: str, params: dict, rng: np.random.Generator):
    if name not in SCRIPTS:
        raise ValidationError(
            f"target.script: unknown script {name!r}; choose from {sorted(SCRIPTS)}"
        )
    cls = SCRIPTS[name]
    try:
        if name == "drive":
            return cls(**params)
        return cls(rng=rng, **params)
    except TypeError as exc:
        raise ValidationError(f"target.script_params: {exc}") from exc
