import numpy as np
import pytest

from bearing_pursuit.errors import ValidationError
from bearing_pursuit.evaders import (
    AggressiveTurn,
    Drive,
    IrregularCircle,
    RandomAccel,
    WaypointCircle,
    make_evader,
    world_velocity_command,
)
from bearing_pursuit.geometry import rotation2d
from bearing_pursuit.simworld import AgentState, Command, WorldParams, WorldState, tick


def test_world_velocity_command_counter_rotates():
    rng = np.random.default_rng(0)
    for _ in range(20):
        theta = rng.uniform(-np.pi, np.pi)
        v_world = rng.uniform(-1, 1, 2)
        agent = AgentState(p=[0, 0], v=[0, 0], theta=theta)
        cmd = world_velocity_command(v_world, agent)
        realized = rotation2d(theta) @ np.array([cmd.v_x, cmd.v_y])
        np.testing.assert_allclose(realized, v_world, atol=1e-12)


def test_scripted_evader_tracks_path_regardless_of_heading():
    # the script thinks in world coordinates; a random spawn heading must
    # not rotate the realized path
    script = WaypointCircle(center=(0.0, 0.0), radius=0.5, speed=0.3)
    for theta in (0.0, 1.3, -2.2):
        target = AgentState(p=script.position(0.0), v=[0, 0], theta=theta)
        world = WorldState(pursuers=[], target=target, params=WorldParams())
        for _ in range(100):
            tick(world, [script.command(world.t, world.target)])
        err = np.linalg.norm(world.target.p - script.position(world.t))
        assert err < 0.05, f"path error {err} at heading {theta}"


def test_irregular_circle_velocity_is_position_derivative():
    script = IrregularCircle()
    h = 1e-6
    for t in np.linspace(0.0, 20.0, 37):
        fd = (script.position(t + h) - script.position(t - h)) / (2 * h)
        np.testing.assert_allclose(script.velocity(t), fd, atol=1e-6)


def test_waypoint_circle_velocity_is_position_derivative():
    script = WaypointCircle(radius=0.7, speed=0.25)
    h = 1e-6
    for t in np.linspace(0.0, 30.0, 17):
        fd = (script.position(t + h) - script.position(t - h)) / (2 * h)
        np.testing.assert_allclose(script.velocity(t), fd, atol=1e-6)


def test_aggressive_turn_reverses_direction():
    script = AggressiveTurn(t_turn=5.0, radius=0.5, speed=0.3)
    agent = AgentState(p=script.position(0.0), v=[0, 0])
    before = script.command(4.9, agent)
    assert script.sign == 1.0
    script.command(5.1, agent)
    assert script.sign == -1.0
    after = script.command(5.1, agent)
    assert before.v_x != after.v_x or before.v_y != after.v_y


def test_random_accel_bounded():
    script = RandomAccel(np.random.default_rng(1), v_max=0.4)
    agent = AgentState(p=[0, 0], v=[0, 0])
    for k in range(500):
        cmd = script.command(k * 0.1, agent)
        assert np.hypot(cmd.v_x, cmd.v_y) <= 0.4 + 1e-9


def test_drive_latest_wins():
    script = Drive()
    agent = AgentState(p=[0, 0], v=[0, 0], theta=0.0)
    assert script.command(0.0, agent) == Command(0.0, 0.0, 0.0)
    script.set_velocity([0.5, -0.25])
    cmd = script.command(0.1, agent)
    assert cmd.v_x == pytest.approx(0.5)
    assert cmd.v_y == pytest.approx(-0.25)


def test_make_evader_unknown_script():
    with pytest.raises(ValidationError, match="target.script"):
        make_evader("teleport", {}, np.random.default_rng(0))


def test_make_evader_bad_params():
    with pytest.raises(ValidationError, match="script_params"):
        make_evader("waypoint_circle", {"warp": 9}, np.random.default_rng(0))
