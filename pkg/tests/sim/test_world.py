"""Define tests for the intersection world."""
from dataclasses import replace

import pytest

from cgrlpy.errors import ConfigError, ScenarioError, SimulationStateError
from cgrlpy.sim import (
    EgoAction,
    ScenarioConfig,
    StepFlags,
    build_scenario,
    collision_check,
    reward,
    step,
)
from cgrlpy.sim.geometry import Approach, Turn, route_for

from tests.common import make_vehicle


def test_build_scenario_is_deterministic(scenario_config):
    """Test that a seed fixes the initial placement."""
    first = build_scenario(scenario_config, seed=7).snapshot()
    assert build_scenario(scenario_config, seed=7).snapshot() == first
    assert build_scenario(scenario_config, seed=8).snapshot() != first


def test_ego_spawn(scenario_config):
    """Test the ego's spawn pose, speed and route."""
    world = build_scenario(replace(scenario_config, ego_task=Turn.left), seed=0)
    ego = world.ego
    assert ego.is_ego and ego.id == 0
    assert (ego.x, ego.y) == pytest.approx((2.0, -30.0))
    assert ego.speed == 7.0
    assert ego.route == (Approach.south, Turn.left)


def test_vehicles_are_separated():
    """Test that placed vehicles keep the minimum spacing."""
    config = ScenarioConfig(n_human_vehicles=15)
    world = build_scenario(config, seed=3)
    assert len(world.vehicles) == 16
    min_gap = config.idm.s0 + config.vehicle_length
    for index, first in enumerate(world.vehicles):
        for second in world.vehicles[index + 1 :]:
            assert not collision_check(first, second)
            entry = route_for(
                first.route, config.lane_width, config.road_half_length
            ).entry_length
            if (
                first.route[0] is second.route[0]
                and first.arc <= entry
                and second.arc <= entry
            ):
                assert abs(first.arc - second.arc) >= min_gap - 1e-9


def test_overcrowded_scenario():
    """Test that an impossible placement is reported."""
    with pytest.raises(ScenarioError):
        build_scenario(ScenarioConfig(n_human_vehicles=60), seed=0)


def test_invalid_scenario_config():
    """Test that inconsistent frequencies are refused."""
    with pytest.raises(ConfigError):
        ScenarioConfig(sim_frequency=15, policy_frequency=2)
    with pytest.raises(ConfigError):
        ScenarioConfig(horizon=0)


def test_reward_components():
    """Test the reward composition for several step outcomes."""
    config = ScenarioConfig()
    total, components = reward(StepFlags(), 8.0, config)
    assert total == pytest.approx(0.5)
    assert components.on_road == 1.0 and components.collision == 0.0

    total, components = reward(StepFlags(collided=True), 9.0, config)
    assert components.collision == -2.0
    assert total == pytest.approx(-1.0)

    total, _ = reward(StepFlags(arrived=True), 12.0, config)
    assert total == pytest.approx(2.0)

    total, _ = reward(StepFlags(off_road=True), 9.0, config)
    assert total == 0.0

    _, components = reward(StepFlags(), 3.0, config)
    assert components.high_speed == 0.0


def test_lone_ego_arrives():
    """Test that an accelerating ego on an empty road completes its task."""
    world = build_scenario(ScenarioConfig(n_human_vehicles=0), seed=0)
    result = None
    while not world.terminal:
        result = step(world, EgoAction.accelerated)
        world = result.world
        assert 0.0 <= world.ego.speed <= 10.0
    assert result.flags.arrived and not result.flags.collided
    assert result.components.task_completion == 1.0
    assert world.steps <= world.config.horizon


def test_ego_speed_is_clipped():
    """Test that braking never produces a negative speed."""
    world = build_scenario(ScenarioConfig(n_human_vehicles=0), seed=0)
    for _ in range(4):
        world = step(world, EgoAction.decelerated).world
        assert world.ego.speed >= 0.0
    assert world.ego.speed == 0.0


def test_timeout():
    """Test that the horizon ends a stalled episode."""
    world = build_scenario(ScenarioConfig(n_human_vehicles=0, horizon=3), seed=0)
    results = []
    while not world.terminal:
        results.append(step(world, EgoAction.decelerated))
        world = results[-1].world
    assert len(results) == 3
    assert results[-1].flags.timed_out
    with pytest.raises(SimulationStateError):
        step(world, EgoAction.constant)


def test_rear_end_collision_ends_episode():
    """Test that running into a stopped vehicle ends the episode with -2."""
    config = ScenarioConfig(n_human_vehicles=0)
    world = build_scenario(config, seed=0)
    key = (Approach.south, Turn.straight)
    arc = world.ego.arc + 6.0
    x, y, heading = route_for(key, config.lane_width, config.road_half_length).pose_at(
        arc
    )
    blocker = make_vehicle(1, x, y, speed=0.0, heading=heading, route=key, arc=arc)
    world = replace(world, vehicles=(world.ego, blocker))
    result = step(world, EgoAction.accelerated)
    assert result.flags.collided
    assert result.terminal
    assert result.components.collision == -2.0


def test_collision_check():
    """Test vehicle footprint overlap."""
    ego = make_vehicle(0, 0.0, 0.0)
    assert collision_check(ego, make_vehicle(1, 3.0, 0.0))
    assert not collision_check(ego, make_vehicle(1, 0.0, 10.0))


def test_snapshot_is_serialisable(scenario_config):
    """Test that snapshots hold plain values."""
    frame = build_scenario(scenario_config, seed=0).snapshot()
    assert frame["steps"] == 0
    assert len(frame["vehicles"]) == 4
    assert frame["vehicles"][0]["is_ego"] is True
