"""Define tests for the intelligent driver model."""
import pytest

from cgrlpy.errors import CollisionStateError, ConfigError
from cgrlpy.sim.idm import IdmParams, desired_gap, idm_acceleration

from tests.common import make_vehicle

STEADY_LEADER_SPEED = 6.0
SIM_DT = 1.0 / 15.0


def test_free_flow_limits():
    """Test the free-road acceleration at rest and at the desired speed."""
    params = IdmParams()
    assert idm_acceleration(make_vehicle(1, 0, 0, speed=0.0), None, params) == 6.0
    assert idm_acceleration(make_vehicle(1, 0, 0, speed=8.0), None, params) == 0.0


def test_desired_gap():
    """Test the safety distance at standstill and in steady following."""
    params = IdmParams()
    assert desired_gap(0.0, 0.0, params) == 5.0
    assert desired_gap(8.0, 0.0, params) == pytest.approx(17.0)


def test_leader_brakes_follower():
    """Test that a close, slower leader produces a deceleration."""
    follower = make_vehicle(1, 0.0, 0.0, speed=8.0)
    leader = make_vehicle(2, 0.0, 12.0, speed=2.0)
    assert idm_acceleration(follower, leader, IdmParams(), gap=7.0) < 0.0


def test_gap_from_positions():
    """Test that the gap defaults to centre distance minus a vehicle length."""
    follower = make_vehicle(1, 0.0, 0.0, speed=8.0)
    leader = make_vehicle(2, 0.0, 25.0, speed=8.0)
    params = IdmParams()
    assert idm_acceleration(follower, leader, params) == pytest.approx(
        idm_acceleration(follower, leader, params, gap=20.0)
    )


def test_non_positive_gap():
    """Test that overlapping vehicles are reported."""
    follower = make_vehicle(1, 0.0, 0.0)
    leader = make_vehicle(2, 0.0, 4.0)
    with pytest.raises(CollisionStateError):
        idm_acceleration(follower, leader, IdmParams())
    with pytest.raises(CollisionStateError):
        idm_acceleration(follower, leader, IdmParams(), gap=0.0)


def test_invalid_params():
    """Test that non-physical parameters are refused."""
    with pytest.raises(ConfigError):
        IdmParams(s0=0.0)
    with pytest.raises(ConfigError):
        IdmParams(v0=-1.0)


@pytest.mark.parametrize("initial_gap", [5.0, 10.0, 20.0, 40.0])
def test_steady_leader_never_hit(initial_gap):
    """Test that a follower never reaches a steady leader within 60 s."""
    params = IdmParams()
    gap, speed = initial_gap, 8.0
    for _ in range(int(60.0 / SIM_DT)):
        follower = make_vehicle(1, 0.0, 0.0, speed=speed)
        leader = make_vehicle(2, 0.0, gap + 5.0, speed=STEADY_LEADER_SPEED)
        acceleration = idm_acceleration(follower, leader, params, gap=gap)
        new_speed = max(0.0, speed + acceleration * SIM_DT)
        gap += STEADY_LEADER_SPEED * SIM_DT - 0.5 * (speed + new_speed) * SIM_DT
        speed = new_speed
        assert gap > 0.0
    assert speed == pytest.approx(STEADY_LEADER_SPEED, abs=0.1)
