"""Define tests for intersection geometry."""
import math

import numpy as np
import pytest

from cgrlpy.sim.geometry import (
    Approach,
    Turn,
    conflict_point,
    exit_arm,
    normalize_angle,
    on_road,
    rectangle_corners,
    rectangles_overlap,
    route_for,
)

LANE_WIDTH = 4.0
HALF_LENGTH = 30.0


def test_straight_route_from_south():
    """Test the pose and length of the ego's straight route."""
    route = route_for((Approach.south, Turn.straight), LANE_WIDTH, HALF_LENGTH)
    assert route.length == pytest.approx(2 * HALF_LENGTH)
    x, y, heading = route.pose_at(0.0)
    assert (x, y) == pytest.approx((2.0, -30.0))
    assert heading == pytest.approx(math.pi / 2)
    assert route.pose_at(route.length)[:2] == pytest.approx((2.0, 30.0))


@pytest.mark.parametrize(
    "turn,exit_xy,exit_heading",
    [
        (Turn.right, (30.0, -2.0), 0.0),
        (Turn.left, (-30.0, 2.0), math.pi),
    ],
)
def test_turn_routes_from_south(turn, exit_xy, exit_heading):
    """Test where the turning routes leave the intersection."""
    route = route_for((Approach.south, turn), LANE_WIDTH, HALF_LENGTH)
    x, y, heading = route.pose_at(route.length)
    assert (x, y) == pytest.approx(exit_xy)
    assert math.cos(heading) == pytest.approx(math.cos(exit_heading))
    assert math.sin(heading) == pytest.approx(math.sin(exit_heading), abs=1e-9)


def test_routes_are_continuous():
    """Test that consecutive samples of every route are one sample step apart."""
    for approach in Approach:
        for turn in Turn:
            route = route_for((approach, turn), LANE_WIDTH, HALF_LENGTH)
            steps = np.hypot(*np.diff(route.sample_xy, axis=0).T)
            assert np.all(steps <= 0.25 + 1e-9)


def test_routes_extrapolate():
    """Test that poses past the end continue straight."""
    route = route_for((Approach.south, Turn.straight), LANE_WIDTH, HALF_LENGTH)
    assert route.pose_at(route.length + 5.0)[:2] == pytest.approx((2.0, 35.0))
    assert route.pose_at(-5.0)[:2] == pytest.approx((2.0, -35.0))


def test_exit_arm():
    """Test the exit arm of each turn from the south."""
    assert exit_arm((Approach.south, Turn.right)) is Approach.east
    assert exit_arm((Approach.south, Turn.straight)) is Approach.north
    assert exit_arm((Approach.south, Turn.left)) is Approach.west


def test_conflict_point():
    """Test crossing and non-crossing route pairs."""
    crossing = conflict_point(
        (Approach.south, Turn.straight),
        (Approach.west, Turn.straight),
        LANE_WIDTH,
        HALF_LENGTH,
    )
    assert crossing is not None
    assert all(0.0 < arc < 2 * HALF_LENGTH for arc in crossing)
    assert (
        conflict_point(
            (Approach.south, Turn.straight),
            (Approach.south, Turn.left),
            LANE_WIDTH,
            HALF_LENGTH,
        )
        is None
    )


def test_normalize_angle():
    """Test wrapping into (-pi, pi]."""
    assert normalize_angle(2.5 * math.pi) == pytest.approx(math.pi / 2)
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(0.5) == pytest.approx(0.5)


def test_rectangles_overlap():
    """Test the separating-axis collision test."""
    first = rectangle_corners(0.0, 0.0, 0.0, 5.0, 2.0)
    assert rectangles_overlap(first, rectangle_corners(4.0, 0.0, 0.0, 5.0, 2.0))
    assert not rectangles_overlap(first, rectangle_corners(6.0, 0.0, 0.0, 5.0, 2.0))
    assert rectangles_overlap(
        first, rectangle_corners(0.0, 2.5, math.pi / 2, 5.0, 2.0)
    )


def test_on_road():
    """Test the cross-shaped drivable area."""
    assert on_road(2.0, -25.0, LANE_WIDTH, HALF_LENGTH)
    assert on_road(-25.0, 2.0, LANE_WIDTH, HALF_LENGTH)
    assert not on_road(15.0, 15.0, LANE_WIDTH, HALF_LENGTH)
