"""Define intersection geometry: routes, conflict points and collision tests.

The intersection centre is the origin; x points east and y points north. Traffic is
right-hand: the lane heading north sits at ``x = +lane_width / 2``. The east-west
road is the main road.
"""
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np

_LOGGER: logging.Logger = logging.getLogger(__name__)

CONFLICT_DISTANCE: float = 2.0
ROUTE_SAMPLE_STEP: float = 0.25


class Approach(Enum):
    """Road arm a vehicle enters the intersection from."""

    south = 0
    east = 1
    north = 2
    west = 3


class Turn(Enum):
    """Turn intent through the intersection."""

    left = "left"
    straight = "straight"
    right = "right"


MAIN_ROAD: Tuple[Approach, ...] = (Approach.east, Approach.west)

# Rotation taking the south-approach frame onto each approach.
APPROACH_ROTATION: Dict[Approach, float] = {
    Approach.south: 0.0,
    Approach.east: math.pi / 2,
    Approach.north: math.pi,
    Approach.west: -math.pi / 2,
}

RouteKey = Tuple[Approach, Turn]

# Quarter turns from the entry arm to the exit arm.
EXIT_OFFSET: Dict[Turn, int] = {Turn.right: 1, Turn.straight: 2, Turn.left: 3}


def normalize_angle(angle: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


def exit_arm(key: RouteKey) -> Approach:
    """Return the arm a route leaves the intersection through."""
    approach, turn = key
    return Approach((approach.value + EXIT_OFFSET[turn]) % len(Approach))


def _rotate(x: float, y: float, angle: float) -> Tuple[float, float]:
    cosine, sine = math.cos(angle), math.sin(angle)
    return x * cosine - y * sine, x * sine + y * cosine


@dataclass(frozen=True)
class LineSegment:
    """A straight piece of centre line."""

    x: float
    y: float
    heading: float
    length: float

    def pose_at(self, s: float) -> Tuple[float, float, float]:
        """Return (x, y, heading) at arc length ``s`` from the start."""
        return (
            self.x + s * math.cos(self.heading),
            self.y + s * math.sin(self.heading),
            self.heading,
        )

    def rotated(self, angle: float) -> "LineSegment":
        """Return the segment rotated about the origin."""
        x, y = _rotate(self.x, self.y, angle)
        return LineSegment(x, y, normalize_angle(self.heading + angle), self.length)


@dataclass(frozen=True)
class ArcSegment:
    """A circular piece of centre line; ``direction`` is +1 (left) or -1 (right)."""

    cx: float
    cy: float
    radius: float
    start_angle: float
    direction: int
    length: float

    def pose_at(self, s: float) -> Tuple[float, float, float]:
        """Return (x, y, heading) at arc length ``s`` from the start."""
        angle = self.start_angle + self.direction * s / self.radius
        return (
            self.cx + self.radius * math.cos(angle),
            self.cy + self.radius * math.sin(angle),
            normalize_angle(angle + self.direction * math.pi / 2),
        )

    def rotated(self, angle: float) -> "ArcSegment":
        """Return the segment rotated about the origin."""
        cx, cy = _rotate(self.cx, self.cy, angle)
        return ArcSegment(
            cx,
            cy,
            self.radius,
            self.start_angle + angle,
            self.direction,
            self.length,
        )


class Route:
    """A centre-line route from an entry lane, through the box, to an exit lane.

    Poses past either end extrapolate along the first/last straight segment.
    """

    def __init__(self, key: RouteKey, segments: List) -> None:
        """Initialize."""
        self.key: RouteKey = key
        self.segments: List = segments
        self._starts: np.ndarray = np.cumsum([0.0] + [seg.length for seg in segments])
        self.length: float = float(self._starts[-1])
        self.entry_length: float = segments[0].length
        self.exit_length: float = segments[-1].length
        samples = np.arange(0.0, self.length + 1e-9, ROUTE_SAMPLE_STEP)
        self.sample_s: np.ndarray = samples
        self.sample_xy: np.ndarray = np.array(
            [self.pose_at(s)[:2] for s in samples]
        )

    def __repr__(self) -> str:
        approach, turn = self.key
        return f"Route({approach.name}, {turn.value}, length={self.length:.2f})"

    def pose_at(self, s: float) -> Tuple[float, float, float]:
        """Return (x, y, heading) at arc length ``s``."""
        if s <= 0.0:
            return self.segments[0].pose_at(s)
        if s >= self.length:
            last = self.segments[-1]
            return last.pose_at(last.length + (s - self.length))
        index = int(np.searchsorted(self._starts, s, side="right") - 1)
        return self.segments[index].pose_at(s - self._starts[index])


@lru_cache(maxsize=None)
def route_for(key: RouteKey, lane_width: float, road_half_length: float) -> Route:
    """Return the (cached) route for an approach and turn intent."""
    approach, turn = key
    half = lane_width / 2.0
    box = lane_width
    entry = LineSegment(half, -road_half_length, math.pi / 2, road_half_length - box)
    exit_length = road_half_length - box

    if turn is Turn.straight:
        segments = [
            entry,
            LineSegment(half, -box, math.pi / 2, 2 * box),
            LineSegment(half, box, math.pi / 2, exit_length),
        ]
    elif turn is Turn.right:
        radius = box - half
        segments = [
            entry,
            ArcSegment(box, -box, radius, math.pi, -1, radius * math.pi / 2),
            LineSegment(box, -half, 0.0, exit_length),
        ]
    else:
        radius = box + half
        segments = [
            entry,
            ArcSegment(-box, -box, radius, 0.0, 1, radius * math.pi / 2),
            LineSegment(-box, half, math.pi, exit_length),
        ]

    angle = APPROACH_ROTATION[approach]
    return Route(key, [segment.rotated(angle) for segment in segments])


@lru_cache(maxsize=None)
def conflict_point(
    first: RouteKey, second: RouteKey, lane_width: float, road_half_length: float
) -> Optional[Tuple[float, float]]:
    """Return the arc lengths (on each route) where two routes first come close.

    Routes entering from the same approach share their entry lane and are handled as
    ordinary car following, so they have no conflict point here.
    """
    if first[0] is second[0]:
        return None
    route_a = route_for(first, lane_width, road_half_length)
    route_b = route_for(second, lane_width, road_half_length)
    diff = route_a.sample_xy[:, None, :] - route_b.sample_xy[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    close_a = np.nonzero(dist < CONFLICT_DISTANCE)[0]
    if close_a.size == 0:
        return None
    first_a = int(np.min(close_a))
    index_b = int(np.argmin(dist[first_a]))
    return float(route_a.sample_s[first_a]), float(route_b.sample_s[index_b])


def rectangle_corners(
    x: float, y: float, heading: float, length: float, width: float
) -> np.ndarray:
    """Return the four corners of an oriented rectangle."""
    forward = np.array([math.cos(heading), math.sin(heading)]) * (length / 2.0)
    side = np.array([-math.sin(heading), math.cos(heading)]) * (width / 2.0)
    centre = np.array([x, y])
    return np.array(
        [
            centre + forward + side,
            centre + forward - side,
            centre - forward - side,
            centre - forward + side,
        ]
    )


def rectangles_overlap(corners_a: np.ndarray, corners_b: np.ndarray) -> bool:
    """Return whether two convex quadrilaterals overlap (touching counts).

    Separating-axis test over the edge normals of both rectangles.
    """
    for corners in (corners_a, corners_b):
        for index in range(2):
            edge = corners[index + 1] - corners[index]
            axis = np.array([-edge[1], edge[0]])
            proj_a = corners_a @ axis
            proj_b = corners_b @ axis
            if proj_a.max() < proj_b.min() or proj_b.max() < proj_a.min():
                return False
    return True


def on_road(x: float, y: float, lane_width: float, road_half_length: float) -> bool:
    """Return whether a point lies on the cross-shaped road, within half a lane."""
    tolerance = lane_width / 2.0
    reach = road_half_length + tolerance
    width = lane_width + tolerance
    return (abs(x) <= width and abs(y) <= reach) or (
        abs(y) <= width and abs(x) <= reach
    )
