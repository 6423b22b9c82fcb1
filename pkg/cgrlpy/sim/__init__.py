"""Define the unsignalized intersection world."""
from dataclasses import dataclass, field, replace
from enum import Enum
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from cgrlpy.errors import ConfigError, ScenarioError, SimulationStateError
from cgrlpy.sim.geometry import (
    MAIN_ROAD,
    Approach,
    RouteKey,
    Turn,
    conflict_point,
    exit_arm,
    normalize_angle,
    on_road,
    rectangle_corners,
    rectangles_overlap,
    route_for,
)
from cgrlpy.sim.idm import IdmParams, idm_acceleration

_LOGGER: logging.Logger = logging.getLogger(__name__)

EGO_APPROACH: Approach = Approach.south
EGO_ID: int = 0

MAX_PLACEMENT_ATTEMPTS: int = 2000


class EgoAction(Enum):
    """Discrete longitudinal actions of the ego vehicle."""

    constant = 0
    accelerated = 1
    decelerated = 2


ACTION_SIGN: Dict[EgoAction, float] = {
    EgoAction.constant: 0.0,
    EgoAction.accelerated: 1.0,
    EgoAction.decelerated: -1.0,
}


@dataclass(frozen=True)
class RewardWeights:
    """Define the weights of the four reward components."""

    collision: float = 1.0
    high_speed: float = 1.0
    on_road: float = 1.0
    task_completion: float = 1.0


@dataclass(frozen=True)
class SpeedMap:
    """Define the linear speed-to-reward map ``(x0, x1) -> (y0, y1)``."""

    x0: float = 7.0
    x1: float = 9.0
    y0: float = 0.0
    y1: float = 1.0


@dataclass(frozen=True)  # pylint: disable=too-many-instance-attributes
class ScenarioConfig:
    """Define an intersection scenario."""

    n_human_vehicles: int = 15
    road_half_length: float = 30.0
    lane_width: float = 4.0
    ego_task: Turn = Turn.straight
    sim_frequency: int = 15
    policy_frequency: int = 1
    horizon: int = 40
    idm: IdmParams = field(default_factory=IdmParams)
    reward_weights: RewardWeights = field(default_factory=RewardWeights)
    speed_map: SpeedMap = field(default_factory=SpeedMap)
    rng_seed: int = 0
    ego_initial_speed: float = 7.0
    ego_speed_cap: float = 10.0
    ego_acceleration: float = 3.0
    hv_speed_low: float = 7.0
    hv_speed_high: float = 9.0
    vehicle_length: float = 5.0
    vehicle_width: float = 2.0
    conflict_lookahead: float = 25.0

    def __post_init__(self) -> None:
        """Run post-init validation."""
        if self.sim_frequency <= 0 or self.policy_frequency <= 0:
            raise ConfigError("Frequencies must be positive")
        if self.sim_frequency % self.policy_frequency:
            raise ConfigError(
                "sim_frequency must be divisible by policy_frequency "
                f"({self.sim_frequency} / {self.policy_frequency})"
            )
        if self.horizon < 1:
            raise ConfigError(f"horizon must be at least 1, got {self.horizon}")
        if self.n_human_vehicles < 0:
            raise ConfigError("n_human_vehicles cannot be negative")
        if self.speed_map.x1 == self.speed_map.x0:
            raise ConfigError("speed_map needs x1 != x0")

    @property
    def substeps(self) -> int:
        """Return the simulation sub-steps per decision step."""
        return self.sim_frequency // self.policy_frequency

    @property
    def dt(self) -> float:
        """Return the simulation time step in seconds."""
        return 1.0 / self.sim_frequency


@dataclass(frozen=True)  # pylint: disable=too-many-instance-attributes
class VehicleState:
    """Define the kinematic state of one vehicle."""

    id: int  # pylint: disable=invalid-name
    present: bool
    x: float
    y: float
    speed: float
    heading: float
    route: Optional[RouteKey] = None
    arc: float = 0.0
    is_ego: bool = False
    desired_speed: float = 8.0

    def __post_init__(self) -> None:
        """Run post-init normalisation."""
        if self.speed < 0:
            raise ConfigError(f"Vehicle {self.id} has negative speed {self.speed}")
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def cos_h(self) -> float:
        """Return the cosine of the heading."""
        return math.cos(self.heading)

    @property
    def sin_h(self) -> float:
        """Return the sine of the heading."""
        return math.sin(self.heading)

    @property
    def vx(self) -> float:  # pylint: disable=invalid-name
        """Return the eastward velocity component."""
        return self.speed * self.cos_h

    @property
    def vy(self) -> float:  # pylint: disable=invalid-name
        """Return the northward velocity component."""
        return self.speed * self.sin_h


@dataclass(frozen=True)
class StepFlags:
    """Define the episode events evaluated during a step."""

    collided: bool = False
    arrived: bool = False
    off_road: bool = False
    timed_out: bool = False

    @property
    def terminal(self) -> bool:
        """Return whether these events end the episode."""
        return self.collided or self.arrived or self.timed_out


@dataclass(frozen=True)
class RewardComponents:
    """Define the four reward terms."""

    collision: float
    high_speed: float
    on_road: float
    task_completion: float


@dataclass(frozen=True)
class WorldState:
    """Define a snapshot of the intersection; the ego is always first."""

    config: ScenarioConfig
    vehicles: Tuple[VehicleState, ...]
    steps: int = 0
    terminal: bool = False

    @property
    def ego(self) -> VehicleState:
        """Return the ego vehicle."""
        return self.vehicles[0]

    @property
    def time(self) -> float:
        """Return the elapsed simulated time in seconds."""
        return self.steps / self.config.policy_frequency

    def snapshot(self) -> dict:
        """Return a JSON-serialisable frame of the vehicle poses."""
        return {
            "steps": self.steps,
            "vehicles": [
                {
                    "id": vehicle.id,
                    "present": vehicle.present,
                    "x": vehicle.x,
                    "y": vehicle.y,
                    "heading": vehicle.heading,
                    "speed": vehicle.speed,
                    "is_ego": vehicle.is_ego,
                }
                for vehicle in self.vehicles
            ],
        }


@dataclass(frozen=True)
class StepResult:
    """Define the outcome of one decision step."""

    world: WorldState
    reward: float
    components: RewardComponents
    flags: StepFlags

    @property
    def terminal(self) -> bool:
        """Return whether the episode has ended."""
        return self.flags.terminal


def _place(vehicle: VehicleState, arc: float, config: ScenarioConfig) -> VehicleState:
    """Return the vehicle moved to arc length ``arc`` along its route."""
    route = route_for(vehicle.route, config.lane_width, config.road_half_length)
    x, y, heading = route.pose_at(arc)
    return replace(vehicle, x=x, y=y, heading=heading, arc=arc)


def _too_close(
    x: float,
    y: float,
    heading: float,
    other: VehicleState,
    min_gap: float,
    config: ScenarioConfig,
) -> bool:
    """Return whether a candidate pose crowds an already placed vehicle.

    Vehicles in the same lane keep ``min_gap`` between centres along the lane;
    any other pair only needs clear footprints.
    """
    dx, dy = other.x - x, other.y - y
    along = dx * math.cos(heading) + dy * math.sin(heading)
    across = dy * math.cos(heading) - dx * math.sin(heading)
    if math.cos(other.heading - heading) > 0.5 and abs(across) < config.lane_width / 2:
        return abs(along) < min_gap
    return math.hypot(dx, dy) < config.vehicle_length + config.vehicle_width


def build_scenario(config: ScenarioConfig, seed: Optional[int] = None) -> WorldState:
    """Create the initial world for a scenario.

    The ego spawns at the start of the south approach with the task's exit as
    destination. Human vehicles get random routes and arc positions, at least
    ``s0 + vehicle_length`` (centre to centre) behind or ahead of any vehicle already
    placed in the same lane.

    :param config: The scenario definition
    :type config: :meth:`cgrlpy.sim.ScenarioConfig`
    :param seed: Overrides ``config.rng_seed`` when given
    :type seed: ``Optional[int]``
    :rtype: :meth:`cgrlpy.sim.WorldState`
    """
    rng = np.random.default_rng(config.rng_seed if seed is None else seed)
    min_gap = config.idm.s0 + config.vehicle_length

    ego = _place(
        VehicleState(
            id=EGO_ID,
            present=True,
            x=0.0,
            y=0.0,
            speed=min(config.ego_initial_speed, config.ego_speed_cap),
            heading=0.0,
            route=(EGO_APPROACH, config.ego_task),
            is_ego=True,
        ),
        0.0,
        config,
    )
    vehicles: List[VehicleState] = [ego]
    approaches = list(Approach)
    turns = list(Turn)

    for vehicle_id in range(1, config.n_human_vehicles + 1):
        for attempt in range(MAX_PLACEMENT_ATTEMPTS):
            key = (
                approaches[int(rng.integers(len(approaches)))],
                turns[int(rng.integers(len(turns)))],
            )
            route = route_for(key, config.lane_width, config.road_half_length)
            arc = float(rng.uniform(0.0, route.length - config.vehicle_length))
            x, y, heading = route.pose_at(arc)
            if not any(
                _too_close(x, y, heading, other, min_gap, config) for other in vehicles
            ):
                desired = float(rng.uniform(config.hv_speed_low, config.hv_speed_high))
                vehicles.append(
                    VehicleState(
                        id=vehicle_id,
                        present=True,
                        x=x,
                        y=y,
                        speed=desired,
                        heading=heading,
                        route=key,
                        arc=arc,
                        desired_speed=desired,
                    )
                )
                if attempt:
                    _LOGGER.debug(
                        "Placed vehicle %s after %s attempts", vehicle_id, attempt + 1
                    )
                break
        else:
            raise ScenarioError(
                f"Could not place vehicle {vehicle_id} of {config.n_human_vehicles} "
                "without overlap"
            )

    return WorldState(config=config, vehicles=tuple(vehicles))


def collision_check(
    first: VehicleState,
    second: VehicleState,
    *,
    length: float = 5.0,
    width: float = 2.0,
) -> bool:
    """Return whether the footprints of two present vehicles overlap.

    :param first: A vehicle
    :type first: :meth:`cgrlpy.sim.VehicleState`
    :param second: Another vehicle
    :type second: :meth:`cgrlpy.sim.VehicleState`
    :rtype: ``bool``
    """
    if math.hypot(first.x - second.x, first.y - second.y) > length + width:
        return False
    return rectangles_overlap(
        rectangle_corners(first.x, first.y, first.heading, length, width),
        rectangle_corners(second.x, second.y, second.heading, length, width),
    )


def reward(
    flags: StepFlags, ego_speed: float, config: ScenarioConfig
) -> Tuple[float, RewardComponents]:
    """Return the total reward and its components.

    ``total = w_or * r_or * (w_c * r_c + w_hs * r_hs + w_tc * r_tc)``.

    :param flags: The events of the step
    :type flags: :meth:`cgrlpy.sim.StepFlags`
    :param ego_speed: The ego speed in m/s
    :type ego_speed: ``float``
    :param config: The scenario (weights and speed map)
    :type config: :meth:`cgrlpy.sim.ScenarioConfig`
    :rtype: ``Tuple[float, cgrlpy.sim.RewardComponents]``
    """
    speed_map = config.speed_map
    weights = config.reward_weights
    high_speed = speed_map.y0 + (ego_speed - speed_map.x0) * (
        speed_map.y1 - speed_map.y0
    ) / (speed_map.x1 - speed_map.x0)
    components = RewardComponents(
        collision=-2.0 if flags.collided else 0.0,
        high_speed=float(
            np.clip(
                high_speed,
                min(speed_map.y0, speed_map.y1),
                max(speed_map.y0, speed_map.y1),
            )
        ),
        on_road=0.0 if flags.off_road else 1.0,
        task_completion=1.0 if flags.arrived else 0.0,
    )
    total = (
        weights.on_road
        * components.on_road
        * (
            weights.collision * components.collision
            + weights.high_speed * components.high_speed
            + weights.task_completion * components.task_completion
        )
    )
    return total, components


def _has_priority(
    vehicle: VehicleState, other: VehicleState, remaining: float, other_remaining: float
) -> bool:
    """Return whether ``other`` goes through a shared conflict point first."""
    main = vehicle.route[0] in MAIN_ROAD
    other_main = other.route[0] in MAIN_ROAD
    if main != other_main:
        return other_main
    return other_remaining < remaining


def _path_gap(
    vehicle: VehicleState, other: VehicleState, config: ScenarioConfig
) -> Tuple[bool, Optional[float]]:
    """Return (shares a lane with ``other``, gap when ``other`` is ahead on it)."""
    route = route_for(vehicle.route, config.lane_width, config.road_half_length)
    other_route = route_for(other.route, config.lane_width, config.road_half_length)

    if vehicle.route[0] is other.route[0]:
        if vehicle.route != other.route and other.arc > other_route.entry_length:
            return False, None
        if other.arc > vehicle.arc:
            return True, other.arc - vehicle.arc - config.vehicle_length
        return True, None

    if exit_arm(vehicle.route) is exit_arm(other.route):
        own_exit = vehicle.arc - (route.length - route.exit_length)
        other_exit = other.arc - (other_route.length - other_route.exit_length)
        if other_exit < 0:
            return False, None
        if other_exit > own_exit:
            return True, other_exit - own_exit - config.vehicle_length
        return own_exit >= 0, None

    return False, None


def _leader(
    vehicle: VehicleState, world: WorldState
) -> Tuple[Optional[VehicleState], Optional[float]]:
    """Return the nearest leader (real or virtual) of a human vehicle and its gap.

    Vehicles ahead on this vehicle's own lane are ordinary moving leaders. A vehicle
    on a crossing route becomes a stationary virtual leader at the conflict point
    when that point lies within the lookahead and the other vehicle has priority.
    """
    config = world.config
    lookahead = config.conflict_lookahead
    best: Tuple[Optional[VehicleState], Optional[float]] = (None, None)

    for other in world.vehicles:
        if other.id == vehicle.id or not other.present or other.route is None:
            continue
        leader = other
        shares_lane, gap = _path_gap(vehicle, other, config)
        if not shares_lane:
            point = conflict_point(
                vehicle.route, other.route, config.lane_width, config.road_half_length
            )
            if point is None:
                continue
            own_arc, other_arc = point
            remaining = own_arc - vehicle.arc
            other_remaining = other_arc - other.arc
            if not 0.0 < remaining <= lookahead:
                continue
            if other_remaining < -config.vehicle_length:
                continue
            if not _has_priority(vehicle, other, remaining, other_remaining):
                continue
            gap = remaining - config.vehicle_length
            if gap <= 0:
                # Already committed to the conflict zone.
                continue
            route = route_for(vehicle.route, config.lane_width, config.road_half_length)
            x, y, heading = route.pose_at(own_arc)
            leader = VehicleState(
                id=other.id, present=True, x=x, y=y, speed=0.0, heading=heading
            )

        if gap is None or gap > lookahead:
            continue
        if best[1] is None or gap < best[1]:
            best = (leader, gap)

    return best


def _human_acceleration(vehicle: VehicleState, world: WorldState) -> float:
    """Return the IDM acceleration of a human vehicle in the current world."""
    params = replace(world.config.idm, v0=vehicle.desired_speed)
    leader, gap = _leader(vehicle, world)
    if leader is not None and gap is not None and gap <= 0:
        _LOGGER.debug("Vehicle %s is bumper to bumper; braking hard", vehicle.id)
        return -vehicle.speed * world.config.sim_frequency
    return idm_acceleration(vehicle, leader, params, gap=gap)


def _advance(
    vehicle: VehicleState, acceleration: float, cap: float, config: ScenarioConfig
) -> VehicleState:
    """Integrate one sub-step along the vehicle's route."""
    speed = float(np.clip(vehicle.speed + acceleration * config.dt, 0.0, cap))
    arc = vehicle.arc + 0.5 * (vehicle.speed + speed) * config.dt
    return replace(_place(vehicle, arc, config), speed=speed)


def step(world: WorldState, ego_action: EgoAction) -> StepResult:
    """Advance the world by one decision step.

    :param world: The current world (must not be terminal)
    :type world: :meth:`cgrlpy.sim.WorldState`
    :param ego_action: The ego's discrete action
    :type ego_action: :meth:`cgrlpy.sim.EgoAction`
    :rtype: :meth:`cgrlpy.sim.StepResult`
    """
    if world.terminal:
        raise SimulationStateError("Cannot step a terminal world")

    config = world.config
    ego_acceleration = ACTION_SIGN[EgoAction(ego_action)] * config.ego_acceleration
    collided = arrived = off_road = False

    for _ in range(config.substeps):
        vehicles: List[VehicleState] = []
        for vehicle in world.vehicles:
            if not vehicle.present:
                vehicles.append(vehicle)
            elif vehicle.is_ego:
                vehicles.append(
                    _advance(vehicle, ego_acceleration, config.ego_speed_cap, config)
                )
            else:
                moved = _advance(
                    vehicle, _human_acceleration(vehicle, world), math.inf, config
                )
                route = route_for(
                    vehicle.route, config.lane_width, config.road_half_length
                )
                if moved.arc >= route.length:
                    moved = replace(moved, present=False)
                vehicles.append(moved)
        world = replace(world, vehicles=tuple(vehicles))

        ego = world.ego
        collided = any(
            collision_check(
                ego,
                other,
                length=config.vehicle_length,
                width=config.vehicle_width,
            )
            for other in world.vehicles[1:]
            if other.present
        )
        if collided:
            break
        ego_route = route_for(ego.route, config.lane_width, config.road_half_length)
        if ego.arc >= ego_route.length:
            arrived = True
            break
        if not on_road(ego.x, ego.y, config.lane_width, config.road_half_length):
            off_road = True

    steps = world.steps + 1
    flags = StepFlags(
        collided=collided,
        arrived=arrived,
        off_road=off_road,
        timed_out=steps >= config.horizon and not (collided or arrived),
    )
    total, components = reward(flags, world.ego.speed, config)
    world = replace(world, steps=steps, terminal=flags.terminal)
    return StepResult(world=world, reward=total, components=components, flags=flags)
