"""Define the intelligent driver model used by human-driven vehicles."""
from dataclasses import dataclass
import logging
import math
from typing import TYPE_CHECKING, Optional

from cgrlpy.errors import CollisionStateError, ConfigError

if TYPE_CHECKING:  # pragma: no cover
    from cgrlpy.sim import VehicleState

_LOGGER: logging.Logger = logging.getLogger(__name__)

DEFAULT_VEHICLE_LENGTH: float = 5.0


@dataclass(frozen=True)
class IdmParams:
    """Define car-following parameters.

    ``b`` keeps the sign convention of a deceleration (negative); its magnitude is the
    comfortable deceleration.
    """

    a_max: float = 6.0
    delta: float = 4.0
    T: float = 1.5  # pylint: disable=invalid-name
    s0: float = 5.0
    b: float = -5.0
    v0: float = 8.0

    def __post_init__(self) -> None:
        """Run post-init validation."""
        if self.a_max <= 0 or self.T <= 0 or self.s0 <= 0 or self.b == 0:
            raise ConfigError(f"Invalid IDM parameters: {self}")
        if self.v0 <= 0:
            raise ConfigError(f"IDM desired speed must be positive: {self.v0}")

    @property
    def b_mag(self) -> float:
        """Return the comfortable deceleration magnitude."""
        return abs(self.b)


def desired_gap(speed: float, closing_speed: float, params: IdmParams) -> float:
    """Return the safety distance ``s*`` for a speed and closing speed."""
    return (
        params.s0
        + speed * params.T
        + speed * closing_speed / (2.0 * math.sqrt(params.a_max * params.b_mag))
    )


def idm_acceleration(
    follower: "VehicleState",
    leader: Optional["VehicleState"],
    params: IdmParams,
    *,
    gap: Optional[float] = None,
) -> float:
    """Return the IDM acceleration of ``follower`` behind ``leader``.

    Without a leader only the free-road term applies. The bumper-to-bumper gap is
    taken from ``gap`` when given (route-based distances), else from the centre
    distance minus one vehicle length.

    :param follower: The vehicle being controlled
    :type follower: :meth:`cgrlpy.sim.VehicleState`
    :param leader: The vehicle (or virtual obstacle) ahead, if any
    :type leader: ``Optional[cgrlpy.sim.VehicleState]``
    :param params: Car-following parameters (``v0`` is the follower's desired speed)
    :type params: :meth:`cgrlpy.sim.idm.IdmParams`
    :rtype: ``float``
    """
    speed = follower.speed
    acceleration = 1.0 - (speed / params.v0) ** params.delta
    if leader is None:
        return params.a_max * acceleration

    if gap is None:
        gap = (
            math.hypot(leader.x - follower.x, leader.y - follower.y)
            - DEFAULT_VEHICLE_LENGTH
        )
    if gap <= 0:
        raise CollisionStateError(
            f"Vehicle {follower.id} has non-positive gap {gap:.3f} to {leader.id}"
        )

    star = desired_gap(speed, speed - leader.speed, params)
    return params.a_max * (acceleration - (star / gap) ** 2)
