"""Define graph-structured observations of the intersection."""
from dataclasses import dataclass
import logging
from typing import Optional, Sequence

import numpy as np

from cgrlpy.errors import CapacityError, DomainError, ShapeError
from cgrlpy.sim import WorldState

_LOGGER: logging.Logger = logging.getLogger(__name__)

DEFAULT_N_MAX: int = 16
N_FEATURES: int = 7

POSITION_SCALE: float = 100.0
VELOCITY_SCALE: float = 30.0

NEIGHBOR_DX: float = 10.0
NEIGHBOR_DY: float = 30.0


@dataclass(frozen=True)
class GraphObservation:
    """Define the MDP state: features ``F`` (N x 7) and adjacency ``A`` (N x N).

    Row 0 is always the ego. Feature columns are ``(e, x, y, v_x, v_y, cos_h, sin_h)``;
    rows of absent vehicles are all zero and isolated.
    """

    features: np.ndarray
    adjacency: np.ndarray
    n_present: int

    @property
    def n_max(self) -> int:
        """Return the padded node count."""
        return self.features.shape[0]

    @property
    def presence(self) -> np.ndarray:
        """Return the boolean presence mask (feature column ``e``)."""
        return self.features[:, 0] > 0.5


def _present_vehicles(world: WorldState, n_max: int):
    vehicles = [vehicle for vehicle in world.vehicles if vehicle.present]
    if not vehicles or not vehicles[0].is_ego:
        raise DomainError("World has no present ego vehicle")
    if len(vehicles) > n_max:
        raise CapacityError(
            f"{len(vehicles)} present vehicles exceed the observation capacity {n_max}"
        )
    return vehicles


def build_feature_matrix(world: WorldState, n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    """Return the padded feature matrix of a world.

    Positions are in the intersection-centre frame scaled by 1/100 m, velocities by
    1/30 m/s; the ego occupies row 0 and present human vehicles follow by id.

    :param world: The world snapshot
    :type world: :meth:`cgrlpy.sim.WorldState`
    :param n_max: Number of rows
    :type n_max: ``int``
    :rtype: ``numpy.ndarray``
    """
    features = np.zeros((n_max, N_FEATURES))
    for row, vehicle in enumerate(_present_vehicles(world, n_max)):
        features[row] = (
            1.0,
            vehicle.x / POSITION_SCALE,
            vehicle.y / POSITION_SCALE,
            vehicle.vx / VELOCITY_SCALE,
            vehicle.vy / VELOCITY_SCALE,
            vehicle.cos_h,
            vehicle.sin_h,
        )
    return features


def build_adjacency(world: WorldState, n_max: int = DEFAULT_N_MAX) -> np.ndarray:
    """Return the binary adjacency of a world.

    Two distinct present vehicles are adjacent when their world-frame distances are
    below 10 m along x and 30 m along y.
    """
    vehicles = _present_vehicles(world, n_max)
    xy = np.array([(vehicle.x, vehicle.y) for vehicle in vehicles])
    adjacency = np.zeros((n_max, n_max))
    close = (np.abs(xy[:, None, 0] - xy[None, :, 0]) < NEIGHBOR_DX) & (
        np.abs(xy[:, None, 1] - xy[None, :, 1]) < NEIGHBOR_DY
    )
    np.fill_diagonal(close, False)
    count = len(vehicles)
    adjacency[:count, :count] = close
    return adjacency


def observe(world: WorldState, n_max: int = DEFAULT_N_MAX) -> GraphObservation:
    """Return the graph observation of a world."""
    features = build_feature_matrix(world, n_max)
    return GraphObservation(
        features=features,
        adjacency=build_adjacency(world, n_max),
        n_present=int(np.sum(features[:, 0])),
    )


def normalize_adjacency(adjacency: np.ndarray) -> np.ndarray:
    """Return ``D^-1/2 (A + I) D^-1/2`` for a (possibly weighted) symmetric ``A``.

    Isolated nodes end up with an identity row.
    """
    adjacency = np.asarray(adjacency, dtype=np.float64)
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise ShapeError(f"Adjacency must be square, got {adjacency.shape}")
    with_loops = adjacency + np.eye(adjacency.shape[0])
    inv_sqrt = 1.0 / np.sqrt(with_loops.sum(axis=1))
    return with_loops * inv_sqrt[:, None] * inv_sqrt[None, :]


@dataclass(frozen=True)  # pylint: disable=too-many-instance-attributes
class GraphBatch:
    """Define several observations stacked as one block-diagonal graph.

    ``gcn_*`` hold the normalized (optionally weighted) propagation edges including
    self loops; ``att_*`` hold the attention neighbourhoods (physical edges among
    present nodes plus a self loop per present node). Edges point ``src -> dst``.
    """

    observations: Sequence[GraphObservation]
    features: np.ndarray
    presence: np.ndarray
    graph_index: np.ndarray
    gcn_src: np.ndarray
    gcn_dst: np.ndarray
    gcn_weight: np.ndarray
    att_src: np.ndarray
    att_dst: np.ndarray

    @property
    def n_graphs(self) -> int:
        """Return the number of graphs."""
        return len(self.observations)

    @property
    def n_nodes(self) -> int:
        """Return the total node count (padding included)."""
        return self.features.shape[0]


def collate(
    observations: Sequence[GraphObservation],
    edge_weights: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> GraphBatch:
    """Stack observations into a :meth:`GraphBatch`.

    ``edge_weights`` (one ``N x N`` matrix or ``None`` per graph) gate the physical
    adjacency elementwise before normalization.
    """
    if not observations:
        raise DomainError("Cannot collate an empty batch")
    gcn_src, gcn_dst, gcn_weight, att_src, att_dst = [], [], [], [], []
    offset = 0
    for index, obs in enumerate(observations):
        adjacency = obs.adjacency
        if edge_weights is not None and edge_weights[index] is not None:
            adjacency = adjacency * edge_weights[index]
        normalized = normalize_adjacency(adjacency)
        dst, src = np.nonzero(normalized)
        gcn_src.append(src + offset)
        gcn_dst.append(dst + offset)
        gcn_weight.append(normalized[dst, src])

        support = obs.adjacency > 0
        present = obs.presence
        support[np.diag_indices_from(support)] = present
        dst, src = np.nonzero(support)
        att_src.append(src + offset)
        att_dst.append(dst + offset)
        offset += obs.n_max

    return GraphBatch(
        observations=tuple(observations),
        features=np.concatenate([obs.features for obs in observations]),
        presence=np.concatenate([obs.presence for obs in observations]),
        graph_index=np.repeat(
            np.arange(len(observations)), [obs.n_max for obs in observations]
        ),
        gcn_src=np.concatenate(gcn_src),
        gcn_dst=np.concatenate(gcn_dst),
        gcn_weight=np.concatenate(gcn_weight),
        att_src=np.concatenate(att_src),
        att_dst=np.concatenate(att_dst),
    )
