"""Define graph and head layers over block-diagonal edge lists.

Edges point ``src -> dst``: a node aggregates over the edges whose ``dst`` it is.
"""
import logging
import math
from typing import NamedTuple, Optional

import numpy as np

from cgrlpy.errors import DomainError, ShapeError
from cgrlpy.numeric import ops
from cgrlpy.numeric.tensor import Tensor, as_tensor

_LOGGER: logging.Logger = logging.getLogger(__name__)


class EdgeList(NamedTuple):
    """Define directed edges with optional weights."""

    src: np.ndarray
    dst: np.ndarray
    weight: Optional[np.ndarray] = None


def dense_edges(matrix: np.ndarray) -> EdgeList:
    """Return the nonzero entries of ``matrix`` as edges (``matrix[dst, src]``)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    dst, src = np.nonzero(matrix)
    return EdgeList(src=src, dst=dst, weight=matrix[dst, src])


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Return ``x W + b``."""
    out = ops.matmul(x, weight)
    if bias is not None:
        out = ops.add(out, bias)
    return out


def propagate(x: Tensor, edges: EdgeList, n_nodes: int) -> Tensor:
    """Return the weighted neighbour sum ``out_i = sum_j w_ij x_j``."""
    messages = ops.take_rows(x, edges.src)
    if edges.weight is not None:
        messages = ops.mul(messages, np.asarray(edges.weight)[:, None])
    return ops.segment_sum(messages, edges.dst, n_nodes)


def identity_mapping_strength(lam: float, layer_index: int) -> float:
    """Return ``beta_l = log(lambda / l + 1)``."""
    if layer_index < 1:
        raise DomainError(f"Layer index must be at least 1, got {layer_index}")
    return math.log(lam / layer_index + 1.0)


def gcn2_layer(
    x: Tensor,
    edges: EdgeList,
    x0: Tensor,
    weight: Tensor,
    layer_index: int,
    *,
    alpha: float = 0.1,
    lam: float = 1.0,
) -> Tensor:
    """Return one GCNII propagation ``((1-a) A x + a x0) ((1-b_l) I + b_l W)``.

    ``edges`` carry the normalized adjacency (self loops included) as weights.

    :param x: Node features of the previous layer
    :type x: :meth:`cgrlpy.numeric.tensor.Tensor`
    :param edges: Normalized propagation edges
    :type edges: :meth:`cgrlpy.policy.layers.EdgeList`
    :param x0: Initial node representation (initial residual)
    :type x0: :meth:`cgrlpy.numeric.tensor.Tensor`
    :param weight: Square mixing weight
    :type weight: :meth:`cgrlpy.numeric.tensor.Tensor`
    :param layer_index: One-based depth ``l``
    :type layer_index: ``int``
    :rtype: :meth:`cgrlpy.numeric.tensor.Tensor`
    """
    x, x0, weight = as_tensor(x), as_tensor(x0), as_tensor(weight)
    if x.shape != x0.shape:
        raise ShapeError(f"Initial residual {x0.shape} does not match {x.shape}")
    if weight.shape != (x.shape[1], x.shape[1]):
        raise ShapeError(f"GCNII weight must be square over {x.shape[1]} features")
    beta = identity_mapping_strength(lam, layer_index)
    support = ops.add(
        ops.mul(propagate(x, edges, x.shape[0]), 1.0 - alpha), ops.mul(x0, alpha)
    )
    return ops.add(
        ops.mul(support, 1.0 - beta), ops.mul(ops.matmul(support, weight), beta)
    )


def _check_neighbourhoods(edges: EdgeList, required: np.ndarray) -> None:
    covered = np.zeros(required.shape[0], dtype=bool)
    covered[np.asarray(edges.dst, dtype=np.int64)] = True
    missing = np.nonzero(required & ~covered)[0]
    if missing.size:
        raise DomainError(f"Nodes {missing.tolist()} have an empty neighbour set")


def gatv2_scores(
    x: Tensor,
    edges: EdgeList,
    w_src: Tensor,
    w_dst: Tensor,
    att: Tensor,
    *,
    slope: float = 0.2,
    required: Optional[np.ndarray] = None,
) -> Tensor:
    """Return the attention coefficients of every edge, one column per head.

    The score of edge ``j -> i`` in head ``m`` is
    ``a_m^T LeakyReLU(x_i W_dst^m + x_j W_src^m)``, softmaxed over the incoming edges
    of ``i``. ``att`` is ``d' x M``.

    :param required: Nodes that must have at least one incoming edge
    :type required: ``Optional[numpy.ndarray]``
    :rtype: :meth:`cgrlpy.numeric.tensor.Tensor`
    """
    x, w_src, w_dst, att = (as_tensor(t) for t in (x, w_src, w_dst, att))
    if required is not None:
        _check_neighbourhoods(edges, np.asarray(required, dtype=bool))
    if len(edges.src) == 0:
        raise DomainError("Attention needs at least one edge")
    head_dim, n_heads = att.shape
    if w_src.shape[1] != head_dim * n_heads or w_dst.shape != w_src.shape:
        raise ShapeError(
            f"Attention projections {w_src.shape}/{w_dst.shape} do not match "
            f"{n_heads} heads of width {head_dim}"
        )

    hidden = ops.leaky_relu(
        ops.add(
            ops.take_rows(ops.matmul(x, w_dst), edges.dst),
            ops.take_rows(ops.matmul(x, w_src), edges.src),
        ),
        slope,
    )
    scores = ops.concat(
        [
            ops.matmul(
                ops.columns(hidden, head * head_dim, (head + 1) * head_dim),
                ops.columns(att, head, head + 1),
            )
            for head in range(n_heads)
        ],
        axis=1,
    )
    return ops.segment_softmax(scores, edges.dst, x.shape[0])


def gatv2_layer(
    x: Tensor,
    edges: EdgeList,
    w_src: Tensor,
    w_dst: Tensor,
    att: Tensor,
    *,
    slope: float = 0.2,
    activate: bool = True,
    required: Optional[np.ndarray] = None,
) -> Tensor:
    """Return one multi-head GATv2 layer; heads are concatenated.

    Node ``i`` receives ``sum_j alpha_ij^m x_j W_src^m`` per head ``m``, followed by
    LeakyReLU unless ``activate`` is off. Nodes without incoming edges output zeros.
    """
    x, w_src = as_tensor(x), as_tensor(w_src)
    head_dim, n_heads = as_tensor(att).shape
    coefficients = gatv2_scores(
        x, edges, w_src, w_dst, att, slope=slope, required=required
    )
    spread = np.kron(np.eye(n_heads), np.ones((1, head_dim)))
    messages = ops.mul(
        ops.take_rows(ops.matmul(x, w_src), edges.src),
        ops.matmul(coefficients, Tensor(spread)),
    )
    out = ops.segment_sum(messages, edges.dst, x.shape[0])
    if activate:
        out = ops.leaky_relu(out, slope)
    return out


def mean_pool(
    x: Tensor, presence: np.ndarray, graph_index: np.ndarray, n_graphs: int
) -> Tensor:
    """Return the per-graph mean over present rows only.

    :raises DomainError: when a graph has no present node
    """
    presence = np.asarray(presence, dtype=bool)
    graph_index = np.asarray(graph_index, dtype=np.int64)
    counts = np.bincount(graph_index[presence], minlength=n_graphs)
    if np.any(counts == 0):
        raise DomainError("Cannot pool a graph without present nodes")
    rows = np.nonzero(presence)[0]
    totals = ops.segment_sum(ops.take_rows(x, rows), graph_index[rows], n_graphs)
    return ops.mul(totals, 1.0 / counts[:, None])


def dueling_q(value: Tensor, advantage: Tensor) -> Tensor:
    """Return ``Q = V + A - mean_a A`` row by row.

    :param value: ``B x 1`` state values
    :type value: :meth:`cgrlpy.numeric.tensor.Tensor`
    :param advantage: ``B x |A|`` advantages
    :type advantage: :meth:`cgrlpy.numeric.tensor.Tensor`
    :rtype: :meth:`cgrlpy.numeric.tensor.Tensor`
    """
    value, advantage = as_tensor(value), as_tensor(advantage)
    if value.shape != (advantage.shape[0], 1):
        raise ShapeError(
            f"Value {value.shape} does not match advantage {advantage.shape}"
        )
    return ops.add(value, ops.sub(advantage, ops.mean(advantage, axis=1)))
