"""Define the variational graph autoencoder behind the causal edge weights."""
from dataclasses import dataclass
import logging
from typing import NamedTuple, Optional, Tuple

import numpy as np
from sklearn.metrics import roc_auc_score

from cgrlpy.errors import ConfigError, DomainError, ShapeError
from cgrlpy.graph import N_FEATURES, GraphBatch, normalize_adjacency
from cgrlpy.numeric import ops
from cgrlpy.numeric.tensor import ParameterSet, Tensor, as_tensor
from cgrlpy.policy.layers import EdgeList, dense_edges, mean_pool, propagate

_LOGGER: logging.Logger = logging.getLogger(__name__)

DEFAULT_HIDDEN_DIM: int = 32
DEFAULT_LATENT_DIM: int = 16


class Encoding(NamedTuple):
    """Define the encoder outputs (``logvar`` shares the mean's weight)."""

    mu: Tensor
    logvar: Tensor
    z: Tensor


@dataclass(frozen=True)
class LatentSplit:
    """Define the causal and spurious halves of a latent matrix."""

    zc: Tensor
    zs: Tensor


def init_vgae_params(
    rng: np.random.Generator,
    hidden_dim: int = DEFAULT_HIDDEN_DIM,
    latent_dim: int = DEFAULT_LATENT_DIM,
) -> ParameterSet:
    """Return Glorot-uniform encoder weights ``w0`` (7 x H) and ``w1`` (H x L)."""
    if latent_dim < 2 or latent_dim % 2:
        raise ConfigError(f"Latent width must be even and positive, got {latent_dim}")
    limit0 = np.sqrt(6.0 / (N_FEATURES + hidden_dim))
    limit1 = np.sqrt(6.0 / (hidden_dim + latent_dim))
    return ParameterSet(
        {
            "w0": rng.uniform(-limit0, limit0, size=(N_FEATURES, hidden_dim)),
            "w1": rng.uniform(-limit1, limit1, size=(hidden_dim, latent_dim)),
        }
    )


def _encode(
    features: np.ndarray,
    edges: EdgeList,
    params: ParameterSet,
    rng: Optional[np.random.Generator],
) -> Encoding:
    n_nodes = features.shape[0]
    x = Tensor(features)
    hidden = ops.relu(propagate(ops.matmul(x, params["w0"]), edges, n_nodes))
    mu = propagate(ops.matmul(hidden, params["w1"]), edges, n_nodes)
    logvar = mu
    if rng is None:
        return Encoding(mu=mu, logvar=logvar, z=mu)
    noise = rng.standard_normal(mu.shape)
    spread = ops.exp(ops.mul(logvar, 0.5))
    return Encoding(mu=mu, logvar=logvar, z=ops.add(mu, ops.mul(spread, noise)))


def encode(
    features: np.ndarray,
    adjacency: np.ndarray,
    params: ParameterSet,
    rng: Optional[np.random.Generator] = None,
) -> Encoding:
    """Return ``(mu, logvar, Z)`` for one graph.

    ``mu = logvar = A ReLU(A F W0) W1`` with ``A`` the normalized adjacency, and
    ``Z = mu + exp(logvar / 2) * noise``. Without ``rng`` the noise is zero and
    ``Z = mu``.

    :param features: ``N x 7`` node features
    :type features: ``numpy.ndarray``
    :param adjacency: ``N x N`` physical adjacency
    :type adjacency: ``numpy.ndarray``
    :param params: Encoder weights
    :type params: :meth:`cgrlpy.numeric.tensor.ParameterSet`
    :param rng: Source of the reparameterisation noise
    :type rng: ``Optional[numpy.random.Generator]``
    :rtype: :meth:`cgrlpy.causal.vgae.Encoding`
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != params["w0"].shape[0]:
        raise ShapeError(f"Features {features.shape} do not match the encoder")
    if np.shape(adjacency) != (features.shape[0], features.shape[0]):
        raise ShapeError(
            f"Adjacency {np.shape(adjacency)} does not match {features.shape[0]} nodes"
        )
    return _encode(features, dense_edges(normalize_adjacency(adjacency)), params, rng)


def encode_batch(
    batch: GraphBatch,
    params: ParameterSet,
    rng: Optional[np.random.Generator] = None,
) -> Encoding:
    """Return the encoding of a collated batch; rows of absent nodes are zeroed.

    The batch must be collated without causal edge weights.
    """
    encoding = _encode(
        batch.features,
        EdgeList(batch.gcn_src, batch.gcn_dst, batch.gcn_weight),
        params,
        rng,
    )
    mask = batch.presence.astype(np.float64)[:, None]
    return Encoding(
        mu=ops.mul(encoding.mu, mask),
        logvar=ops.mul(encoding.logvar, mask),
        z=ops.mul(encoding.z, mask),
    )


def decode_edges(z: Tensor) -> Tensor:
    """Return the inner-product edge probabilities ``sigmoid(Z Z^T)``."""
    z = as_tensor(z)
    return ops.sigmoid(ops.matmul(z, ops.transpose(z)))


def split_latent(z: Tensor) -> LatentSplit:
    """Return the first and second column halves of ``Z``."""
    z = as_tensor(z)
    width = z.shape[1]
    if width % 2:
        raise ConfigError(f"Cannot split an odd latent width {width}")
    return LatentSplit(
        zc=ops.columns(z, 0, width // 2), zs=ops.columns(z, width // 2, width)
    )


def causal_adjacency(zc: Tensor) -> Tensor:
    """Return ``A_c = sigmoid(Zc Zc^T)``."""
    return decode_edges(zc)


def graph_vectors(latent: LatentSplit, batch: GraphBatch) -> Tuple[Tensor, Tensor]:
    """Return the per-graph mean of ``Zc`` and ``Zs`` over present nodes."""
    return (
        mean_pool(latent.zc, batch.presence, batch.graph_index, batch.n_graphs),
        mean_pool(latent.zs, batch.presence, batch.graph_index, batch.n_graphs),
    )


def kl_divergence(mu: Tensor, logvar: Tensor) -> Tensor:
    """Return the mean over rows of ``KL(N(mu, exp(logvar)) || N(0, I))`` in nats."""
    mu, logvar = as_tensor(mu), as_tensor(logvar)
    per_entry = ops.sub(
        ops.add(ops.exp(logvar), ops.mul(mu, mu)), ops.add(logvar, 1.0)
    )
    return ops.mul(ops.sum(per_entry), 0.5 / mu.shape[0])


def reconstruction_loss(z: Tensor, adjacency: np.ndarray) -> Tensor:
    """Return the positive-reweighted binary cross entropy of ``A + I`` given ``Z``.

    Positive pairs are weighted by ``#non-edges / #edges``; the mean runs over all
    ``N^2`` pairs.
    """
    z = as_tensor(z)
    labels = np.asarray(adjacency, dtype=np.float64) + np.eye(z.shape[0])
    labels = np.minimum(labels, 1.0)
    positives = labels.sum()
    pos_weight = (labels.size - positives) / positives
    logits = ops.matmul(z, ops.transpose(z))
    loss = ops.add(
        ops.mul(ops.softplus(ops.neg(logits)), pos_weight * labels),
        ops.mul(ops.softplus(logits), 1.0 - labels),
    )
    return ops.mean(loss)


def _present_rows(batch: GraphBatch):
    offset = 0
    for obs in batch.observations:
        rows = offset + np.nonzero(obs.presence)[0]
        yield obs, rows
        offset += obs.n_max


def elbo_loss(
    features: np.ndarray,
    adjacency: np.ndarray,
    params: ParameterSet,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Return the negative ELBO of one graph (reconstruction plus KL)."""
    encoding = encode(features, adjacency, params, rng)
    return ops.add(
        reconstruction_loss(encoding.z, adjacency),
        kl_divergence(encoding.mu, encoding.logvar),
    )


def batch_elbo_loss(encoding: Encoding, batch: GraphBatch) -> Tensor:
    """Return the negative ELBO averaged over the graphs of a batch.

    Only present nodes enter the reconstruction and KL terms.
    """
    total: Optional[Tensor] = None
    for obs, rows in _present_rows(batch):
        if rows.size == 0:
            raise DomainError("Cannot reconstruct a graph without present nodes")
        adjacency = obs.adjacency[np.ix_(obs.presence, obs.presence)]
        term = ops.add(
            reconstruction_loss(ops.take_rows(encoding.z, rows), adjacency),
            kl_divergence(
                ops.take_rows(encoding.mu, rows), ops.take_rows(encoding.logvar, rows)
            ),
        )
        total = term if total is None else ops.add(total, term)
    return ops.mul(total, 1.0 / batch.n_graphs)


def causal_sparsity(zc: Tensor, batch: GraphBatch) -> Tensor:
    """Return ``sum_g ||A_c(g)||_1 / sum_g ||A(g)||_1`` over a batch.

    ``A_c`` covers every padded row of a graph. The ratio is zero when the batch has
    no physical edge.
    """
    physical = float(sum(np.sum(obs.adjacency) for obs in batch.observations))
    if physical == 0.0:
        return Tensor(0.0)
    total: Optional[Tensor] = None
    offset = 0
    for obs in batch.observations:
        rows = np.arange(offset, offset + obs.n_max)
        term = ops.sum(causal_adjacency(ops.take_rows(zc, rows)))
        total = term if total is None else ops.add(total, term)
        offset += obs.n_max
    return ops.mul(total, 1.0 / physical)


def edge_ranking_auc(
    probabilities: np.ndarray,
    adjacency: np.ndarray,
    presence: Optional[np.ndarray] = None,
) -> float:
    """Return the probability that a true edge outranks a non-edge.

    Pairs ``i < j`` among present nodes are ranked by ``probabilities``; ties count
    one half.

    :raises DomainError: when there is no edge or no non-edge to compare
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    adjacency = np.asarray(adjacency)
    if presence is None:
        presence = np.ones(adjacency.shape[0], dtype=bool)
    rows, cols = np.triu_indices(adjacency.shape[0], k=1)
    keep = presence[rows] & presence[cols]
    scores = probabilities[rows[keep], cols[keep]]
    labels = adjacency[rows[keep], cols[keep]] > 0
    if labels.all() or not labels.any():
        raise DomainError("Ranking needs at least one edge and one non-edge")
    return float(roc_auc_score(labels, scores))
