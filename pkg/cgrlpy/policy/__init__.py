"""Define the graph Q-network."""
from dataclasses import dataclass
import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from cgrlpy.errors import ConfigError
from cgrlpy.graph import N_FEATURES, GraphBatch, GraphObservation, collate
from cgrlpy.numeric import ops
from cgrlpy.numeric.tensor import ParameterSet, Tensor
from cgrlpy.policy.layers import (
    EdgeList,
    dueling_q,
    gatv2_layer,
    gcn2_layer,
    linear,
    mean_pool,
)

_LOGGER: logging.Logger = logging.getLogger(__name__)

N_GCN_LAYERS: int = 2
N_GAT_LAYERS: int = 2
N_FC_LAYERS: int = 2


@dataclass(frozen=True)  # pylint: disable=too-many-instance-attributes
class PolicyConfig:
    """Define the network architecture and its baseline flags."""

    hidden_dim: int = 64
    gat_heads: int = 4
    gcn2_alpha: float = 0.1
    gcn2_lambda: float = 1.0
    leaky_slope: float = 0.2
    n_actions: int = 3
    use_gcn: bool = True
    use_gat: bool = True
    use_dueling: bool = True
    use_double: bool = True

    def __post_init__(self) -> None:
        """Run post-init validation."""
        if not (self.use_gcn or self.use_gat):
            raise ConfigError("At least one of use_gcn/use_gat must be enabled")
        if self.n_actions != 3:
            raise ConfigError(f"The ego has 3 actions, got n_actions={self.n_actions}")
        if self.hidden_dim < 1 or self.gat_heads < 1:
            raise ConfigError("hidden_dim and gat_heads must be positive")
        if self.hidden_dim % self.gat_heads:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} is not divisible by "
                f"{self.gat_heads} attention heads"
            )
        if not 0.0 <= self.gcn2_alpha <= 1.0:
            raise ConfigError(f"gcn2_alpha must lie in [0, 1], got {self.gcn2_alpha}")

    @property
    def head_dim(self) -> int:
        """Return the per-head attention width."""
        return self.hidden_dim // self.gat_heads


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(config: PolicyConfig, rng: np.random.Generator) -> ParameterSet:
    """Return freshly initialized network parameters.

    Weights are Glorot-uniform, biases zero, layer-norm gains one. Names are stable
    and ordered so checkpoints are reproducible.

    :param config: The architecture
    :type config: :meth:`cgrlpy.policy.PolicyConfig`
    :param rng: The random generator
    :type rng: ``numpy.random.Generator``
    :rtype: :meth:`cgrlpy.numeric.tensor.ParameterSet`
    """
    hidden = config.hidden_dim
    params: Dict[str, np.ndarray] = {
        "input/w": _glorot(rng, N_FEATURES, hidden),
        "input/b": np.zeros((1, hidden)),
    }
    if config.use_gcn:
        for layer in range(1, N_GCN_LAYERS + 1):
            params[f"gcn{layer}/w"] = _glorot(rng, hidden, hidden)
        params["gcn_norm/gain"] = np.ones((1, hidden))
        params["gcn_norm/bias"] = np.zeros((1, hidden))
    if config.use_gat:
        for layer in range(1, N_GAT_LAYERS + 1):
            params[f"gat{layer}/w_src"] = _glorot(rng, hidden, hidden)
            params[f"gat{layer}/w_dst"] = _glorot(rng, hidden, hidden)
            params[f"gat{layer}/att"] = np.hstack(
                [_glorot(rng, config.head_dim, 1) for _ in range(config.gat_heads)]
            )
        params["gat_norm/gain"] = np.ones((1, hidden))
        params["gat_norm/bias"] = np.zeros((1, hidden))
    for layer in range(1, N_FC_LAYERS + 1):
        params[f"fc{layer}/w"] = _glorot(rng, hidden, hidden)
        params[f"fc{layer}/b"] = np.zeros((1, hidden))
    if config.use_dueling:
        params["value/w"] = _glorot(rng, hidden, 1)
        params["value/b"] = np.zeros((1, 1))
        params["advantage/w"] = _glorot(rng, hidden, config.n_actions)
        params["advantage/b"] = np.zeros((1, config.n_actions))
    else:
        params["q/w"] = _glorot(rng, hidden, config.n_actions)
        params["q/b"] = np.zeros((1, config.n_actions))
    return ParameterSet(params)


def node_embeddings(
    batch: GraphBatch, params: ParameterSet, config: PolicyConfig
) -> Tensor:
    """Return the node representations after the enabled graph blocks."""
    x = ops.relu(linear(Tensor(batch.features), params["input/w"], params["input/b"]))

    if config.use_gcn:
        edges = EdgeList(batch.gcn_src, batch.gcn_dst, batch.gcn_weight)
        x0 = x
        for layer in range(1, N_GCN_LAYERS + 1):
            x = gcn2_layer(
                x,
                edges,
                x0,
                params[f"gcn{layer}/w"],
                layer,
                alpha=config.gcn2_alpha,
                lam=config.gcn2_lambda,
            )
            if layer == 1:
                x = ops.layer_norm(
                    ops.relu(x), params["gcn_norm/gain"], params["gcn_norm/bias"]
                )

    if config.use_gat:
        edges = EdgeList(batch.att_src, batch.att_dst)
        for layer in range(1, N_GAT_LAYERS + 1):
            last = layer == N_GAT_LAYERS
            x = gatv2_layer(
                x,
                edges,
                params[f"gat{layer}/w_src"],
                params[f"gat{layer}/w_dst"],
                params[f"gat{layer}/att"],
                slope=config.leaky_slope,
                activate=not last,
                required=batch.presence,
            )
            # LeakyReLU scores attention inside the layer; ReLU feeds the norm here.
            if layer == 1:
                x = ops.layer_norm(
                    ops.relu(x), params["gat_norm/gain"], params["gat_norm/bias"]
                )

    return x


def forward(batch: GraphBatch, params: ParameterSet, config: PolicyConfig) -> Tensor:
    """Return the ``B x |A|`` action values of a batch of observations.

    :param batch: Collated observations (optionally with causal edge weights)
    :type batch: :meth:`cgrlpy.graph.GraphBatch`
    :param params: Network parameters
    :type params: :meth:`cgrlpy.numeric.tensor.ParameterSet`
    :param config: The architecture
    :type config: :meth:`cgrlpy.policy.PolicyConfig`
    :rtype: :meth:`cgrlpy.numeric.tensor.Tensor`
    """
    nodes = node_embeddings(batch, params, config)
    h = mean_pool(nodes, batch.presence, batch.graph_index, batch.n_graphs)
    for layer in range(1, N_FC_LAYERS + 1):
        h = ops.relu(linear(h, params[f"fc{layer}/w"], params[f"fc{layer}/b"]))
    if config.use_dueling:
        return dueling_q(
            linear(h, params["value/w"], params["value/b"]),
            linear(h, params["advantage/w"], params["advantage/b"]),
        )
    return linear(h, params["q/w"], params["q/b"])


def q_values(
    observations: Sequence[GraphObservation],
    params: ParameterSet,
    config: PolicyConfig,
    edge_weights: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> np.ndarray:
    """Return action values as a plain ``B x |A|`` array (no tape)."""
    return forward(collate(observations, edge_weights), params, config).numpy()


def parameter_shapes(config: PolicyConfig) -> Dict[str, Tuple[int, ...]]:
    """Return the expected parameter names and shapes of an architecture."""
    params = init_params(config, np.random.default_rng(0))
    return {name: tensor.shape for name, tensor in params.items()}
