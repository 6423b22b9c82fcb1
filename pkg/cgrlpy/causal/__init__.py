"""Define causal disentanglement of the graph latents."""
from dataclasses import dataclass
import logging
from typing import TYPE_CHECKING, NamedTuple, Optional, Sequence

import numpy as np

from cgrlpy.agent import ReplayBuffer, sgd_update
from cgrlpy.errors import ConfigError
from cgrlpy.graph import GraphBatch, GraphObservation, collate
from cgrlpy.numeric import ops
from cgrlpy.numeric.tape import Tape, grad
from cgrlpy.numeric.tensor import ParameterSet, Tensor

from .entropy import conditional_mi, mutual_information
from .vgae import (
    DEFAULT_HIDDEN_DIM,
    DEFAULT_LATENT_DIM,
    batch_elbo_loss,
    causal_adjacency,
    causal_sparsity,
    encode,
    encode_batch,
    graph_vectors,
    init_vgae_params,
    split_latent,
)

if TYPE_CHECKING:  # pragma: no cover
    from cgrlpy.agent import Learner

_LOGGER: logging.Logger = logging.getLogger(__name__)


@dataclass(frozen=True)  # pylint: disable=too-many-instance-attributes
class CdrlConfig:
    """Define the causal objective and its training schedule."""

    alpha: float = 2.0
    lambda1: float = 1.0
    lambda2: float = 0.1
    learning_rate: float = 1e-3
    batch_size: int = 64
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    latent_dim: int = DEFAULT_LATENT_DIM
    grad_clip: float = 10.0
    update_every: int = 4
    warmup_episodes: int = 50

    def __post_init__(self) -> None:
        """Run post-init validation."""
        if not self.alpha > 0 or self.alpha == 1.0:
            raise ConfigError(f"alpha must be positive and not 1, got {self.alpha}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ConfigError("lambda1 and lambda2 cannot be negative")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate cannot be negative")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2")
        if self.latent_dim < 2 or self.latent_dim % 2:
            raise ConfigError(f"latent_dim must be even, got {self.latent_dim}")
        if self.update_every < 1 or self.warmup_episodes < 0:
            raise ConfigError("update_every must be positive, warmup non-negative")


class CdrlTerms(NamedTuple):
    """Define the four terms of the causal objective."""

    conditional_mi: Tensor
    mutual_information: Tensor
    elbo: Tensor
    sparsity: Tensor


def one_hot(actions: Sequence[int], n_actions: int = 3) -> np.ndarray:
    """Return the one-hot rows of action indices."""
    return np.eye(n_actions)[np.asarray(actions, dtype=np.int64)]


def cdrl_terms(
    batch: GraphBatch,
    actions: np.ndarray,
    params: ParameterSet,
    config: CdrlConfig,
    rng: Optional[np.random.Generator] = None,
) -> CdrlTerms:
    """Return the objective terms of a batch of graphs and their one-hot actions.

    One mutual-information sample is one graph: the masked mean of its node latents.
    """
    encoding = encode_batch(batch, params, rng)
    latent = split_latent(encoding.z)
    zc_vectors, zs_vectors = graph_vectors(latent, batch)
    return CdrlTerms(
        conditional_mi=conditional_mi(zc_vectors, actions, zs_vectors, config.alpha),
        mutual_information=mutual_information(zc_vectors, zs_vectors, config.alpha),
        elbo=batch_elbo_loss(encoding, batch),
        sparsity=causal_sparsity(latent.zc, batch),
    )


def cdrl_loss(
    batch: GraphBatch,
    actions: np.ndarray,
    params: ParameterSet,
    config: CdrlConfig,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Return ``-I(Zc; A* | Zs) + I(Zc; Zs) + l1 * ELBO + l2 * sparsity``.

    :param batch: Graphs collated without edge weights
    :type batch: :meth:`cgrlpy.graph.GraphBatch`
    :param actions: ``B x 3`` one-hot target actions
    :type actions: ``numpy.ndarray``
    :param params: Encoder weights
    :type params: :meth:`cgrlpy.numeric.tensor.ParameterSet`
    :param config: Objective weights and Renyi order
    :type config: :meth:`cgrlpy.causal.CdrlConfig`
    :rtype: :meth:`cgrlpy.numeric.tensor.Tensor`
    """
    terms = cdrl_terms(batch, actions, params, config, rng)
    return ops.add(
        ops.sub(terms.mutual_information, terms.conditional_mi),
        ops.add(
            ops.mul(terms.elbo, config.lambda1), ops.mul(terms.sparsity, config.lambda2)
        ),
    )


class CausalModel:
    """The owner of the encoder weights and provider of causal edge weights.

    :param config: The causal objective configuration
    :type config: :meth:`cgrlpy.causal.CdrlConfig`
    :param rng: The random generator (initialisation, noise, sampling)
    :type rng: ``numpy.random.Generator``
    :param params: Starting weights (fresh ones when omitted)
    :type params: ``Optional[cgrlpy.numeric.tensor.ParameterSet]``
    """

    def __init__(
        self,
        config: CdrlConfig,
        rng: np.random.Generator,
        params: Optional[ParameterSet] = None,
    ) -> None:
        """Initialize."""
        self.config: CdrlConfig = config
        self.rng: np.random.Generator = rng
        self.params: ParameterSet = (
            params
            if params is not None
            else init_vgae_params(rng, config.hidden_dim, config.latent_dim)
        )
        self.steps: int = 0
        self._losses = []

    def edge_weights(self, observation: GraphObservation) -> np.ndarray:
        """Return ``A * A_c`` for an observation, encoding with ``Z = mu``."""
        encoding = encode(observation.features, observation.adjacency, self.params)
        weights = causal_adjacency(split_latent(encoding.z).zc).numpy()
        return observation.adjacency * weights

    def train_on(
        self, observations: Sequence[GraphObservation], actions: Sequence[int]
    ) -> float:
        """Take one gradient step on a batch of observations and greedy actions."""
        batch = collate(observations)
        with Tape() as tape:
            watched = tape.watch(self.params)
            loss = cdrl_loss(
                batch, one_hot(actions), watched, self.config, self.rng
            )
        grads = grad(loss, watched, tape)
        self.params = sgd_update(
            self.params, grads, self.config.learning_rate, self.config.grad_clip
        )
        self.steps += 1
        value = loss.item()
        self._losses.append(value)
        _LOGGER.debug("CDRL step %s: loss %.6f", self.steps, value)
        return value

    def pop_episode_loss(self) -> Optional[float]:
        """Return (and reset) the mean causal loss since the last call."""
        if not self._losses:
            return None
        value = float(np.mean(self._losses))
        self._losses = []
        return value


def cdrl_train_step(
    model: CausalModel, buffer: ReplayBuffer, learner: "Learner"
) -> Optional[float]:
    """Run one causal step on a replay sample; ``None`` when the buffer is short.

    Target actions are the learner's current greedy actions on the stored states.
    """
    if not buffer.ready(model.config.batch_size):
        _LOGGER.debug("Skipping CDRL step: %s transitions", len(buffer))
        return None
    sample = buffer.sample(model.config.batch_size, model.rng)
    states = [transition.state for transition in sample]
    actions = learner.greedy_actions(
        states, [transition.state_weights for transition in sample]
    )
    return model.train_on(states, actions)
