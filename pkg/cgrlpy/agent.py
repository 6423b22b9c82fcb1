"""Define the replay buffer and the dueling double deep Q-learning trainer."""
from collections import deque
from dataclasses import dataclass
import logging
from typing import Deque, List, Optional, Sequence

import numpy as np

from cgrlpy.errors import ConfigError, DivergenceError, DomainError, NumericError
from cgrlpy.graph import GraphObservation, collate
from cgrlpy.numeric import ops
from cgrlpy.numeric.tape import Tape, grad
from cgrlpy.numeric.tensor import ParameterSet, Tensor
from cgrlpy.policy import PolicyConfig, forward, init_params, q_values

_LOGGER: logging.Logger = logging.getLogger(__name__)

DEFAULT_REPLAY_CAPACITY: int = 100000
Q_ALARM: float = 45.0


@dataclass(frozen=True)  # pylint: disable=too-many-instance-attributes
class TrainerConfig:
    """Define the temporal-difference learning hyperparameters."""

    gamma: float = 0.95
    learning_rate: float = 1e-4
    batch_size: int = 64
    epsilon: float = 0.1
    target_update: int = 5000
    episodes: int = 1000
    replay_capacity: int = DEFAULT_REPLAY_CAPACITY
    grad_clip: float = 10.0
    q_alarm: float = Q_ALARM

    def __post_init__(self) -> None:
        """Run post-init validation."""
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate cannot be negative")
        if self.batch_size < 1 or self.target_update < 1:
            raise ConfigError("batch_size and target_update must be positive")
        if self.replay_capacity < self.batch_size:
            raise ConfigError("replay_capacity must hold at least one mini-batch")
        if self.episodes < 0:
            raise ConfigError("episodes cannot be negative")


@dataclass(frozen=True)
class Transition:
    """Define one stored decision step.

    ``state_weights``/``next_weights`` cache the causal edge weights that were in use
    when the step was taken (``None`` for baselines).
    """

    state: GraphObservation
    action: int
    reward: float
    next_state: GraphObservation
    terminal: bool
    state_weights: Optional[np.ndarray] = None
    next_weights: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        """Run post-init validation."""
        if self.action not in (0, 1, 2):
            raise DomainError(f"Invalid action index: {self.action}")
        if not -2.0 <= self.reward <= 2.0:
            raise DomainError(f"Reward out of range: {self.reward}")


class ReplayBuffer:
    """A FIFO experience store sampled uniformly without replacement.

    :param capacity: Maximum number of transitions
    :type capacity: ``int``
    """

    def __init__(self, capacity: int = DEFAULT_REPLAY_CAPACITY) -> None:
        """Initialize."""
        if capacity < 1:
            raise ConfigError(f"Replay capacity must be positive, got {capacity}")
        self.capacity: int = capacity
        self._items: Deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, index: int) -> Transition:
        return self._items[index]

    def push(self, transition: Transition) -> None:
        """Store a transition, evicting the oldest when full."""
        self._items.append(transition)

    def ready(self, batch_size: int) -> bool:
        """Return whether a mini-batch can be drawn."""
        return len(self._items) >= batch_size

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        """Return ``batch_size`` distinct transitions."""
        if not self.ready(batch_size):
            raise DomainError(
                f"Cannot sample {batch_size} transitions from {len(self._items)}"
            )
        indices = rng.choice(len(self._items), size=batch_size, replace=False)
        return [self._items[int(index)] for index in indices]


def select_action(q: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Return an epsilon-greedy action; greedy ties go to the lowest index.

    :param q: Action values of one state
    :type q: ``numpy.ndarray``
    :param epsilon: Exploration probability
    :type epsilon: ``float``
    :param rng: The random generator
    :type rng: ``numpy.random.Generator``
    :rtype: ``int``
    """
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must lie in [0, 1], got {epsilon}")
    if rng.random() < epsilon:
        return int(rng.integers(q.size))
    return int(np.argmax(q))


def td_targets(
    rewards: np.ndarray,
    terminals: np.ndarray,
    next_online: np.ndarray,
    next_target: np.ndarray,
    gamma: float,
    *,
    double: bool,
) -> np.ndarray:
    """Return bootstrapped targets ``y`` for a batch.

    The double path evaluates the online argmax with the target network; the vanilla
    path takes the target network's max. Terminal transitions do not bootstrap.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    next_target = np.asarray(next_target, dtype=np.float64)
    if double:
        chosen = np.argmax(np.asarray(next_online), axis=1)
        bootstrap = next_target[np.arange(next_target.shape[0]), chosen]
    else:
        bootstrap = np.max(next_target, axis=1)
    terminals = np.asarray(terminals, dtype=bool)
    return np.where(terminals, rewards, rewards + gamma * bootstrap)


def td_loss(q: Tensor, actions: np.ndarray, targets: np.ndarray) -> Tensor:
    """Return the mean squared TD error at the taken actions."""
    targets = Tensor(np.asarray(targets, dtype=np.float64)[:, None])
    residual = ops.sub(targets, ops.pick(q, actions))
    return ops.mean(ops.mul(residual, residual))


def sgd_update(
    params: ParameterSet,
    grads: ParameterSet,
    learning_rate: float,
    clip: Optional[float] = None,
) -> ParameterSet:
    """Return ``params - lr * g``, with ``g`` rescaled to a global norm of ``clip``."""
    scale = 1.0
    if clip is not None:
        norm = grads.global_norm()
        if norm > clip:
            scale = clip / norm
    step = learning_rate * scale
    return params.map(lambda name, tensor: tensor.data - step * grads[name].data)


class Learner:  # pylint: disable=too-many-instance-attributes
    """The owner of the online/target networks, the replay buffer and step counter.

    :param policy_config: The network architecture
    :type policy_config: :meth:`cgrlpy.policy.PolicyConfig`
    :param trainer_config: The learning hyperparameters
    :type trainer_config: :meth:`cgrlpy.agent.TrainerConfig`
    :param rng: The random generator (initialisation, exploration, sampling)
    :type rng: ``numpy.random.Generator``
    :param params: Starting parameters (fresh ones when omitted)
    :type params: ``Optional[cgrlpy.numeric.tensor.ParameterSet]``
    """

    def __init__(
        self,
        policy_config: PolicyConfig,
        trainer_config: TrainerConfig,
        rng: np.random.Generator,
        params: Optional[ParameterSet] = None,
    ) -> None:
        """Initialize."""
        self.policy_config: PolicyConfig = policy_config
        self.trainer_config: TrainerConfig = trainer_config
        self.rng: np.random.Generator = rng
        self.params: ParameterSet = (
            params if params is not None else init_params(policy_config, rng)
        )
        self.target_params: ParameterSet = self.params.copy()
        self.buffer: ReplayBuffer = ReplayBuffer(trainer_config.replay_capacity)
        self.steps: int = 0
        self._episode_losses: List[float] = []

    def act(
        self,
        observation: GraphObservation,
        epsilon: float,
        edge_weights: Optional[np.ndarray] = None,
    ) -> int:
        """Return an epsilon-greedy action for one observation."""
        q = q_values([observation], self.params, self.policy_config, [edge_weights])
        return select_action(q[0], epsilon, self.rng)

    def greedy_actions(
        self,
        observations: Sequence[GraphObservation],
        edge_weights: Optional[Sequence[Optional[np.ndarray]]] = None,
    ) -> np.ndarray:
        """Return the online network's greedy action per observation."""
        q = q_values(observations, self.params, self.policy_config, edge_weights)
        return np.argmax(q, axis=1)

    def remember(self, transition: Transition) -> None:
        """Store a transition."""
        self.buffer.push(transition)

    def targets(self, batch: Sequence[Transition]) -> np.ndarray:
        """Return the TD targets of a sampled batch (no gradient)."""
        next_states = [transition.next_state for transition in batch]
        next_weights = [transition.next_weights for transition in batch]
        next_target = q_values(
            next_states, self.target_params, self.policy_config, next_weights
        )
        next_online = (
            q_values(next_states, self.params, self.policy_config, next_weights)
            if self.policy_config.use_double
            else next_target
        )
        return td_targets(
            np.array([transition.reward for transition in batch]),
            np.array([transition.terminal for transition in batch]),
            next_online,
            next_target,
            self.trainer_config.gamma,
            double=self.policy_config.use_double,
        )

    def train_step(self) -> Optional[float]:
        """Run one gradient step; return the loss, or ``None`` if the buffer is short.

        :raises DivergenceError: on a non-finite loss or action values beyond the alarm
        """
        config = self.trainer_config
        if not self.buffer.ready(config.batch_size):
            _LOGGER.debug(
                "Skipping train step: %s/%s transitions",
                len(self.buffer),
                config.batch_size,
            )
            return None

        batch = self.buffer.sample(config.batch_size, self.rng)
        try:
            targets = self.targets(batch)
            with Tape() as tape:
                watched = tape.watch(self.params)
                q = forward(
                    collate(
                        [transition.state for transition in batch],
                        [transition.state_weights for transition in batch],
                    ),
                    watched,
                    self.policy_config,
                )
                loss = td_loss(
                    q, np.array([transition.action for transition in batch]), targets
                )
            grads = grad(loss, watched, tape)
        except NumericError as err:
            _LOGGER.error("Training diverged at step %s: %s", self.steps, err)
            raise DivergenceError(
                f"Non-finite values at step {self.steps}: {err}"
            ) from err

        peak = float(np.max(np.abs(q.data)))
        if peak > config.q_alarm:
            _LOGGER.error("Action values reached %s at step %s", peak, self.steps)
            raise DivergenceError(
                f"|Q| = {peak:.2f} exceeds the alarm {config.q_alarm} "
                f"at step {self.steps}"
            )

        self.params = sgd_update(
            self.params, grads, config.learning_rate, config.grad_clip
        )
        self.steps += 1
        if self.steps % config.target_update == 0:
            _LOGGER.debug("Copying online parameters to target at step %s", self.steps)
            self.target_params = self.params.copy()

        value = loss.item()
        self._episode_losses.append(value)
        return value

    def pop_episode_loss(self) -> Optional[float]:
        """Return (and reset) the mean TD loss since the last call."""
        if not self._episode_losses:
            return None
        value = float(np.mean(self._episode_losses))
        self._episode_losses = []
        return value
