"""Define tests for the replay buffer and the Q-learning trainer."""
from dataclasses import replace

import numpy as np
import pytest

from cgrlpy.agent import (
    Learner,
    ReplayBuffer,
    TrainerConfig,
    Transition,
    select_action,
    sgd_update,
    td_loss,
    td_targets,
)
from cgrlpy.errors import ConfigError, DivergenceError, DomainError
from cgrlpy.numeric.tensor import ParameterSet, Tensor
from cgrlpy.policy import q_values

from tests.common import random_observation


def _transition(rng, action=0, reward=0.5, terminal=False):
    return Transition(
        state=random_observation(rng, 3),
        action=action,
        reward=reward,
        next_state=random_observation(rng, 3),
        terminal=terminal,
    )


def _filled_learner(policy_config, trainer_config, rng, count=6):
    learner = Learner(policy_config, trainer_config, rng)
    for index in range(count):
        learner.remember(
            _transition(rng, action=index % 3, reward=1.0, terminal=index == 0)
        )
    return learner


def test_double_and_vanilla_targets():
    """Test the worked example of both bootstrap rules."""
    kwargs = {
        "rewards": np.array([1.0]),
        "terminals": np.array([False]),
        "next_online": np.array([[0.2, 0.7, 0.1]]),
        "next_target": np.array([[0.5, 0.3, 0.9]]),
        "gamma": 0.95,
    }
    double = td_targets(double=True, **kwargs)
    vanilla = td_targets(double=False, **kwargs)
    assert double[0] == 1.0 + 0.95 * 0.3
    assert vanilla[0] == 1.0 + 0.95 * 0.9
    assert double[0] == pytest.approx(1.285)
    assert vanilla[0] == pytest.approx(1.855)


def test_terminal_targets_do_not_bootstrap():
    """Test that terminal transitions keep their reward."""
    targets = td_targets(
        np.array([-1.0, 0.5]),
        np.array([True, False]),
        np.zeros((2, 3)),
        np.ones((2, 3)),
        0.9,
        double=True,
    )
    assert targets.tolist() == [-1.0, 0.5 + 0.9]


def test_td_loss():
    """Test the squared error at the taken action."""
    q = Tensor([[1.0, 2.0, 3.0], [0.0, 0.0, 1.0]])
    assert td_loss(q, np.array([2, 0]), np.array([1.0, 1.0])).item() == 2.5


def test_sgd_update_clips_global_norm():
    """Test that large gradients are rescaled to the clip norm."""
    params = ParameterSet({"w": [[1.0, 1.0]]})
    grads = ParameterSet({"w": [[3.0, 4.0]]})
    updated = sgd_update(params, grads, 1.0, clip=1.0)
    assert updated["w"].data == pytest.approx(np.array([[0.4, 0.2]]))
    unclipped = sgd_update(params, grads, 0.5)
    assert unclipped["w"].data == pytest.approx(np.array([[-0.5, -1.0]]))


def test_select_action():
    """Test greedy tie-breaking and exploration."""
    rng = np.random.default_rng(0)
    assert select_action(np.array([1.0, 3.0, 3.0]), 0.0, rng) == 1
    picks = {select_action(np.zeros(3), 1.0, rng) for _ in range(200)}
    assert picks == {0, 1, 2}
    with pytest.raises(DomainError):
        select_action(np.zeros(3), 1.5, rng)


def test_replay_buffer_fifo(rng):
    """Test eviction order and distinct sampling."""
    buffer = ReplayBuffer(capacity=3)
    transitions = [_transition(rng, reward=0.1 * index) for index in range(5)]
    for transition in transitions:
        buffer.push(transition)
    assert len(buffer) == 3
    assert buffer[0] is transitions[2]
    sample = buffer.sample(3, rng)
    assert {id(item) for item in sample} == {id(item) for item in transitions[2:]}
    with pytest.raises(DomainError):
        buffer.sample(4, rng)
    with pytest.raises(ConfigError):
        ReplayBuffer(capacity=0)


def test_invalid_transition(rng):
    """Test actions and rewards outside their ranges."""
    with pytest.raises(DomainError):
        _transition(rng, action=3)
    with pytest.raises(DomainError):
        _transition(rng, reward=2.5)


def test_invalid_trainer_config():
    """Test hyperparameters that are refused."""
    with pytest.raises(ConfigError):
        TrainerConfig(gamma=1.0)
    with pytest.raises(ConfigError):
        TrainerConfig(batch_size=8, replay_capacity=4)
    with pytest.raises(ConfigError):
        TrainerConfig(epsilon=-0.1)


def test_train_step_waits_for_batch(policy_config, trainer_config, rng):
    """Test that no update happens before a mini-batch is stored."""
    learner = _filled_learner(policy_config, trainer_config, rng, count=3)
    assert learner.train_step() is None
    assert learner.steps == 0
    assert learner.pop_episode_loss() is None


def test_target_hard_copy(policy_config, trainer_config, rng):
    """Test that the target network is copied exactly every target_update steps."""
    config = replace(trainer_config, learning_rate=1e-2)
    learner = _filled_learner(policy_config, config, rng)
    initial = learner.params.copy()

    for _ in range(config.target_update - 1):
        assert learner.train_step() is not None
        assert learner.target_params.equals(initial)
    assert not learner.params.equals(initial)

    learner.train_step()
    assert learner.steps == config.target_update
    assert learner.target_params.equals(learner.params)

    learner.train_step()
    assert not learner.target_params.equals(learner.params)


def test_episode_loss_is_averaged(policy_config, trainer_config, rng):
    """Test that per-episode TD losses are averaged and reset."""
    learner = _filled_learner(policy_config, trainer_config, rng)
    losses = [learner.train_step() for _ in range(2)]
    assert learner.pop_episode_loss() == pytest.approx(np.mean(losses))
    assert learner.pop_episode_loss() is None


def test_divergence_alarm(policy_config, trainer_config, rng):
    """Test that oversized action values stop training."""
    learner = _filled_learner(
        policy_config, replace(trainer_config, q_alarm=1e-12), rng
    )
    with pytest.raises(DivergenceError):
        learner.train_step()


def test_greedy_actions(policy_config, trainer_config, observations, rng):
    """Test one greedy action per observation."""
    learner = Learner(policy_config, trainer_config, rng)
    actions = learner.greedy_actions(observations)
    assert actions.shape == (len(observations),)
    assert set(actions.tolist()) <= {0, 1, 2}
    single = q_values([observations[0]], learner.params, policy_config)
    assert learner.act(observations[0], 0.0) == int(np.argmax(single))
