"""Define fixtures, constants, etc. available for all tests."""
# pylint: disable=redefined-outer-name
import numpy as np
import pytest

from cgrlpy.agent import TrainerConfig
from cgrlpy.causal import CdrlConfig
from cgrlpy.harness.config import build_config
from cgrlpy.policy import PolicyConfig
from cgrlpy.sim import ScenarioConfig

from tests.common import (
    TEST_GAT_HEADS,
    TEST_HIDDEN_DIM,
    TEST_LATENT_DIM,
    TEST_N_MAX,
    TEST_SEED,
    random_observation,
)


@pytest.fixture()
def rng():
    """Return a seeded random generator."""
    return np.random.default_rng(TEST_SEED)


@pytest.fixture()
def policy_config():
    """Return a small full (GCNII + GATv2 + dueling) architecture."""
    return PolicyConfig(hidden_dim=TEST_HIDDEN_DIM, gat_heads=TEST_GAT_HEADS)


@pytest.fixture()
def trainer_config():
    """Return a trainer config that learns from tiny batches."""
    return TrainerConfig(batch_size=4, target_update=3, replay_capacity=50)


@pytest.fixture()
def cdrl_config():
    """Return a small causal objective config."""
    return CdrlConfig(
        batch_size=4, hidden_dim=TEST_HIDDEN_DIM, latent_dim=TEST_LATENT_DIM
    )


@pytest.fixture()
def scenario_config():
    """Return a light-traffic scenario."""
    return ScenarioConfig(n_human_vehicles=3)


@pytest.fixture()
def observations(rng):
    """Return a handful of random padded observations."""
    return [random_observation(rng, n_present) for n_present in (1, 3, 4, TEST_N_MAX)]


@pytest.fixture()
def tiny_experiment():
    """Return a quick experiment: two human vehicles and two short episodes."""

    def _build(model="cgrl", episodes=2):
        return build_config(
            {
                "scenario": {"n_human_vehicles": 2, "horizon": 6},
                "policy": {"hidden_dim": TEST_HIDDEN_DIM, "gat_heads": TEST_GAT_HEADS},
                "trainer": {
                    "batch_size": 4,
                    "target_update": 5,
                    "episodes": episodes,
                    "replay_capacity": 100,
                },
                "cdrl": {
                    "batch_size": 4,
                    "hidden_dim": TEST_HIDDEN_DIM,
                    "latent_dim": TEST_LATENT_DIM,
                    "update_every": 1,
                    "warmup_episodes": 0,
                },
                "experiment": {
                    "model": model,
                    "task": "straight",
                    "eval_episodes": 3,
                    "checkpoint_every": 1,
                    "n_max": TEST_N_MAX,
                },
            }
        )

    return _build
