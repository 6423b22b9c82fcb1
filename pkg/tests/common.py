"""Define common test utilities."""
import os
from typing import Callable

import numpy as np

from cgrlpy.graph import GraphObservation
from cgrlpy.numeric.tape import Tape, grad
from cgrlpy.numeric.tensor import ParameterSet, Tensor
from cgrlpy.sim import ScenarioConfig, VehicleState, WorldState

TEST_ALPHA = 2.0
TEST_GAT_HEADS = 2
TEST_HIDDEN_DIM = 8
TEST_LATENT_DIM = 4
TEST_N_MAX = 6
TEST_SEED = 1234

FD_EPSILON = 1e-6


def load_fixture(filename):
    """Load a fixture."""
    path = os.path.join(os.path.dirname(__file__), "fixtures", filename)
    with open(path, encoding="utf-8") as fptr:
        return fptr.read()


def fixture_path(filename):
    """Return the path of a fixture."""
    return os.path.join(os.path.dirname(__file__), "fixtures", filename)


def relative_error(analytic, numeric):
    """Return the largest mixed absolute/relative error between two arrays."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / scale))


def numeric_gradient(
    loss_fn: Callable[[ParameterSet], Tensor],
    params: ParameterSet,
    epsilon: float = FD_EPSILON,
) -> ParameterSet:
    """Return central finite differences of ``loss_fn`` around ``params``."""
    gradients = {}
    for name, tensor in params.items():
        base = tensor.numpy()
        partial = np.zeros_like(base)
        for index in np.ndindex(base.shape):
            values = {}
            for sign in (1.0, -1.0):
                shifted = base.copy()
                shifted[index] += sign * epsilon
                trial = ParameterSet(
                    {key: shifted if key == name else t for key, t in params.items()}
                )
                values[sign] = loss_fn(trial).item()
            partial[index] = (values[1.0] - values[-1.0]) / (2.0 * epsilon)
        gradients[name] = partial
    return ParameterSet(gradients)


def make_vehicle(vehicle_id, x, y, speed=8.0, heading=0.0, **kwargs):
    """Return a present vehicle at a pose."""
    return VehicleState(
        id=vehicle_id,
        present=kwargs.pop("present", True),
        x=x,
        y=y,
        speed=speed,
        heading=heading,
        is_ego=vehicle_id == 0,
        **kwargs,
    )


def make_world(*vehicles, config=None):
    """Return a world holding the given vehicles (the first is the ego)."""
    return WorldState(config=config or ScenarioConfig(), vehicles=tuple(vehicles))


def random_observation(rng, n_present, n_max=TEST_N_MAX, density=0.5):
    """Return a random (symmetric) observation with ``n_present`` vehicles."""
    features = np.zeros((n_max, 7))
    features[:n_present, 0] = 1.0
    features[:n_present, 1:] = rng.normal(scale=0.5, size=(n_present, 6))
    links = np.triu(rng.random((n_present, n_present)) < density, k=1)
    adjacency = np.zeros((n_max, n_max))
    adjacency[:n_present, :n_present] = links | links.T
    return GraphObservation(
        features=features, adjacency=adjacency, n_present=n_present
    )


def assert_gradients_match(loss_fn, params, tolerance=1e-4):
    """Assert that tape gradients of ``loss_fn`` match finite differences."""
    with Tape() as tape:
        watched = tape.watch(params)
        loss = loss_fn(watched)
    analytic = grad(loss, watched, tape)
    numeric = numeric_gradient(loss_fn, params)
    for name in params:
        error = relative_error(analytic[name].data, numeric[name].data)
        assert error < tolerance, f"{name}: relative error {error:.2e}"
