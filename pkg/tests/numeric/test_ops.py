"""Define tests for differentiable operations."""
import numpy as np
import pytest

from cgrlpy.errors import DomainError, ShapeError
from cgrlpy.numeric import ops
from cgrlpy.numeric.tape import Tape, grad
from cgrlpy.numeric.tensor import ParameterSet, Tensor

from tests.common import assert_gradients_match

N_INSTANCES = 20

UNARY_OPS = {
    "exp": ops.exp,
    "softplus": ops.softplus,
    "sigmoid": ops.sigmoid,
    "leaky_relu": lambda x: ops.leaky_relu(x, 0.2),
    "softmax": ops.softmax,
    "layer_norm": ops.layer_norm,
    "transpose": ops.transpose,
    "pairwise_sq_dists": ops.pairwise_sq_dists,
    "row_sum": lambda x: ops.sum(x, axis=1),
    "column_mean": lambda x: ops.mean(x, axis=0),
    "columns": lambda x: ops.columns(x, 1, 3),
    "take_rows": lambda x: ops.take_rows(x, np.array([2, 0, 2])),
    "pick": lambda x: ops.pick(x, np.array([0, 3, 1])),
    "segment_sum": lambda x: ops.segment_sum(x, np.array([1, 0, 1]), 2),
    "segment_softmax": lambda x: ops.segment_softmax(x, np.array([0, 0, 1]), 2),
}


def _weighted_loss(op, weights):
    def loss(params):
        out = op(params["x"])
        return ops.sum(ops.mul(out, weights(out.shape)))

    return loss


@pytest.mark.parametrize("name", sorted(UNARY_OPS))
def test_unary_gradients(name):
    """Test unary operations against central finite differences."""
    for seed in range(N_INSTANCES):
        rng = np.random.default_rng(seed)
        cache = {}

        def weights(shape, rng=rng, cache=cache):
            if shape not in cache:
                cache[shape] = rng.normal(size=shape)
            return cache[shape]

        params = ParameterSet({"x": rng.normal(size=(3, 4))})
        assert_gradients_match(_weighted_loss(UNARY_OPS[name], weights), params)


def test_binary_gradients():
    """Test broadcasting binary operations and matrix products."""
    for seed in range(N_INSTANCES):
        rng = np.random.default_rng(seed)
        params = ParameterSet(
            {
                "a": rng.normal(size=(3, 4)),
                "b": rng.normal(size=(1, 4)),
                "w": rng.normal(size=(4, 2)),
                "d": rng.uniform(1.0, 2.0, size=(3, 1)),
            }
        )

        def loss(p):
            mixed = ops.div(ops.mul(ops.add(p["a"], p["b"]), p["a"]), p["d"])
            product = ops.matmul(ops.sub(mixed, p["b"]), p["w"])
            return ops.sum(ops.concat([product, ops.neg(p["d"])], axis=1))

        assert_gradients_match(loss, params)


def test_log_sqrt_trace_gradients():
    """Test positive-domain operations and the trace."""
    for seed in range(N_INSTANCES):
        rng = np.random.default_rng(seed)
        params = ParameterSet({"x": rng.uniform(0.5, 2.0, size=(3, 3))})

        def loss(p):
            return ops.add(
                ops.trace(ops.log(p["x"])), ops.sum(ops.sqrt(p["x"]), axis=None)
            )

        assert_gradients_match(loss, params)


def test_take_flat_gradient():
    """Test gathering from the flattened matrix."""
    rng = np.random.default_rng(0)
    params = ParameterSet({"x": rng.normal(size=(3, 3))})
    assert_gradients_match(
        lambda p: ops.sum(ops.mul(ops.take_flat(p["x"], np.array([1, 5, 1])), 2.0)),
        params,
    )


def test_spectral_sum_gradient():
    """Test the eigen-path gradient of a spectral sum."""
    for seed in range(N_INSTANCES):
        rng = np.random.default_rng(seed)
        params = ParameterSet({"x": rng.normal(size=(5, 3))})

        def loss(p):
            gram = ops.exp(ops.mul(ops.pairwise_sq_dists(p["x"]), -0.5))
            unit = ops.div(gram, ops.trace(gram))
            return ops.spectral_sum(unit, lambda l: l ** 2, lambda l: 2.0 * l)

        assert_gradients_match(loss, params, tolerance=1e-3)


def test_spectral_sum_value():
    """Test the value of a spectral sum on a diagonal matrix."""
    out = ops.spectral_sum(
        Tensor(np.diag([0.5, 0.25, 0.25])), lambda l: l ** 2, lambda l: 2 * l
    )
    assert out.item() == pytest.approx(0.375)


def test_untracked_ops_do_not_record():
    """Test that operations on constants never touch the tape."""
    with Tape() as tape:
        ops.exp(Tensor([1.0, 2.0]))
        watched = tape.watch(ParameterSet({"w": [[1.0]]}))
        ops.mul(watched["w"], 3.0)
    assert len(tape) == 2


def test_gradient_is_zero_for_unused_parameters():
    """Test that parameters the loss ignores get zero gradients."""
    params = ParameterSet({"used": [[2.0]], "unused": [[1.0, 1.0]]})
    with Tape() as tape:
        watched = tape.watch(params)
        loss = ops.sum(ops.mul(watched["used"], watched["used"]))
    gradients = grad(loss, watched, tape)
    assert gradients["used"].item() == pytest.approx(4.0)
    assert np.array_equal(gradients["unused"].data, [[0.0, 0.0]])


def test_grad_needs_a_scalar():
    """Test that gradients of non-scalar outputs are refused."""
    with Tape() as tape:
        watched = tape.watch(ParameterSet({"w": [[1.0, 2.0]]}))
        out = ops.mul(watched["w"], 2.0)
    with pytest.raises(ShapeError):
        grad(out, watched, tape)


def test_segment_softmax_sums_to_one():
    """Test that coefficients of every segment sum to one."""
    scores = Tensor(np.random.default_rng(3).normal(size=(5, 2)))
    segments = np.array([0, 2, 0, 2, 2])
    out = ops.segment_softmax(scores, segments, 3).data
    assert np.allclose(out[segments == 0].sum(axis=0), 1.0)
    assert np.allclose(out[segments == 2].sum(axis=0), 1.0)


def test_domain_errors():
    """Test the inputs that operations refuse."""
    with pytest.raises(DomainError):
        ops.log(Tensor([0.0, 1.0]))
    with pytest.raises(DomainError):
        ops.sqrt(Tensor([-1.0]))
    with pytest.raises(DomainError):
        ops.div(Tensor([1.0]), Tensor([0.0]))
    with pytest.raises(DomainError):
        ops.activation(Tensor([1.0]), "tanh")


def test_shape_errors():
    """Test mismatched shapes."""
    with pytest.raises(ShapeError):
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))
    with pytest.raises(ShapeError):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        ops.trace(Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        ops.columns(Tensor(np.ones((2, 3))), 2, 4)
