"""Define tests for tensors and parameter sets."""
import numpy as np
import pytest

from cgrlpy.errors import NumericError, ShapeError
from cgrlpy.numeric.tensor import ParameterSet, Tensor


def test_tensor_is_read_only():
    """Test that tensor data cannot be written in place."""
    tensor = Tensor([[1.0, 2.0]])
    with pytest.raises(ValueError):
        tensor.data[0, 0] = 5.0
    copy = tensor.numpy()
    copy[0, 0] = 5.0
    assert tensor.data[0, 0] == 1.0


def test_tensor_rejects_nan():
    """Test that non-finite data is refused."""
    with pytest.raises(NumericError):
        Tensor([1.0, np.nan])
    with pytest.raises(NumericError):
        Tensor([np.inf])


def test_tensor_rejects_three_dimensions():
    """Test that tensors hold at most two dimensions."""
    with pytest.raises(ShapeError):
        Tensor(np.zeros((2, 2, 2)))


def test_item():
    """Test reading a single value."""
    assert Tensor([[3.5]]).item() == 3.5
    with pytest.raises(ShapeError):
        Tensor([1.0, 2.0]).item()


def test_operators():
    """Test the arithmetic operator shortcuts."""
    a = Tensor([[1.0, 2.0]])
    b = Tensor([[3.0], [4.0]])
    assert np.array_equal((a + 1.0).data, [[2.0, 3.0]])
    assert np.array_equal((2.0 * a - a).data, a.data)
    assert np.array_equal((a @ b).data, [[11.0]])
    assert np.array_equal(a.T.data, [[1.0], [2.0]])
    assert np.array_equal((-a / 2.0).data, [[-0.5, -1.0]])


def test_parameter_set_order_and_copy():
    """Test that parameter sets keep insertion order and copy by value."""
    params = ParameterSet({"b": np.ones(2), "a": np.zeros((2, 2))})
    assert list(params) == ["b", "a"]
    copy = params.copy()
    assert copy.equals(params)
    assert copy["a"] is not params["a"]


def test_parameter_set_prefix_round_trip():
    """Test prefixing and selecting names."""
    params = ParameterSet({"w": np.ones((2, 2)), "b": np.zeros((1, 2))})
    merged = ParameterSet(
        {**params.prefixed("online/"), "vgae/w0": np.ones((7, 2))}
    )
    assert merged.select("online/").equals(params)
    assert list(merged.select("vgae/")) == ["w0"]


def test_global_norm():
    """Test the global L2 norm."""
    params = ParameterSet({"a": [[3.0]], "b": [[4.0]]})
    assert params.global_norm() == pytest.approx(5.0)


def test_equals_detects_differences():
    """Test that bitwise differences and renames are detected."""
    params = ParameterSet({"a": [1.0, 2.0]})
    assert not params.equals(ParameterSet({"a": [1.0, 2.0 + 1e-15]}))
    assert not params.equals(ParameterSet({"b": [1.0, 2.0]}))
