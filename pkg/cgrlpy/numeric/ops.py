"""Define differentiable tensor operations.

Every function takes tensors (or plain numbers, lifted to constants), computes its
output with numpy and, when a tape is active and tracks one of the inputs, records the
local backward rule on that tape.
"""
import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from cgrlpy.errors import DomainError, ShapeError
from cgrlpy.numeric.linalg import eigh_array
from cgrlpy.numeric.tape import Backward, active_tape
from cgrlpy.numeric.tensor import ArrayLike, Tensor, as_tensor

_LOGGER: logging.Logger = logging.getLogger(__name__)

ACTIVATION_LAYER_NORM = "layer_norm"
ACTIVATION_LEAKY_RELU = "leaky_relu"
ACTIVATION_RELU = "relu"
ACTIVATION_SIGMOID = "sigmoid"
ACTIVATION_SOFTMAX = "softmax"

DEFAULT_LAYER_NORM_EPS: float = 1e-5
EIGENVALUE_FLOOR: float = 1e-12


def _apply(data: np.ndarray, inputs: Sequence[Tensor], backward: Backward) -> Tensor:
    """Build the output tensor, recording it when any input is tracked."""
    tape = active_tape()
    if tape is not None and any(tape.tracks(tensor) for tensor in inputs):
        return tape.record(data, inputs, backward)
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    if not shape:
        return np.asarray(np.sum(grad))
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_check(a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as err:
        raise ShapeError(f"Cannot broadcast {a.shape} with {b.shape}") from err


def constant(value: ArrayLike) -> Tensor:
    """Return an untracked copy of a value (gradients stop here)."""
    return Tensor(as_tensor(value).data)


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Return ``a + b`` with 2-D broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b)
    return _apply(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Return ``a - b`` with 2-D broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b)
    return _apply(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Return the elementwise product with 2-D broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b)
    return _apply(
        a.data * b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.shape),
            _unbroadcast(g * a.data, b.shape),
        ),
    )


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Return the elementwise quotient with 2-D broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b)
    if np.any(b.data == 0):
        raise DomainError("Division by zero")
    return _apply(
        a.data / b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / b.data ** 2, b.shape),
        ),
    )


def neg(a: ArrayLike) -> Tensor:
    """Return ``-a``."""
    a = as_tensor(a)
    return _apply(-a.data, (a,), lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Return the matrix product of two 2-D tensors.

    :param a: An ``n x k`` tensor
    :type a: :meth:`cgrlpy.numeric.tensor.Tensor`
    :param b: A ``k x m`` tensor
    :type b: :meth:`cgrlpy.numeric.tensor.Tensor`
    :rtype: :meth:`cgrlpy.numeric.tensor.Tensor`
    """
    a, b = as_tensor(a), as_tensor(b)
    if len(a.shape) != 2 or len(b.shape) != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"Cannot multiply {a.shape} by {b.shape}")
    return _apply(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(a: Tensor) -> Tensor:
    """Return the transpose of a 2-D tensor."""
    a = as_tensor(a)
    return _apply(a.data.T, (a,), lambda g: (g.T,))


def exp(a: Tensor) -> Tensor:
    """Return the elementwise exponential."""
    a = as_tensor(a)
    out = np.exp(a.data)
    return _apply(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    """Return the elementwise natural logarithm (inputs must be positive)."""
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError("log needs strictly positive inputs")
    return _apply(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a: Tensor) -> Tensor:
    """Return the elementwise square root (inputs must be positive)."""
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError("sqrt needs strictly positive inputs")
    out = np.sqrt(a.data)
    return _apply(out, (a,), lambda g: (g / (2.0 * out),))


def softplus(a: Tensor) -> Tensor:
    """Return ``log(1 + exp(a))`` evaluated stably."""
    a = as_tensor(a)
    out = np.logaddexp(0.0, a.data)
    return _apply(out, (a,), lambda g: (g * _sigmoid(a.data),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    shifted = np.exp(x[~positive])
    out[~positive] = shifted / (1.0 + shifted)
    return out


def sigmoid(a: Tensor) -> Tensor:
    """Return the logistic function."""
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return _apply(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a: Tensor) -> Tensor:
    """Return ``max(a, 0)``."""
    a = as_tensor(a)
    mask = a.data > 0
    return _apply(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def leaky_relu(a: Tensor, slope: float) -> Tensor:
    """Return ``a`` where positive and ``slope * a`` elsewhere."""
    a = as_tensor(a)
    scale = np.where(a.data > 0, 1.0, slope)
    return _apply(a.data * scale, (a,), lambda g: (g * scale,))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Return the softmax along ``axis``; slices sum to one."""
    a = as_tensor(a)
    if not -len(a.shape) <= axis < max(len(a.shape), 1):
        raise ShapeError(f"Invalid softmax axis {axis} for shape {a.shape}")
    shifted = np.exp(a.data - np.max(a.data, axis=axis, keepdims=True))
    out = shifted / np.sum(shifted, axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return _apply(out, (a,), backward)


def layer_norm(
    a: Tensor,
    gain: Optional[Tensor] = None,
    bias: Optional[Tensor] = None,
    eps: float = DEFAULT_LAYER_NORM_EPS,
) -> Tensor:
    """Normalise every row to zero mean and unit variance, then apply gain/bias."""
    a = as_tensor(a)
    if len(a.shape) != 2:
        raise ShapeError(f"layer_norm needs a 2-D tensor, got {a.shape}")
    centered = a.data - a.data.mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=1, keepdims=True) + eps)
    normed = centered * inv_std

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        width = a.shape[1]
        return (
            inv_std
            / width
            * (
                width * g
                - g.sum(axis=1, keepdims=True)
                - normed * np.sum(g * normed, axis=1, keepdims=True)
            ),
        )

    out = _apply(normed, (a,), backward)
    if gain is not None:
        out = mul(out, gain)
    if bias is not None:
        out = add(out, bias)
    return out


def activation(x: Tensor, kind: str, **kwargs) -> Tensor:
    """Dispatch to an activation by name.

    ``leaky_relu`` takes ``slope``; ``softmax`` takes ``axis``; ``layer_norm`` takes
    optional ``gain``/``bias``.
    """
    if kind == ACTIVATION_RELU:
        return relu(x)
    if kind == ACTIVATION_LEAKY_RELU:
        return leaky_relu(x, kwargs.get("slope", 0.2))
    if kind == ACTIVATION_SIGMOID:
        return sigmoid(x)
    if kind == ACTIVATION_SOFTMAX:
        return softmax(x, kwargs.get("axis", -1))
    if kind == ACTIVATION_LAYER_NORM:
        return layer_norm(x, kwargs.get("gain"), kwargs.get("bias"))
    raise DomainError(f"Unknown activation: {kind}")


def sum(  # pylint: disable=redefined-builtin
    a: Tensor, axis: Optional[int] = None
) -> Tensor:
    """Return the sum over all entries (scalar) or along an axis (kept as 2-D)."""
    a = as_tensor(a)
    if axis is None:
        return _apply(
            np.asarray(np.sum(a.data)),
            (a,),
            lambda g: (np.broadcast_to(g, a.shape).copy(),),
        )
    out = np.sum(a.data, axis=axis, keepdims=True)
    return _apply(out, (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a: Tensor, axis: Optional[int] = None) -> Tensor:
    """Return the mean over all entries or along an axis."""
    a = as_tensor(a)
    count = a.size if axis is None else a.shape[axis]
    return mul(sum(a, axis), 1.0 / count)


def trace(a: Tensor) -> Tensor:
    """Return the trace of a square tensor."""
    a = as_tensor(a)
    if len(a.shape) != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"trace needs a square tensor, got {a.shape}")
    return _apply(
        np.asarray(np.trace(a.data)), (a,), lambda g: (g * np.eye(a.shape[0]),)
    )


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate 2-D tensors along an axis."""
    tensors = [as_tensor(tensor) for tensor in tensors]
    try:
        out = np.concatenate([tensor.data for tensor in tensors], axis=axis)
    except ValueError as err:
        raise ShapeError(f"Cannot concatenate: {err}") from err
    bounds = np.cumsum([0] + [tensor.shape[axis] for tensor in tensors])

    def backward(g: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(
            np.take(g, np.arange(start, stop), axis=axis)
            for start, stop in zip(bounds[:-1], bounds[1:])
        )

    return _apply(out, tensors, backward)


def columns(a: Tensor, start: int, stop: int) -> Tensor:
    """Return the column slice ``a[:, start:stop]``."""
    a = as_tensor(a)
    if not 0 <= start <= stop <= a.shape[1]:
        raise ShapeError(f"Invalid column range {start}:{stop} for {a.shape}")

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        full = np.zeros(a.shape)
        full[:, start:stop] = g
        return (full,)

    return _apply(a.data[:, start:stop], (a,), backward)


def take_rows(a: Tensor, index: np.ndarray) -> Tensor:
    """Gather rows ``a[index]``; repeated indices accumulate their gradients."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        full = np.zeros(a.shape)
        np.add.at(full, index, g)
        return (full,)

    return _apply(a.data[index], (a,), backward)


def take_flat(a: Tensor, index: np.ndarray) -> Tensor:
    """Gather entries of the row-major flattening of ``a`` as a 1-D tensor."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        full = np.zeros(a.size)
        np.add.at(full, index, g)
        return (full.reshape(a.shape),)

    return _apply(a.data.reshape(-1)[index], (a,), backward)


def pick(a: Tensor, index: np.ndarray) -> Tensor:
    """Return ``a[i, index[i]]`` for every row as an ``n x 1`` tensor."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    rows = np.arange(a.shape[0])
    if index.shape != (a.shape[0],):
        raise ShapeError(f"Need one index per row, got {index.shape} for {a.shape}")

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        full = np.zeros(a.shape)
        full[rows, index] = g[:, 0]
        return (full,)

    return _apply(a.data[rows, index][:, None], (a,), backward)


def segment_sum(values: Tensor, segments: np.ndarray, n_segments: int) -> Tensor:
    """Sum rows of ``values`` that share a segment id into ``n_segments`` rows."""
    values = as_tensor(values)
    segments = np.asarray(segments, dtype=np.int64)
    out = np.zeros((n_segments,) + values.shape[1:])
    np.add.at(out, segments, values.data)
    return _apply(out, (values,), lambda g: (g[segments],))


def segment_softmax(scores: Tensor, segments: np.ndarray, n_segments: int) -> Tensor:
    """Softmax the rows of ``scores`` within each segment, column by column.

    Segments that receive no rows simply produce no output rows; there is no
    padding logit.
    """
    scores = as_tensor(scores)
    segments = np.asarray(segments, dtype=np.int64)
    peak = np.full((n_segments,) + scores.shape[1:], -np.inf)
    np.maximum.at(peak, segments, scores.data)
    shifted = np.exp(scores.data - peak[segments])
    denom = np.zeros_like(peak, dtype=np.float64)
    np.add.at(denom, segments, shifted)
    out = shifted / denom[segments]

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        weighted = np.zeros_like(denom)
        np.add.at(weighted, segments, g * out)
        return (out * (g - weighted[segments]),)

    return _apply(out, (scores,), backward)


def pairwise_sq_dists(x: Tensor) -> Tensor:
    """Return ``D_ij = ||x_i - x_j||^2`` for the rows of ``x``."""
    x = as_tensor(x)
    if len(x.shape) != 2:
        raise ShapeError(f"pairwise_sq_dists needs a 2-D tensor, got {x.shape}")
    diff = x.data[:, None, :] - x.data[None, :, :]
    out = np.sum(diff ** 2, axis=2)

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        sym = g + g.T
        return (2.0 * (sym.sum(axis=1)[:, None] * x.data - sym @ x.data),)

    return _apply(out, (x,), backward)


def spectral_sum(
    m: Tensor,
    func: Callable[[np.ndarray], np.ndarray],
    derivative: Callable[[np.ndarray], np.ndarray],
) -> Tensor:
    """Return ``sum_i func(lambda_i)`` over the eigenvalues of a symmetric tensor.

    Eigenvalues below :data:`EIGENVALUE_FLOOR` are clamped to zero and contribute
    neither value nor gradient. The gradient is ``V diag(func'(lambda)) V^T``, the
    eigenvalue derivative ``v_i^T dM v_i`` summed over the spectrum; eigenvector
    rotation terms cancel for spectral sums, so (near-)repeated eigenvalues need no
    special handling.
    """
    m = as_tensor(m)
    eigenvalues, eigenvectors = eigh_array(m.data)
    kept = eigenvalues > EIGENVALUE_FLOOR
    values = np.zeros_like(eigenvalues)
    values[kept] = func(eigenvalues[kept])
    slopes = np.zeros_like(eigenvalues)
    slopes[kept] = derivative(eigenvalues[kept])

    def backward(g: np.ndarray) -> Tuple[np.ndarray]:
        return (g * (eigenvectors * slopes) @ eigenvectors.T,)

    return _apply(np.asarray(np.sum(values)), (m,), backward)
