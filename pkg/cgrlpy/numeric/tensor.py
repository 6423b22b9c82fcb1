"""Define the dense tensor and the named parameter set."""
from collections.abc import Mapping
from typing import TYPE_CHECKING, Callable, Dict, Iterator, Optional, Tuple, Union

import numpy as np

from cgrlpy.errors import NumericError, ShapeError

if TYPE_CHECKING:  # pragma: no cover
    from cgrlpy.numeric.tape import Tape

MAX_NDIM: int = 2

ArrayLike = Union["Tensor", np.ndarray, float, int, list, tuple]


class Tensor:
    """A dense, immutable, row-major float64 tensor of at most two dimensions.

    Tensors produced while a :class:`cgrlpy.numeric.tape.Tape` is active (and derived
    from a watched parameter) remember their place on that tape so that gradients can
    be replayed later.

    :param data: The values
    :type data: ``ArrayLike``
    """

    __slots__ = ("_data", "_node", "_tape")

    def __init__(self, data: ArrayLike) -> None:
        """Initialize."""
        if isinstance(data, Tensor):
            data = data.data
        array = np.array(data, dtype=np.float64)
        if array.ndim > MAX_NDIM:
            raise ShapeError(f"Tensors hold at most 2 dimensions, got {array.shape}")
        if not np.all(np.isfinite(array)):
            raise NumericError("Tensor data contains NaN or Inf")
        array.setflags(write=False)
        self._data: np.ndarray = array
        self._node: Optional[int] = None
        self._tape: Optional["Tape"] = None

    def __repr__(self) -> str:
        """Return a debug representation."""
        return f"Tensor(shape={self.shape}, data={self._data!r})"

    @property
    def data(self) -> np.ndarray:
        """Return the (read-only) underlying array.

        :rtype: ``numpy.ndarray``
        """
        return self._data

    @property
    def shape(self) -> Tuple[int, ...]:
        """Return the tensor shape.

        :rtype: ``Tuple[int, ...]``
        """
        return self._data.shape

    @property
    def size(self) -> int:
        """Return the number of elements.

        :rtype: ``int``
        """
        return int(self._data.size)

    @property
    def T(self) -> "Tensor":  # pylint: disable=invalid-name
        """Return the transpose."""
        from cgrlpy.numeric import ops  # pylint: disable=import-outside-toplevel

        return ops.transpose(self)

    def item(self) -> float:
        """Return the value of a one-element tensor."""
        if self.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self._data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Return a writable copy of the data."""
        return np.array(self._data)

    def __add__(self, other: ArrayLike) -> "Tensor":
        from cgrlpy.numeric import ops  # pylint: disable=import-outside-toplevel

        return ops.add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        from cgrlpy.numeric import ops  # pylint: disable=import-outside-toplevel

        return ops.add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        from cgrlpy.numeric import ops  # pylint: disable=import-outside-toplevel

        return ops.sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        from cgrlpy.numeric import ops  # pylint: disable=import-outside-toplevel

        return ops.sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        from cgrlpy.numeric import ops  # pylint: disable=import-outside-toplevel

        return ops.mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        from cgrlpy.numeric import ops  # pylint: disable=import-outside-toplevel

        return ops.mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        from cgrlpy.numeric import ops  # pylint: disable=import-outside-toplevel

        return ops.div(self, other)

    def __neg__(self) -> "Tensor":
        from cgrlpy.numeric import ops  # pylint: disable=import-outside-toplevel

        return ops.neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from cgrlpy.numeric import ops  # pylint: disable=import-outside-toplevel

        return ops.matmul(self, other)


def as_tensor(value: ArrayLike) -> Tensor:
    """Return the value as a tensor, reusing it when it already is one."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def zeros(*shape: int) -> Tensor:
    """Return a zero tensor of the given shape."""
    return Tensor(np.zeros(shape))


class ParameterSet(Mapping):
    """An ordered, name-unique collection of tensors (weights or their gradients).

    Iteration order is insertion order, which makes serialisation and gradient
    replay deterministic.
    """

    def __init__(self, tensors: Optional[Dict[str, ArrayLike]] = None) -> None:
        """Initialize."""
        self._tensors: Dict[str, Tensor] = {}
        for name, value in (tensors or {}).items():
            self._tensors[name] = as_tensor(value)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def __repr__(self) -> str:
        shapes = ", ".join(f"{name}={tensor.shape}" for name, tensor in self.items())
        return f"ParameterSet({shapes})"

    def map(self, func: Callable[[str, Tensor], ArrayLike]) -> "ParameterSet":
        """Return a new set with ``func(name, tensor)`` applied to every entry."""
        return ParameterSet({name: func(name, tensor) for name, tensor in self.items()})

    def copy(self) -> "ParameterSet":
        """Return a detached copy (tensors are immutable, so this is shallow-safe)."""
        return self.map(lambda _, tensor: tensor.data)

    def equals(self, other: "ParameterSet") -> bool:
        """Return whether two sets hold bitwise-identical tensors by name."""
        if list(self) != list(other):
            return False
        return all(
            self[name].shape == other[name].shape
            and np.array_equal(self[name].data, other[name].data)
            for name in self
        )

    def global_norm(self) -> float:
        """Return the L2 norm over every entry of every tensor."""
        return float(
            np.sqrt(sum(float(np.sum(tensor.data ** 2)) for tensor in self.values()))
        )

    def prefixed(self, prefix: str) -> "ParameterSet":
        """Return a copy with every name prefixed (used for checkpoint records)."""
        return ParameterSet({f"{prefix}{name}": t for name, t in self.items()})

    def select(self, prefix: str) -> "ParameterSet":
        """Return the entries whose name starts with ``prefix``, prefix stripped."""
        return ParameterSet(
            {
                name[len(prefix) :]: tensor
                for name, tensor in self.items()
                if name.startswith(prefix)
            }
        )
