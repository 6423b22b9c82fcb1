"""Define the reverse-mode differentiation context."""
from contextvars import ContextVar, Token
from dataclasses import dataclass
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from cgrlpy.errors import ShapeError
from cgrlpy.numeric.tensor import ParameterSet, Tensor

_LOGGER: logging.Logger = logging.getLogger(__name__)

_ACTIVE_TAPE: ContextVar[Optional["Tape"]] = ContextVar("active_tape", default=None)

Backward = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass(frozen=True)
class Node:
    """Define one recorded operation."""

    inputs: Tuple[Tensor, ...]
    backward: Optional[Backward]


class Tape:
    """A recorded operation graph (the differentiation context).

    A tape is rebuilt for every forward pass. Nodes are appended in creation order,
    which is already a topological order, so the backward sweep is a reverse scan.
    A tape belongs to one logical task: activate it with ``with Tape() as tape:``;
    the active tape is tracked through a ``ContextVar`` so concurrent tasks never see
    each other's tapes.
    """

    def __init__(self) -> None:
        """Initialize."""
        self._nodes: List[Node] = []
        self._token: Optional[Token] = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc_info) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self._nodes)

    def _append(self, tensor: Tensor, node: Node) -> Tensor:
        """Attach a tensor to a new node."""
        tensor._tape = self  # pylint: disable=protected-access
        tensor._node = len(self._nodes)  # pylint: disable=protected-access
        self._nodes.append(node)
        return tensor

    def watch(self, params: ParameterSet) -> ParameterSet:
        """Return tape-tracked copies of ``params`` to build the forward pass from."""
        return ParameterSet(
            {
                name: self._append(Tensor(tensor.data), Node((), None))
                for name, tensor in params.items()
            }
        )

    def tracks(self, tensor: Tensor) -> bool:
        """Return whether a tensor lives on this tape."""
        return tensor._tape is self  # pylint: disable=protected-access

    def record(
        self, data: np.ndarray, inputs: Sequence[Tensor], backward: Backward
    ) -> Tensor:
        """Wrap ``data`` as the output of an operation over ``inputs``."""
        return self._append(Tensor(data), Node(tuple(inputs), backward))

    def gradient(self, loss: Tensor, params: ParameterSet) -> ParameterSet:
        """Return d(loss)/d(param) for every watched parameter."""
        return grad(loss, params, self)


def active_tape() -> Optional[Tape]:
    """Return the tape recording in the current context, if any."""
    return _ACTIVE_TAPE.get()


def grad(loss: Tensor, params: ParameterSet, ctx: Tape) -> ParameterSet:
    """Return the gradient of a scalar loss with respect to each parameter.

    Parameters that the loss does not depend on get zero tensors. The sweep keeps all
    adjoints local, so replaying the same tape twice yields identical gradients.

    :param loss: A scalar tensor produced while ``ctx`` was active
    :type loss: :meth:`cgrlpy.numeric.tensor.Tensor`
    :param params: The watched parameters (as returned by :meth:`Tape.watch`)
    :type params: :meth:`cgrlpy.numeric.tensor.ParameterSet`
    :param ctx: The tape the loss was recorded on
    :type ctx: :meth:`cgrlpy.numeric.tape.Tape`
    :rtype: :meth:`cgrlpy.numeric.tensor.ParameterSet`
    """
    if loss.size != 1 or len(loss.shape) > 0 and max(loss.shape) != 1:
        raise ShapeError(f"Gradients need a scalar loss, got shape {loss.shape}")

    adjoints: Dict[int, np.ndarray] = {}
    if ctx.tracks(loss):
        adjoints[loss._node] = np.ones(loss.shape)  # pylint: disable=protected-access
        start = loss._node  # pylint: disable=protected-access
        nodes = ctx._nodes  # pylint: disable=protected-access
        for index in range(start, -1, -1):
            node = nodes[index]
            if node.backward is None or index not in adjoints:
                continue
            adjoint = adjoints.pop(index)
            for tensor, partial in zip(node.inputs, node.backward(adjoint)):
                if partial is None or not ctx.tracks(tensor):
                    continue
                key = tensor._node  # pylint: disable=protected-access
                if key in adjoints:
                    adjoints[key] = adjoints[key] + partial
                else:
                    adjoints[key] = partial
    else:
        _LOGGER.debug("Loss was not recorded on this tape; returning zero gradients")

    def _param_grad(_: str, tensor: Tensor) -> np.ndarray:
        if not ctx.tracks(tensor):
            return np.zeros(tensor.shape)
        partial = adjoints.get(tensor._node)  # pylint: disable=protected-access
        if partial is None:
            return np.zeros(tensor.shape)
        return np.reshape(partial, tensor.shape)

    return params.map(_param_grad)
