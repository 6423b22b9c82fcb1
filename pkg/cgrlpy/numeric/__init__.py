"""Define the dense linear algebra and differentiation layer."""
from .linalg import eigh_sym  # noqa
from .tape import Tape, grad  # noqa
from .tensor import ParameterSet, Tensor  # noqa
