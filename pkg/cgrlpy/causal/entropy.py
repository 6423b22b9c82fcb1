"""Define matrix-based Renyi entropy and mutual information estimators.

Every estimator works on a batch of ``B`` samples (rows), builds a Gaussian Gram
matrix, normalises it to unit trace and reads the entropy off its eigenvalue
spectrum. All quantities are in bits and differentiable through the tape.
"""
import logging
import math

import numpy as np

from cgrlpy.errors import DomainError, ShapeError
from cgrlpy.numeric import ops
from cgrlpy.numeric.tensor import ArrayLike, Tensor, as_tensor

_LOGGER: logging.Logger = logging.getLogger(__name__)

DEFAULT_ALPHA: float = 2.0
FALLBACK_KERNEL_WIDTH: float = 1.0

LN2: float = math.log(2.0)


def kernel_width(sq_dists: Tensor) -> Tensor:
    """Return the median pairwise distance of a squared-distance matrix.

    The median is taken over the ``i < j`` pairs (upper median for an even count)
    and carries the gradient of the selected pair. A zero median falls back to a
    constant width of 1.
    """
    size = sq_dists.shape[0]
    rows, cols = np.triu_indices(size, k=1)
    flat = rows * size + cols
    order = np.argsort(sq_dists.data[rows, cols], kind="stable")
    middle = flat[order[order.size // 2]]
    if sq_dists.data.reshape(-1)[middle] <= 0.0:
        return Tensor(FALLBACK_KERNEL_WIDTH)
    return ops.sqrt(ops.take_flat(sq_dists, np.array([middle])))


def gram(samples: ArrayLike) -> Tensor:
    """Return the unit-trace Gaussian Gram matrix of a batch of samples.

    ``K_ij = exp(-||u_i - u_j||^2 / (2 sigma^2))`` with ``sigma`` from
    :func:`kernel_width`, divided by its trace.

    :param samples: ``B x d`` samples (a 1-D input is one feature per sample)
    :type samples: ``ArrayLike``
    :rtype: :meth:`cgrlpy.numeric.tensor.Tensor`
    """
    if not isinstance(samples, Tensor):
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[:, None]
    samples = as_tensor(samples)
    if len(samples.shape) != 2 or samples.shape[0] < 2:
        raise DomainError(
            f"A Gram matrix needs at least 2 samples, got shape {samples.shape}"
        )
    sq_dists = ops.pairwise_sq_dists(samples)
    width = kernel_width(sq_dists)
    scale = ops.mul(ops.mul(width, width), 2.0)
    kernel = ops.exp(ops.div(ops.neg(sq_dists), scale))
    return ops.div(kernel, ops.trace(kernel))


def _check_alpha(alpha: float) -> None:
    if not alpha > 0.0 or not math.isfinite(alpha):
        raise DomainError(f"Renyi order must be positive and finite, got {alpha}")


def renyi_entropy(k: ArrayLike, alpha: float = DEFAULT_ALPHA) -> Tensor:
    """Return ``S_a = log2(sum_i l_i^a) / (1 - a)`` over the spectrum of ``k``.

    ``alpha == 1`` takes the Shannon limit ``-sum_i l_i log2 l_i``. Eigenvalues
    at or below the floor count as zero.

    :param k: A unit-trace positive semidefinite matrix
    :type k: ``ArrayLike``
    :param alpha: The order
    :type alpha: ``float``
    :rtype: :meth:`cgrlpy.numeric.tensor.Tensor`
    """
    _check_alpha(alpha)
    k = as_tensor(k)
    if alpha == 1.0:
        return ops.spectral_sum(
            k,
            lambda lam: -lam * np.log2(lam),
            lambda lam: -(np.log2(lam) + 1.0 / LN2),
        )
    power_sum = ops.spectral_sum(
        k,
        lambda lam: lam ** alpha,
        lambda lam: alpha * lam ** (alpha - 1.0),
    )
    return ops.mul(ops.log(power_sum), 1.0 / ((1.0 - alpha) * LN2))


def joint_entropy(*grams: ArrayLike, alpha: float = DEFAULT_ALPHA) -> Tensor:
    """Return the entropy of the unit-trace Hadamard product of Gram matrices."""
    if not grams:
        raise DomainError("joint_entropy needs at least one Gram matrix")
    grams = [as_tensor(k) for k in grams]
    shape = grams[0].shape
    if any(k.shape != shape for k in grams):
        raise ShapeError(f"Gram sizes differ: {[k.shape for k in grams]}")
    product = grams[0]
    for k in grams[1:]:
        product = ops.mul(product, k)
    return renyi_entropy(ops.div(product, ops.trace(product)), alpha)


def mutual_information(
    u: ArrayLike, v: ArrayLike, alpha: float = DEFAULT_ALPHA
) -> Tensor:
    """Return ``I_a(u; v) = S_a(u) + S_a(v) - S_a(u, v)`` from paired samples.

    :param u: ``B x d_u`` samples
    :type u: ``ArrayLike``
    :param v: ``B x d_v`` samples paired row by row with ``u``
    :type v: ``ArrayLike``
    :param alpha: The order
    :type alpha: ``float``
    :rtype: :meth:`cgrlpy.numeric.tensor.Tensor`
    """
    k_u, k_v = _paired_grams(u, v)
    return ops.sub(
        ops.add(renyi_entropy(k_u, alpha), renyi_entropy(k_v, alpha)),
        joint_entropy(k_u, k_v, alpha=alpha),
    )


def conditional_mi(
    zc: ArrayLike, actions: ArrayLike, zs: ArrayLike, alpha: float = DEFAULT_ALPHA
) -> Tensor:
    """Return ``I_a(Zc; A | Zs)``.

    Expanded through the chain rule as
    ``S(Zc, Zs) + S(A, Zs) - S(Zs) - S(Zc, A, Zs)``.
    """
    k_c, k_a, k_s = _paired_grams(zc, actions, zs)
    return ops.sub(
        ops.add(
            joint_entropy(k_c, k_s, alpha=alpha), joint_entropy(k_a, k_s, alpha=alpha)
        ),
        ops.add(renyi_entropy(k_s, alpha), joint_entropy(k_c, k_a, k_s, alpha=alpha)),
    )


def _paired_grams(*variables: ArrayLike):
    sizes = {as_tensor(variable).shape[0] for variable in variables}
    if len(sizes) != 1:
        raise ShapeError(
            f"Paired variables need equal batch sizes, got {sorted(sizes)}"
        )
    return [gram(variable) for variable in variables]
