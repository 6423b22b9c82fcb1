"""Define the symmetric eigensolver (cyclic Jacobi rotations)."""
import logging
from typing import Tuple

import numpy as np

from cgrlpy.errors import DomainError, NumericError, ShapeError
from cgrlpy.numeric.tensor import Tensor, as_tensor

_LOGGER: logging.Logger = logging.getLogger(__name__)

DEFAULT_MAX_SWEEPS: int = 100
DEFAULT_TOLERANCE: float = 1e-12
SYMMETRY_TOLERANCE: float = 1e-9

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None


def _rotation(app: float, aqq: float, apq: float) -> Tuple[float, float]:
    """Return (cos, sin) of the rotation that zeroes ``a[p, q]``."""
    theta = (aqq - app) / (2.0 * apq)
    if theta >= 0.0:
        tangent = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
    else:
        tangent = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
    cosine = 1.0 / np.sqrt(tangent * tangent + 1.0)
    return cosine, tangent * cosine


def _off_norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(a ** 2) - np.sum(np.diag(a) ** 2)))


def _sweeps_numpy(
    a: np.ndarray, v: np.ndarray, tolerance: float, max_sweeps: int
) -> int:
    """Run cyclic sweeps in place; return the sweep count or -1 on failure."""
    size = a.shape[0]
    for sweep in range(max_sweeps + 1):
        if _off_norm(a) <= tolerance:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(size - 1):
            for q in range(p + 1, size):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                cosine, sine = _rotation(a[p, p], a[q, q], apq)
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = cosine * col_p - sine * col_q
                a[:, q] = sine * col_p + cosine * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = cosine * row_p - sine * row_q
                a[q, :] = sine * row_p + cosine * row_q
                vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = cosine * vec_p - sine * vec_q
                v[:, q] = sine * vec_p + cosine * vec_q
    return -1


def _sweeps_scalar(a, v, tolerance, max_sweeps):  # pragma: no cover
    """Scalar-loop twin of :func:`_sweeps_numpy`, compiled with numba."""
    size = a.shape[0]
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for i in range(size):
            for j in range(size):
                if i != j:
                    off += a[i, j] * a[i, j]
        if np.sqrt(off) <= tolerance:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(size - 1):
            for q in range(p + 1, size):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    tangent = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    tangent = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                cosine = 1.0 / np.sqrt(tangent * tangent + 1.0)
                sine = tangent * cosine
                for k in range(size):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = cosine * akp - sine * akq
                    a[k, q] = sine * akp + cosine * akq
                for k in range(size):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = cosine * apk - sine * aqk
                    a[q, k] = sine * apk + cosine * aqk
                for k in range(size):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = cosine * vkp - sine * vkq
                    v[k, q] = sine * vkp + cosine * vkq
    return -1


if njit is not None:
    _run_sweeps = njit(_sweeps_scalar)
else:  # pragma: no cover
    _LOGGER.debug("numba unavailable; using the numpy Jacobi sweeps")
    _run_sweeps = _sweeps_numpy


def eigh_array(
    m: np.ndarray,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> Tuple[np.ndarray, np.ndarray]:
    """Return ascending eigenvalues and orthonormal eigenvectors (as columns).

    The off-diagonal stopping threshold is ``tolerance`` scaled by the Frobenius norm
    of the input (absolute for matrices with norm below one).
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"Eigendecomposition needs a square matrix, got {m.shape}")
    if m.size and np.max(np.abs(m - m.T)) > SYMMETRY_TOLERANCE:
        raise DomainError("Eigendecomposition needs a symmetric matrix")

    a = np.ascontiguousarray(0.5 * (m + m.T))
    v = np.eye(m.shape[0])
    scale = max(1.0, float(np.linalg.norm(a)))
    sweeps = _run_sweeps(a, v, tolerance * scale, max_sweeps)
    if sweeps < 0:
        raise NumericError(
            f"Jacobi eigensolver did not converge within {max_sweeps} sweeps"
        )

    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]


def eigh_sym(m: Tensor) -> Tuple[Tensor, Tensor]:
    """Return the eigenvalues (ascending) and eigenvectors of a symmetric tensor.

    :param m: A square, symmetric (to 1e-9) tensor
    :type m: :meth:`cgrlpy.numeric.tensor.Tensor`
    :rtype: ``Tuple[Tensor, Tensor]``
    """
    eigenvalues, eigenvectors = eigh_array(as_tensor(m).data)
    return Tensor(eigenvalues), Tensor(eigenvectors)
