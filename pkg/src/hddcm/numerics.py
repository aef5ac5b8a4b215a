"""Dense linear-algebra helpers shared across the package."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class InvalidInputError(ValueError):
    """Raised when a matrix contains non-finite entries or has the wrong shape."""


class DegenerateConstraintsError(np.linalg.LinAlgError):
    """Raised when a constraint matrix lacks full row rank."""


class EvaluationError(FloatingPointError):
    """Raised when a callback returns non-finite values."""


@dataclass(frozen=True)
class RankReport:
    estimated_rank: int
    singular_values: np.ndarray
    tolerance: float

    @property
    def full_row_rank(self) -> bool:
        return self.estimated_rank == self.singular_values.size


def _as_matrix(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise InvalidInputError(f"expected a 2d array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix has non-finite entries")
    return M


def rank_estimate(M, rel_tol: float = 1e-10) -> RankReport:
    """Numerical rank: count singular values above ``rel_tol * sigma_max``."""
    if not 0.0 < rel_tol < 1.0:
        raise InvalidInputError("rel_tol must lie in (0, 1)")
    M = _as_matrix(M)
    if M.size == 0:
        raise InvalidInputError("empty matrix")
    sv = scipy.linalg.svdvals(M)
    smax = sv[0] if sv.size else 0.0
    rank = int(np.count_nonzero(sv > rel_tol * smax)) if smax > 0 else 0
    return RankReport(rank, sv, rel_tol)


def orthonormal_nullspace(M, rel_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis ``N`` of ``ker M`` for a full-row-rank ``M``.

    A matrix with zero rows yields the identity.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise InvalidInputError(f"expected a 2d array, got shape {M.shape}")
    k = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(k)
    M = _as_matrix(M)
    _, sv, vt = scipy.linalg.svd(M, full_matrices=True)
    rank = int(np.count_nonzero(sv > rel_tol * sv[0])) if sv[0] > 0 else 0
    if rank < M.shape[0]:
        raise DegenerateConstraintsError(
            f"constraint matrix has rank {rank} < {M.shape[0]} rows"
        )
    return vt[rank:].T.copy()


def fd_jacobian(
    f: Callable[[np.ndarray], np.ndarray], x, h: float = 1e-6
) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``x``."""
    if h <= 0:
        raise InvalidInputError("step must be positive")
    x = np.asarray(x, dtype=float).ravel()
    f0 = np.atleast_1d(np.array(f(x.copy()), dtype=float))
    if not np.all(np.isfinite(f0)):
        raise EvaluationError("function returned non-finite values")
    J = np.empty((f0.size, x.size))
    xp = x.copy()
    for j in range(x.size):
        xp[j] = x[j] + h
        # copies guard against callbacks that return or keep their argument
        fp = np.atleast_1d(np.array(f(xp.copy()), dtype=float))
        xp[j] = x[j] - h
        fm = np.atleast_1d(np.array(f(xp.copy()), dtype=float))
        xp[j] = x[j]
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise EvaluationError(f"non-finite value while perturbing x[{j}]")
        J[:, j] = (fp - fm) / (2.0 * h)
    return J


def jacobian_mismatch(analytic, numeric) -> float:
    """Relative infinity-norm gap ``|A - F| / (1 + |A|)`` used by derivative checks."""
    A = np.atleast_2d(np.asarray(analytic, dtype=float))
    F = np.atleast_2d(np.asarray(numeric, dtype=float))
    scale = 1.0 + np.abs(A).sum(axis=1).max(initial=0.0)
    return float(np.abs(A - F).sum(axis=1).max(initial=0.0) / scale)


def skew(v) -> np.ndarray:
    """Cross-product matrix: ``skew(a) @ b == cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
