"""Small dense convex QP solved by a primal active-set method.

    minimize    1/2 y'Gy + a'y
    subject to  A y >= b

``G`` must be positive definite.  Rows violated at the starting point get an
elastic slack ``v >= 0`` penalised by ``rho * sum(v) + eps/2 * |v|^2`` so the
method always starts feasible; a solution with positive slack means the
original QP is (numerically) infeasible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass
class QpResult:
    y: np.ndarray
    multipliers: np.ndarray  # one per row of A, >= 0
    working_set: list[int]
    iterations: int
    elastic: bool  # True if slacks remained positive
    slack: np.ndarray


class QpFailure(RuntimeError):
    pass


def _kkt_solve(Ginv_a, Ginv_At, At, b, W):
    """Equality-constrained minimiser on working set ``W``: returns (y, mu_W)."""
    if not W:
        return -Ginv_a, np.zeros(0)
    AW = At[:, W].T
    S = AW @ Ginv_At[:, W]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            lu = scipy.linalg.lu_factor(S)
        solve_S = lambda v: scipy.linalg.lu_solve(lu, v)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError):
        solve_S = lambda v: np.linalg.lstsq(S, v, rcond=None)[0]
    mu = solve_S(b[W] + AW @ Ginv_a)
    y = Ginv_At[:, W] @ mu - Ginv_a
    # with a nearly singular G the range-space formula loses absolute accuracy
    # on the working rows; iterative refinement restores them and keeps
    # G y + a = A_W' mu intact
    for _ in range(2):
        r = b[W] - AW @ y
        if not np.any(r):
            break
        dmu = solve_S(r)
        y = y + Ginv_At[:, W] @ dmu
        mu = mu + dmu
    return y, mu


def solve_qp(
    G,
    a,
    A,
    b,
    y0=None,
    working_set=(),
    tol: float = 1.49e-8,
    rho: float = 1e3,
    eps: float = 1e-6,
    max_iter: int | None = None,
    dual_tol: float | None = None,
) -> QpResult:
    """Primal active-set solve; working rows are released only if their
    multiplier is below ``-dual_tol`` (default ``tol``).  ``max_iter``
    defaults to ``max(200, 3 * (variables + rows))``."""
    dual_tol = tol if dual_tol is None else dual_tol
    G = np.asarray(G, dtype=float)
    a = np.asarray(a, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float)).reshape(-1, a.size)
    b = np.asarray(b, dtype=float).ravel()
    p, r = a.size, b.size
    max_iter = max(200, 3 * (p + r)) if max_iter is None else max_iter
    try:
        cho = scipy.linalg.cho_factor(G)
    except np.linalg.LinAlgError as exc:
        raise QpFailure("QP Hessian is not positive definite") from exc

    if r == 0:
        y = -scipy.linalg.cho_solve(cho, a)
        return QpResult(y, np.zeros(0), [], 0, False, np.zeros(0))

    Ginv_a = scipy.linalg.cho_solve(cho, a)
    Ginv_At = scipy.linalg.cho_solve(cho, A.T)

    # starting point: minimiser on the suggested working set
    W0 = [i for i in dict.fromkeys(working_set) if 0 <= i < r]
    if y0 is None:
        y0, _ = _kkt_solve(Ginv_a, Ginv_At, A.T, b, W0)
    y0 = np.asarray(y0, dtype=float)
    viol = b - A @ y0
    elastic_rows = np.flatnonzero(viol > tol)
    nv = elastic_rows.size
    scale = max(1.0, np.abs(a).max(initial=0.0))
    rho = rho * scale

    # augmented variables (y, v); constraints rows 0..r-1 then v >= 0
    Aa = np.zeros((r + nv, p + nv))
    Aa[:r, :p] = A
    Aa[elastic_rows, p + np.arange(nv)] = 1.0
    Aa[r:, p:] = np.eye(nv)
    ba = np.concatenate([b, np.zeros(nv)])
    aa = np.concatenate([a, np.full(nv, rho)])
    if nv:
        Ga_inv_a = np.concatenate([Ginv_a, aa[p:] / eps])
        Ga_inv_At = np.zeros((p + nv, r + nv))
        Ga_inv_At[:p] = scipy.linalg.cho_solve(cho, Aa[:, :p].T)
        Ga_inv_At[p:] = Aa[:, p:].T / eps
    else:
        Ga_inv_a, Ga_inv_At = Ginv_a, Ginv_At
    z = np.concatenate([y0, np.maximum(viol[elastic_rows], 0.0)])
    res = Aa @ z - ba
    W = [i for i in W0 if abs(res[i]) <= tol * (1 + abs(ba[i]))]
    W += [int(i) for i in elastic_rows if i not in W]
    W = _independent(Aa, Ga_inv_At, W)

    mu_full = np.zeros(r + nv)
    for it in range(1, max_iter + 1):
        z_star, mu_W = _kkt_solve(Ga_inv_a, Ga_inv_At, Aa.T, ba, W)
        step = z_star - z
        if np.max(np.abs(step), initial=0.0) <= tol * (1 + np.max(np.abs(z), initial=0.0)):
            z = z_star if W else z
            if mu_W.size == 0 or mu_W.min() >= -dual_tol * (1 + np.abs(mu_W).max()):
                mu_full[:] = 0.0
                mu_full[W] = np.maximum(mu_W, 0.0)
                break
            W.pop(int(np.argmin(mu_W)))
            continue
        # ratio test over rows not in the working set
        Ap = Aa @ step
        slack = Aa @ z - ba
        alpha, block = 1.0, None
        for i in range(r + nv):
            if i in W or Ap[i] >= -1e-14:
                continue
            t = max(slack[i], 0.0) / -Ap[i]
            if t < alpha:
                alpha, block = t, i
        z = z + alpha * step
        if block is not None and _adds_rank(Aa, Ga_inv_At, W, block):
            W.append(block)
    else:
        raise QpFailure(f"active-set method did not terminate in {max_iter} iterations")

    v = z[p:]
    slack_out = np.zeros(r)
    slack_out[elastic_rows] = v
    return QpResult(
        z[:p],
        mu_full[:r],
        sorted(i for i in W if i < r),
        it,
        bool(nv and v.max() > tol),
        slack_out,
    )


def _independent(Aa, Ga_inv_At, W):
    """Drop working-set rows that would make the Schur complement singular.

    Cholesky on the Schur complement, skipping pivots that are (relatively)
    dependent on the rows kept before them.
    """
    if not W:
        return []
    S = Aa[W] @ Ga_inv_At[:, W]
    R = S.copy()
    keep: list[int] = []
    for j, i in enumerate(W):
        d = R[j, j]
        if S[j, j] > 0.0 and d > 1e-12 * S[j, j]:
            keep.append(i)
            col = R[j + 1 :, j] / np.sqrt(d)
            R[j + 1 :, j + 1 :] -= np.outer(col, col)
    return keep


def _adds_rank(Aa, Ga_inv_At, W, i) -> bool:
    """True if row ``i`` is independent of rows ``W`` in the ``G^-1`` metric."""
    s = Aa[i] @ Ga_inv_At[:, i]
    if not W:
        return s > 0.0
    c = Aa[W] @ Ga_inv_At[:, i]
    S = Aa[W] @ Ga_inv_At[:, W]
    schur = s - c @ scipy.linalg.lstsq(S, c, lapack_driver="gelsy")[0]
    return schur > 1e-12 * s
