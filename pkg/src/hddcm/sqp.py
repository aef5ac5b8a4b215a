"""Elastic active-set SQP for smooth NLPs

    minimize f(x)  subject to  c_E(x) = 0,  c_I(x) >= 0.

Each iteration eliminates the linearised equalities with an orthonormal
nullspace basis (QR of ``J_E^T``) and hands the remaining small inequality
QP to :func:`hddcm.qp.solve_qp`.  Globalisation is a backtracking line search
on the l1 merit function ``f + nu * (|c_E|_1 + |min(c_I, 0)|_1)`` with a
second-order correction for curved equality constraints.

Multiplier sign convention: ``grad f = J_E^T lam + J_I^T mu`` with ``mu >= 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np
import scipy.linalg

from .qp import QpFailure, solve_qp

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITER = "max_iter"
DIVERGED = "diverged"


class Problem(Protocol):
    n_var: int
    x0: np.ndarray

    def objective(self, x) -> tuple[float, np.ndarray]: ...
    def objective_hessian(self, x) -> np.ndarray: ...
    def eq(self, x) -> np.ndarray: ...
    def eq_jacobian(self, x) -> np.ndarray: ...
    def ineq(self, x) -> np.ndarray: ...
    def ineq_jacobian(self, x) -> np.ndarray: ...
    def constraint_hessian(self, x, lam) -> np.ndarray: ...


@dataclass(frozen=True)
class SqpSettings:
    tol_sqp: float = 1e-7
    tol_qp: float = 1.49e-8
    max_iterations: int = 300
    # None selects 1e-8 * (1 + |grad f|_inf)
    hessian_regularization: float | None = None
    elastic_penalty: float = 1e3
    backtrack: float = 0.5
    armijo: float = 1e-4
    min_step: float = 1e-10
    hessian: str = "gauss_newton"  # or "exact"
    # mode retried from the same start when the first mode fails; None disables
    hessian_fallback: str | None = "exact"
    second_order_correction: bool = True

    def __post_init__(self):
        if not 0 < self.tol_qp <= self.tol_sqp < 1:
            raise ValueError("need 0 < tol_qp <= tol_sqp < 1")
        for mode in (self.hessian, self.hessian_fallback):
            if mode not in ("exact", "gauss_newton", None) or self.hessian is None:
                raise ValueError(f"unknown hessian mode {mode!r}")
        if self.elastic_penalty <= 0:
            raise ValueError("elastic_penalty must be positive")

    def with_tolerances(self, tol_sqp: float, tol_qp: float) -> "SqpSettings":
        return replace(self, tol_sqp=tol_sqp, tol_qp=tol_qp)


@dataclass
class WarmStart:
    primal: np.ndarray
    equality_multipliers: np.ndarray | None = None
    inequality_multipliers: np.ndarray | None = None
    active_guess: tuple[int, ...] = ()

    def __post_init__(self):
        if self.inequality_multipliers is not None and np.any(
            np.asarray(self.inequality_multipliers) < 0
        ):
            raise ValueError("inequality multipliers must be nonnegative")


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    merit: float
    merit_after: float
    step_length: float
    stationarity: float
    feasibility: float
    active_size: int
    elastic: bool

    def line(self) -> str:
        return (
            f"{self.iteration:4d} f={self.objective:.6e} merit={self.merit:.6e} "
            f"alpha={self.step_length:.3e} stat={self.stationarity:.3e} "
            f"feas={self.feasibility:.3e} active={self.active_size}"
            + (" elastic" if self.elastic else "")
        )


@dataclass
class SolveReport:
    status: str
    x: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    objective_value: float
    kkt_residual_inf: float
    feasibility_inf: float
    complementarity_inf: float
    active_set: tuple[int, ...]
    iterations: int
    settings: SqpSettings
    trace: list[IterationRecord] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def warm_start(self) -> WarmStart:
        return WarmStart(self.x.copy(), self.lam.copy(), np.maximum(self.mu, 0.0), self.active_set)


def kkt_residual(problem: Problem, x, lam, mu) -> tuple[float, float, float]:
    """Infinity norms of stationarity, constraint violation and ``mu_i c_i``."""
    x = np.asarray(x, dtype=float)
    _, g = problem.objective(x)
    cE, cI = problem.eq(x), problem.ineq(x)
    JE, JI = problem.eq_jacobian(x), problem.ineq_jacobian(x)
    lam = np.zeros(cE.size) if lam is None else np.asarray(lam, dtype=float)
    mu = np.zeros(cI.size) if mu is None else np.asarray(mu, dtype=float)
    stat = g - JE.T @ lam - JI.T @ mu
    feas = max(np.abs(cE).max(initial=0.0), np.maximum(-cI, 0.0).max(initial=0.0))
    comp = np.abs(mu * cI).max(initial=0.0)
    # negative inequality multipliers count as stationarity defects
    stat_inf = max(np.abs(stat).max(initial=0.0), np.maximum(-mu, 0.0).max(initial=0.0))
    return float(stat_inf), float(feas), float(comp)


def _merit(f, cE, cI, nu):
    return f + nu * (np.abs(cE).sum() + np.maximum(-cI, 0.0).sum())


class _Workspace:
    """Function values and derivatives at one iterate."""

    def __init__(self, problem: Problem, x):
        self.x = x
        self.f, self.g = problem.objective(x)
        self.cE = problem.eq(x)
        self.cI = problem.ineq(x)
        if not (np.isfinite(self.f) and np.all(np.isfinite(self.cE)) and np.all(np.isfinite(self.cI))):
            raise FloatingPointError("non-finite problem values")
        self.JE = problem.eq_jacobian(x)
        self.JI = problem.ineq_jacobian(x)


def _nullspace_split(JE):
    """QR of ``J_E^T``: returns (Q1, R, Z) with ``J_E^T = Q1 R`` and ``Z`` spanning ``ker J_E``."""
    mE, n = JE.shape
    if mE == 0:
        return np.zeros((n, 0)), np.zeros((0, 0)), np.eye(n)
    Q, R = scipy.linalg.qr(JE.T, mode="full")
    R1 = R[:mE]
    diag = np.abs(np.diag(R1))
    if diag.min() <= 1e-13 * max(diag.max(), 1.0):
        raise np.linalg.LinAlgError("equality Jacobian is rank deficient")
    return Q[:, :mE], R1, Q[:, mE:]


def solve(problem: Problem, settings: SqpSettings | None = None, warm: WarmStart | None = None) -> SolveReport:
    """Run the SQP; if it fails and a fallback Hessian mode is set, rerun with that mode."""
    settings = settings or SqpSettings()
    report = _solve_once(problem, settings, warm)
    fb = settings.hessian_fallback
    if report.converged or fb is None or fb == settings.hessian:
        return report
    log.info("%s Hessian ended with %s; retrying with %s", settings.hessian, report.status, fb)
    retry = _solve_once(problem, replace(settings, hessian=fb), warm)
    if retry.converged or report.status == DIVERGED:
        return retry
    return report


def _solve_once(problem: Problem, settings: SqpSettings, warm: WarmStart | None) -> SolveReport:
    x = np.array(warm.primal if warm is not None else problem.x0, dtype=float)
    lam = None
    mu = None
    working: list[int] = []
    if warm is not None:
        lam = None if warm.equality_multipliers is None else np.array(warm.equality_multipliers, float)
        mu = None if warm.inequality_multipliers is None else np.array(warm.inequality_multipliers, float)
        working = list(warm.active_guess)

    trace: list[IterationRecord] = []
    nu = 1.0
    status = MAX_ITER
    try:
        ws = _Workspace(problem, x)
    except FloatingPointError:
        return _report(problem, DIVERGED, x, lam, mu, settings, 0, trace)
    if lam is None or lam.size != ws.cE.size:
        lam = np.zeros(ws.cE.size)
    if mu is None or mu.size != ws.cI.size:
        mu = np.zeros(ws.cI.size)
    working = [i for i in working if 0 <= i < ws.cI.size]
    if warm is None or not warm.active_guess:
        # without a guess, start from the rows active at the initial point
        working = [int(i) for i in np.flatnonzero(np.abs(ws.cI) <= settings.tol_qp)]

    iteration = 0
    while True:
        try:
            step = _qp_step(problem, ws, lam, working, settings)
        except (np.linalg.LinAlgError, QpFailure) as exc:
            log.warning("QP subproblem failed: %s", exc)
            status = DIVERGED
            break
        d, lam_qp, mu_qp, working, elastic, H = step

        # convergence test at the current iterate with the QP multipliers
        stat, feas, comp = kkt_residual_from(ws, lam_qp, mu_qp)
        lam, mu = lam_qp, mu_qp
        if stat <= settings.tol_sqp and feas <= settings.tol_sqp and comp <= settings.tol_sqp:
            status = CONVERGED
            break
        if iteration >= settings.max_iterations:
            status = MAX_ITER
            break

        nu = max(nu, 1.1 * max(np.abs(lam).max(initial=0.0), np.abs(mu).max(initial=0.0)) + 1e-3)
        phi0 = _merit(ws.f, ws.cE, ws.cI, nu)
        viol0 = np.abs(ws.cE).sum() + np.maximum(-ws.cI, 0.0).sum()
        lin_viol = np.abs(ws.cE + ws.JE @ d).sum() + np.maximum(-(ws.cI + ws.JI @ d), 0.0).sum()
        dphi = ws.g @ d + nu * (lin_viol - viol0)
        if dphi > 0:
            dphi = -abs(d @ H @ d)

        accepted = None
        alpha = 1.0
        while alpha >= settings.min_step:
            trial = _try_point(problem, ws.x + alpha * d)
            if trial is not None and _merit(trial.f, trial.cE, trial.cI, nu) <= phi0 + settings.armijo * alpha * dphi:
                accepted = trial
                break
            if alpha == 1.0 and settings.second_order_correction and ws.cE.size:
                soc = _second_order_correction(ws, trial, d)
                if soc is not None:
                    trial_soc = _try_point(problem, ws.x + d + soc)
                    if trial_soc is not None and _merit(
                        trial_soc.f, trial_soc.cE, trial_soc.cI, nu
                    ) <= phi0 + settings.armijo * dphi:
                        accepted = trial_soc
                        break
            alpha *= settings.backtrack
        if accepted is None:
            # accept a tiny step only if it does not increase the merit
            status = DIVERGED
            log.info("line search failed at iteration %d", iteration)
            break

        iteration += 1
        phi1 = _merit(accepted.f, accepted.cE, accepted.cI, nu)
        trace.append(
            IterationRecord(iteration, ws.f, phi0, phi1, alpha, stat, feas, len(working), elastic)
        )
        log.debug(trace[-1].line())
        ws = accepted

    return _report(problem, status, ws.x, lam, mu, settings, iteration, trace)


def kkt_residual_from(ws: _Workspace, lam, mu):
    stat = ws.g - ws.JE.T @ lam - ws.JI.T @ mu
    feas = max(np.abs(ws.cE).max(initial=0.0), np.maximum(-ws.cI, 0.0).max(initial=0.0))
    comp = np.abs(mu * ws.cI).max(initial=0.0)
    stat_inf = max(np.abs(stat).max(initial=0.0), np.maximum(-mu, 0.0).max(initial=0.0))
    return float(stat_inf), float(feas), float(comp)


def _try_point(problem, x):
    try:
        return _Workspace(problem, x)
    except (FloatingPointError, ValueError):
        return None


def _second_order_correction(ws: _Workspace, trial, d):
    if trial is None:
        return None
    try:
        # least-norm correction for the equality residual at x + d
        return -np.linalg.lstsq(ws.JE, trial.cE, rcond=None)[0]
    except np.linalg.LinAlgError:
        return None


def _qp_step(problem, ws: _Workspace, lam, working, settings: SqpSettings):
    n = ws.x.size
    reg = settings.hessian_regularization
    if reg is None:
        reg = 1e-8 * (1.0 + np.abs(ws.g).max(initial=0.0))
    H = problem.objective_hessian(ws.x)
    if settings.hessian == "exact" and lam is not None and np.any(lam):
        H = H - problem.constraint_hessian(ws.x, lam)
    H = 0.5 * (H + H.T)

    Q1, R, Z = _nullspace_split(ws.JE)
    if ws.cE.size:
        d_p = -Q1 @ scipy.linalg.solve_triangular(R, ws.cE, trans="T")
    else:
        d_p = np.zeros(n)
    G = Z.T @ H @ Z
    delta = reg
    p = G.shape[0]
    eye = np.eye(p)
    while True:
        try:
            scipy.linalg.cho_factor(G + delta * eye)
            break
        except np.linalg.LinAlgError:
            delta = max(10 * delta, 1e-8 * (1 + np.abs(G).max()))
            if delta > 1e12:
                raise
    G = G + delta * eye
    H_eff = H + delta * np.eye(n)
    a = Z.T @ (ws.g + H_eff @ d_p)
    A = ws.JI @ Z
    b = -(ws.cI + ws.JI @ d_p)
    res = solve_qp(
        G,
        a,
        A,
        b,
        working_set=working,
        tol=settings.tol_qp,
        rho=settings.elastic_penalty,
        # multiplier signs only matter to the outer stationarity tolerance
        dual_tol=settings.tol_sqp,
    )
    d = d_p + Z @ res.y
    mu = res.multipliers
    rhs = H_eff @ d + ws.g - ws.JI.T @ mu
    if ws.cE.size:
        lam_new = scipy.linalg.solve_triangular(R, Q1.T @ rhs)
    else:
        lam_new = np.zeros(0)
    return d, lam_new, mu, res.working_set, res.elastic, H_eff


def _report(problem, status, x, lam, mu, settings, iterations, trace) -> SolveReport:
    f, _ = problem.objective(x)
    cI = problem.ineq(x)
    cE = problem.eq(x)
    lam = np.zeros(cE.size) if lam is None or np.size(lam) != cE.size else lam
    mu = np.zeros(cI.size) if mu is None or np.size(mu) != cI.size else mu
    if np.all(np.isfinite(x)):
        stat, feas, comp = kkt_residual(problem, x, lam, mu)
    else:
        stat = feas = comp = np.inf
    active = tuple(int(i) for i in np.flatnonzero(cI <= settings.tol_qp))
    if status == CONVERGED and not (stat <= settings.tol_sqp and feas <= settings.tol_sqp):
        status = MAX_ITER
    return SolveReport(status, x, lam, mu, float(f), stat, feas, comp, active, iterations, settings, trace)
