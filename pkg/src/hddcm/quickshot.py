"""Four-stage heuristic producing verifiable MPCC solutions or a diagnosis.

Stage 0 solves the NLP with ``c(q) >= 0`` and no multipliers.  Its contact
set ``A`` then parameterises stage 1 (``c_A = 0``, ``xi_A >= 0``) and
stage 2 (``c_A >= 0``).  Stage 3 includes every multiplier.  Each stage is
warm started from its predecessor and the run stops at the first stage
passing its exit test.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .nlp import ContactModel, MpccTolerances, MpccVerdict, NlpProblem, remap_labels, remap_primal, verify_mpcc
from .sqp import SolveReport, SqpSettings, WarmStart, solve

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

VALID_NO_CONTACT = "valid_no_contact"
VALID_WITH_CONTACT = "valid_with_contact"
NON_PHYSICAL = "non_physical"
COMPLEMENTARITY_VIOLATION = "complementarity_violation"
DIVERGED = "diverged"
FINAL_STATUSES = (VALID_NO_CONTACT, VALID_WITH_CONTACT, NON_PHYSICAL, COMPLEMENTARITY_VIOLATION, DIVERGED)

RETRY_TOLERANCES = ((1e-6, 1e-7), (1e-5, 1e-6), (1e-4, 1e-5))


class ReproductionError(RuntimeError):
    """A confirmation run moved away from the solution it was seeded with."""


@dataclass(frozen=True)
class QuickShotSettings:
    sqp: SqpSettings = SqpSettings()
    tol_obj: float = 1e-6
    tol_comp: float = 1e-6
    retry_tolerances: tuple[tuple[float, float], ...] = RETRY_TOLERANCES

    def to_dict(self) -> dict:
        return {
            "sqp": dict(self.sqp.__dict__),
            "tol_obj": self.tol_obj,
            "tol_comp": self.tol_comp,
            "retry_tolerances": [list(t) for t in self.retry_tolerances],
        }


@dataclass
class StageOutcome:
    stage: int
    solve: SolveReport
    problem: NlpProblem
    contact_rows: tuple[int, ...]
    contact_set: tuple[int, ...]  # node labels of contact_rows
    verdict: MpccVerdict
    tolerances_used: tuple[float, float]
    xi: np.ndarray  # one entry per contact row, zero where omitted

    @property
    def objective(self) -> float:
        return self.solve.objective_value

    @property
    def converged(self) -> bool:
        return self.solve.converged

    @property
    def q(self) -> np.ndarray:
        return self.solve.x[self.problem.layout.q]

    def to_dict(self) -> dict:
        r = self.solve
        return {
            "stage": self.stage,
            "stage_tag": self.problem.stage_tag,
            "status": r.status,
            "iterations": r.iterations,
            "objective": r.objective_value,
            "kkt_residual_inf": r.kkt_residual_inf,
            "feasibility_inf": r.feasibility_inf,
            "complementarity_inf": r.complementarity_inf,
            "stage_active_set": list(self.problem.active_set),
            "contact_rows": list(self.contact_rows),
            "contact_set": list(self.contact_set),
            "verdict": self.verdict.to_dict(),
            "tolerances_used": list(self.tolerances_used),
            "x": r.x.tolist(),
            "xi": self.xi.tolist(),
        }


@dataclass
class QuickShotReport:
    outcomes: list[StageOutcome]
    final_status: str
    warmstart_bundle: WarmStart | None
    settings: QuickShotSettings = field(default_factory=QuickShotSettings)

    @property
    def last(self) -> StageOutcome:
        return self.outcomes[-1]

    @property
    def valid(self) -> bool:
        return self.final_status in (VALID_NO_CONTACT, VALID_WITH_CONTACT)

    def to_dict(self) -> dict:
        wb = self.warmstart_bundle
        return {
            "schema_version": SCHEMA_VERSION,
            "final_status": self.final_status,
            "settings": self.settings.to_dict(),
            "outcomes": [o.to_dict() for o in self.outcomes],
            "warmstart_bundle": None
            if wb is None
            else {
                "primal": wb.primal.tolist(),
                "equality_multipliers": None if wb.equality_multipliers is None else wb.equality_multipliers.tolist(),
                "inequality_multipliers": None
                if wb.inequality_multipliers is None
                else wb.inequality_multipliers.tolist(),
                "active_guess": list(wb.active_guess),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _solve_with_retries(problem, settings: QuickShotSettings, warm, retry: bool):
    report = solve(problem, settings.sqp, warm)
    tols = (settings.sqp.tol_sqp, settings.sqp.tol_qp)
    if report.converged or not retry:
        return report, tols
    for tol_sqp, tol_qp in settings.retry_tolerances:
        log.info("stage %s: retry at tol_sqp=%g tol_qp=%g", problem.stage_tag, tol_sqp, tol_qp)
        relaxed = settings.sqp.with_tolerances(tol_sqp, tol_qp)
        report = solve(problem, relaxed, warm)
        if report.converged:
            return report, (tol_sqp, tol_qp)
    return report, tols


def _warm(src: NlpProblem, rep: SolveReport, dst: NlpProblem, xi_init: float) -> WarmStart:
    primal = remap_primal(src, rep.x, dst, xi_init)
    lam = remap_labels(src.eq_labels, rep.lam, dst.eq_labels)
    src_active = {src.ineq_labels[i] for i in rep.active_set}
    guess = tuple(k for k, lbl in enumerate(dst.ineq_labels) if lbl in src_active)
    return WarmStart(primal, lam, None, guess)


def _outcome(model: ContactModel, problem: NlpProblem, rep: SolveReport, tols, settings) -> StageOutcome:
    x = rep.x
    q = x[problem.layout.q]
    c = model.contact(q)
    rows = tuple(int(i) for i in np.flatnonzero(c <= tols[1]))
    xi = problem.full_xi(x)
    verdict = verify_mpcc(model, x, xi, MpccTolerances(settings.tol_obj, settings.tol_comp, tols[0]))
    return StageOutcome(
        problem.stage, rep, problem, rows, tuple(model.labels[i] for i in rows), verdict, tuple(tols), xi
    )


def _stage_exit(o: StageOutcome, model: ContactModel, settings: QuickShotSettings) -> bool:
    """The per-stage early-exit tests."""
    if not o.converged or o.objective > settings.tol_obj:
        return False
    c = model.contact(o.q)
    if o.stage == 0:
        return bool(np.all(c > o.tolerances_used[1]))
    if o.stage == 1:
        return True
    if o.stage == 2:
        A = list(o.problem.active_set)
        return float(c[A] @ o.xi[A]) <= settings.tol_comp
    return float(c @ o.xi) <= settings.tol_comp


def _finish(outcomes, status, settings) -> QuickShotReport:
    last = outcomes[-1]
    return QuickShotReport(outcomes, status, last.solve.warm_start(), settings)


def _failure_status(o: StageOutcome, settings: QuickShotSettings) -> str:
    if not o.converged:
        return DIVERGED
    if o.objective > settings.tol_obj:
        return NON_PHYSICAL
    return COMPLEMENTARITY_VIOLATION


def run(model: ContactModel, settings: QuickShotSettings | None = None) -> QuickShotReport:
    settings = settings or QuickShotSettings()
    outcomes: list[StageOutcome] = []

    p0 = NlpProblem(model, 0)
    r0, t0 = _solve_with_retries(p0, settings, None, retry=True)
    o0 = _outcome(model, p0, r0, t0, settings)
    outcomes.append(o0)
    if not o0.converged:
        return _finish(outcomes, DIVERGED, settings)
    if _stage_exit(o0, model, settings):
        return _finish(outcomes, VALID_NO_CONTACT, settings)
    A = o0.contact_rows
    if not A:
        # positive objective without contact: stages 1 and 2 are undefined
        return _finish(outcomes, NON_PHYSICAL, settings)

    p1 = NlpProblem(model, 1, A)
    r1, t1 = _solve_with_retries(p1, settings, _warm(p0, r0, p1, 1.0), retry=True)
    o1 = _outcome(model, p1, r1, t1, settings)
    outcomes.append(o1)
    if not o1.converged:
        return _finish(outcomes, DIVERGED, settings)
    if _stage_exit(o1, model, settings):
        return _finish(outcomes, VALID_WITH_CONTACT if o1.verdict.valid else _failure_status(o1, settings), settings)

    p2 = NlpProblem(model, 2, A)
    r2, t2 = _solve_with_retries(p2, settings, _warm(p1, r1, p2, 0.0), retry=False)
    o2 = _outcome(model, p2, r2, t2, settings)
    outcomes.append(o2)
    if o2.converged and _stage_exit(o2, model, settings) and o2.verdict.valid:
        return _finish(outcomes, VALID_WITH_CONTACT, settings)
    src_p, src_r = (p2, r2) if o2.converged else (p1, r1)

    p3 = NlpProblem(model, 3)
    r3, t3 = _solve_with_retries(p3, settings, _warm(src_p, src_r, p3, 0.0), retry=True)
    o3 = _outcome(model, p3, r3, t3, settings)
    outcomes.append(o3)
    if o3.converged and _stage_exit(o3, model, settings) and o3.verdict.valid:
        return _finish(outcomes, VALID_WITH_CONTACT, settings)
    return _finish(outcomes, _failure_status(o3, settings), settings)


def confirmation_run(
    report: QuickShotReport, model: ContactModel, settings: QuickShotSettings | None = None, atol: float = 1e-6
) -> QuickShotReport:
    """Re-solve the later stages from a valid stage-0 or stage-1 solution.

    Returns a report holding the confirmation stages; raises
    :class:`ReproductionError` if any of them lands elsewhere.
    """
    settings = settings or report.settings
    src = report.last
    if not report.valid or src.stage > 1:
        raise ValueError("confirmation needs a report that ended validly at stage 0 or 1")
    if src.stage == 0:
        # no contact, so the later stages are undefined
        return QuickShotReport([], report.final_status, report.warmstart_bundle, settings)
    A = src.problem.active_set
    reference = np.concatenate([src.solve.x[: src.problem.layout.xi.start], src.xi])
    outcomes = []
    for stage in (2, 3):
        dst = NlpProblem(model, stage, A)
        rep, tols = _solve_with_retries(dst, settings, _warm(src.problem, src.solve, dst, 0.0), retry=False)
        o = _outcome(model, dst, rep, tols, settings)
        outcomes.append(o)
        got = np.concatenate([rep.x[: dst.layout.xi.start], o.xi])
        diff = float(np.abs(got - reference).max())
        if not rep.converged or diff > atol:
            raise ReproductionError(f"stage {stage} reproduced the solution only to {diff:.3e} ({rep.status})")
    status = VALID_WITH_CONTACT if outcomes[-1].verdict.valid else _failure_status(outcomes[-1], settings)
    return QuickShotReport(outcomes, status, outcomes[-1].solve.warm_start(), settings)
