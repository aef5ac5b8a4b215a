from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import pytest
import scipy.optimize
from hypothesis import given
from hypothesis import strategies as st

import hddcm.sqp as sqp_module
from conftest import quickshot
from hddcm.diagnostics import rod_model, solve_rod
from hddcm.experiments import ExperimentSpec
from hddcm.nlp import NlpProblem
from hddcm.numerics import fd_jacobian
from hddcm.qp import solve_qp
from hddcm.rods import Rod
from hddcm.sqp import CONVERGED, DIVERGED, MAX_ITER, SqpSettings, WarmStart, kkt_residual, solve


@dataclass
class Toy:
    """Small NLP assembled from callables, Jacobians by central differences."""

    f: Callable
    x0: np.ndarray
    ce: Callable = lambda x: np.zeros(0)
    ci: Callable = lambda x: np.zeros(0)

    @property
    def n_var(self):
        return self.x0.size

    def objective(self, x):
        return float(self.f(x)), fd_jacobian(lambda y: np.array([self.f(y)]), x)[0]

    def objective_hessian(self, x):
        g = lambda y: self.objective(y)[1]
        H = fd_jacobian(g, x, 1e-5)
        return 0.5 * (H + H.T)

    def eq(self, x):
        return np.asarray(self.ce(x), dtype=float)

    def eq_jacobian(self, x):
        return fd_jacobian(self.eq, x).reshape(-1, x.size)

    def ineq(self, x):
        return np.asarray(self.ci(x), dtype=float)

    def ineq_jacobian(self, x):
        return fd_jacobian(self.ineq, x).reshape(-1, x.size)

    def constraint_hessian(self, x, lam):
        H = fd_jacobian(lambda y: self.eq_jacobian(y).T @ lam, x, 1e-5)
        return 0.5 * (H + H.T)


def quadratic(a):
    a = np.asarray(a, dtype=float)
    return Toy(lambda x: 0.5 * np.sum((x - a) ** 2), np.zeros(a.size))


def hs_circle():
    # min x0 + x1 on the unit circle with x0 <= 0.5; optimum (-1, -1)/sqrt 2
    return Toy(
        lambda x: x[0] + x[1],
        np.array([0.5, -0.5]),
        ce=lambda x: np.array([x[0] ** 2 + x[1] ** 2 - 1.0]),
        ci=lambda x: np.array([0.5 - x[0]]),
    )


class TestSettings:
    def test_defaults(self):
        s = SqpSettings()
        assert (s.tol_sqp, s.tol_qp, s.max_iterations) == (1e-7, 1.49e-8, 300)

    @pytest.mark.parametrize("tols", [(1e-7, 1e-6), (0.0, 0.0), (1.0, 1e-8), (1e-7, 0.0)])
    def test_tolerance_ordering(self, tols):
        with pytest.raises(ValueError):
            SqpSettings(tol_sqp=tols[0], tol_qp=tols[1])

    def test_unknown_hessian(self):
        with pytest.raises(ValueError):
            SqpSettings(hessian="bfgs")

    def test_nonpositive_penalty(self):
        with pytest.raises(ValueError):
            SqpSettings(elastic_penalty=0.0)

    def test_negative_warm_multipliers(self):
        with pytest.raises(ValueError):
            WarmStart(np.zeros(2), None, np.array([-1.0]))


class TestKktResidual:
    def test_unconstrained_quadratic_at_minimiser(self):
        p = quadratic([1.0, -2.0, 3.0])
        x = np.array([1.0, -2.0, 3.0])
        stat, feas, comp = kkt_residual(p, x, None, None)
        assert stat <= 1e-9 and feas == 0.0 and comp == 0.0

    def test_negative_multiplier_counts_as_defect(self):
        p = hs_circle()
        x = np.array([0.5, -0.5])
        stat, _, _ = kkt_residual(p, x, np.zeros(1), np.array([-3.0]))
        assert stat >= 3.0

    @pytest.mark.parametrize("seed", range(5))
    def test_rod_example1_matches_scripted_residual(self, seed):
        rng = np.random.default_rng(seed)
        p = NlpProblem(rod_model(Rod(1), 20.0), 0)
        x = rng.standard_normal(p.n_var)
        lam = rng.standard_normal(p.n_eq)
        mu = np.zeros(0)
        # brute force: objective gradient and constraint Jacobian by differences
        g = fd_jacobian(lambda y: np.array([p.objective(y)[0]]), x)[0]
        JE = fd_jacobian(p.eq, x)
        stat = np.abs(g - JE.T @ lam).max()
        feas = np.abs(p.eq(x)).max()
        got = kkt_residual(p, x, lam, mu)
        assert got[0] == pytest.approx(stat, rel=1e-6, abs=1e-6)
        assert got[1] == pytest.approx(feas, rel=1e-12)
        assert got[2] == 0.0


class TestToyProblems:
    def test_unconstrained_quadratic(self):
        r = solve(quadratic([1.0, -2.0, 3.0]))
        assert r.converged
        np.testing.assert_allclose(r.x, [1.0, -2.0, 3.0], atol=1e-7)
        assert r.iterations <= 2

    def test_equality_and_inequality(self):
        r = solve(hs_circle(), SqpSettings(hessian="exact"))
        assert r.converged
        np.testing.assert_allclose(r.x, -np.ones(2) / np.sqrt(2), atol=1e-6)
        # grad f = J_E^T lam  with J_E = 2x
        assert r.lam[0] == pytest.approx(-1 / np.sqrt(2), abs=1e-5)
        assert r.mu[0] == pytest.approx(0.0, abs=1e-8)

    def test_active_bound(self):
        # min (x - 2)^2 subject to x <= 1
        p = Toy(lambda x: (x[0] - 2.0) ** 2, np.zeros(1), ci=lambda x: np.array([1.0 - x[0]]))
        r = solve(p)
        assert r.converged
        assert r.x[0] == pytest.approx(1.0, abs=1e-7)
        assert r.mu[0] == pytest.approx(2.0, abs=1e-5)
        assert r.active_set == (0,)

    def test_infeasible_linearisation_uses_elastic_mode(self):
        # x >= 1 and x <= 0 cannot both hold
        p = Toy(
            lambda x: x[0] ** 2,
            np.array([0.5]),
            ci=lambda x: np.array([x[0] - 1.0, -x[0]]),
        )
        r = solve(p, SqpSettings(max_iterations=20))
        assert not r.converged
        assert r.feasibility_inf > 0.1

    def test_max_iter_status(self):
        p = Toy(lambda x: np.sum(x**4), np.full(3, 5.0))
        r = solve(p, SqpSettings(max_iterations=1, hessian_fallback=None))
        assert r.status == MAX_ITER
        assert r.iterations == 1

    def test_nonfinite_start_diverges(self):
        class Nan(Toy):
            def objective(self, x):
                return float("nan"), np.zeros(x.size)

        r = solve(Nan(lambda x: 0.0, np.ones(1)))
        assert r.status == DIVERGED

    @given(st.integers(0, 2**32 - 1))
    def test_converged_reports_pass_reverification(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.uniform(-2, 2, 3)
        c = rng.uniform(-1, 1, 3)
        p = Toy(
            lambda x: 0.5 * np.sum((x - a) ** 2) + 0.1 * np.sum(x**4),
            np.zeros(3),
            ce=lambda x: np.array([x @ x - 1.0]),
            ci=lambda x: np.array([c @ x + 0.2]),
        )
        r = solve(p, SqpSettings(hessian="exact"))
        if r.converged:
            stat, feas, comp = kkt_residual(p, r.x, r.lam, r.mu)
            assert stat <= r.settings.tol_sqp + 1e-6
            assert feas <= r.settings.tol_sqp
            assert np.all(r.mu >= 0)
            assert np.all(p.ineq(r.x)[list(r.active_set)] <= r.settings.tol_qp)


class TestRods:
    def test_example1_matches_closed_form(self):
        out = solve_rod(1, 20.0)
        assert out["status"] == CONVERGED
        assert out["x2"] == pytest.approx(21.0, abs=1e-10)
        assert out["rank"] == 1

    def test_example2_physical_root(self):
        # x2 (x2^2 - 1) / 2 = 20 with c = l = 1
        root = scipy.optimize.brentq(lambda t: t**3 - t - 40.0, 1.0, 10.0, xtol=1e-15)
        out = solve_rod(2, 20.0)
        assert out["status"] == CONVERGED
        assert out["x2"] == pytest.approx(root, abs=1e-8)
        assert out["rank"] == 1

    @pytest.mark.parametrize("f2,length,stiffness", [(5.0, 1.0, 1.0), (20.0, 2.0, 3.0), (-0.1, 1.0, 1.0)])
    def test_closed_form_oracle(self, f2, length, stiffness):
        for k in (1, 2):
            out = solve_rod(k, f2, length, stiffness)
            assert out["status"] == CONVERGED
            assert out["error"] <= 1e-8

    def test_example2_beyond_limit_load_is_not_an_equilibrium(self):
        # x (x^2 - 1) / 2 has its minimum -1/(3 sqrt 3) at x = 1/sqrt 3
        limit = -1.0 / (3.0 * np.sqrt(3.0))
        out = solve_rod(2, 1.05 * limit)
        assert out["status"] == CONVERGED
        assert out["objective"] > 1e-6


class TestBeamStages:
    def test_zero_load_stays_at_reference(self):
        model = ExperimentSpec("tip").model()
        model.force = np.zeros_like(model.force)
        p = NlpProblem(model, 0)
        r = solve(p)
        assert r.converged
        assert r.iterations == 0
        assert r.objective_value == 0.0
        np.testing.assert_allclose(r.x[p.layout.q], model.structure.q_ref, atol=1e-12)

    def test_warm_resolve_is_immediate(self):
        _, model, rep = quickshot("tip", "symmetric", 2.0)
        o = rep.last
        r = solve(o.problem, rep.settings.sqp, o.solve.warm_start())
        assert r.converged
        assert r.iterations <= 2
        np.testing.assert_allclose(r.x, o.solve.x, atol=1e-6)

    @pytest.mark.parametrize("case", [("tip", "symmetric", 2.0), ("plane", "symmetric", 2.0)])
    def test_merit_is_monotone(self, case):
        _, _, rep = quickshot(*case)
        for o in rep.outcomes:
            assert o.solve.trace, "expected at least one iteration"
            for rec in o.solve.trace:
                assert rec.merit_after <= rec.merit + 1e-12 * (1 + abs(rec.merit))
                assert 0 < rec.step_length <= 1

    def test_converged_stage_passes_reverification(self):
        _, _, rep = quickshot("plane", "symmetric", 2.0)
        for o in rep.outcomes:
            stat, feas, comp = kkt_residual(o.problem, o.solve.x, o.solve.lam, o.solve.mu)
            assert stat <= o.tolerances_used[0] and feas <= o.tolerances_used[0]
            cI = o.problem.ineq(o.solve.x)
            assert set(o.solve.active_set) == set(np.flatnonzero(cI <= o.tolerances_used[1]).tolist())

    def test_tighter_tolerance_keeps_multipliers(self):
        _, model, rep = quickshot("tip", "symmetric", 2.0)
        p0 = rep.outcomes[0]
        p1 = rep.outcomes[1].problem
        from hddcm.quickshot import _warm

        warm = _warm(p0.problem, p0.solve, p1, 1.0)
        loose = solve(p1, SqpSettings(tol_sqp=1e-7), warm)
        tight = solve(p1, SqpSettings(tol_sqp=1e-9, tol_qp=1e-10), warm)
        assert loose.converged and tight.converged
        xi_l, xi_t = p1.full_xi(loose.x), p1.full_xi(tight.x)
        assert np.abs(xi_l - xi_t).max() <= 1e-5 * np.abs(xi_t).max()


def test_qp_subproblems_satisfy_their_kkt(monkeypatch):
    """Capture the QPs of a real stage-1 solve and check them independently."""
    calls = []

    def recording(G, a, A, b, **kw):
        res = solve_qp(G, a, A, b, **kw)
        calls.append((G, a, A, b, kw["tol"], res))
        return res

    monkeypatch.setattr(sqp_module, "solve_qp", recording)
    _, model, rep = quickshot("plane", "symmetric", 1.0)
    o0 = rep.outcomes[0]
    p1 = NlpProblem(model, 1, o0.contact_rows)
    from hddcm.quickshot import _warm

    solve(p1, SqpSettings(), _warm(o0.problem, o0.solve, p1, 1.0))
    assert len(calls) >= 2
    rng = np.random.default_rng(7)
    picks = rng.choice(len(calls), size=min(10, len(calls)), replace=False)
    for k in picks:
        G, a, A, b, tol, res = calls[k]
        if res.elastic:
            continue
        y, mu = res.y, res.multipliers
        scale = 1 + np.abs(a).max() + np.abs(G).max() * np.abs(y).max()
        assert np.abs(G @ y + a - A.T @ mu).max() <= 1e-6 * scale
        r = A @ y - b
        assert r.min() >= -tol * (1 + np.abs(b).max())
        assert mu.min() >= 0
        assert np.abs(mu * r).max() <= 1e-6 * scale


@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(0, 8))
def test_random_qp_kkt(seed, p, r):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((p, p))
    G = M @ M.T + 0.1 * np.eye(p)
    a = rng.standard_normal(p)
    A = rng.standard_normal((r, p))
    y_feas = rng.standard_normal(p)
    b = A @ y_feas - rng.uniform(0, 1, r)
    res = solve_qp(G, a, A, b, tol=1e-10)
    assert not res.elastic
    y, mu = res.y, res.multipliers
    scale = 1 + np.abs(a).max() + np.abs(G).max() * np.abs(y).max() + np.abs(A).max(initial=0) * np.abs(mu).max(initial=0)
    assert np.abs(G @ y + a - A.T @ mu).max() <= 1e-8 * scale
    assert (A @ y - b).min(initial=0) >= -1e-8 * (1 + np.abs(b).max(initial=0))
    assert mu.min(initial=0) >= 0
    assert np.abs(mu * (A @ y - b)).max(initial=0) <= 1e-8 * scale
    # convexity makes the solution unique; compare with an equality-free bound
    f = lambda z: 0.5 * z @ G @ z + a @ z
    assert f(y) <= f(y_feas) + 1e-9 * scale
