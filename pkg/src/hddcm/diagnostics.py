"""Self-checks: rod oracles, dimension table, rank conditions, FD Jacobians."""

from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from .beam import NODE_DOF, Beam, BeamGeometry
from .nlp import ContactModel, NlpProblem
from .numerics import fd_jacobian, jacobian_mismatch, rank_estimate
from .rods import Rod
from .sqp import SqpSettings, solve

DEFAULT_DIMENSIONS = {"n_q": 252, "m": 138, "n": 114, "n_e": 120, "variables": 732, "equalities": 492}
ROD_EXAMPLE2_REFERENCE = 3.3225


def random_feasible_configuration(beam: Beam, rng: np.random.Generator, scale: float = 0.05) -> np.ndarray:
    """Perturb inner nodes by a translation and a rigid director rotation."""
    Q = beam.q_ref.reshape(beam.n_nodes, NODE_DOF).copy()
    for i in beam.inner_nodes:
        R = Rotation.from_rotvec(scale * rng.standard_normal(3)).as_matrix()
        Q[i, :3] += scale * rng.standard_normal(3)
        Q[i, 3:] = (Q[i, 3:].reshape(3, 3) @ R.T).ravel()
    return Q.ravel()


def rod_model(rod: Rod, f2: float) -> ContactModel:
    return ContactModel(rod, rod.material, rod.force_vector(f2), np.zeros((0, 2)), np.zeros(0))


def solve_rod(example: int, f2: float, length: float = 1.0, stiffness: float = 1.0) -> dict:
    rod = Rod(example, length, stiffness)
    prob = NlpProblem(rod_model(rod, f2), 0)
    rep = solve(prob, SqpSettings(tol_sqp=1e-12, tol_qp=1e-12))
    q = rep.x[prob.layout.q]
    s = rep.x[prob.layout.s]
    x2 = float(q[1])
    closed = rod.closed_form(f2)
    rank = rank_estimate(rod.prop_matrix(q, s, f2)).estimated_rank
    return {
        "example": example,
        "status": rep.status,
        "x2": x2,
        "closed_form": closed,
        "error": abs(x2 - closed),
        "objective": rep.objective_value,
        "rank": rank,
        "prop_matrix": rod.prop_matrix(q, s, f2).ravel().tolist(),
    }


def rod_examples(f2: float = 20.0, length: float = 1.0, stiffness: float = 1.0, tol: float = 1e-6) -> dict:
    results = [solve_rod(k, f2, length, stiffness) for k in (1, 2)]
    ok = all(r["status"] == "converged" and r["error"] <= tol and r["rank"] == 1 for r in results)
    return {
        "ok": ok,
        "examples": results,
        # reference value; it is the real root of x^3 + x - 40, kept for comparison
        "example2_reference_root": ROD_EXAMPLE2_REFERENCE,
    }


def fd_checks(beam: Beam, q, rng: np.random.Generator) -> dict[str, float]:
    """Relative mismatch of each analytic Jacobian against central differences."""
    s = rng.standard_normal(beam.n_e)
    a = rng.standard_normal(beam.n_q)
    lam = rng.standard_normal(beam.n)
    w = beam.quadrature_weights
    return {
        "kinematic_jacobian": jacobian_mismatch(beam.kinematic_jacobian(q), fd_jacobian(beam.kinematic_constraints, q)),
        "strain_jacobian": jacobian_mismatch(beam.strain_jacobian(q), fd_jacobian(beam.strains, q)),
        "strain_hessian": jacobian_mismatch(
            beam.strain_hessian(q, w * s), fd_jacobian(lambda y: beam.strain_jacobian(y).T @ (w * s), q)
        ),
        "nullspace_derivative": jacobian_mismatch(
            beam.nullspace_derivative(q, a), fd_jacobian(lambda y: beam.project(y, a), q)
        ),
        "nullspace_action": jacobian_mismatch(
            beam.nullspace_action_jacobian(q, lam), fd_jacobian(lambda y: beam._nullspace_unchecked(y) @ lam, q)
        ),
    }


def check(n_elements: int = 20, seed: int = 0, n_random: int = 5, expect_defaults: bool = True) -> dict:
    beam = Beam(BeamGeometry(n_elements=n_elements))
    dims = {
        "n_q": beam.n_q,
        "m": beam.m,
        "n": beam.n,
        "n_e": beam.n_e,
        "variables": beam.n_q + 4 * beam.n_e,
        "equalities": beam.m + beam.n_e + beam.n + beam.n_e,
    }
    failures = []
    if expect_defaults and dims != DEFAULT_DIMENSIONS:
        failures.append(f"dimensions {dims} differ from {DEFAULT_DIMENSIONS}")
    rng = np.random.default_rng(seed)
    points = [beam.q_ref] + [random_feasible_configuration(beam, rng) for _ in range(n_random)]
    ranks, orth, fd = [], [], []
    for k, q in enumerate(points):
        s = np.zeros(beam.n_e) if k == 0 else rng.standard_normal(beam.n_e)
        f = np.zeros(beam.n_q)
        rank = beam.rank_conditions(q, s, f).estimated_rank
        ranks.append(rank)
        if rank != beam.n:
            failures.append(f"rank {rank} != {beam.n} at point {k}")
        N = beam.nullspace(q)
        err = max(
            np.abs(beam.kinematic_jacobian(q) @ N).max(),
            np.abs(N.T @ N - np.eye(beam.n)).max(),
        )
        orth.append(float(err))
        if err > 1e-10:
            failures.append(f"nullspace defect {err:.2e} at point {k}")
        mism = fd_checks(beam, q, rng)
        fd.append(mism)
        bad = {name: v for name, v in mism.items() if v > 1e-6}
        if bad:
            failures.append(f"FD mismatch at point {k}: {bad}")
    return {
        "ok": not failures,
        "dimensions": dims,
        "ranks": ranks,
        "nullspace_defects": orth,
        "fd_mismatch_max": {name: max(d[name] for d in fd) for name in fd[0]},
        "failures": failures,
    }
