"""Smooth NLPs of the hybrid data-driven contact problem.

Variables are ``x = (q, e, s, e_hat, s_hat, xi_inc)`` where ``xi_inc`` holds
the contact multipliers included in the current stage.  Equalities are
ordered ``(h, e(q) - e, equilibrium, g(e_hat, s_hat))`` followed by the
fixed-contact rows ``c_A(q)`` in stage 1.  Inequalities are contact rows
``c_i(q) >= 0`` followed by bounds ``xi_j >= 0``.

Any object exposing the ``Beam`` interface (kinematics, strains, nullspace,
``quadrature_weights``) can be used as the structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .materials import SystemMaterial
from .numerics import InvalidInputError

STAGES = (0, 1, 2, 3)
ROBUST_VARIANTS = ("arg_l1", "residual_l1", "full_l1")


class StageConfigurationError(ValueError):
    """Stage 1 and 2 need a nonempty active set."""


# ---------------------------------------------------------------------------
# layout and weights


@dataclass(frozen=True)
class VariableLayout:
    n_q: int
    n_e: int
    xi_included: tuple[int, ...] = ()

    @property
    def q(self) -> slice:
        return slice(0, self.n_q)

    def _block(self, k: int) -> slice:
        start = self.n_q + k * self.n_e
        return slice(start, start + self.n_e)

    @property
    def e(self) -> slice:
        return self._block(0)

    @property
    def s(self) -> slice:
        return self._block(1)

    @property
    def e_hat(self) -> slice:
        return self._block(2)

    @property
    def s_hat(self) -> slice:
        return self._block(3)

    @property
    def xi(self) -> slice:
        start = self.n_q + 4 * self.n_e
        return slice(start, start + len(self.xi_included))

    @property
    def size(self) -> int:
        return self.n_q + 4 * self.n_e + len(self.xi_included)

    def slices(self) -> dict[str, slice]:
        return {"q": self.q, "e": self.e, "s": self.s, "e_hat": self.e_hat, "s_hat": self.s_hat, "xi": self.xi}

    def full_xi(self, x, n_c: int) -> np.ndarray:
        """Contact multipliers of length ``n_c``; omitted entries are zero."""
        xi = np.zeros(n_c)
        xi[list(self.xi_included)] = np.asarray(x)[self.xi]
        return xi


@dataclass(frozen=True)
class ProximityWeights:
    """SPD weight ``C`` of the energy norms; stored densely with its inverse."""

    C: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise InvalidInputError("C must be square")
        if not np.allclose(C, C.T, atol=1e-12 * (1 + np.abs(C).max())):
            raise InvalidInputError("C must be symmetric")
        if np.linalg.eigvalsh(C).min() <= 0:
            raise InvalidInputError("C must be positive definite")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "C_inv", np.linalg.inv(C))

    @classmethod
    def from_material(cls, material: SystemMaterial) -> "ProximityWeights":
        return cls(np.diag(material.stiffness_diagonal()))

    @classmethod
    def identity(cls, n_e: int) -> "ProximityWeights":
        return cls(np.eye(n_e))


def objective(layout: VariableLayout, weights: ProximityWeights, x) -> tuple[float, np.ndarray]:
    x = np.asarray(x, dtype=float)
    de = x[layout.e] - x[layout.e_hat]
    ds = x[layout.s] - x[layout.s_hat]
    Cde = weights.C @ de
    Cids = weights.C_inv @ ds
    grad = np.zeros(layout.size)
    grad[layout.e] = Cde
    grad[layout.e_hat] = -Cde
    grad[layout.s] = Cids
    grad[layout.s_hat] = -Cids
    return 0.5 * float(de @ Cde + ds @ Cids), grad


def objective_hessian(layout: VariableLayout, weights: ProximityWeights) -> np.ndarray:
    H = np.zeros((layout.size, layout.size))
    for a, b, M in ((layout.e, layout.e_hat, weights.C), (layout.s, layout.s_hat, weights.C_inv)):
        H[a, a] = M
        H[b, b] = M
        H[a, b] = -M
        H[b, a] = -M
    return H


# ---------------------------------------------------------------------------
# the contact model and its mechanics block


@dataclass
class ContactModel:
    """Everything defining one MPCC instance.

    ``contact_matrix`` rows select the constrained coordinates;
    ``c(q) = contact_matrix @ q - lower_bounds``.
    """

    structure: object
    material: SystemMaterial
    force: np.ndarray
    contact_matrix: np.ndarray
    lower_bounds: np.ndarray
    weights: ProximityWeights | None = None
    labels: tuple[int, ...] = ()

    def __post_init__(self):
        st = self.structure
        self.force = np.asarray(self.force, dtype=float)
        self.contact_matrix = np.atleast_2d(np.asarray(self.contact_matrix, dtype=float)).reshape(-1, st.n_q)
        self.lower_bounds = np.asarray(self.lower_bounds, dtype=float).ravel()
        if self.contact_matrix.shape[0] != self.lower_bounds.size:
            raise InvalidInputError("contact matrix and bounds disagree")
        if self.material.n_e != st.n_e:
            raise InvalidInputError("material size does not match the structure")
        if self.weights is None:
            self.weights = ProximityWeights.identity(st.n_e)
        if not self.labels:
            self.labels = tuple(range(self.n_c))

    @classmethod
    def for_beam(cls, beam, material, contact, force, weights=None) -> "ContactModel":
        f = beam.force_vector(force) if not isinstance(force, np.ndarray) else force
        return cls(
            beam,
            material,
            f,
            beam.contact_selector(contact),
            np.asarray(contact.lower_bounds, dtype=float),
            weights,
            tuple(contact.node_indices),
        )

    @property
    def n_c(self) -> int:
        return self.lower_bounds.size

    def contact(self, q) -> np.ndarray:
        return self.contact_matrix @ q - self.lower_bounds

    @property
    def n_mech(self) -> int:
        st = self.structure
        return st.m + st.n_e + st.n


class _Mechanics:
    """``Phi_d(q, e, s) = (h(q), e(q) - e, N^T (B^T W s - f - C^T xi))`` with derivatives.

    ``Cxi`` is the contact matrix restricted to the multipliers in play.
    """

    def __init__(self, model: ContactModel, Cxi: np.ndarray):
        self.model = model
        self.st = model.structure
        self.Cxi = Cxi
        self.w = np.asarray(self.st.quadrature_weights, dtype=float)

    def residual(self, q, e, s, xi) -> np.ndarray:
        st = self.st
        a = st.strain_jacobian(q).T @ (self.w * s) - self.model.force
        if xi.size:
            a = a - self.Cxi.T @ xi
        return np.concatenate([st.kinematic_constraints(q), st.strains(q) - e, st.project(q, a)])

    def jacobian(self, q, s, xi) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Blocks with respect to ``(q, e, s, xi)``."""
        st = self.st
        m, n_e, n = st.m, st.n_e, st.n
        B = st.strain_jacobian(q)
        ws = self.w * s
        a = B.T @ ws - self.model.force
        if xi.size:
            a = a - self.Cxi.T @ xi
        N = st._nullspace_unchecked(q)
        rows = m + n_e + n
        Jq = np.zeros((rows, st.n_q))
        Jq[:m] = st.kinematic_jacobian(q)
        Jq[m : m + n_e] = B
        Jq[m + n_e :] = N.T @ st.strain_hessian(q, ws) + st.nullspace_derivative(q, a)
        Je = np.zeros((rows, n_e))
        Je[m : m + n_e] = -np.eye(n_e)
        Js = np.zeros((rows, n_e))
        Js[m + n_e :] = N.T @ (B.T * self.w)
        Jxi = np.zeros((rows, xi.size))
        if xi.size:
            Jxi[m + n_e :] = -N.T @ self.Cxi.T
        return Jq, Je, Js, Jxi

    def hessian(self, q, s, lam) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Blocks ``(qq, sq, xiq)`` of ``sum_k lam_k Phi_d,k''``; other blocks vanish."""
        st = self.st
        m, n_e = st.m, st.n_e
        lam_h, lam_c, lam_eq = lam[:m], lam[m : m + n_e], lam[m + n_e :]
        ws = self.w * s
        nu = st._nullspace_unchecked(q) @ lam_eq
        Jnu = st.nullspace_action_jacobian(q, lam_eq)
        K = st.strain_hessian(q, ws)
        Hqq = st.kinematic_hessian(q, lam_h) + st.strain_hessian(q, lam_c)
        Hqq = Hqq + Jnu.T @ K + K @ Jnu
        Hsq = self.w[:, None] * (st.strain_jacobian_action(nu) + st.strain_jacobian(q) @ Jnu)
        Hxq = -self.Cxi @ Jnu if self.Cxi.shape[0] else np.zeros((0, st.n_q))
        return Hqq, Hsq, Hxq


# ---------------------------------------------------------------------------
# quick-shot stage problems


class NlpProblem:
    """One stage problem; satisfies the SQP ``Problem`` protocol."""

    def __init__(self, model: ContactModel, stage: int, active_set=(), x0=None):
        if stage not in STAGES:
            raise InvalidInputError(f"stage must be one of {STAGES}")
        A = tuple(sorted(set(int(i) for i in active_set)))
        if stage in (1, 2) and not A:
            raise StageConfigurationError(f"stage {stage} requires a nonempty active set")
        if any(not 0 <= i < model.n_c for i in A):
            raise InvalidInputError("active set index out of range")
        st = model.structure
        self.model = model
        self.stage = stage
        self.stage_tag = f"NLP{stage}" if stage else "aNLP+c"
        self.active_set = A if stage in (1, 2) else ()
        if stage == 0:
            xi_inc: tuple[int, ...] = ()
        elif stage == 3:
            xi_inc = tuple(range(model.n_c))
        else:
            xi_inc = A
        self.layout = VariableLayout(st.n_q, st.n_e, xi_inc)
        self.n_var = self.layout.size
        # stage 1 fixes the active rows; all other stages keep every row as an inequality
        self.eq_contact = A if stage == 1 else ()
        self.ineq_contact = tuple(i for i in range(model.n_c) if i not in self.eq_contact)
        self._mech = _Mechanics(model, model.contact_matrix[list(xi_inc)])
        self._H_obj = objective_hessian(self.layout, model.weights)
        if x0 is None:
            x0 = self.cold_start()
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (self.n_var,) or not np.all(np.isfinite(x0)):
            raise InvalidInputError("initial point has wrong size or is not finite")
        self.x0 = x0

    # -- labels used to remap warm starts between stages
    @property
    def eq_labels(self) -> list[tuple[str, int]]:
        return [("phi", k) for k in range(self.model.n_mech + self.model.structure.n_e)] + [
            ("cA", i) for i in self.eq_contact
        ]

    @property
    def ineq_labels(self) -> list[tuple[str, int]]:
        return [("c", i) for i in self.ineq_contact] + [("xi", i) for i in self.layout.xi_included]

    @property
    def n_eq(self) -> int:
        return len(self.eq_labels)

    def cold_start(self) -> np.ndarray:
        x = np.zeros(self.n_var)
        x[self.layout.q] = self.model.structure.q_ref
        return x

    def split(self, x):
        L = self.layout
        return x[L.q], x[L.e], x[L.s], x[L.e_hat], x[L.s_hat], x[L.xi]

    # -- protocol
    def objective(self, x):
        return objective(self.layout, self.model.weights, x)

    def objective_hessian(self, x):
        return self._H_obj

    def eq(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        q, e, s, eh, sh, xi = self.split(x)
        parts = [self._mech.residual(q, e, s, xi), self.model.material.residual(eh, sh)]
        if self.eq_contact:
            parts.append(self.model.contact(q)[list(self.eq_contact)])
        return np.concatenate(parts)

    def eq_jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        L = self.layout
        q, e, s, eh, sh, xi = self.split(x)
        st = self.model.structure
        n_mech = self.model.n_mech
        J = np.zeros((self.n_eq, self.n_var))
        Jq, Je, Js, Jxi = self._mech.jacobian(q, s, xi)
        J[:n_mech, L.q] = Jq
        J[:n_mech, L.e] = Je
        J[:n_mech, L.s] = Js
        J[:n_mech, L.xi] = Jxi
        g1, g2 = self.model.material.jacobian_diagonals(eh, sh)
        rows = np.arange(n_mech, n_mech + st.n_e)
        J[rows, np.arange(L.e_hat.start, L.e_hat.stop)] = g1
        J[rows, np.arange(L.s_hat.start, L.s_hat.stop)] = g2
        if self.eq_contact:
            J[n_mech + st.n_e :, L.q] = self.model.contact_matrix[list(self.eq_contact)]
        return J

    def ineq(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        c = self.model.contact(x[self.layout.q])[list(self.ineq_contact)]
        return np.concatenate([c, x[self.layout.xi]])

    def ineq_jacobian(self, x) -> np.ndarray:
        L = self.layout
        J = np.zeros((len(self.ineq_contact) + len(L.xi_included), self.n_var))
        J[: len(self.ineq_contact), L.q] = self.model.contact_matrix[list(self.ineq_contact)]
        J[len(self.ineq_contact) :, L.xi] = np.eye(len(L.xi_included))
        return J

    def constraint_hessian(self, x, lam) -> np.ndarray:
        """``sum_k lam_k c_E,k''(x)``; contact rows are linear."""
        x = np.asarray(x, dtype=float)
        lam = np.asarray(lam, dtype=float)
        L = self.layout
        q, _, s, eh, sh, _ = self.split(x)
        n_mech = self.model.n_mech
        n_e = self.model.structure.n_e
        Hqq, Hsq, Hxq = self._mech.hessian(q, s, lam[:n_mech])
        H = np.zeros((self.n_var, self.n_var))
        H[L.q, L.q] = Hqq
        H[L.s, L.q] = Hsq
        H[L.q, L.s] = Hsq.T
        if Hxq.size:
            H[L.xi, L.q] = Hxq
            H[L.q, L.xi] = Hxq.T
        lam_g = lam[n_mech : n_mech + n_e]
        h1, h2 = self.model.material.hessian_diagonals(eh, sh)
        ie = np.arange(L.e_hat.start, L.e_hat.stop)
        is_ = np.arange(L.s_hat.start, L.s_hat.stop)
        H[ie, ie] = lam_g * h1
        H[is_, is_] = lam_g * h2
        return H

    # -- helpers
    def full_xi(self, x) -> np.ndarray:
        return self.layout.full_xi(x, self.model.n_c)

    def dump(self, x=None) -> str:
        x = self.x0 if x is None else np.asarray(x, dtype=float)
        JE, JI = self.eq_jacobian(x), self.ineq_jacobian(x)
        return json.dumps(
            {
                "stage_tag": self.stage_tag,
                "stage": self.stage,
                "layout": {k: [v.start, v.stop] for k, v in self.layout.slices().items()},
                "xi_included": list(self.layout.xi_included),
                "dimensions": {"variables": self.n_var, "equalities": self.n_eq, "inequalities": JI.shape[0]},
                "jacobian_nonzeros": {"equalities": int(np.count_nonzero(JE)), "inequalities": int(np.count_nonzero(JI))},
            },
            indent=2,
        )


def build_stage(stage: int, model: ContactModel, active_set=(), warm=None) -> NlpProblem:
    """Stage problem; ``warm`` may be a primal vector already in this stage's layout."""
    return NlpProblem(model, stage, active_set, x0=warm)


def remap_primal(src: NlpProblem, x, dst: NlpProblem, xi_init: float = 0.0) -> np.ndarray:
    """Carry ``x`` between stage layouts; multipliers new to ``dst`` start at ``xi_init``."""
    x = np.asarray(x, dtype=float)
    y = np.zeros(dst.n_var)
    n0 = dst.layout.xi.start
    y[:n0] = x[: src.layout.xi.start]
    src_xi = dict(zip(src.layout.xi_included, x[src.layout.xi]))
    y[dst.layout.xi] = [src_xi.get(i, xi_init) for i in dst.layout.xi_included]
    return y


def remap_labels(src_labels, values, dst_labels) -> np.ndarray:
    lookup = dict(zip(src_labels, np.asarray(values, dtype=float)))
    return np.array([lookup.get(lbl, 0.0) for lbl in dst_labels])


# ---------------------------------------------------------------------------
# MPCC verification


@dataclass(frozen=True)
class MpccVerdict:
    objective_value: float
    feasibility_inf_norm: float
    complementarity_product: float
    signs_ok: bool
    valid: bool
    bound_violation_inf: float = 0.0

    def to_dict(self) -> dict:
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class MpccTolerances:
    tol_obj: float = 1e-6
    tol_comp: float = 1e-6
    tol_feas: float = 1e-7


def verify_mpcc(model: ContactModel, x, xi, tolerances: MpccTolerances | None = None) -> MpccVerdict:
    """Check an (x, xi) pair against the MPCC.

    ``x`` is ``(q, e, s, e_hat, s_hat)`` and may carry trailing entries,
    which are ignored.  ``xi`` has one entry per contact row; a shorter
    vector is padded with zeros.
    """
    tol = tolerances or MpccTolerances()
    st = model.structure
    layout = VariableLayout(st.n_q, st.n_e)
    x = np.asarray(x, dtype=float)[: layout.size]
    xi_full = np.zeros(model.n_c)
    xi = np.asarray(xi, dtype=float).ravel()
    xi_full[: xi.size] = xi
    q, e, s = x[layout.q], x[layout.e], x[layout.s]
    eh, sh = x[layout.e_hat], x[layout.s_hat]
    f, _ = objective(layout, model.weights, x)
    mech = _Mechanics(model, model.contact_matrix)
    phi = np.concatenate([mech.residual(q, e, s, xi_full), model.material.residual(eh, sh)])
    c = model.contact(q)
    bound_violation = max(np.maximum(-c, 0.0).max(initial=0.0), np.maximum(-xi_full, 0.0).max(initial=0.0))
    feas = max(np.abs(phi).max(initial=0.0), bound_violation)
    comp = float(c @ xi_full)
    signs_ok = bool(np.all(c >= -tol.tol_feas) and np.all(xi_full >= -tol.tol_feas))
    valid = bool(f <= tol.tol_obj and feas <= tol.tol_feas and abs(comp) <= tol.tol_comp and signs_ok)
    return MpccVerdict(float(f), float(feas), comp, signs_ok, valid, float(bound_violation))


# ---------------------------------------------------------------------------
# robust l1 reformulations


@dataclass
class RobustWeights:
    """Positive diagonals ``W_y`` (length of ``Phi_d``) and ``W_z`` (length ``n_e``)."""

    W_y: np.ndarray | None = None
    W_z: np.ndarray | None = None


class RobustProblem:
    """l1 reformulations over ``(q, e, s)`` with nonnegative slack pairs.

    ``arg_l1``:       min sum sqrt(C) (ze+ + ze-) + sqrt(C^-1) (zs+ + zs-)
                      s.t. Phi_d = 0, g(e - ze, s - zs) = 0
    ``residual_l1``:  min W_z (z+ + z-)  s.t. Phi_d = 0, g(e, s) = z
    ``full_l1``:      min W_y (y+ + y-) + W_z (z+ + z-)  s.t. Phi_d = y, g(e, s) = z

    ``C`` must be diagonal so the weighted l1 norms separate per entry.
    With ``xi`` given, the contact multipliers enter as fixed data.
    ``g_shift`` offsets the constitutive residual (used to build
    inconsistent test instances).
    """

    def __init__(self, variant: str, model: ContactModel, weights: RobustWeights | None = None, xi=None, g_shift=None):
        if variant not in ROBUST_VARIANTS:
            raise InvalidInputError(f"variant must be one of {ROBUST_VARIANTS}")
        st = model.structure
        C = model.weights.C
        if variant == "arg_l1" and np.count_nonzero(C - np.diag(np.diag(C))):
            raise InvalidInputError("arg_l1 needs a diagonal proximity weight")
        weights = weights or RobustWeights()
        self.variant = variant
        self.model = model
        self.stage_tag = f"robust:{variant}"
        n_q, n_e = st.n_q, st.n_e
        self.n_q, self.n_e = n_q, n_e
        self.n_mech = model.n_mech
        self.xi = np.zeros(model.n_c) if xi is None else np.asarray(xi, dtype=float)
        self.g_shift = np.zeros(n_e) if g_shift is None else np.asarray(g_shift, dtype=float)
        self._mech = _Mechanics(model, model.contact_matrix)
        if variant == "arg_l1":
            cd = np.diag(C)
            self.slack_groups = {"ze": n_e, "zs": n_e}
            cost = [np.sqrt(cd), 1.0 / np.sqrt(cd)]
        elif variant == "residual_l1":
            self.slack_groups = {"z": n_e}
            cost = [np.ones(n_e) if weights.W_z is None else weights.W_z]
        else:
            self.slack_groups = {"y": self.n_mech, "z": n_e}
            cost = [
                np.ones(self.n_mech) if weights.W_y is None else weights.W_y,
                np.ones(n_e) if weights.W_z is None else weights.W_z,
            ]
        cost = [np.asarray(c, dtype=float) for c in cost]
        if any(np.any(c <= 0) for c in cost):
            raise InvalidInputError("l1 weights must be positive")
        self.n_slack = sum(self.slack_groups.values())
        self.n_var = n_q + 2 * n_e + 2 * self.n_slack
        self._cost = np.zeros(self.n_var)
        off = n_q + 2 * n_e
        self._slack_slices = {}
        for (name, size), c in zip(self.slack_groups.items(), cost):
            plus = slice(off, off + size)
            minus = slice(off + size, off + 2 * size)
            self._slack_slices[name] = (plus, minus)
            self._cost[plus] = c
            self._cost[minus] = c
            off += 2 * size
        x0 = np.zeros(self.n_var)
        x0[:n_q] = st.q_ref
        self.x0 = x0
        self.n_eq = self.n_mech + n_e

    def slack(self, x, name) -> np.ndarray:
        plus, minus = self._slack_slices[name]
        return x[plus] - x[minus]

    def _qes(self, x):
        n_q, n_e = self.n_q, self.n_e
        return x[:n_q], x[n_q : n_q + n_e], x[n_q + n_e : n_q + 2 * n_e]

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        return float(self._cost @ x), self._cost.copy()

    def objective_hessian(self, x):
        return np.zeros((self.n_var, self.n_var))

    def _g_args(self, x):
        q, e, s = self._qes(x)
        if self.variant == "arg_l1":
            return e - self.slack(x, "ze"), s - self.slack(x, "zs")
        return e, s

    def eq(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        q, e, s = self._qes(x)
        phi = self._mech.residual(q, e, s, self.xi)
        ge, gs = self._g_args(x)
        g = self.model.material.residual(ge, gs) + self.g_shift
        if self.variant in ("residual_l1", "full_l1"):
            g = g - self.slack(x, "z")
        if self.variant == "full_l1":
            phi = phi - self.slack(x, "y")
        return np.concatenate([phi, g])

    def eq_jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        q, e, s = self._qes(x)
        n_q, n_e, nm = self.n_q, self.n_e, self.n_mech
        J = np.zeros((self.n_eq, self.n_var))
        Jq, Je, Js, _ = self._mech.jacobian(q, s, self.xi)
        J[:nm, :n_q] = Jq
        J[:nm, n_q : n_q + n_e] = Je
        J[:nm, n_q + n_e : n_q + 2 * n_e] = Js
        ge, gs = self._g_args(x)
        g1, g2 = self.model.material.jacobian_diagonals(ge, gs)
        rows = np.arange(nm, nm + n_e)
        J[rows, n_q + np.arange(n_e)] = g1
        J[rows, n_q + n_e + np.arange(n_e)] = g2

        def put(name, row_idx, coeff):
            plus, minus = self._slack_slices[name]
            cols_p = np.arange(plus.start, plus.stop)
            cols_m = np.arange(minus.start, minus.stop)
            J[row_idx, cols_p] = coeff
            J[row_idx, cols_m] = -coeff

        if self.variant == "arg_l1":
            put("ze", rows, -g1)
            put("zs", rows, -g2)
        else:
            put("z", rows, -1.0)
        if self.variant == "full_l1":
            put("y", np.arange(nm), -1.0)
        return J

    def ineq(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.n_q + 2 * self.n_e :]

    def ineq_jacobian(self, x) -> np.ndarray:
        J = np.zeros((2 * self.n_slack, self.n_var))
        J[:, self.n_q + 2 * self.n_e :] = np.eye(2 * self.n_slack)
        return J

    def constraint_hessian(self, x, lam) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lam = np.asarray(lam, dtype=float)
        q, e, s = self._qes(x)
        n_q, n_e, nm = self.n_q, self.n_e, self.n_mech
        H = np.zeros((self.n_var, self.n_var))
        Hqq, Hsq, _ = self._mech.hessian(q, s, lam[:nm])
        H[:n_q, :n_q] = Hqq
        s_sl = slice(n_q + n_e, n_q + 2 * n_e)
        H[s_sl, :n_q] = Hsq
        H[:n_q, s_sl] = Hsq.T
        ge, gs = self._g_args(x)
        h1, h2 = self.model.material.hessian_diagonals(ge, gs)
        lg = lam[nm:]
        ie = n_q + np.arange(n_e)
        is_ = n_q + n_e + np.arange(n_e)
        if self.variant != "arg_l1":
            H[ie, ie] = lg * h1
            H[is_, is_] = lg * h2
            return H
        # g(e - ze, s - zs): second derivatives couple e with ze+ and ze-
        for base, (plus, minus), hd in (
            (ie, self._slack_slices["ze"], h1),
            (is_, self._slack_slices["zs"], h2),
        ):
            cp = np.arange(plus.start, plus.stop)
            cm = np.arange(minus.start, minus.stop)
            w = lg * hd
            for a, sa in ((base, 1.0), (cp, -1.0), (cm, 1.0)):
                for b, sb in ((base, 1.0), (cp, -1.0), (cm, 1.0)):
                    H[a, b] += sa * sb * w
        return H


def build_robust(variant: str, model: ContactModel, weights: RobustWeights | None = None, xi=None, g_shift=None) -> RobustProblem:
    return RobustProblem(variant, model, weights, xi, g_shift)
