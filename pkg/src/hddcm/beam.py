"""Geometrically exact beam with director kinematics on two-node elements.

Each node carries ``(x0, d1, d2, d3)`` in R^12.  The orthonormality of the
directors is kept as a constraint ``h(q) = 0`` and both end nodes are
clamped through the same constraint map.  All discrete strains are quadratic
forms in the 24 coordinates of an element, so the strain Jacobian is linear
in ``q`` and the second derivatives are constant element matrices.

Strains are sampled once per element at its midpoint; the internal virtual
work therefore carries the element length as quadrature weight,
``B(q)^T W s`` with ``W = diag(l_e)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import rank_estimate, RankReport, skew

NODE_DOF = 12
STRAINS_PER_ELEMENT = 6
_SQRT_HALF = np.sqrt(0.5)
VERTICAL = 2  # position component carrying the obstacle bounds


class TangentBasisError(ValueError):
    """Raised when the nullspace is requested at a kinematically infeasible point."""


@dataclass(frozen=True)
class BeamGeometry:
    arc_length: float = 1.0
    n_elements: int = 20
    plane: str = "xy"
    arc_fraction: float = np.pi / 2

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("need at least one element")
        if self.arc_length <= 0:
            raise ValueError("arc length must be positive")
        if self.plane != "xy":
            raise ValueError("only the horizontal 'xy' reference plane is supported")
        if not 0 < self.arc_fraction < 2 * np.pi:
            raise ValueError("arc_fraction must lie in (0, 2*pi)")

    @property
    def n_nodes(self) -> int:
        return self.n_elements + 1

    @property
    def element_length(self) -> float:
        return self.arc_length / self.n_elements

    @property
    def radius(self) -> float:
        return self.arc_length / self.arc_fraction


@dataclass(frozen=True)
class ReferenceStrains:
    """Per-element reference values; rows are ``(G1, G2, G3, K1, K2, K3)``."""

    values: np.ndarray

    @property
    def gamma0(self) -> np.ndarray:
        return self.values[:, :3]

    @property
    def kappa0(self) -> np.ndarray:
        return self.values[:, 3:]


@dataclass(frozen=True)
class ContactSpec:
    """Lower bounds on the vertical coordinate of selected inner nodes."""

    node_indices: tuple[int, ...]
    lower_bounds: tuple[float, ...]

    def __post_init__(self):
        if len(self.node_indices) != len(self.lower_bounds):
            raise ValueError("node_indices and lower_bounds differ in length")
        if any(b <= a for a, b in zip(self.node_indices, self.node_indices[1:])):
            raise ValueError("contact nodes must be strictly increasing")

    @property
    def n_c(self) -> int:
        return len(self.node_indices)


@dataclass(frozen=True)
class ForceProfile:
    """Nodal point forces (N) and an amplification factor."""

    nodal_forces: dict[int, tuple[float, float, float]] = field(default_factory=dict)
    gamma: float = 1.0

    def scaled(self, gamma: float) -> "ForceProfile":
        return ForceProfile(dict(self.nodal_forces), gamma)


def _element_strain_hessians(length: float) -> np.ndarray:
    """Constant symmetric matrices ``M_c`` with ``strain_c = u.M_c.u / 2 - ref_c``."""

    def sel(node: int, block: int) -> np.ndarray:
        S = np.zeros((3, 2 * NODE_DOF))
        start = node * NODE_DOF + 3 * block
        S[:, start : start + 3] = np.eye(3)
        return S

    x_prime = (sel(1, 0) - sel(0, 0)) / length
    d_mid = [(sel(0, i) + sel(1, i)) / 2 for i in (1, 2, 3)]
    d_prime = [(sel(1, i) - sel(0, i)) / length for i in (1, 2, 3)]

    bilinear = []
    for i in range(3):
        bilinear.append(x_prime.T @ d_mid[i])
    # K^i = 1/2 (<d_j', d_k> - <d_k', d_j>) for cyclic (i, j, k)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        bilinear.append(0.5 * (d_prime[j].T @ d_mid[k] - d_prime[k].T @ d_mid[j]))
    return np.array([P + P.T for P in bilinear])


class Beam:
    """Discrete curved beam clamped at both ends.

    The reference arc starts at the origin in the horizontal plane.  Directors
    per node: ``d3`` tangent, ``d2`` vertical, ``d1 = d2 x d3``.
    """

    def __init__(self, geometry: BeamGeometry | None = None):
        self.geometry = geometry or BeamGeometry()
        g = self.geometry
        self.n_nodes = g.n_nodes
        self.n_elements = g.n_elements
        self.n_q = NODE_DOF * self.n_nodes
        self.n_e = STRAINS_PER_ELEMENT * self.n_elements
        self.fixed_nodes = (0, self.n_nodes - 1)
        self.inner_nodes = tuple(range(1, self.n_nodes - 1))
        self.m = NODE_DOF * len(self.fixed_nodes) + 6 * len(self.inner_nodes)
        self.n = self.n_q - self.m
        self._M = _element_strain_hessians(g.element_length)
        self.quadrature_weights = np.full(self.n_e, g.element_length)
        self.q_ref, self.reference = build_reference(g, self._M)

    # -- layout helpers -------------------------------------------------
    def node_block(self, i: int) -> slice:
        return slice(NODE_DOF * i, NODE_DOF * (i + 1))

    def vertical_index(self, node: int) -> int:
        return NODE_DOF * node + VERTICAL

    def positions(self, q) -> np.ndarray:
        return np.asarray(q).reshape(self.n_nodes, NODE_DOF)[:, :3]

    def _element_coords(self, q) -> np.ndarray:
        Q = np.asarray(q, dtype=float).reshape(self.n_nodes, NODE_DOF)
        return np.concatenate([Q[:-1], Q[1:]], axis=1)

    # -- kinematics -----------------------------------------------------
    def kinematic_constraints(self, q) -> np.ndarray:
        """Clamping residuals of both end nodes, then six director conditions per inner node."""
        q = np.asarray(q, dtype=float)
        parts = [q[self.node_block(i)] - self.q_ref[self.node_block(i)] for i in self.fixed_nodes]
        D = q.reshape(self.n_nodes, NODE_DOF)[1:-1, 3:].reshape(-1, 3, 3)
        d1, d2, d3 = D[:, 0], D[:, 1], D[:, 2]
        ortho = np.stack(
            [
                np.einsum("ij,ij->i", d1, d1) - 1.0,
                np.einsum("ij,ij->i", d2, d2) - 1.0,
                np.einsum("ij,ij->i", d3, d3) - 1.0,
                np.einsum("ij,ij->i", d1, d2),
                np.einsum("ij,ij->i", d2, d3),
                np.einsum("ij,ij->i", d3, d1),
            ],
            axis=1,
        )
        return np.concatenate(parts + [ortho.ravel()])

    def kinematic_jacobian(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        H = np.zeros((self.m, self.n_q))
        row = 0
        for i in self.fixed_nodes:
            H[row : row + NODE_DOF, self.node_block(i)] = np.eye(NODE_DOF)
            row += NODE_DOF
        for i in self.inner_nodes:
            b = NODE_DOF * i
            d1, d2, d3 = (q[b + 3 : b + 6], q[b + 6 : b + 9], q[b + 9 : b + 12])
            c1, c2, c3 = b + 3, b + 6, b + 9
            H[row, c1 : c1 + 3] = 2 * d1
            H[row + 1, c2 : c2 + 3] = 2 * d2
            H[row + 2, c3 : c3 + 3] = 2 * d3
            H[row + 3, c1 : c1 + 3] = d2
            H[row + 3, c2 : c2 + 3] = d1
            H[row + 4, c2 : c2 + 3] = d3
            H[row + 4, c3 : c3 + 3] = d2
            H[row + 5, c3 : c3 + 3] = d1
            H[row + 5, c1 : c1 + 3] = d3
            row += 6
        return H

    def kinematic_hessian(self, q, lam) -> np.ndarray:
        """``sum_k lam_k * h_k''`` (constant in ``q``)."""
        Hs = np.zeros((self.n_q, self.n_q))
        lam = np.asarray(lam, dtype=float)
        off = NODE_DOF * len(self.fixed_nodes)
        pairs = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0))
        for a, i in enumerate(self.inner_nodes):
            b = NODE_DOF * i + 3
            for r, (u, v) in enumerate(pairs):
                w = lam[off + 6 * a + r]
                if u == v:
                    idx = slice(b + 3 * u, b + 3 * u + 3)
                    Hs[idx, idx] += 2 * w * np.eye(3)
                else:
                    iu = slice(b + 3 * u, b + 3 * u + 3)
                    iv = slice(b + 3 * v, b + 3 * v + 3)
                    Hs[iu, iv] += w * np.eye(3)
                    Hs[iv, iu] += w * np.eye(3)
        return Hs

    def nullspace(self, q, tol: float = 1e-8) -> np.ndarray:
        """Analytic tangent basis: translations plus infinitesimal rotations per inner node.

        Rotation columns are scaled by 1/sqrt(2) so the basis is orthonormal at
        feasible points.
        """
        q = np.asarray(q, dtype=float)
        h = self.kinematic_constraints(q)[NODE_DOF * len(self.fixed_nodes) :]
        if h.size and np.max(np.abs(h)) > tol:
            raise TangentBasisError(
                f"directors violate orthonormality by {np.max(np.abs(h)):.3e}"
            )
        return self._nullspace_unchecked(q)

    def _nullspace_unchecked(self, q) -> np.ndarray:
        N = np.zeros((self.n_q, self.n))
        for a, i in enumerate(self.inner_nodes):
            b, col = NODE_DOF * i, 6 * a
            N[b : b + 3, col : col + 3] = np.eye(3)
            for j in range(3):
                d = q[b + 3 + 3 * j : b + 6 + 3 * j]
                N[b + 3 + 3 * j : b + 6 + 3 * j, col + 3 : col + 6] = -_SQRT_HALF * skew(d)
        return N

    def project(self, q, a) -> np.ndarray:
        """``N(q)^T a`` evaluated without forming ``N``."""
        A = np.asarray(a, dtype=float).reshape(self.n_nodes, NODE_DOF)[1:-1]
        Q = np.asarray(q, dtype=float).reshape(self.n_nodes, NODE_DOF)[1:-1]
        rot = sum(np.cross(Q[:, 3 + 3 * j : 6 + 3 * j], A[:, 3 + 3 * j : 6 + 3 * j]) for j in range(3))
        return np.concatenate([A[:, :3], _SQRT_HALF * rot], axis=1).ravel()

    def nullspace_derivative(self, q, a) -> np.ndarray:
        """``W(q, a) = d/dq (N(q)^T a)`` for fixed ``a``."""
        a = np.asarray(a, dtype=float)
        W = np.zeros((self.n, self.n_q))
        for k, i in enumerate(self.inner_nodes):
            b, row = NODE_DOF * i, 6 * k
            for j in range(3):
                aj = a[b + 3 + 3 * j : b + 6 + 3 * j]
                W[row + 3 : row + 6, b + 3 + 3 * j : b + 6 + 3 * j] = -_SQRT_HALF * skew(aj)
        return W

    def nullspace_action_jacobian(self, q, lam) -> np.ndarray:
        """``d/dq (N(q) lam)`` for fixed ``lam``; constant since ``N`` is linear in ``q``."""
        lam = np.asarray(lam, dtype=float)
        J = np.zeros((self.n_q, self.n_q))
        for k, i in enumerate(self.inner_nodes):
            b = NODE_DOF * i
            block = _SQRT_HALF * skew(lam[6 * k + 3 : 6 * k + 6])
            for j in range(3):
                sl = slice(b + 3 + 3 * j, b + 6 + 3 * j)
                J[sl, sl] = block
        return J

    # -- strains --------------------------------------------------------
    def strains(self, q, ref: ReferenceStrains | None = None) -> np.ndarray:
        ref = self.reference if ref is None else ref
        U = self._element_coords(q)
        e = 0.5 * np.einsum("ki,cij,kj->kc", U, self._M, U)
        return (e - ref.values).ravel()

    def strain_jacobian(self, q) -> np.ndarray:
        U = self._element_coords(q)
        rows = np.einsum("cij,kj->kci", self._M, U)
        B = np.zeros((self.n_e, self.n_q))
        for k in range(self.n_elements):
            B[6 * k : 6 * k + 6, NODE_DOF * k : NODE_DOF * (k + 2)] = rows[k]
        return B

    def strain_jacobian_action(self, v) -> np.ndarray:
        """``d/dq (B(q) v)`` for fixed ``v``; equals ``B(v)`` since ``B`` is linear."""
        return self.strain_jacobian(v)

    def strain_hessian(self, q, s) -> np.ndarray:
        """``d/dq (B(q)^T s)``; independent of ``q`` since strains are quadratic."""
        S = np.asarray(s, dtype=float).reshape(self.n_elements, STRAINS_PER_ELEMENT)
        blocks = np.einsum("kc,cij->kij", S, self._M)
        K = np.zeros((self.n_q, self.n_q))
        for k in range(self.n_elements):
            sl = slice(NODE_DOF * k, NODE_DOF * (k + 2))
            K[sl, sl] += blocks[k]
        return K

    # -- loads and obstacles -------------------------------------------
    def force_vector(self, force: ForceProfile) -> np.ndarray:
        f = np.zeros(self.n_q)
        for node, vec in force.nodal_forces.items():
            if node in self.fixed_nodes:
                raise ValueError(f"force applied at clamped node {node}")
            f[NODE_DOF * node : NODE_DOF * node + 3] += force.gamma * np.asarray(vec, dtype=float)
        return f

    def contact_selector(self, spec: ContactSpec) -> np.ndarray:
        C = np.zeros((spec.n_c, self.n_q))
        for j, node in enumerate(spec.node_indices):
            if node in self.fixed_nodes or not 0 <= node < self.n_nodes:
                raise ValueError(f"contact node {node} is not an inner node")
            C[j, self.vertical_index(node)] = 1.0
        return C

    def contact_constraints(self, q, spec: ContactSpec) -> tuple[np.ndarray, np.ndarray]:
        C = self.contact_selector(spec)
        c = C @ np.asarray(q, dtype=float) - np.asarray(spec.lower_bounds, dtype=float)
        return c, C

    # -- equilibrium ----------------------------------------------------
    def equilibrium_residual(self, q, s, f, xi=None, C=None) -> np.ndarray:
        """``N(q)^T (B(q)^T s - f - C^T xi)``.

        ``f`` is either a ``ForceProfile`` or an assembled nodal vector.
        """
        if isinstance(f, ForceProfile):
            f = self.force_vector(f)
        ws = self.quadrature_weights * np.asarray(s, dtype=float)
        a = self.strain_jacobian(q).T @ ws - f
        if xi is not None and C is not None and len(xi):
            a = a - C.T @ np.asarray(xi, dtype=float)
        return self.project(q, a)

    def rank_conditions(self, q, s, f, rel_tol: float = 1e-10) -> RankReport:
        """Rank of ``[D(q,s) N(q) | N(q)^T B(q)^T]``."""
        if isinstance(f, ForceProfile):
            f = self.force_vector(f)
        D, N, B = stiffness_blocks(self, q, s, f)
        return rank_estimate(np.hstack([D @ N, N.T @ B.T]), rel_tol)


def stiffness_blocks(structure, q, s, f):
    """``(D, N, BW)`` with ``D = N^T d_q(B^T W s) + W(q, B^T W s - f)``.

    The third entry is the strain Jacobian with quadrature weights folded
    in, so ``N^T (BW)^T`` is the stress block of the equilibrium Jacobian.
    """
    q = np.asarray(q, dtype=float)
    ws = structure.quadrature_weights * np.asarray(s, dtype=float)
    N = structure._nullspace_unchecked(q)
    B = structure.strain_jacobian(q) * structure.quadrature_weights[:, None]
    D = N.T @ structure.strain_hessian(q, ws) + structure.nullspace_derivative(
        q, structure.strain_jacobian(q).T @ ws - f
    )
    return D, N, B


def build_reference(geometry: BeamGeometry, M: np.ndarray | None = None):
    """Reference configuration on the circular arc and strain offsets making ``e(q_ref) = 0``."""
    g = geometry
    R = g.radius
    theta = np.linspace(0.0, g.arc_fraction, g.n_nodes)
    x0 = np.stack([R * np.sin(theta), R * (1.0 - np.cos(theta)), np.zeros_like(theta)], axis=1)
    d3 = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(theta)], axis=1)
    d2 = np.tile([0.0, 0.0, 1.0], (g.n_nodes, 1))
    d1 = np.cross(d2, d3)
    q_ref = np.concatenate([x0, d1, d2, d3], axis=1).ravel()
    if M is None:
        M = _element_strain_hessians(g.element_length)
    Q = q_ref.reshape(g.n_nodes, NODE_DOF)
    U = np.concatenate([Q[:-1], Q[1:]], axis=1)
    values = 0.5 * np.einsum("ki,cij,kj->kc", U, M, U)
    return q_ref, ReferenceStrains(values)
