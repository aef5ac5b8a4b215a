"""Single two-node rod on the real line: the two closed-form sanity cases.

``q = (x1, x2)``; the left end is held at the origin by ``h(q) = x1``.
Example 1 uses the linear strain ``(x2 - x1)/l - 1``, example 2 the
Green-type strain ``((x2 - x1)^2/l^2 - 1)/2``.  Both use the linear law
``s = c e``.
"""

from __future__ import annotations

import numpy as np

from .materials import MaterialLaw, SystemMaterial


class Rod:
    n_q = 2
    n_e = 1
    m = 1
    n = 1

    def __init__(self, example: int, length: float = 1.0, stiffness: float = 1.0):
        if example not in (1, 2):
            raise ValueError("example must be 1 or 2")
        self.example = example
        self.length = float(length)
        self.stiffness = float(stiffness)
        self.q_ref = np.array([0.0, self.length])
        self.quadrature_weights = np.ones(1)
        self.fixed_nodes = (0,)

    @property
    def material(self) -> SystemMaterial:
        return SystemMaterial.uniform(MaterialLaw("linear", (self.stiffness,)), 1)

    def kinematic_constraints(self, q) -> np.ndarray:
        return np.array([q[0]])

    def kinematic_jacobian(self, q) -> np.ndarray:
        return np.array([[1.0, 0.0]])

    def kinematic_hessian(self, q, lam) -> np.ndarray:
        return np.zeros((2, 2))

    def nullspace(self, q) -> np.ndarray:
        return np.array([[0.0], [1.0]])

    _nullspace_unchecked = nullspace

    def project(self, q, a) -> np.ndarray:
        return np.array([a[1]])

    def nullspace_derivative(self, q, a) -> np.ndarray:
        return np.zeros((1, 2))

    def nullspace_action_jacobian(self, q, lam) -> np.ndarray:
        return np.zeros((2, 2))

    def strains(self, q) -> np.ndarray:
        x1, x2 = q
        ratio = (x2 - x1) / self.length
        if self.example == 1:
            return np.array([ratio - 1.0])
        return np.array([0.5 * (ratio**2 - 1.0)])

    def strain_jacobian(self, q) -> np.ndarray:
        x1, x2 = q
        l = self.length
        if self.example == 1:
            return np.array([[-1.0 / l, 1.0 / l]])
        return (x2 - x1) / l**2 * np.array([[-1.0, 1.0]])

    def strain_jacobian_action(self, v) -> np.ndarray:
        if self.example == 1:
            return np.zeros((1, 2))
        return self.strain_jacobian(v)

    def strain_hessian(self, q, s) -> np.ndarray:
        if self.example == 1:
            return np.zeros((2, 2))
        return s[0] / self.length**2 * np.array([[1.0, -1.0], [-1.0, 1.0]])

    def force_vector(self, f2: float) -> np.ndarray:
        return np.array([0.0, float(f2)])

    def closed_form(self, f2: float) -> float:
        """Physical root ``x2`` of the reduced equilibrium with ``x1 = 0``."""
        c, l = self.stiffness, self.length
        if self.example == 1:
            return l * (1.0 + l * f2 / c)
        # (x2/l^2) * c/2 * (x2^2/l^2 - 1) = f2
        roots = np.roots([1.0, 0.0, -(l**2), -2.0 * l**4 * f2 / c])
        real = roots[np.abs(roots.imag) < 1e-9].real
        return float(real[np.argmin(np.abs(real - l))]) if f2 == 0 else float(real.max())

    def prop_matrix(self, q, s, f2: float) -> np.ndarray:
        """``[D N | N^T B^T]`` from the rank proposition, here 1 x 2."""
        N = self.nullspace(q)
        B = self.strain_jacobian(q)
        D = N.T @ self.strain_hessian(q, s) + self.nullspace_derivative(q, B.T @ s - self.force_vector(f2))
        return np.hstack([D @ N, N.T @ B.T])
