"""Constitutive manifolds ``g(e_hat, s_hat) = 0`` and Voigt packing.

Every law here acts component-wise, so both partial Jacobians are diagonal;
they are returned as diagonal vectors by the ``*_diagonals`` helpers and as
dense matrices by :func:`g_jacobians`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .numerics import InvalidInputError

VOIGT_SIZE = {1: 1, 2: 3, 3: 6}
# (row, col) pairs in packing order
_VOIGT_ORDER = {
    1: [(0, 0)],
    2: [(0, 0), (1, 1), (1, 0)],
    3: [(0, 0), (1, 1), (2, 2), (2, 1), (2, 0), (1, 0)],
}

BEAM_STIFFNESS = np.array([75.0, 75.0, 100.0, 100.0, 100.0, 200.0])
ASYMMETRIC_COEFF = 0.0075


class MaterialConfigurationError(ValueError):
    pass


def voigt_pack(E) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    if E.ndim != 2 or E.shape[0] != E.shape[1] or E.shape[0] not in VOIGT_SIZE:
        raise InvalidInputError(f"expected a 1x1, 2x2 or 3x3 matrix, got {E.shape}")
    if not np.allclose(E, E.T, rtol=0.0, atol=1e-12):
        raise InvalidInputError("tensor is not symmetric")
    return np.array([E[i, j] for i, j in _VOIGT_ORDER[E.shape[0]]])


def voigt_unpack(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    dims = {n: d for d, n in VOIGT_SIZE.items()}
    if v.size not in dims:
        raise InvalidInputError(f"no Voigt layout has {v.size} entries")
    d = dims[v.size]
    E = np.zeros((d, d))
    for val, (i, j) in zip(v, _VOIGT_ORDER[d]):
        E[i, j] = E[j, i] = val
    return E


@dataclass(frozen=True)
class MaterialLaw:
    """One constitutive manifold with diagonal stiffness ``A``.

    ``symmetric_explicit``:   g = s - A e - A e^3 / 3
    ``asymmetric_implicit``:  g = e - A^-1 s - 0.0075 A^-1 s^2
    ``linear``:               g = s - A e
    """

    kind: str
    stiffness: tuple[float, ...] = tuple(BEAM_STIFFNESS)

    KINDS = ("symmetric_explicit", "asymmetric_implicit", "linear")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise MaterialConfigurationError(f"unknown material kind {self.kind!r}")
        if any(a <= 0 for a in self.stiffness):
            raise MaterialConfigurationError("stiffness entries must be positive")

    @property
    def A(self) -> np.ndarray:
        return np.asarray(self.stiffness, dtype=float)

    @property
    def dim(self) -> int:
        return len(self.stiffness)

    def residual(self, e, s) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        s = np.asarray(s, dtype=float)
        A = self.A
        if self.kind == "symmetric_explicit":
            return s - A * e - A * e**3 / 3.0
        if self.kind == "asymmetric_implicit":
            return e - s / A - ASYMMETRIC_COEFF * s**2 / A
        return s - A * e

    def jacobian_diagonals(self, e, s) -> tuple[np.ndarray, np.ndarray]:
        e = np.asarray(e, dtype=float)
        s = np.asarray(s, dtype=float)
        A = np.broadcast_to(self.A, e.shape)
        if self.kind == "symmetric_explicit":
            return -A * (1.0 + e**2), np.ones_like(s)
        if self.kind == "asymmetric_implicit":
            return np.ones_like(e), -(1.0 + 2 * ASYMMETRIC_COEFF * s) / A
        return -A.copy(), np.ones_like(s)

    def hessian_diagonals(self, e, s) -> tuple[np.ndarray, np.ndarray]:
        """Pure second derivatives ``(d2g/de2, d2g/ds2)``; mixed terms vanish."""
        e = np.asarray(e, dtype=float)
        s = np.asarray(s, dtype=float)
        A = np.broadcast_to(self.A, e.shape)
        zero = np.zeros(np.broadcast_shapes(e.shape, A.shape))
        if self.kind == "symmetric_explicit":
            return -2.0 * A * e, zero
        if self.kind == "asymmetric_implicit":
            return zero, -2 * ASYMMETRIC_COEFF / A
        return zero, zero

    def stress_from_strain(self, e) -> np.ndarray:
        """Point on the manifold above ``e`` (explicit and linear laws only)."""
        if self.kind == "asymmetric_implicit":
            raise MaterialConfigurationError("asymmetric law defines strain from stress")
        e = np.asarray(e, dtype=float)
        return -self.residual(e, np.zeros_like(e))

    def strain_from_stress(self, s) -> np.ndarray:
        if self.kind != "asymmetric_implicit":
            raise MaterialConfigurationError("only the asymmetric law is explicit in stress")
        s = np.asarray(s, dtype=float)
        return -self.residual(np.zeros_like(s), s)


SYMMETRIC = MaterialLaw("symmetric_explicit")
ASYMMETRIC = MaterialLaw("asymmetric_implicit")

LAWS = {"symmetric": SYMMETRIC, "asymmetric": ASYMMETRIC}


def g_eval(law: MaterialLaw, e, s) -> np.ndarray:
    return law.residual(e, s)


def g_jacobians(law: MaterialLaw, e, s) -> tuple[np.ndarray, np.ndarray]:
    g1, g2 = law.jacobian_diagonals(e, s)
    return np.diag(np.ravel(g1)), np.diag(np.ravel(g2))


class SystemMaterial:
    """Stacks per-point laws into the system map ``g = (g_k)_k``.

    ``assignment[k]`` names the law at evaluation point ``k``; ``laws`` maps
    names to :class:`MaterialLaw`.
    """

    def __init__(self, assignment: Sequence[str], laws: dict[str, MaterialLaw]):
        missing = sorted({a for a in assignment if a not in laws})
        if missing:
            raise MaterialConfigurationError(f"no law registered for {missing}")
        self.assignment = tuple(assignment)
        self.laws = dict(laws)
        self.dims = np.array([laws[a].dim for a in assignment])
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)])
        self.n_e = int(self.offsets[-1])
        self._groups = {}
        for name in laws:
            idx = [
                np.arange(self.offsets[k], self.offsets[k + 1])
                for k, a in enumerate(self.assignment)
                if a == name
            ]
            if idx:
                self._groups[name] = np.concatenate(idx)

    @classmethod
    def uniform(cls, law: MaterialLaw, n_points: int) -> "SystemMaterial":
        return cls(["m"] * n_points, {"m": law})

    def _map(self, fn, e, s):
        e = np.asarray(e, dtype=float)
        s = np.asarray(s, dtype=float)
        if e.shape != (self.n_e,) or s.shape != (self.n_e,):
            raise InvalidInputError(f"expected vectors of length {self.n_e}")
        outs = None
        for name, idx in self._groups.items():
            law = self.laws[name]
            k = idx.size // law.dim
            res = fn(law, e[idx].reshape(k, law.dim), s[idx].reshape(k, law.dim))
            if not isinstance(res, tuple):
                res = (res,)
            if outs is None:
                outs = [np.empty(self.n_e) for _ in res]
            for o, r in zip(outs, res):
                o[idx] = np.ravel(r)
        return outs

    def residual(self, e, s) -> np.ndarray:
        return self._map(lambda law, a, b: law.residual(a, b), e, s)[0]

    def jacobian_diagonals(self, e, s) -> tuple[np.ndarray, np.ndarray]:
        g1, g2 = self._map(lambda law, a, b: law.jacobian_diagonals(a, b), e, s)
        return g1, g2

    def hessian_diagonals(self, e, s) -> tuple[np.ndarray, np.ndarray]:
        h1, h2 = self._map(lambda law, a, b: law.hessian_diagonals(a, b), e, s)
        return h1, h2

    def stiffness_diagonal(self) -> np.ndarray:
        return np.concatenate([self.laws[a].A for a in self.assignment])


def compose_system_g(assignment: Sequence[str], laws: dict[str, MaterialLaw], e, s) -> np.ndarray:
    return SystemMaterial(assignment, laws).residual(e, s)


@dataclass
class DataSetSpec:
    """Measured strain-stress pairs per material; the full set is their product over points.

    Passive container only: building a manifold from these points is not part
    of this package.
    """

    points: dict[str, list[tuple[np.ndarray, np.ndarray]]]

    def validate(self) -> None:
        for material_id, pts in self.points.items():
            for e, s in pts:
                if len(e) != len(s) or len(e) not in VOIGT_SIZE.values():
                    raise InvalidInputError(
                        f"material {material_id!r}: bad point dimensions {len(e)}/{len(s)}"
                    )

    def product_size(self, assignment: Sequence[str]) -> int:
        """Cardinality of the cartesian product over evaluation points."""
        size = 1
        for a in assignment:
            size *= len(self.points[a])
        return size

    def to_json(self) -> str:
        return json.dumps(
            [
                {"material_id": mid, "points": [[list(map(float, e)), list(map(float, s))] for e, s in pts]}
                for mid, pts in self.points.items()
            ]
        )

    @classmethod
    def from_json(cls, text: str) -> "DataSetSpec":
        raw = json.loads(text)
        points = {}
        for entry in raw:
            points[entry["material_id"]] = [
                (np.asarray(e, dtype=float), np.asarray(s, dtype=float)) for e, s in entry["points"]
            ]
        spec = cls(points)
        spec.validate()
        return spec

    @classmethod
    def load(cls, path: str | Path) -> "DataSetSpec":
        return cls.from_json(Path(path).read_text())
