"""Registry of the benchmark obstacles, load profile and experiment configs."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .beam import Beam, BeamGeometry, ContactSpec, ForceProfile
from .materials import LAWS, SystemMaterial
from .nlp import ContactModel, ProximityWeights
from .quickshot import QuickShotSettings
from .sqp import SqpSettings

OBSTACLES = {
    "tip": ContactSpec((10,), (-0.1,)),
    "plane": ContactSpec(tuple(range(4, 17)), (-0.05,) * 13),
    "hemisphere": ContactSpec(tuple(range(7, 14)), (-0.14, -0.16, -0.175, -0.18, -0.175, -0.16, -0.14)),
}

# downward nodal forces before amplification
FORCE_MAGNITUDES = {7: 2.0, 8: 4.0, 9: 6.0, 10: 6.0, 11: 6.0, 12: 4.0, 13: 2.0}


def force_profile(gamma: float) -> ForceProfile:
    return ForceProfile({k: (0.0, 0.0, -v) for k, v in FORCE_MAGNITUDES.items()}, gamma)


@dataclass
class ExperimentSpec:
    obstacle: str = "tip"
    material: str = "symmetric"
    gamma: float = 1.0
    tol_sqp: float = 1e-7
    tol_qp: float = 1.49e-8
    hessian: str = "gauss_newton"
    max_iterations: int = 300
    # overrides the registered bounds, e.g. alternative hemisphere depths
    lower_bounds: tuple[float, ...] | None = None
    n_elements: int = 20
    # "identity" or "stiffness" (block-diagonal copies of A)
    proximity: str = "identity"
    out: str | None = None
    extensions: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.obstacle not in OBSTACLES:
            raise ValueError(f"unknown obstacle {self.obstacle!r}; choose from {sorted(OBSTACLES)}")
        if self.material not in LAWS:
            raise ValueError(f"unknown material {self.material!r}; choose from {sorted(LAWS)}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.proximity not in ("identity", "stiffness"):
            raise ValueError("proximity must be 'identity' or 'stiffness'")
        if self.lower_bounds is not None:
            self.lower_bounds = tuple(float(b) for b in self.lower_bounds)
            if len(self.lower_bounds) != OBSTACLES[self.obstacle].n_c:
                raise ValueError("lower_bounds length does not match the obstacle")

    @classmethod
    def from_json(cls, path: str | Path, **overrides) -> "ExperimentSpec":
        raw = json.loads(Path(path).read_text())
        ext = raw.pop("extensions", {}) or {}
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw, extensions=ext)

    def with_gamma(self, gamma: float) -> "ExperimentSpec":
        return replace(self, gamma=gamma)

    def contact(self) -> ContactSpec:
        spec = OBSTACLES[self.obstacle]
        if self.lower_bounds is not None:
            spec = ContactSpec(spec.node_indices, self.lower_bounds)
        return spec

    def settings(self) -> QuickShotSettings:
        sqp = SqpSettings(
            tol_sqp=self.tol_sqp,
            tol_qp=self.tol_qp,
            hessian=self.hessian,
            max_iterations=self.max_iterations,
            **self.extensions.get("sqp", {}),
        )
        qs = {k: v for k, v in self.extensions.items() if k in ("tol_obj", "tol_comp")}
        return QuickShotSettings(sqp=sqp, **qs)

    def model(self, beam: Beam | None = None) -> ContactModel:
        beam = beam or Beam(BeamGeometry(n_elements=self.n_elements))
        material = SystemMaterial.uniform(LAWS[self.material], beam.n_elements)
        weights = (
            ProximityWeights.from_material(material)
            if self.proximity == "stiffness"
            else ProximityWeights.identity(beam.n_e)
        )
        return ContactModel.for_beam(beam, material, self.contact(), force_profile(self.gamma), weights)

    def to_dict(self) -> dict:
        return asdict(self)
