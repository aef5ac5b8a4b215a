"""Hybrid data-driven contact problems on a geometrically exact beam."""

from .beam import Beam, BeamGeometry, ContactSpec, ForceProfile
from .materials import ASYMMETRIC, SYMMETRIC, MaterialLaw, SystemMaterial
from .nlp import ContactModel, NlpProblem, ProximityWeights, build_robust, build_stage, verify_mpcc
from .sqp import SqpSettings, WarmStart, solve

__all__ = [
    "ASYMMETRIC",
    "Beam",
    "BeamGeometry",
    "ContactModel",
    "ContactSpec",
    "ForceProfile",
    "MaterialLaw",
    "NlpProblem",
    "ProximityWeights",
    "SYMMETRIC",
    "SqpSettings",
    "SystemMaterial",
    "WarmStart",
    "build_robust",
    "build_stage",
    "solve",
    "verify_mpcc",
]
