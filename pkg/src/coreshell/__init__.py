"""Chemo-mechano-damage simulation of core-shell cathode particles.

The package couples stress-assisted lithium diffusion, degraded elasticity
and phase-field fracture on axisymmetric particle meshes, runs CC-CV
lithiation protocols and reports cracking patterns and capacity metrics.
"""

__version__ = "0.1.0"

from .driver import Protocol, RunResult, Simulation, SolverSettings
from .interface import InterfaceParams
from .materials import Material, OcpCurve, PhysicalConstants, builtin_ocp
from .mesh import InitialCrack, Mesh, MeshResolution, ParticleSpec, build_particle_mesh

__all__ = [
    "InitialCrack",
    "InterfaceParams",
    "Material",
    "Mesh",
    "MeshResolution",
    "OcpCurve",
    "ParticleSpec",
    "PhysicalConstants",
    "Protocol",
    "RunResult",
    "Simulation",
    "SolverSettings",
    "build_particle_mesh",
    "builtin_ocp",
    "__version__",
]
