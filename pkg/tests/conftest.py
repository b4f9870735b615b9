"""Shared fixtures: reference materials and cached meshes."""
import numpy as np
import pytest

from coreshell.fem import ElementData
from coreshell.materials import Material, PhysicalConstants, build_material_fields
from coreshell.mesh import (
    InitialCrack,
    MeshResolution,
    ParticleSpec,
    build_particle_mesh,
    rectangle_mesh,
)
from coreshell.verification import reference_materials


@pytest.fixture(scope="session")
def ref_materials():
    return reference_materials()


@pytest.fixture(scope="session")
def constants():
    return PhysicalConstants()


@pytest.fixture(scope="session")
def particle_mesh():
    """Reference geometry with a surface crack, coarse bands."""
    spec = ParticleSpec(4e-6, 0.8e-6, crack=InitialCrack("surface", 0.24e-6))
    res = MeshResolution.for_particle(spec, 0.23e-6, 0.27e-6, 1e-7, "coarse")
    mesh = build_particle_mesh(spec, res)
    return spec, mesh, ElementData(mesh.nodes, mesh.tris)


@pytest.fixture(scope="session")
def small_particle():
    """Small uncracked particle for cheap transport/mechanics tests."""
    spec = ParticleSpec(2e-6, 0.4e-6)
    res = MeshResolution.for_particle(spec, 0.3e-6, 0.3e-6, 1.5e-7, "coarse")
    mesh = build_particle_mesh(spec, res)
    return spec, mesh, ElementData(mesh.nodes, mesh.tris)


@pytest.fixture(scope="session")
def strip_mesh():
    mesh = rectangle_mesh(2e-6, 0.2e-6, 160, 4)
    return mesh, ElementData(mesh.nodes, mesh.tris, axisymmetric=False)


@pytest.fixture(scope="session")
def ref_fields(particle_mesh, ref_materials):
    spec, mesh, edata = particle_mesh
    core, shell = ref_materials
    return build_material_fields(mesh, edata, core, shell)


def make_uniform_material(ocp=None, **overrides) -> Material:
    params = dict(
        c_max=50000.0,
        partial_molar_volume=5e-7,
        diffusivity=3e-14,
        youngs_modulus=200e9,
        poisson=0.3,
        gc=0.3,
        ell=0.25e-6,
        ocp=ocp,
    )
    params.update(overrides)
    return Material(**params)
