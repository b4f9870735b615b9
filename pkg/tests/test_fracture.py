"""History field, crack seeding and the damage solve."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from coreshell.fem import ElementData
from coreshell.fracture import (
    SEED_AMPLITUDE,
    degradation,
    seed_initial_crack,
    solve_phase_field,
    update_history,
)
from coreshell.mesh import InitialCrack, MeshResolution, ParticleSpec, build_particle_mesh, rectangle_mesh


class TestDegradation:
    def test_endpoints(self):
        assert np.isclose(degradation(0.0), 1.0 + 1e-6)
        assert np.isclose(degradation(1.0), 1e-6)
        assert np.isclose(degradation(0.5), 0.250001)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=0.0, max_value=1.0))
    def test_monotone_decreasing(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert degradation(hi) <= degradation(lo) + 1e-15


class TestHistory:
    def test_examples(self):
        assert update_history(np.array([0.0]), np.array([3.0]))[0] == 3.0
        assert update_history(np.array([5.0]), np.array([3.0]))[0] == 5.0

    @settings(max_examples=20, deadline=None)
    @given(
        arrays(float, (4, 3), elements=st.floats(0, 1e12)),
        arrays(float, (4, 3), elements=st.floats(0, 1e12)),
    )
    def test_pointwise_max(self, h_old, psi):
        out = update_history(h_old, psi)
        brute = np.array(
            [[max(h_old[i, j], psi[i, j]) for j in range(3)] for i in range(4)]
        )
        assert np.array_equal(out, brute)


@pytest.fixture(scope="module")
def cracked_particle():
    spec = ParticleSpec(4e-6, 0.8e-6, crack=InitialCrack("surface", 0.24e-6))
    res = MeshResolution.for_particle(spec, 0.23e-6, 0.27e-6, 1e-7, "coarse")
    mesh = build_particle_mesh(spec, res)
    return spec, mesh, ElementData(mesh.nodes, mesh.tris)


class TestSeeding:
    def test_profile_matches_gaussian(self, cracked_particle):
        spec, mesh, edata = cracked_particle
        ell_val = 0.25e-6
        ell = np.full(mesh.n_elems, ell_val)
        h = seed_initial_crack(spec, edata, ell)
        r_qp = edata.qp_xy[:, :, 0]
        z_qp = edata.qp_xy[:, :, 1]
        band = spec.crack_band()
        inside = (r_qp >= band[0]) & (r_qp <= band[1])
        expected = np.where(inside, SEED_AMPLITUDE * np.exp(-100.0 * (z_qp / ell_val) ** 2), 0.0)
        assert np.allclose(h, expected, rtol=1e-12, atol=0.0)
        # quadrature points nearest the plane carry nearly the full amplitude
        near = inside & (np.abs(z_qp) < 0.05 * ell_val)
        assert near.any()
        assert h[near].min() > 0.75 * SEED_AMPLITUDE

    def test_off_plane_decay(self):
        # the profile at one length off the plane is alpha0 * exp(-100)
        ell = 0.25e-6
        ratio = np.exp(-100.0)
        assert np.isclose(SEED_AMPLITUDE * ratio, 3.72e-32, rtol=1e-2)

    def test_no_crack_gives_zero_field(self):
        spec = ParticleSpec(4e-6, 0.8e-6)
        res = MeshResolution.for_particle(spec, 0.4e-6, 0.4e-6, 2e-7, "coarse")
        mesh = build_particle_mesh(spec, res)
        edata = ElementData(mesh.nodes, mesh.tris)
        h = seed_initial_crack(spec, edata, np.full(mesh.n_elems, 0.25e-6))
        assert np.all(h == 0.0)

    def test_band_is_radially_bounded(self, cracked_particle):
        spec, mesh, edata = cracked_particle
        ell = np.full(mesh.n_elems, 0.25e-6)
        h = seed_initial_crack(spec, edata, ell)
        r_qp = edata.qp_xy[:, :, 0]
        outside = r_qp < spec.crack_band()[0] - 1e-12
        assert np.all(h[outside] == 0.0)


class TestPhaseFieldSolve:
    def test_zero_history_zero_damage(self, cracked_particle):
        spec, mesh, edata = cracked_particle
        gc = np.full(mesh.n_nodes, 0.3)
        ell = np.full(mesh.n_elems, 0.25e-6)
        phi = solve_phase_field(edata, np.zeros((edata.n_elems, edata.n_qp)), gc, ell)
        assert np.abs(phi).max() < 1e-12

    def test_homogeneous_solution_over_six_decades(self, cracked_particle):
        spec, mesh, edata = cracked_particle
        gc_val, ell_val = 0.299, 0.23e-6
        gc = np.full(mesh.n_nodes, gc_val)
        ell = np.full(mesh.n_elems, ell_val)
        for h_val in np.logspace(2, 8, 7):
            h = np.full((edata.n_elems, edata.n_qp), h_val)
            phi = solve_phase_field(edata, h, gc, ell)
            expected = 2 * h_val / (gc_val / ell_val + 2 * h_val)
            assert np.abs(phi - expected).max() < 1e-6

    def test_seeded_crack_saturates(self, cracked_particle):
        spec, mesh, edata = cracked_particle
        gc = np.full(mesh.n_nodes, 0.299)
        ell = np.full(mesh.n_elems, 0.23e-6)
        h = seed_initial_crack(spec, edata, ell)
        phi = solve_phase_field(edata, h, gc, ell)
        band = spec.crack_band()
        seeded = (
            (np.abs(mesh.nodes[:, 1]) < 0.05 * 0.23e-6)
            & (mesh.nodes[:, 0] > band[0] + 0.02e-6)
            & (mesh.nodes[:, 0] < band[1] - 0.02e-6)
        )
        assert phi[seeded].min() > 0.999
        far = mesh.rho < 2e-6
        assert phi[far].max() < 1e-4
        assert phi.min() > -1e-3 and phi.max() < 1.0 + 1e-3

    def test_crack_profile_decays_with_length_scale(self):
        """Away from the driven band the profile follows exp(-|x|/ell)."""
        ell_val = 0.25e-6
        mesh = rectangle_mesh(3e-6, 0.4e-6, 240, 4)
        edata = ElementData(mesh.nodes, mesh.tris, axisymmetric=False)
        gc = np.full(mesh.n_nodes, 0.3)
        ell = np.full(mesh.n_elems, ell_val)
        x_qp = edata.qp_xy[:, :, 0]
        h = np.where(x_qp < 0.05e-6, 1e12, 0.0)
        phi = solve_phase_field(edata, h, gc, ell)
        x = mesh.nodes[:, 0]
        on_line = np.abs(mesh.nodes[:, 1] - 0.2e-6) < 1e-12
        probes = [0.5e-6, 1.0e-6, 1.5e-6]
        vals = [phi[on_line & (np.abs(x - p) < 1e-12)].mean() for p in probes]
        for (p0, v0), (p1, v1) in zip(zip(probes, vals), list(zip(probes, vals))[1:]):
            expected_ratio = np.exp(-(p1 - p0) / ell_val)
            assert abs(v1 / v0 - expected_ratio) / expected_ratio < 0.03
