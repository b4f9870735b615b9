"""Degraded elasticity with chemical eigenstrain against closed forms."""
import numpy as np
import pytest

from coreshell.fem import ElementData
from coreshell.materials import Material, build_material_fields
from coreshell.mechanics import (
    MechanicsSolver,
    chemical_strain,
    degraded_stress,
    split_energy,
)
from coreshell.verification import lame_misfit_solution

from conftest import make_uniform_material


class TestChemicalStrain:
    def test_zero_at_reference(self):
        assert chemical_strain(1000.0, 1000.0, 7.88e-7) == 0.0

    def test_direct_arithmetic(self):
        val = chemical_strain(3e4, 0.0, 7.88e-7)
        assert np.isclose(val, 7.88e-3)

    def test_delithiation_contracts(self):
        assert chemical_strain(500.0, 1000.0, 7.88e-7) < 0.0


class TestSplitEnergy:
    K, G = 150e9, 90e9

    def test_pure_dilation_is_tensile(self):
        d = 1e-3
        eps = np.array([d, d, d, 0.0])
        psi_p, psi_m = split_energy(eps, 0.0, self.K, self.G)
        assert np.isclose(psi_p, 0.5 * self.K * (3 * d) ** 2)
        assert psi_m == 0.0

    def test_pure_compression_is_compressive(self):
        d = -1e-3
        eps = np.array([d, d, d, 0.0])
        psi_p, psi_m = split_energy(eps, 0.0, self.K, self.G)
        assert psi_p == 0.0
        assert np.isclose(psi_m, 0.5 * self.K * (3 * d) ** 2)

    def test_pure_shear_is_tensile(self):
        s = 2e-3
        eps = np.array([0.0, 0.0, 0.0, 2.0 * s])  # gamma_rz = 2 eps_rz
        psi_p, psi_m = split_energy(eps, 0.0, self.K, self.G)
        assert np.isclose(psi_p, 2.0 * self.G * s**2)
        assert psi_m == 0.0

    def test_split_sums_to_total_energy(self):
        rng = np.random.default_rng(7)
        eps = rng.normal(scale=1e-3, size=(200, 4))
        eps_li = rng.normal(scale=5e-4, size=200)
        psi_p, psi_m = split_energy(eps, eps_li, self.K, self.G)
        sigma0, _ = degraded_stress(eps, eps_li, self.K, self.G, np.ones(200))
        e = eps.copy()
        e[:, :3] -= eps_li[:, None]
        # contraction with the engineering-shear Voigt convention
        total = 0.5 * (np.sum(sigma0[:, :3] * e[:, :3], axis=1) + sigma0[:, 3] * e[:, 3])
        assert np.allclose(psi_p + psi_m, total, rtol=1e-10, atol=1e-16)

    def test_degradation_scales_tensile_branch(self):
        d = 1e-3
        eps = np.tile([d, d, d, 0.0], (1, 1))
        k_floor = 1e-6
        s_intact, _ = degraded_stress(eps, 0.0, self.K, self.G, np.ones(1))
        s_dead, _ = degraded_stress(eps, 0.0, self.K, self.G, np.full(1, k_floor))
        assert np.allclose(s_dead, k_floor * s_intact)
        # compressive branch must not soften
        eps_c = np.tile([-d, -d, -d, 0.0], (1, 1))
        c_intact, _ = degraded_stress(eps_c, 0.0, self.K, self.G, np.ones(1))
        c_dead, _ = degraded_stress(eps_c, 0.0, self.K, self.G, np.full(1, k_floor))
        assert np.allclose(c_dead, c_intact)


@pytest.fixture(scope="module")
def uniform_setup(particle_mesh):
    spec, mesh, edata = particle_mesh
    mat = make_uniform_material(
        c_max=51765.0, partial_molar_volume=7.88e-7, youngs_modulus=230e9, poisson=0.253
    )
    fields = build_material_fields(mesh, edata, mat, mat)
    return spec, mesh, edata, mat, fields, MechanicsSolver(mesh, edata, fields)


class TestEquilibrium:
    def test_free_swelling_is_stress_free(self, uniform_setup):
        spec, mesh, edata, mat, fields, solver = uniform_setup
        dc = 3e4
        eps_li = chemical_strain(np.full((edata.n_elems, edata.n_qp), dc), 0.0, fields.omega_qp)
        u, state = solver.solve(eps_li, np.ones((edata.n_elems, edata.n_qp)))
        delta = mat.partial_molar_volume * dc / 3.0
        scale = delta * spec.outer_radius
        assert np.abs(u[0::2] - delta * mesh.nodes[:, 0]).max() < 1e-6 * scale
        assert np.abs(u[1::2] - delta * mesh.nodes[:, 1]).max() < 1e-6 * scale
        assert np.abs(state.sigma_qp).max() < 1e-6 * mat.bulk_modulus * mat.partial_molar_volume * dc

    def test_misfit_matches_lame_solution(self, uniform_setup):
        spec, mesh, edata, mat, fields, solver = uniform_setup
        dc = 3e4
        c_qp = np.where((mesh.region == 0)[:, None], dc, 0.0)
        eps_li = chemical_strain(c_qp, 0.0, fields.omega_qp)
        u, state = solver.solve(eps_li, np.ones((edata.n_elems, edata.n_qp)))

        eps_star = mat.partial_molar_volume * dc / 3.0
        rho_qp = np.hypot(edata.qp_xy[:, :, 0], edata.qp_xy[:, :, 1])
        exact = lame_misfit_solution(
            rho_qp, spec.core_radius, spec.outer_radius, eps_star, mat.bulk_modulus, mat.shear_modulus
        )
        away = np.abs(rho_qp - spec.core_radius) > 0.35e-6
        scale = exact["stress_scale"]
        assert np.abs(state.sigma_h_qp - exact["sigma_h"])[away].max() / scale < 0.02
        assert np.abs(state.sigma_qp[..., 2] - exact["sigma_hoop"])[away].max() / scale < 0.02

    def test_uniform_damage_scales_stress(self, uniform_setup):
        spec, mesh, edata, mat, fields, solver = uniform_setup
        dc = 3e4
        c_qp = np.where((mesh.region == 0)[:, None], dc, 0.0)
        eps_li = chemical_strain(c_qp, 0.0, fields.omega_qp)
        ones = np.ones((edata.n_elems, edata.n_qp))
        _, intact = solver.solve(eps_li, ones)
        _, damaged = solver.solve(eps_li, np.full_like(ones, 1e-6))
        # with uniform g both branches scale: sigma(g)/sigma(1) = g where tensile
        tensile = intact.sigma_h_qp > 0
        ratio = damaged.sigma_qp[tensile][:, 2] / intact.sigma_qp[tensile][:, 2]
        assert np.nanmedian(np.abs(ratio)) < 1e-2

    def test_tangent_matches_finite_differences(self, uniform_setup):
        """Analytic tangent equals the finite-difference residual derivative.

        The probe keeps every quadrature point away from the tension to
        compression switch so that both constitutive branches are exercised
        without the finite-difference stencil straddling a kink.
        """
        spec, mesh, edata, mat, fields, solver = uniform_setup
        rng = np.random.default_rng(3)
        sign = np.where(rng.random((edata.n_elems, edata.n_qp)) < 0.5, 1.0, -1.0)
        c_probe = sign * rng.uniform(5e3, 2e4, size=(edata.n_elems, edata.n_qp))
        eps_li = chemical_strain(c_probe, 0.0, fields.omega_qp)
        g_qp = 0.2 + 0.8 * rng.random((edata.n_elems, edata.n_qp))
        u = 1e-11 * rng.standard_normal(solver.n_dofs)

        def residual(vec):
            eps = solver.strain_qp(vec)
            sigma, _ = degraded_stress(eps, eps_li, fields.bulk_qp, fields.shear_qp, g_qp)
            return solver._residual(sigma)

        eps0 = solver.strain_qp(u)
        _, tr = degraded_stress(eps0, eps_li, fields.bulk_qp, fields.shear_qp, g_qp)
        assert (tr > 0.0).any() and (tr < 0.0).any()
        tangent = solver._tangent(g_qp, tr > 0.0)
        dv = 1e-13 * rng.standard_normal(solver.n_dofs)
        fd = residual(u + dv) - residual(u - dv)
        an = 2.0 * (tangent @ dv)
        assert np.linalg.norm(fd - an) / np.linalg.norm(an) < 1e-5


class TestNodalProjection:
    def test_zero_and_constant_fields(self, uniform_setup):
        _, mesh, edata, _, _, solver = uniform_setup
        from coreshell.mechanics import StressState

        zeros = np.zeros((edata.n_elems, edata.n_qp))
        state = StressState(np.zeros((edata.n_elems, edata.n_qp, 4)), zeros, zeros, zeros)
        assert np.allclose(solver.nodal_hydrostatic(state), 0.0)
        state_p = StressState(
            np.zeros((edata.n_elems, edata.n_qp, 4)), np.full_like(zeros, 3.3e8), zeros, zeros
        )
        assert np.allclose(solver.nodal_hydrostatic(state_p), 3.3e8, rtol=1e-10)

    def test_lame_core_projection_constant(self, uniform_setup):
        spec, mesh, edata, mat, fields, solver = uniform_setup
        dc = 3e4
        c_qp = np.where((mesh.region == 0)[:, None], dc, 0.0)
        eps_li = chemical_strain(c_qp, 0.0, fields.omega_qp)
        _, state = solver.solve(eps_li, np.ones((edata.n_elems, edata.n_qp)))
        nodal = solver.nodal_hydrostatic(state)
        eps_star = mat.partial_molar_volume * dc / 3.0
        exact = lame_misfit_solution(
            mesh.rho, spec.core_radius, spec.outer_radius, eps_star, mat.bulk_modulus, mat.shear_modulus
        )
        away = np.abs(mesh.rho - spec.core_radius) > 0.35e-6
        err = np.abs(nodal - exact["sigma_h"])[away].max() / exact["stress_scale"]
        assert err < 0.02

    def test_interface_side_averages_capture_jump(self, uniform_setup):
        spec, mesh, edata, mat, fields, solver = uniform_setup
        dc = 3e4
        c_qp = np.where((mesh.region == 0)[:, None], dc, 0.0)
        eps_li = chemical_strain(c_qp, 0.0, fields.omega_qp)
        _, state = solver.solve(eps_li, np.ones((edata.n_elems, edata.n_qp)))
        s_core, s_shell = solver.interface_side_stress(state)
        eps_star = mat.partial_molar_volume * dc / 3.0
        p = 12 * mat.bulk_modulus * mat.shear_modulus * eps_star / (
            3 * mat.bulk_modulus + 4 * mat.shear_modulus
        )
        f = (spec.core_radius / spec.outer_radius) ** 3
        # core side ~ P(f-1) < 0, shell side ~ P f > 0
        assert np.allclose(s_core, p * (f - 1.0), rtol=0.1)
        assert np.allclose(s_shell, p * f, rtol=0.1)
