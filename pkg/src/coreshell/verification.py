"""Analytic-oracle verification suite.

Each check exercises one subsystem against an independent closed-form or
series solution: parameter derivation, mesh volume of revolution, the
diffuse-interface profile, the misfitting-sphere elasticity solution,
constant-flux spherical diffusion, the homogeneous damage solution, and
sealed-system conservation. The CLI ``check`` subcommand runs them all and
prints one line per check; the test suite asserts them individually.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .fem import ElementData, SparseSystem, solve_spd
from .fracture import solve_phase_field
from .interface import build_toughness_field, solve_interface_indicator
from .materials import (
    Material,
    PhysicalConstants,
    build_material_fields,
    builtin_ocp,
    gc_from_fracture_toughness,
    length_scale_from_strength,
)
from .mechanics import MechanicsSolver, chemical_strain
from .mesh import MeshResolution, ParticleSpec, build_particle_mesh, rectangle_mesh
from .transport import InterfaceRelation, TransportBC, TransportSolver

logger = logging.getLogger(__name__)

# Reference parameter set of the packaged demo configs (high-nickel core,
# lower-nickel shell).
REFERENCE_PARAMETERS = {
    "core": {
        "c_max": 51765.0,
        "partial_molar_volume": 7.88e-7,
        "diffusivity": 3.26e-14,
        "youngs_modulus": 230e9,
        "poisson": 0.253,
        "fracture_toughness": 0.271e6,   # Pa sqrt(m)
        "gc_expected": 0.299,            # N/m
        "ell_expected": 0.23e-6,         # m
        "ocp": "nmc811",
    },
    "shell": {
        "c_max": 49000.0,
        "partial_molar_volume": 4.86e-7,
        "diffusivity": 2.48e-14,
        "youngs_modulus": 201e9,
        "poisson": 0.253,
        "fracture_toughness": 0.296e6,
        "gc_expected": 0.408,
        "ell_expected": 0.27e-6,
        "ocp": "nmc532",
    },
    "tensile_strength": 184e6,           # Pa
}


def reference_materials(with_ocp: bool = True) -> tuple[Material, Material]:
    """Materials of the reference core-shell system with derived fracture data."""
    out = []
    sc = REFERENCE_PARAMETERS["tensile_strength"]
    for name in ("core", "shell"):
        p = REFERENCE_PARAMETERS[name]
        gc = gc_from_fracture_toughness(p["fracture_toughness"], p["youngs_modulus"], p["poisson"])
        ell = length_scale_from_strength(p["fracture_toughness"], sc)
        out.append(
            Material(
                c_max=p["c_max"],
                partial_molar_volume=p["partial_molar_volume"],
                diffusivity=p["diffusivity"],
                youngs_modulus=p["youngs_modulus"],
                poisson=p["poisson"],
                gc=gc,
                ell=ell,
                ocp=builtin_ocp(p["ocp"]) if with_ocp else None,
                name=name,
            )
        )
    return out[0], out[1]


# ---------------------------------------------------------------------------
# closed-form oracles
# ---------------------------------------------------------------------------

def lame_misfit_solution(
    rho: np.ndarray,
    core_radius: float,
    outer_radius: float,
    eps_star: float,
    bulk: float,
    shear: float,
) -> dict[str, np.ndarray]:
    """Misfitting-sphere elasticity: swollen core inside a stress-free shell.

    Uniform isotropic eigenstrain ``eps_star`` in the core, identical elastic
    constants in both regions, traction-free outer surface. Returns spherical
    radial stress, hoop stress and hydrostatic stress at radii ``rho``.
    """
    rho = np.asarray(rho, dtype=float)
    r3 = core_radius**3
    b3 = outer_radius**3
    f = r3 / b3
    p = 12.0 * bulk * shear * eps_star / (3.0 * bulk + 4.0 * shear)
    in_core = rho <= core_radius
    safe = np.where(in_core, outer_radius, rho)
    sigma_rad = np.where(in_core, p * (f - 1.0), p * (f - r3 / safe**3))
    sigma_hoop = np.where(in_core, p * (f - 1.0), p * (f + r3 / (2.0 * safe**3)))
    sigma_h = np.where(in_core, p * (f - 1.0), p * f)
    return {
        "sigma_rad": sigma_rad,
        "sigma_hoop": sigma_hoop,
        "sigma_h": sigma_h,
        "stress_scale": abs(p) * 1.5,
    }


_TAN_ROOTS_CACHE: dict[int, np.ndarray] = {}


def _tan_roots(n: int) -> np.ndarray:
    """Positive roots of ``tan(x) = x``."""
    if n not in _TAN_ROOTS_CACHE:
        roots = [
            brentq(lambda lam: np.tan(lam) - lam, k * np.pi + 1e-9, k * np.pi + np.pi / 2 - 1e-9)
            for k in range(1, n + 1)
        ]
        _TAN_ROOTS_CACHE[n] = np.array(roots)
    return _TAN_ROOTS_CACHE[n]


def constant_flux_sphere_series(
    rho: np.ndarray,
    t: float,
    radius: float,
    diffusivity: float,
    c0: float,
    flux: float,
    n_terms: int = 60,
) -> np.ndarray:
    """Series solution for a sphere loaded by a constant surface influx."""
    lam = _tan_roots(n_terms)
    x = np.clip(np.asarray(rho, dtype=float) / radius, 1e-12, 1.0)
    tau = diffusivity * t / radius**2
    series = np.zeros_like(x)
    for ln in lam:
        series += np.sin(ln * x) / (ln**2 * np.sin(ln)) * np.exp(-(ln**2) * tau)
    return c0 + (flux * radius / diffusivity) * (3.0 * tau + 0.5 * x**2 - 0.3 - 2.0 / x * series)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.detail}"


def check_parameter_derivation(tolerance: float = 0.02) -> CheckResult:
    sc = REFERENCE_PARAMETERS["tensile_strength"]
    errs = []
    for name in ("core", "shell"):
        p = REFERENCE_PARAMETERS[name]
        gc = gc_from_fracture_toughness(p["fracture_toughness"], p["youngs_modulus"], p["poisson"])
        ell = length_scale_from_strength(p["fracture_toughness"], sc)
        errs.append(abs(gc - p["gc_expected"]) / p["gc_expected"])
        errs.append(abs(ell - p["ell_expected"]) / p["ell_expected"])
    worst = max(errs)
    return CheckResult(
        "parameter derivation",
        worst < tolerance,
        f"max deviation {100 * worst:.2f}% (tolerance {100 * tolerance:.0f}%)",
    )


def check_mesh_volume(tolerance: float = 0.005) -> CheckResult:
    spec = ParticleSpec(4e-6, 0.8e-6)
    errors = []
    for level in ("coarse", "medium", "fine"):
        res = MeshResolution.for_particle(spec, 0.23e-6, 0.27e-6, 1e-7, level)
        mesh = build_particle_mesh(spec, res)
        vol = ElementData(mesh.nodes, mesh.tris).volume()
        exact = 2.0 / 3.0 * np.pi * spec.outer_radius**3
        errors.append(abs(vol - exact) / exact)
    monotone = errors[0] > errors[1] > errors[2]
    ok = monotone and errors[0] < tolerance
    return CheckResult(
        "mesh volume of revolution",
        ok,
        "errors " + " > ".join(f"{e:.2e}" for e in errors) + f"; coarse < {tolerance:.1%}",
    )


def check_interface_slab(tolerance: float = 0.02) -> CheckResult:
    ell = 0.1e-6
    mesh = rectangle_mesh(2e-6, 0.2e-6, 160, 4)
    edata = ElementData(mesh.nodes, mesh.tris, axisymmetric=False)
    import scipy.sparse as sp

    a = sp.diags(edata.mass_matrix(lumped=True)) + ell**2 * edata.stiffness_matrix()
    dirich = {int(i): 1.0 for i in mesh.node_sets["left"]}
    zeta = solve_spd(SparseSystem(a, np.zeros(mesh.n_nodes), dirich), method="direct")
    x = mesh.nodes[:, 0]
    probe = np.abs(x - ell) < 1e-9
    val = float(zeta[probe].mean())
    err = abs(val - np.exp(-1.0)) / np.exp(-1.0)

    gc_b = np.array([0.299, 0.408])
    gci = 0.3535
    ends_exact = (
        np.allclose(build_toughness_field(np.zeros(2), gc_b, gci), gc_b)
        and np.allclose(build_toughness_field(np.ones(2), gc_b, gci), gci)
    )
    ok = err < tolerance and ends_exact
    return CheckResult(
        "diffuse interface profile",
        ok,
        f"zeta(d=l) = {val:.4f} vs {np.exp(-1.0):.4f} ({100 * err:.2f}%), endpoints exact: {ends_exact}",
    )


def check_lame(tolerance: float = 0.02) -> CheckResult:
    spec = ParticleSpec(4e-6, 0.8e-6)
    res = MeshResolution.for_particle(spec, 0.23e-6, 0.27e-6, 1e-7, "coarse")
    mesh = build_particle_mesh(spec, res)
    edata = ElementData(mesh.nodes, mesh.tris)
    core, _ = reference_materials(with_ocp=False)
    same_shell = Material(
        49000.0,
        4.86e-7,
        2.48e-14,
        core.youngs_modulus,
        core.poisson,
        0.408,
        0.27e-6,
        name="shell",
    )
    fields = build_material_fields(mesh, edata, core, same_shell)
    solver = MechanicsSolver(mesh, edata, fields)
    dc = 3.0e4
    c_qp = np.where((mesh.region == 0)[:, None], dc, 0.0)
    eps_li = chemical_strain(c_qp, 0.0, fields.omega_qp)
    u, state = solver.solve(eps_li, np.ones((edata.n_elems, edata.n_qp)))

    eps_star = core.partial_molar_volume * dc / 3.0
    rho_qp = np.hypot(edata.qp_xy[:, :, 0], edata.qp_xy[:, :, 1])
    exact = lame_misfit_solution(
        rho_qp, spec.core_radius, spec.outer_radius, eps_star, core.bulk_modulus, core.shear_modulus
    )
    # Spherical radial stress from the cylindrical components.
    theta = np.arctan2(edata.qp_xy[:, :, 1], edata.qp_xy[:, :, 0])
    ct, st = np.cos(theta), np.sin(theta)
    s = state.sigma_qp
    sigma_rad = s[..., 0] * ct**2 + s[..., 1] * st**2 + 2.0 * s[..., 3] * ct * st
    scale = exact["stress_scale"]
    away = np.abs(rho_qp - spec.core_radius) > 0.35e-6
    errs = {
        "sigma_rad": np.abs(sigma_rad - exact["sigma_rad"])[away].max() / scale,
        "sigma_hoop": np.abs(s[..., 2] - exact["sigma_hoop"])[away].max() / scale,
        "sigma_h": np.abs(state.sigma_h_qp - exact["sigma_h"])[away].max() / scale,
    }
    worst = max(errs.values())
    return CheckResult(
        "misfitting-sphere elasticity",
        worst < tolerance,
        ", ".join(f"{k} {100 * v:.2f}%" for k, v in errs.items()),
    )


def check_transport_series(tolerance: float = 0.01) -> CheckResult:
    radius_core, thickness = 3e-6, 1.8e-6
    spec = ParticleSpec(radius_core, thickness)
    b = spec.outer_radius
    d_coeff = 3.0e-14
    res = MeshResolution.for_particle(spec, 0.5e-6, 0.5e-6, 0.2e-6, "coarse")
    mesh = build_particle_mesh(spec, res)
    edata = ElementData(mesh.nodes, mesh.tris)
    ocp = builtin_ocp("nmc811")
    mat = Material(50000.0, 1e-30, d_coeff, 100e9, 0.3, 0.3, 0.25e-6, ocp=ocp)
    fields = build_material_fields(mesh, edata, mat, mat)
    constants = PhysicalConstants()
    solver = TransportSolver(mesh, edata, fields, constants)
    relation = InterfaceRelation(mat, mat, constants, len(mesh.interface_nodes))

    c0, j0 = 5000.0, 2e-5
    c = np.full(mesh.n_cdof, c0)
    bc = TransportBC("cc", flux=j0)
    t_end = 0.1 * b**2 / d_coeff
    n_steps = 100
    for _ in range(n_steps):
        c, _ = solver.step(c, t_end / n_steps, bc, relation)
    exact = constant_flux_sphere_series(mesh.rho, t_end, b, d_coeff, c0, j0)
    diff = c[: mesh.n_nodes] - exact
    num = np.sqrt(edata.integrate_qp(edata.interp_qp(diff) ** 2))
    den = np.sqrt(edata.integrate_qp(edata.interp_qp(exact - c0) ** 2))
    err = num / den
    rings = mesh.meta["n_rings"]
    return CheckResult(
        "constant-flux sphere transport",
        err < tolerance and rings >= 30,
        f"L2 error {100 * err:.3f}% on {rings} radial rings",
    )


def check_at2_homogeneous(tolerance: float = 1e-6) -> CheckResult:
    spec = ParticleSpec(4e-6, 0.8e-6)
    res = MeshResolution.for_particle(spec, 0.4e-6, 0.4e-6, 0.2e-6, "coarse")
    mesh = build_particle_mesh(spec, res)
    edata = ElementData(mesh.nodes, mesh.tris)
    gc, ell = 0.299, 0.23e-6
    gc_nodal = np.full(mesh.n_nodes, gc)
    ell_elem = np.full(mesh.n_elems, ell)
    worst = 0.0
    for h_val in (1e2, 1e4, 1e6, 1e8):
        h_qp = np.full((edata.n_elems, edata.n_qp), h_val)
        phi = solve_phase_field(edata, h_qp, gc_nodal, ell_elem)
        expected = 2.0 * h_val / (gc / ell + 2.0 * h_val)
        worst = max(worst, float(np.abs(phi - expected).max()))
    return CheckResult(
        "homogeneous damage solution",
        worst < tolerance,
        f"max deviation {worst:.2e} over driving forces 1e2..1e8",
    )


def check_conservation(n_steps: int = 100, tolerance: float = 1e-8) -> CheckResult:
    core, shell = reference_materials()
    spec = ParticleSpec(2e-6, 0.4e-6)
    res = MeshResolution.for_particle(spec, core.ell, shell.ell, 1e-7, "coarse")
    mesh = build_particle_mesh(spec, res)
    edata = ElementData(mesh.nodes, mesh.tris)
    fields = build_material_fields(mesh, edata, core, shell)
    constants = PhysicalConstants()
    solver = TransportSolver(mesh, edata, fields, constants)
    relation = InterfaceRelation(core, shell, constants, len(mesh.interface_nodes))

    # Nonuniform start: radial gradient in the shell, matched core values,
    # plus a manufactured stress field driving cross-interface flux.
    n = mesh.n_nodes
    rho = mesh.rho
    x2 = 0.2 + 0.3 * np.clip((rho - spec.core_radius) / spec.shell_thickness, 0.0, 1.0)
    c = np.empty(mesh.n_cdof)
    c1_if = relation.c1_of_c2(np.array([0.2 * shell.c_max]))[0]
    c[:n] = np.where(rho < spec.core_radius, c1_if, x2 * shell.c_max)
    c[n:] = c1_if
    sigma_h = 2e8 * (rho / spec.outer_radius)

    bc = TransportBC("cc", flux=0.0)
    li = solver.total_lithium(c)
    worst = 0.0
    for _ in range(n_steps):
        c, _ = solver.step(c, 2.0, bc, relation, sigma_h_nodal=sigma_h)
        li_new = solver.total_lithium(c)
        worst = max(worst, abs(li_new - li) / li)
        li = li_new
    return CheckResult(
        "sealed-system conservation",
        worst < tolerance,
        f"max per-step drift {worst:.2e} over {n_steps} steps",
    )


def run_all() -> list[CheckResult]:
    """Run the full oracle suite (a couple of minutes, mostly transport)."""
    checks = [
        check_parameter_derivation,
        check_mesh_volume,
        check_interface_slab,
        check_lame,
        check_at2_homogeneous,
        check_transport_series,
        check_conservation,
    ]
    results = []
    for fn in checks:
        try:
            results.append(fn())
        except Exception as exc:  # surface the failure, keep the suite going
            results.append(CheckResult(fn.__name__, False, f"raised {exc!r}"))
    return results
