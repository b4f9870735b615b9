"""Implicit lithium transport with stress coupling and damage degradation.

One backward-Euler step solves conservation of lithium with the flux
``J = -D grad(c) + (c D Omega / RT) grad(sigma_h)`` and ``D = D0 g(phi)``.
The concentration field carries duplicated dofs on the core-shell interface;
the core-side dof is eliminated through the potential-continuity relation
(an open-circuit-potential match plus a stress term), and the shell-side
equation receives the core-side residual so the pair conserves lithium
exactly. The resulting reduced system is mildly nonlinear (piecewise-linear
OCP tables) and is solved by Newton iteration with a sparse direct solver:
the stress-drift term and the unequal elimination weights make the Jacobian
nonsymmetric, so conjugate gradients do not apply here.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import SolveError, StepRejected
from .fem import BoundaryData, ElementData, newton_solve
from .materials import Material, MaterialFields, PhysicalConstants
from .mesh import Mesh, ParticleSpec

logger = logging.getLogger(__name__)


@dataclass
class TransportBC:
    """Surface condition for one step of the lithiation protocol."""

    stage: str                    # "cc" or "cv"
    flux: float = 0.0             # J0 (mol m^-2 s^-1), inward positive
    x_cv: float = 0.98            # surface stoichiometry held during CV
    cutoff_fraction: float = 0.1


def cc_flux(spec: ParticleSpec, core: Material, shell: Material, c_rate: float) -> float:
    """Constant-current surface flux for a given C-rate.

    ``J0 = (V1 c_max,1 + V2 c_max,2) / area * C / 3600`` with the sphere
    volumes of core and shell and the outer surface area.
    """
    r, b = spec.core_radius, spec.outer_radius
    v_core = 4.0 / 3.0 * np.pi * r**3
    v_shell = 4.0 / 3.0 * np.pi * (b**3 - r**3)
    area = 4.0 * np.pi * b**2
    capacity = v_core * core.c_max + v_shell * shell.c_max
    return capacity / area * c_rate / 3600.0


def interface_constraint(
    c2: np.ndarray | float,
    sigma_h_core: np.ndarray | float,
    sigma_h_shell: np.ndarray | float,
    core: Material,
    shell: Material,
    constants: PhysicalConstants,
) -> np.ndarray | float:
    """Core-side concentration from the shell-side value at the interface.

    Chemical-potential continuity across the interface gives
    ``c1 = c_max,1 * U1^{-1}[(Omega2 sigma_h,2 - Omega1 sigma_h,1)/F + U2(c2/c_max,2)]``.
    Potentials outside the core OCP table are clamped (with a logged warning
    from the curve).
    """
    if core.ocp is None or shell.ocp is None:
        raise SolveError("interface constraint requires OCP curves on both materials")
    x2 = np.asarray(c2, dtype=float) / shell.c_max
    du = (
        shell.partial_molar_volume * np.asarray(sigma_h_shell)
        - core.partial_molar_volume * np.asarray(sigma_h_core)
    ) / constants.faraday
    u_target = du + shell.ocp.u_of_x(x2)
    x1 = core.ocp.x_of_u(u_target)
    out = core.c_max * x1
    return out if np.ndim(c2) else float(out)


class InterfaceRelation:
    """Pointwise map ``c1 = f(c2)`` at interface node pairs, with slope.

    ``trivial`` (graded shells or identical materials) short-circuits to the
    identity. Stress values enter as per-node arrays aligned with the
    interface ring and are refreshed each staggered iteration.
    """

    def __init__(
        self,
        core: Material,
        shell: Material,
        constants: PhysicalConstants,
        n_pairs: int,
        trivial: bool = False,
    ):
        self.core = core
        self.shell = shell
        self.constants = constants
        self.trivial = trivial
        self.sigma_h_core = np.zeros(n_pairs)
        self.sigma_h_shell = np.zeros(n_pairs)
        if not trivial and (core.ocp is None or shell.ocp is None):
            raise SolveError("interface relation requires OCP curves on both materials")

    def update_stress(self, sigma_h_core: np.ndarray, sigma_h_shell: np.ndarray) -> None:
        self.sigma_h_core = np.asarray(sigma_h_core, dtype=float)
        self.sigma_h_shell = np.asarray(sigma_h_shell, dtype=float)

    def c1_of_c2(self, c2: np.ndarray) -> np.ndarray:
        if self.trivial:
            return np.asarray(c2, dtype=float)
        return np.asarray(
            interface_constraint(
                c2, self.sigma_h_core, self.sigma_h_shell, self.core, self.shell, self.constants
            )
        )

    def dc1_dc2(self, c2: np.ndarray) -> np.ndarray:
        if self.trivial:
            return np.ones_like(np.asarray(c2, dtype=float))
        x2 = np.asarray(c2, dtype=float) / self.shell.c_max
        du = (
            self.shell.partial_molar_volume * self.sigma_h_shell
            - self.core.partial_molar_volume * self.sigma_h_core
        ) / self.constants.faraday
        u_target = du + self.shell.ocp.u_of_x(x2)
        x1 = self.core.ocp.x_of_u(u_target)
        inside = (u_target <= self.core.ocp.u[0]) & (u_target >= self.core.ocp.u[-1])
        slope = np.where(
            inside,
            self.shell.ocp.du_dx(x2) / self.core.ocp.du_dx(np.clip(x1, 0.0, 1.0)),
            0.0,
        )
        return (self.core.c_max / self.shell.c_max) * slope


class TransportSolver:
    """Backward-Euler lithium transport on a fixed mesh."""

    def __init__(
        self,
        mesh: Mesh,
        edata: ElementData,
        fields: MaterialFields,
        constants: PhysicalConstants,
    ):
        self.mesh = mesh
        self.edata = edata
        self.fields = fields
        self.constants = constants
        self.n_red = mesh.n_nodes
        self.n_full = mesh.n_cdof
        self.iface = mesh.interface_nodes
        self.twins = mesh.twin_dofs()

        self.surface = BoundaryData(mesh.nodes, mesh.edge_sets["surface"], edata.axisymmetric)
        self.surface_area = self.surface.area()
        ident = np.arange(self.n_red)
        self._dof_map = ident  # surface nodes live in the shell: plain node ids
        self._b_surf = self.surface.flux_vector(1.0, self._dof_map, self.n_full)

        # Row-sum operator: adds the core-twin residual to its shell row.
        rows = np.concatenate([ident, self.iface])
        cols = np.concatenate([ident, self.twins])
        vals = np.ones(len(rows))
        self.p_sum = sp.coo_matrix((vals, (rows, cols)), shape=(self.n_red, self.n_full)).tocsr()

        self.mass_lumped = edata.mass_matrix(
            lumped=True, conn=mesh.c_conn, n_dofs=self.n_full
        )

    def expand(self, c_red: np.ndarray, relation: InterfaceRelation) -> np.ndarray:
        c_full = np.empty(self.n_full)
        c_full[: self.n_red] = c_red
        if len(self.twins):
            c_full[self.twins] = relation.c1_of_c2(c_red[self.iface])
        return c_full

    def _chain(self, c_red: np.ndarray, relation: InterfaceRelation) -> sp.csr_matrix:
        ident = np.arange(self.n_red)
        rows = np.concatenate([ident, self.twins])
        cols = np.concatenate([ident, self.iface])
        deriv = relation.dc1_dc2(c_red[self.iface]) if len(self.twins) else np.empty(0)
        vals = np.concatenate([np.ones(self.n_red), deriv])
        return sp.coo_matrix((vals, (rows, cols)), shape=(self.n_full, self.n_red)).tocsr()

    def step(
        self,
        c_old: np.ndarray,
        dt: float,
        bc: TransportBC,
        relation: InterfaceRelation,
        phi_nodal: np.ndarray | None = None,
        sigma_h_nodal: np.ndarray | None = None,
        damage_coupling: bool = True,
        tol: float = 1e-9,
        max_iter: int = 25,
    ) -> tuple[np.ndarray, int]:
        """Advance the concentration by one implicit step.

        Raises StepRejected on Newton failure or a negative concentration;
        the caller is expected to halve dt and retry.
        """
        edata, mesh = self.edata, self.mesh
        if damage_coupling and phi_nodal is not None:
            phi_qp = edata.interp_qp(phi_nodal)
            g_qp = (1.0 - phi_qp) ** 2 + 1e-6
        else:
            g_qp = np.ones((edata.n_elems, edata.n_qp))
        d_qp = self.fields.d0_qp * g_qp

        k_diff = edata.stiffness_matrix(coeff_qp=d_qp, conn=mesh.c_conn, n_dofs=self.n_full)
        operator = k_diff
        if sigma_h_nodal is not None:
            grad_sh = edata.elem_gradient(sigma_h_nodal)
            chi_qp = d_qp * self.fields.omega_qp / self.constants.rt
            a_drift = edata.advection_matrix(
                grad_sh, coeff_qp=chi_qp, conn=mesh.c_conn, n_dofs=self.n_full
            )
            operator = k_diff - a_drift

        rhs_flux = np.zeros(self.n_full)
        dirichlet_mask = np.zeros(self.n_red, dtype=bool)
        dirichlet_val = 0.0
        if bc.stage == "cc":
            if bc.flux != 0.0:
                if damage_coupling and phi_nodal is not None:
                    # Galvanostatic charging: current avoids fully cracked
                    # surface patches and redistributes to intact ones; the
                    # degradation-weighted profile is normalised so the total
                    # influx stays exactly flux * area.
                    segs = self.surface.segments
                    phi_line = np.einsum("qa,sa->sq", self.surface.shape, phi_nodal[segs])
                    g_line = (1.0 - phi_line) ** 2 + 1e-6
                    g_mean = float(np.sum(self.surface.qp_w * g_line)) / self.surface_area
                    profile = bc.flux * g_line / g_mean
                    rhs_flux = self.surface.flux_vector(profile, self._dof_map, self.n_full)
                else:
                    rhs_flux = bc.flux * self._b_surf
        elif bc.stage == "cv":
            dirichlet_mask[mesh.node_sets["surface"]] = True
            dirichlet_val = bc.x_cv * self.fields.surface_c_max()
        else:
            raise StepRejected(f"unknown transport stage {bc.stage!r}")

        inv_dt = 1.0 / dt
        j_full = sp.diags(self.mass_lumped * inv_dt) + operator
        keep = sp.diags((~dirichlet_mask).astype(float))
        fix = sp.diags(dirichlet_mask.astype(float))

        def fun(c_red):
            c_full = self.expand(c_red, relation)
            r_full = self.mass_lumped * (c_full - c_old) * inv_dt + operator @ c_full - rhs_flux
            r_red = self.p_sum @ r_full
            j_red = self.p_sum @ j_full @ self._chain(c_red, relation)
            if dirichlet_mask.any():
                r_red = np.where(dirichlet_mask, c_red - dirichlet_val, r_red)
                j_red = keep @ j_red + fix
            return r_red, j_red

        c_red0 = c_old[: self.n_red].copy()
        # Absolute floor at the mass-flow scale: residuals this small change
        # the concentration by less than tol relative per step.
        floor = tol * float(np.linalg.norm(self.mass_lumped * c_old)) * inv_dt
        try:
            c_red, iters = newton_solve(fun, c_red0, tol=tol, max_iter=max_iter, abs_floor=floor)
        except SolveError as exc:
            raise StepRejected(f"transport Newton failed: {exc}") from exc

        c_new = self.expand(c_red, relation)
        if not np.all(np.isfinite(c_new)):
            raise StepRejected("transport produced non-finite concentrations")
        if c_new.min() < 0.0:
            raise StepRejected(f"negative concentration {c_new.min():.3e}")
        return c_new, iters

    # -- diagnostics -------------------------------------------------------

    def total_lithium(self, c_full: np.ndarray) -> float:
        c_qp = self.edata.interp_qp(c_full, conn=self.mesh.c_conn)
        return self.edata.integrate_qp(c_qp)

    def surface_stoichiometry(self, c_full: np.ndarray) -> tuple[float, float]:
        """(max, mean) stoichiometry over outer-surface nodes."""
        vals = c_full[self.mesh.node_sets["surface"]] / self.fields.surface_c_max()
        return float(vals.max()), float(vals.mean())
