"""Quasi-static degraded elasticity with chemical eigenstrain.

Axisymmetric small-strain kinematics on P1 triangles with Voigt strain
``[eps_rr, eps_zz, eps_tt, gamma_rz]``. The strain energy is split into
volumetric-tension and the rest: only the tensile part is degraded by the
damage function, so compressed material never softens. The equilibrium
problem for fixed concentration and damage is piecewise linear (the sign of
the volumetric elastic strain selects the branch) and is solved by Newton
iteration on the branch pattern.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import SolveError
from .fem import ElementData, SparseSystem, TRI_QP, solve_spd, l2_project
from .materials import MaterialFields
from .mesh import Mesh

logger = logging.getLogger(__name__)

DEGRADATION_FLOOR = 1e-6

# Deviatoric tangent in Voigt form (factor G): sigma_dev = G * DEV @ e_voigt.
_DEV = np.array(
    [
        [4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0, 0.0],
        [-2.0 / 3.0, 4.0 / 3.0, -2.0 / 3.0, 0.0],
        [-2.0 / 3.0, -2.0 / 3.0, 4.0 / 3.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)


def chemical_strain(c: np.ndarray | float, c0: np.ndarray | float, omega: np.ndarray | float):
    """Diagonal entry of the isotropic lithiation strain ``Omega (c - c0) / 3``."""
    return omega * (np.asarray(c) - np.asarray(c0)) / 3.0


def split_energy(
    eps_voigt: np.ndarray,
    eps_li: np.ndarray,
    bulk: np.ndarray | float,
    shear: np.ndarray | float,
) -> tuple[np.ndarray, np.ndarray]:
    """Tension/compression split of the undamaged strain energy density.

    ``psi_plus`` carries the tensile volumetric part plus the full deviatoric
    energy, ``psi_minus`` the compressive volumetric part. Their sum is the
    total elastic energy of ``eps - eps_li``.
    """
    e = np.array(eps_voigt, copy=True)
    e[..., :3] -= np.asarray(eps_li)[..., None]
    tr = e[..., 0] + e[..., 1] + e[..., 2]
    dev_n = e[..., :3] - (tr / 3.0)[..., None]
    dev2 = np.sum(dev_n**2, axis=-1) + 0.5 * e[..., 3] ** 2
    tr_pos = np.maximum(tr, 0.0)
    tr_neg = np.minimum(tr, 0.0)
    psi_plus = 0.5 * bulk * tr_pos**2 + shear * dev2
    psi_minus = 0.5 * bulk * tr_neg**2
    return psi_plus, psi_minus


def degraded_stress(
    eps_voigt: np.ndarray,
    eps_li: np.ndarray,
    bulk: np.ndarray,
    shear: np.ndarray,
    g: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Stress with the damage function applied to the tensile branch only.

    Returns ``(sigma_voigt, tr_e)`` where ``tr_e`` is the volumetric elastic
    strain whose sign selects the constitutive branch.
    """
    e = np.array(eps_voigt, copy=True)
    e[..., :3] -= np.asarray(eps_li)[..., None]
    tr = e[..., 0] + e[..., 1] + e[..., 2]
    dev_n = e[..., :3] - (tr / 3.0)[..., None]
    vol = np.where(tr > 0.0, g * bulk * tr, bulk * tr)
    sigma = np.empty_like(e)
    sigma[..., :3] = vol[..., None] + 2.0 * (g * shear)[..., None] * dev_n
    sigma[..., 3] = g * shear * e[..., 3]
    return sigma, tr


@dataclass
class StressState:
    """Per-quadrature-point stress data from an equilibrium solve."""

    sigma_qp: np.ndarray     # (E, nqp, 4) Voigt components
    sigma_h_qp: np.ndarray   # (E, nqp) hydrostatic stress
    psi_plus: np.ndarray     # (E, nqp) tensile energy density
    psi_minus: np.ndarray    # (E, nqp) compressive energy density
    iterations: int = 0


class MechanicsSolver:
    """Assembles and solves axisymmetric equilibrium on a fixed mesh.

    The strain-displacement operator (including the hoop row ``N_a / r``)
    only depends on the mesh, so it is built once and reused every step.
    """

    def __init__(self, mesh: Mesh, edata: ElementData, fields: MaterialFields):
        self.mesh = mesh
        self.edata = edata
        self.fields = fields

        ne, nq = edata.n_elems, edata.n_qp
        bmat = np.zeros((ne, nq, 4, 6))
        r_qp = edata.qp_xy[:, :, 0]
        for a in range(3):
            dr = edata.grad[:, a, 0][:, None]
            dz = edata.grad[:, a, 1][:, None]
            n_over_r = TRI_QP[None, :, a] / r_qp
            bmat[:, :, 0, 2 * a] = dr
            bmat[:, :, 1, 2 * a + 1] = dz
            bmat[:, :, 2, 2 * a] = n_over_r
            bmat[:, :, 3, 2 * a] = dz
            bmat[:, :, 3, 2 * a + 1] = dr
        self.bmat = bmat
        self.bm = np.einsum("k,eqki->eqi", np.array([1.0, 1.0, 1.0, 0.0]), bmat)
        # Constant per-point element matrices: the tangent only rescales them
        # with the branch and degradation coefficients.
        self._p_vol = np.einsum("eqi,eqj->eqij", self.bm, self.bm)
        self._p_dev = np.einsum("eqki,kl,eqlj->eqij", bmat, _DEV, bmat)

        tris = mesh.tris
        dof_map = np.empty((ne, 6), dtype=np.int64)
        dof_map[:, 0::2] = 2 * tris
        dof_map[:, 1::2] = 2 * tris + 1
        self.dof_map = dof_map
        self.n_dofs = 2 * mesh.n_nodes

        self.dirichlet = {}
        for n in mesh.node_sets["axis"]:
            self.dirichlet[int(2 * n)] = 0.0
        for n in mesh.node_sets["plane"]:
            self.dirichlet[int(2 * n + 1)] = 0.0

        self._rows = np.repeat(dof_map, 6, axis=1).ravel()
        self._cols = np.tile(dof_map, (1, 6)).ravel()
        self._proj_lu = None  # cached factorization of the nodal mass matrix
        self._tangent_lu = None  # last tangent factorization, reused as preconditioner

        free_mask = np.ones(self.n_dofs, dtype=bool)
        for d in self.dirichlet:
            free_mask[d] = False
        self._free = np.nonzero(free_mask)[0]

    def strain_qp(self, u: np.ndarray) -> np.ndarray:
        u_elem = u[self.dof_map]  # (E, 6)
        return np.einsum("eqij,ej->eqi", self.bmat, u_elem)

    def _residual(self, sigma_qp: np.ndarray) -> np.ndarray:
        w = self.edata.qp_w
        f_elem = np.einsum("eq,eqki,eqk->ei", w, self.bmat, sigma_qp)
        out = np.zeros(self.n_dofs)
        np.add.at(out, self.dof_map.ravel(), f_elem.ravel())
        return out

    def _tangent(self, g_qp: np.ndarray, branch_pos: np.ndarray) -> sp.csr_matrix:
        w = self.edata.qp_w
        alpha = w * self.fields.bulk_qp * np.where(branch_pos, g_qp, 1.0)
        gg = w * g_qp * self.fields.shear_qp
        vals = np.einsum("eq,eqij->eij", alpha, self._p_vol)
        vals += np.einsum("eq,eqij->eij", gg, self._p_dev)
        mat = sp.coo_matrix((vals.ravel(), (self._rows, self._cols)), shape=(self.n_dofs, self.n_dofs))
        return mat.tocsr()

    def _solve_tangent(self, a_free: sp.csr_matrix, b_free: np.ndarray) -> np.ndarray:
        """Newton-step solve, reusing the previous factorisation when it
        still preconditions the slightly changed tangent well."""
        import scipy.sparse.linalg as spla

        bnorm = np.linalg.norm(b_free)
        if bnorm == 0.0:
            return np.zeros_like(b_free)
        if self._tangent_lu is not None:
            precond = spla.LinearOperator(a_free.shape, matvec=self._tangent_lu.solve)
            sol, info = spla.cg(a_free, b_free, rtol=1e-12, atol=0.0, maxiter=40, M=precond)
            if info == 0 and np.linalg.norm(a_free @ sol - b_free) <= 1e-10 * bnorm:
                return sol
        lu = spla.splu(a_free.tocsc())
        self._tangent_lu = lu
        return lu.solve(b_free)

    def solve(
        self,
        eps_li_qp: np.ndarray,
        g_qp: np.ndarray,
        u0: np.ndarray | None = None,
        tol: float = 1e-9,
        max_iter: int = 40,
        method: str = "direct",
    ) -> tuple[np.ndarray, StressState]:
        """Solve equilibrium for given eigenstrain and degradation fields.

        ``u0`` warm-starts the branch iteration. Raises SolveError if the
        branch pattern fails to settle.
        """
        fields = self.fields
        free = self._free

        def residual_norm(u):
            eps = self.strain_qp(u)
            sigma, tr = degraded_stress(eps, eps_li_qp, fields.bulk_qp, fields.shear_qp, g_qp)
            r = self._residual(sigma)
            return r, sigma, tr

        zero_r, _, _ = residual_norm(np.zeros(self.n_dofs))
        ref = np.linalg.norm(zero_r[free])
        if ref == 0.0:
            ref = 1.0

        u = np.zeros(self.n_dofs) if u0 is None else np.array(u0, copy=True)
        for d in self.dirichlet:
            u[d] = 0.0
        r, sigma, tr = residual_norm(u)
        it = 0
        while np.linalg.norm(r[free]) > tol * ref:
            if it >= max_iter:
                raise SolveError(
                    f"equilibrium branch iteration did not settle in {max_iter} steps "
                    f"(residual {np.linalg.norm(r[free]) / ref:.3e} relative)"
                )
            tangent = self._tangent(g_qp, tr > 0.0)
            a_free = tangent[free][:, free]
            du_free = self._solve_tangent(a_free, -r[free])
            du = np.zeros(self.n_dofs)
            du[free] = du_free
            u = u + du
            r, sigma, tr = residual_norm(u)
            it += 1

        eps = self.strain_qp(u)
        psi_p, psi_m = split_energy(eps, eps_li_qp, fields.bulk_qp, fields.shear_qp)
        sigma_h = (sigma[..., 0] + sigma[..., 1] + sigma[..., 2]) / 3.0
        return u, StressState(sigma, sigma_h, psi_p, psi_m, iterations=it)

    # -- derived nodal quantities ----------------------------------------

    def nodal_hydrostatic(self, state: StressState, method: str = "auto") -> np.ndarray:
        """L2-projected nodal hydrostatic stress for the transport coupling.

        The mass matrix is factored once per mesh and reused.
        """
        if self._proj_lu is None:
            import scipy.sparse.linalg as spla

            mass = self.edata.mass_matrix().tocsc()
            self._proj_lu = spla.splu(mass)
        rhs = self.edata.source_vector(state.sigma_h_qp)
        return self._proj_lu.solve(rhs)

    def interface_side_stress(self, state: StressState) -> tuple[np.ndarray, np.ndarray]:
        """Region-restricted hydrostatic stress averages on interface nodes.

        Returns ``(core_side, shell_side)`` arrays aligned with
        ``mesh.interface_nodes``; each is a mass-weighted average of the
        adjacent elements of that region only.
        """
        mesh, edata = self.mesh, self.edata
        out = []
        for reg in (0, 1):
            sel = mesh.region == reg
            num = np.zeros(mesh.n_nodes)
            den = np.zeros(mesh.n_nodes)
            w = edata.qp_w[sel]
            vals = np.einsum("eq,qa->ea", w * state.sigma_h_qp[sel], TRI_QP)
            wgt = np.einsum("eq,qa->ea", w, TRI_QP)
            np.add.at(num, mesh.tris[sel].ravel(), vals.ravel())
            np.add.at(den, mesh.tris[sel].ravel(), wgt.ravel())
            iface = mesh.interface_nodes
            out.append(num[iface] / np.maximum(den[iface], 1e-300))
        return out[0], out[1]
