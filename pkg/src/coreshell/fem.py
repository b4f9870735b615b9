"""Finite-element machinery on linear triangles.

Everything in the simulator is discretised with P1 triangles on meshes from
:mod:`coreshell.mesh`. Integrals carry the axisymmetric volume weight
``2*pi*r`` by default; a planar mode (weight 1) exists for slab-type
verification problems. Quadrature uses the interior 3-point rule (degree 2),
which keeps quadrature points off the symmetry axis so hoop terms with a
``1/r`` factor stay finite.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolveError

logger = logging.getLogger(__name__)

# Interior 3-point triangle rule, exact for degree 2. Rows are quadrature
# points, columns the barycentric coordinates (= P1 shape function values).
TRI_QP = np.array(
    [
        [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ]
)
TRI_QW = np.array([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])

# 2-point Gauss rule on a segment, mapped to [0, 1].
SEG_QP = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
SEG_QW = np.array([0.5, 0.5])


class ElementData:
    """Precomputed geometry factors for assembly over a triangulation.

    Parameters
    ----------
    nodes : (N, 2) array
        Node coordinates ``(r, z)``.
    tris : (E, 3) array
        Triangle connectivity (counter-clockwise).
    axisymmetric : bool
        If True, integration weights include the ``2*pi*r`` measure of a
        solid of revolution; if False, plain area weights (slab problems).
    """

    def __init__(self, nodes: np.ndarray, tris: np.ndarray, axisymmetric: bool = True):
        self.nodes = np.asarray(nodes, dtype=float)
        self.tris = np.asarray(tris, dtype=np.int64)
        self.axisymmetric = bool(axisymmetric)

        p0 = self.nodes[self.tris[:, 0]]
        p1 = self.nodes[self.tris[:, 1]]
        p2 = self.nodes[self.tris[:, 2]]
        d1 = p1 - p0
        d2 = p2 - p0
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        if np.any(det <= 0.0):
            bad = int(np.sum(det <= 0.0))
            raise ValueError(f"{bad} triangles are degenerate or clockwise")
        self.area = 0.5 * det

        # Constant P1 shape-function gradients: grad[e, a, :] = dN_a/d(r, z).
        grad = np.empty((len(self.tris), 3, 2))
        inv = 1.0 / det
        grad[:, 1, 0] = d2[:, 1] * inv
        grad[:, 1, 1] = -d2[:, 0] * inv
        grad[:, 2, 0] = -d1[:, 1] * inv
        grad[:, 2, 1] = d1[:, 0] * inv
        grad[:, 0, :] = -grad[:, 1, :] - grad[:, 2, :]
        self.grad = grad

        # Quadrature point coordinates and weights (E, nqp).
        coords = self.nodes[self.tris]  # (E, 3, 2)
        self.qp_xy = np.einsum("qa,eaj->eqj", TRI_QP, coords)
        w = self.area[:, None] * TRI_QW[None, :]
        if self.axisymmetric:
            w = w * (2.0 * np.pi * self.qp_xy[:, :, 0])
        self.qp_w = w

        self.n_nodes = len(self.nodes)
        self.n_elems = len(self.tris)
        self.n_qp = len(TRI_QW)

    # -- field evaluation ------------------------------------------------

    def interp_qp(self, nodal: np.ndarray, conn: np.ndarray | None = None) -> np.ndarray:
        """Interpolate a nodal field to quadrature points, shape (E, nqp)."""
        c = self.tris if conn is None else conn
        return np.einsum("qa,ea->eq", TRI_QP, nodal[c])

    def elem_gradient(self, nodal: np.ndarray, conn: np.ndarray | None = None) -> np.ndarray:
        """Per-element constant gradient of a nodal field, shape (E, 2)."""
        c = self.tris if conn is None else conn
        return np.einsum("eaj,ea->ej", self.grad, nodal[c])

    def integrate_qp(self, qp_values: np.ndarray) -> float:
        """Integral of a quadrature-point quantity over the whole mesh."""
        return float(np.sum(self.qp_w * qp_values))

    def volume(self) -> float:
        return float(np.sum(self.qp_w))

    # -- matrix/vector assembly -------------------------------------------

    def _scatter(self, vals: np.ndarray, conn: np.ndarray, n_dofs: int) -> sp.csr_matrix:
        rows = np.repeat(conn, 3, axis=1).ravel()
        cols = np.tile(conn, (1, 3)).ravel()
        mat = sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(n_dofs, n_dofs))
        return mat.tocsr()

    def mass_matrix(
        self,
        coeff_qp: np.ndarray | float = 1.0,
        conn: np.ndarray | None = None,
        n_dofs: int | None = None,
        lumped: bool = False,
    ) -> sp.csr_matrix | np.ndarray:
        """Assemble ``∫ coeff N_a N_b dV``; lumped variant returns row sums."""
        c = self.tris if conn is None else conn
        n = self.n_nodes if n_dofs is None else n_dofs
        wq = self.qp_w * coeff_qp
        vals = np.einsum("eq,qa,qb->eab", wq, TRI_QP, TRI_QP)
        if lumped:
            out = np.zeros(n)
            np.add.at(out, c.ravel(), vals.sum(axis=2).ravel())
            return out
        return self._scatter(vals, c, n)

    def stiffness_matrix(
        self,
        coeff_qp: np.ndarray | float = 1.0,
        conn: np.ndarray | None = None,
        n_dofs: int | None = None,
    ) -> sp.csr_matrix:
        """Assemble ``∫ coeff ∇N_a · ∇N_b dV`` with a scalar coefficient."""
        c = self.tris if conn is None else conn
        n = self.n_nodes if n_dofs is None else n_dofs
        # P1 gradients are constant per element, so summing the weighted
        # coefficient over quadrature points is exact for varying coeff too.
        we = (self.qp_w * coeff_qp).sum(axis=1)
        vals = np.einsum("e,eaj,ebj->eab", we, self.grad, self.grad)
        return self._scatter(vals, c, n)

    def advection_matrix(
        self,
        velocity_elem: np.ndarray,
        coeff_qp: np.ndarray | float = 1.0,
        conn: np.ndarray | None = None,
        n_dofs: int | None = None,
    ) -> sp.csr_matrix:
        """Assemble ``∫ coeff N_b (v · ∇N_a) dV`` for a per-element vector v."""
        c = self.tris if conn is None else conn
        n = self.n_nodes if n_dofs is None else n_dofs
        vdotg = np.einsum("ej,eaj->ea", velocity_elem, self.grad)  # (E, 3)
        wq = self.qp_w * coeff_qp
        vals = np.einsum("eq,ea,qb->eab", wq, vdotg, TRI_QP)
        return self._scatter(vals, c, n)

    def source_vector(
        self,
        f_qp: np.ndarray | float,
        conn: np.ndarray | None = None,
        n_dofs: int | None = None,
    ) -> np.ndarray:
        """Assemble ``∫ f N_a dV`` from quadrature-point values."""
        c = self.tris if conn is None else conn
        n = self.n_nodes if n_dofs is None else n_dofs
        vals = np.einsum("eq,qa->ea", self.qp_w * f_qp, TRI_QP)
        out = np.zeros(n)
        np.add.at(out, c.ravel(), vals.ravel())
        return out


class BoundaryData:
    """Line-integral factors for one boundary polyline (segment list)."""

    def __init__(self, nodes: np.ndarray, segments: np.ndarray, axisymmetric: bool = True):
        self.segments = np.asarray(segments, dtype=np.int64)
        p0 = nodes[self.segments[:, 0]]
        p1 = nodes[self.segments[:, 1]]
        self.length = np.linalg.norm(p1 - p0, axis=1)
        self.qp_xy = p0[:, None, :] + SEG_QP[None, :, None] * (p1 - p0)[:, None, :]
        w = self.length[:, None] * SEG_QW[None, :]
        if axisymmetric:
            w = w * (2.0 * np.pi * self.qp_xy[:, :, 0])
        self.qp_w = w
        # Shape function values at segment quadrature points.
        self.shape = np.stack([1.0 - SEG_QP, SEG_QP], axis=0).T  # (nqp, 2)

    def area(self) -> float:
        """Total measure of the revolved boundary line."""
        return float(np.sum(self.qp_w))

    def flux_vector(self, q_qp: np.ndarray | float, dof_map: np.ndarray, n_dofs: int) -> np.ndarray:
        """Assemble ``∮ q N_a ds`` into a vector over ``n_dofs``."""
        vals = np.einsum("sq,qa->sa", self.qp_w * q_qp, self.shape)
        out = np.zeros(n_dofs)
        np.add.at(out, dof_map[self.segments].ravel(), vals.ravel())
        return out


@dataclass
class SparseSystem:
    """A linear system with optional Dirichlet constraints.

    ``dirichlet`` maps constrained dof indices to prescribed values. The
    solvers reduce to the free block, which keeps symmetric matrices
    symmetric after constraint application.
    """

    matrix: sp.spmatrix
    rhs: np.ndarray
    dirichlet: dict[int, float] = field(default_factory=dict)

    def constrained(self) -> tuple[sp.csr_matrix, np.ndarray, np.ndarray, np.ndarray]:
        """Return (A_ff, b_f, free_idx, full_solution_template)."""
        n = self.matrix.shape[0]
        x = np.zeros(n)
        if not self.dirichlet:
            return self.matrix.tocsr(), self.rhs.copy(), np.arange(n), x
        fixed = np.fromiter(self.dirichlet.keys(), dtype=np.int64)
        vals = np.fromiter((self.dirichlet[i] for i in fixed), dtype=float)
        x[fixed] = vals
        mask = np.ones(n, dtype=bool)
        mask[fixed] = False
        free = np.nonzero(mask)[0]
        a = self.matrix.tocsr()
        b = self.rhs - a @ x
        return a[free][:, free], b[free], free, x


def solve_spd(
    system: SparseSystem,
    tol: float = 1e-10,
    method: str = "auto",
    max_iter: int = 5000,
) -> np.ndarray:
    """Solve a symmetric positive-definite constrained system.

    ``method``: "cg" (Jacobi-preconditioned conjugate gradients), "direct"
    (sparse LU) or "auto" (CG with a direct fallback). The returned relative
    residual is checked against ``tol`` in all cases.
    """
    a, b, free, x = system.constrained()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x

    def _residual(sol: np.ndarray) -> float:
        return float(np.linalg.norm(a @ sol - b) / bnorm)

    sol = None
    if method in ("cg", "auto"):
        diag = a.diagonal()
        if np.any(diag <= 0.0):
            if method == "cg":
                raise SolveError("matrix has non-positive diagonal; not SPD")
        else:
            precond = spla.LinearOperator(a.shape, matvec=lambda v: v / diag)
            sol, info = spla.cg(a, b, rtol=tol * 0.1, atol=0.0, maxiter=max_iter, M=precond)
            if info != 0 or _residual(sol) > tol:
                res = _residual(sol)
                sol = None
                if method == "cg":
                    raise SolveError(
                        f"CG failed in {max_iter} iterations (relative residual {res:.3e})"
                    )
    if sol is None:
        lu = spla.splu(a.tocsc())
        sol = lu.solve(b)
        res = _residual(sol)
        if not np.isfinite(res) or res > max(tol, 1e-8):
            raise SolveError(f"direct solve residual {res:.3e} exceeds tolerance")
    x[free] = sol
    return x


def solve_sparse(matrix: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Direct solve for general (possibly nonsymmetric) sparse systems."""
    lu = spla.splu(matrix.tocsc())
    sol = lu.solve(rhs)
    if not np.all(np.isfinite(sol)):
        raise SolveError("direct sparse solve produced non-finite values")
    return sol


def l2_project(edata: ElementData, qp_values: np.ndarray, method: str = "auto") -> np.ndarray:
    """L2-project quadrature-point data onto nodal P1 values.

    A spatially constant input reproduces itself exactly; any field already
    in the P1 space (e.g. linear in the coordinates) is recovered to solver
    tolerance.
    """
    mass = edata.mass_matrix()
    rhs = edata.source_vector(np.broadcast_to(qp_values, (edata.n_elems, edata.n_qp)))
    return solve_spd(SparseSystem(mass, rhs), tol=1e-12, method=method)


def newton_solve(
    fun: Callable[[np.ndarray], tuple[np.ndarray, sp.spmatrix | np.ndarray]],
    x0: np.ndarray,
    tol: float = 1e-9,
    max_iter: int = 25,
    abs_floor: float = 0.0,
) -> tuple[np.ndarray, int]:
    """Newton iteration on ``fun(x) -> (residual, jacobian)``.

    Convergence is declared when ``||R|| <= tol * ||R0|| + abs_floor``. The
    Jacobian may be a scipy sparse matrix, a dense array, or a 1x1/scalar
    array for toy problems. Returns ``(solution, iterations)``.
    """
    x = np.array(x0, dtype=float, copy=True)
    r, jac = fun(x)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    ref = np.linalg.norm(r)
    if ref <= abs_floor or ref == 0.0:
        return x, 0
    target = tol * ref + abs_floor
    for it in range(1, max_iter + 1):
        if sp.issparse(jac):
            dx = solve_sparse(jac, -r)
        else:
            jd = np.atleast_2d(np.asarray(jac, dtype=float))
            dx = np.linalg.solve(jd, -r)
        x = x + dx.reshape(x.shape)
        r, jac = fun(x)
        r = np.atleast_1d(np.asarray(r, dtype=float))
        nrm = np.linalg.norm(r)
        if not np.isfinite(nrm):
            raise SolveError(f"Newton residual became non-finite at iteration {it}")
        if nrm <= target:
            return x, it
    raise SolveError(
        f"Newton failed to converge in {max_iter} iterations "
        f"(residual {nrm:.3e}, target {target:.3e})"
    )
