"""Phase-field damage: history field, crack seeding and the damage solve.

The damage field follows the quadratic (AT2) crack density with a history
field enforcing irreversibility: the driving force is the running maximum of
the tensile strain-energy density, stored at quadrature points. For a fixed
history the damage equation is linear and symmetric positive definite.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp

from .fem import ElementData, SparseSystem, solve_spd
from .mesh import ParticleSpec

logger = logging.getLogger(__name__)

DEGRADATION_FLOOR = 1e-6
SEED_AMPLITUDE = 1e12       # J/m^3, history amplitude of a seeded crack
SEED_WIDTH_FACTOR = 100.0   # exponent factor of the seeding profile


def degradation(phi: np.ndarray | float) -> np.ndarray | float:
    """Stiffness/diffusivity degradation ``(1 - phi)^2 + k``."""
    return (1.0 - phi) ** 2 + DEGRADATION_FLOOR


def update_history(h_old: np.ndarray, psi_plus: np.ndarray) -> np.ndarray:
    """Pointwise running maximum of the tensile energy density."""
    return np.maximum(h_old, psi_plus)


def seed_initial_crack(
    spec: ParticleSpec,
    edata: ElementData,
    ell_elem: np.ndarray,
    alpha0: float = SEED_AMPLITUDE,
) -> np.ndarray:
    """History field of a pre-existing crack on the equatorial plane.

    Within the crack's in-plane radial extent the history decays from
    ``alpha0`` as a narrow Gaussian of the off-plane distance ``z``, scaled
    by the local regularisation length; outside the extent it is zero.
    """
    h = np.zeros((edata.n_elems, edata.n_qp))
    band = spec.crack_band()
    if band is None:
        return h
    r_lo, r_hi = band
    r_qp = edata.qp_xy[:, :, 0]
    z_qp = edata.qp_xy[:, :, 1]
    ell = np.broadcast_to(ell_elem[:, None], r_qp.shape)
    inside = (r_qp >= r_lo) & (r_qp <= r_hi)
    profile = alpha0 * np.exp(-SEED_WIDTH_FACTOR * (z_qp / ell) ** 2)
    h[inside] = profile[inside]
    return h


class PhaseFieldSolver:
    """Damage solves on a fixed mesh with static toughness and length fields.

    The gradient operator and the toughness part of the reaction term do not
    change during a run, so they are assembled once; only the history-field
    contribution is rebuilt per solve.
    """

    def __init__(self, edata: ElementData, gc_nodal: np.ndarray, ell_elem: np.ndarray):
        self.edata = edata
        gc_qp = edata.interp_qp(gc_nodal)
        ell_qp = np.broadcast_to(ell_elem[:, None], gc_qp.shape)
        # Lumped reaction term: keeps the operator (close to) an M-matrix so
        # the solution stays in bounds and grows monotonically with history.
        self._react_base = edata.mass_matrix(coeff_qp=gc_qp / ell_qp, lumped=True)
        self._stiff = edata.stiffness_matrix(coeff_qp=gc_qp * ell_qp)

    def solve(self, history_qp: np.ndarray, method: str = "direct") -> np.ndarray:
        """Solve ``(G_c/l) phi - div(G_c l grad(phi)) + 2 H phi = 2 H``."""
        react = self._react_base + self.edata.mass_matrix(
            coeff_qp=2.0 * history_qp, lumped=True
        )
        a = sp.diags(react) + self._stiff
        rhs = self.edata.source_vector(2.0 * history_qp)
        phi = solve_spd(SparseSystem(a, rhs), tol=1e-12, method=method)
        lo, hi = float(phi.min()), float(phi.max())
        if lo < -1e-3 or hi > 1.0 + 1e-3:
            logger.warning("phase field outside bounds: [%.3e, %.3e]", lo, hi)
        return phi


def solve_phase_field(
    edata: ElementData,
    history_qp: np.ndarray,
    gc_nodal: np.ndarray,
    ell_elem: np.ndarray,
    method: str = "direct",
) -> np.ndarray:
    """One-off damage solve (see PhaseFieldSolver for the cached variant)."""
    return PhaseFieldSolver(edata, gc_nodal, ell_elem).solve(history_qp, method=method)
