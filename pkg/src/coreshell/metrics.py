"""Degradation metrics: state of lithiation, crack volume, pattern labels."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .fem import ElementData
from .mesh import Mesh, ParticleSpec

logger = logging.getLogger(__name__)

CRACK_THRESHOLD = 0.95


@dataclass
class StepRecord:
    """One row of the per-step metrics series."""

    step: int
    time: float
    dt: float
    stage: str
    sol: float
    sol_core: float
    sol_shell: float
    delta_sol: float
    crack_volume: float
    crack_volume_growth: float
    surface_flux: float        # mean inward flux over the outer surface
    surface_x_max: float
    inner_iterations: int
    min_dphi: float            # most negative nodal damage increment

    CSV_FIELDS = (
        "step",
        "time",
        "dt",
        "stage",
        "sol",
        "sol_core",
        "sol_shell",
        "delta_sol",
        "crack_volume",
        "crack_volume_growth",
        "surface_flux",
        "surface_x_max",
        "inner_iterations",
        "min_dphi",
    )

    def csv_row(self) -> str:
        vals = []
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            vals.append(f"{v:.10g}" if isinstance(v, float) else str(v))
        return ",".join(vals)


@dataclass
class MetricsSeries:
    """Per-step metric records of one run."""

    rows: list[StepRecord] = field(default_factory=list)

    def append(self, row: StepRecord) -> None:
        self.rows.append(row)

    def last(self) -> StepRecord:
        return self.rows[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def csv_lines(self) -> list[str]:
        return [",".join(StepRecord.CSV_FIELDS)] + [r.csv_row() for r in self.rows]


def compute_sol(
    edata: ElementData,
    mesh: Mesh,
    c_full: np.ndarray,
    cmax_qp: np.ndarray,
) -> tuple[float, float, float, float]:
    """State of lithiation: total, per region, and their difference.

    ``SOL = integral(c) / integral(c_max)`` over the axisymmetric volume
    measure; the region-restricted variants use the same discrete volumes,
    so a fully lithiated region reports exactly 1.
    """
    c_qp = edata.interp_qp(c_full, conn=mesh.c_conn)
    w = edata.qp_w
    num = w * c_qp
    den = w * cmax_qp
    core = mesh.region == 0
    num_core = float(num[core].sum())
    den_core = float(den[core].sum())
    num_shell = float(num[~core].sum())
    den_shell = float(den[~core].sum())
    sol_core = num_core / den_core
    sol_shell = num_shell / den_shell
    sol = (num_core + num_shell) / (den_core + den_shell)
    return sol, sol_core, sol_shell, sol_core - sol_shell


def compute_crack_volume(
    edata: ElementData,
    phi_nodal: np.ndarray,
    threshold: float = CRACK_THRESHOLD,
) -> float:
    """Fraction of particle volume with damage above the threshold."""
    phi_qp = edata.interp_qp(phi_nodal)
    cracked = (phi_qp > threshold).astype(float)
    return edata.integrate_qp(cracked) / edata.volume()


@dataclass(frozen=True)
class CrackPattern:
    """Flags of the four cracking phenomena observed in a run."""

    propagation: bool = False
    initiation: bool = False
    debonding: bool = False
    branching: bool = False

    def labels(self) -> list[str]:
        out = []
        if self.propagation:
            out.append("P")
        if self.initiation:
            out.append("I")
        if self.debonding:
            out.append("DB")
        if self.branching:
            out.append("B")
        return out

    @property
    def code(self) -> str:
        lab = self.labels()
        return "+".join(lab) if lab else "none"


def _element_adjacency(tris: np.ndarray) -> list[list[int]]:
    edge_owner: dict[tuple[int, int], int] = {}
    neighbors: list[list[int]] = [[] for _ in range(len(tris))]
    for e, (a, b, c) in enumerate(tris):
        for pair in ((a, b), (b, c), (c, a)):
            key = (pair[0], pair[1]) if pair[0] < pair[1] else (pair[1], pair[0])
            other = edge_owner.pop(key, None)
            if other is None:
                edge_owner[key] = e
            else:
                neighbors[e].append(other)
                neighbors[other].append(e)
    return neighbors


def _components(flags: np.ndarray, neighbors: list[list[int]]) -> list[np.ndarray]:
    seen = np.zeros(len(flags), dtype=bool)
    comps = []
    for start in np.nonzero(flags)[0]:
        if seen[start]:
            continue
        stack = [int(start)]
        seen[start] = True
        members = []
        while stack:
            e = stack.pop()
            members.append(e)
            for nb in neighbors[e]:
                if flags[nb] and not seen[nb]:
                    seen[nb] = True
                    stack.append(nb)
        comps.append(np.array(members))
    return comps


def classify_pattern(
    mesh: Mesh,
    phi_final: np.ndarray,
    phi_initial: np.ndarray,
    zeta_nodal: np.ndarray,
    spec: ParticleSpec,
    ell_mean: float,
    threshold: float = CRACK_THRESHOLD,
    debond_arc_deg: float = 10.0,
    extension_lengths: float = 2.0,
) -> tuple[CrackPattern, dict]:
    """Label the final damage field with the cracking phenomena.

    Components of fully damaged elements (element-adjacency flood fill) are
    examined for: extension of the seeded crack beyond its initial band along
    the crack plane (P), surface-touching components disjoint from the seed
    (I), angular coverage of the diffuse-interface band (DB) and, for centre
    seeds, multiple damage paths leaving the seed-tip region (B). Thresholds
    are reported in the details dict.
    """
    tris = mesh.tris
    cen = mesh.nodes[tris].mean(axis=1)
    phi_c_final = phi_final[tris].mean(axis=1)
    phi_c_init = phi_initial[tris].mean(axis=1)
    zeta_c = zeta_nodal[tris].mean(axis=1)

    cracked = phi_c_final > threshold
    seeded = phi_c_init > threshold
    neighbors = _element_adjacency(tris)
    comps = _components(cracked, neighbors)

    surface_nodes = set(int(n) for n in mesh.node_sets["surface"])
    elem_touches_surface = np.array(
        [any(int(n) in surface_nodes for n in tri) for tri in tris]
    )

    band = spec.crack_band()
    ext = extension_lengths * ell_mean
    plane_band = np.abs(cen[:, 1]) <= 2.0 * ell_mean

    propagation = False
    initiation = False
    debonding = False
    branching = False
    details: dict = {
        "threshold": threshold,
        "n_components": len(comps),
        "debond_arc_deg": 0.0,
        "seed_extension": 0.0,
    }

    theta_c = np.degrees(np.arctan2(cen[:, 1], cen[:, 0]))
    in_band = zeta_c > 0.5

    for comp in comps:
        has_seed = bool(np.any(seeded[comp]))

        # Debonding: angular coverage of the interface band by this component.
        members_band = comp[in_band[comp]]
        if len(members_band):
            bins = np.unique(np.floor(theta_c[members_band]).astype(int))
            coverage = float(len(bins))
            details["debond_arc_deg"] = max(details["debond_arc_deg"], coverage)
            if coverage >= debond_arc_deg:
                debonding = True

        # New surface cracks: surface-touching component disjoint from seed.
        if not has_seed and np.any(elem_touches_surface[comp]):
            initiation = True

        # Propagation: seed component grows along the crack plane.
        if has_seed and band is not None:
            members_plane = comp[plane_band[comp]]
            if len(members_plane):
                r_vals = cen[members_plane, 0]
                r_lo, r_hi = band
                if spec.crack.location == "surface":
                    extension = float(np.maximum(r_lo - r_vals, 0.0).max())
                elif spec.crack.location == "interface":
                    extension = float(
                        np.maximum(
                            np.maximum(r_lo - r_vals, 0.0), np.maximum(r_vals - r_hi, 0.0)
                        ).max()
                    )
                else:  # center
                    extension = float(np.maximum(r_vals - r_hi, 0.0).max())
                details["seed_extension"] = max(details["seed_extension"], extension)
                if extension >= ext:
                    propagation = True

        # Branching: distinct paths through an annulus around the seed tip.
        if has_seed and band is not None and spec.crack.location == "center":
            tip = np.array([band[1], 0.0])
            dist = np.linalg.norm(cen[comp] - tip, axis=1)
            ring = comp[(dist >= 1.5 * ell_mean) & (dist <= 3.5 * ell_mean) & ~seeded[comp]]
            if len(ring):
                ring_set = set(int(e) for e in ring)
                flags = np.zeros(len(tris), dtype=bool)
                flags[list(ring_set)] = True
                clusters = _components(flags, neighbors)
                details["tip_clusters"] = len(clusters)
                if len(clusters) >= 2:
                    branching = True

    pattern = CrackPattern(propagation, initiation, debonding, branching)
    details["labels"] = pattern.code
    return pattern, details
