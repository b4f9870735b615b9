"""Axisymmetric core-shell particle meshes.

The particle is meshed as the quarter cross-section ``r >= 0, z >= 0`` of a
sphere of radius ``R + h``, using concentric rings of nodes joined by strip
triangulation. A ring is always placed exactly on the core-shell interface
(spherical radius ``R``), so no element straddles the two regions, and the
concentration field gets duplicated degrees of freedom on that ring so it can
jump across the interface while every other field stays continuous.

Refinement is band-based: crack-plane bands, the diffuse-interface band and
the shell carry the finest spacing; the core interior coarsens smoothly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError

logger = logging.getLogger(__name__)

CRACK_LOCATIONS = ("surface", "interface", "center", "none")


@dataclass(frozen=True)
class InitialCrack:
    """Pre-existing crack descriptor on the equatorial plane ``z = 0``.

    ``size`` is the absolute crack length ``a`` in meters. Surface cracks
    extend inward from the outer surface, interface cracks are centred on the
    core-shell interface, centre cracks extend outward from the origin.
    """

    location: str = "none"
    size: float = 0.0

    def __post_init__(self):
        if self.location not in CRACK_LOCATIONS:
            raise MeshError(f"unknown crack location {self.location!r}")
        if self.location != "none" and self.size <= 0.0:
            raise MeshError("crack size must be positive")


@dataclass(frozen=True)
class ParticleSpec:
    """Geometry of a spherical core-shell particle."""

    core_radius: float
    shell_thickness: float
    grading: str = "uniform"  # "uniform" or "graded"
    crack: InitialCrack = field(default_factory=InitialCrack)

    def __post_init__(self):
        r, h = self.core_radius, self.shell_thickness
        if not (r > 0.0):
            raise MeshError(f"core radius must be positive, got {r}")
        if not (0.0 < h < r):
            raise MeshError(f"shell thickness must satisfy 0 < h < R, got h={h}, R={r}")
        if self.grading not in ("uniform", "graded"):
            raise MeshError(f"unknown grading mode {self.grading!r}")
        hbar = h / r
        if not (0.1 <= hbar <= 0.3):
            logger.info("relative shell thickness h/R = %.3f outside the usual [0.1, 0.3]", hbar)
        c = self.crack
        if c.location in ("surface", "interface") and c.size >= h:
            raise MeshError(f"{c.location} crack size {c.size:g} must be smaller than h={h:g}")
        if c.location == "center" and c.size >= r:
            raise MeshError(f"center crack size {c.size:g} must be smaller than R={r:g}")

    @property
    def hbar(self) -> float:
        return self.shell_thickness / self.core_radius

    @property
    def outer_radius(self) -> float:
        return self.core_radius + self.shell_thickness

    def crack_band(self) -> tuple[float, float] | None:
        """In-plane radial extent [r_lo, r_hi] of the initial crack, or None."""
        r, h, a = self.core_radius, self.shell_thickness, self.crack.size
        if self.crack.location == "surface":
            return (r + h - a, r + h)
        if self.crack.location == "interface":
            return (r - 0.5 * a, r + 0.5 * a)
        if self.crack.location == "center":
            return (0.0, a)
        return None


@dataclass(frozen=True)
class MeshResolution:
    """Target element sizes (meters) for the banded refinement strategy."""

    bulk_core: float
    shell: float
    interface_band: float
    crack_band: float
    z_band: float              # half-width of the fine band around z = 0
    interface_halfwidth: float  # half-width of the fine band around the interface
    tip_halfwidth: float       # half-width of extra refinement around crack tips
    gradation: float = 0.45    # max size growth per unit distance

    @classmethod
    def for_particle(
        cls,
        spec: ParticleSpec,
        ell_core: float,
        ell_shell: float,
        ell_zeta: float,
        level: str = "coarse",
    ) -> "MeshResolution":
        """Derive band sizes from the regularisation lengths.

        ``coarse`` sits exactly at the required bounds (crack bands at
        ``min(ell)/4``, interface band at ``ell_zeta/3``); ``medium`` and
        ``fine`` scale everything down by 1.5x and 2x.
        """
        factors = {"coarse": 1.0, "medium": 1.5, "fine": 2.0}
        if level not in factors:
            raise MeshError(f"unknown resolution level {level!r}")
        f = factors[level]
        ell_min = min(ell_core, ell_shell)
        ell_max = max(ell_core, ell_shell)
        crack = ell_min / 4.0 / f
        return cls(
            bulk_core=min(spec.core_radius / 10.0, 4.0 * crack),
            shell=crack,
            interface_band=ell_zeta / 3.0 / f,
            crack_band=crack,
            z_band=4.0 * ell_max,
            interface_halfwidth=max(3.0 * ell_zeta, 2.5 * ell_max),
            tip_halfwidth=2.0 * ell_max,
        )


@dataclass
class Mesh:
    """Triangulation with region and boundary bookkeeping.

    The concentration field uses ``c_conn``: core elements address duplicated
    dofs (``n_nodes + k``) at interface nodes, shell elements address the
    plain node ids. All other fields use ``tris`` directly.
    """

    nodes: np.ndarray                 # (N, 2) coordinates (r, z)
    tris: np.ndarray                  # (E, 3) connectivity
    region: np.ndarray                # (E,) 0 = core, 1 = shell
    node_sets: dict[str, np.ndarray]
    edge_sets: dict[str, np.ndarray]  # boundary polylines as (S, 2) node pairs
    interface_nodes: np.ndarray       # node ids on the interface ring
    c_conn: np.ndarray                # (E, 3) concentration connectivity
    n_cdof: int
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elems(self) -> int:
        return len(self.tris)

    @property
    def rho(self) -> np.ndarray:
        return np.hypot(self.nodes[:, 0], self.nodes[:, 1])

    def twin_dofs(self) -> np.ndarray:
        """Core-side concentration dof ids paired with ``interface_nodes``."""
        return self.n_nodes + np.arange(len(self.interface_nodes))


# ---------------------------------------------------------------------------
# graded 1D partitions
# ---------------------------------------------------------------------------

def _limit_gradation(s: np.ndarray, x: np.ndarray, g: float) -> np.ndarray:
    """Enforce |ds/dx| <= g by forward/backward sweeps."""
    s = s.copy()
    dx = np.diff(x)
    for i in range(1, len(s)):
        s[i] = min(s[i], s[i - 1] + g * dx[i - 1])
    for i in range(len(s) - 2, -1, -1):
        s[i] = min(s[i], s[i + 1] + g * dx[i])
    return s


def _graded_points(x0: float, x1: float, size_fn, gradation: float, samples: int = 1200) -> np.ndarray:
    """Partition [x0, x1] following a target size function.

    Points are placed at equal increments of the cumulative integral of
    ``1/size``, which realises the size function up to rounding while keeping
    neighbouring intervals within the gradation limit.
    """
    if x1 <= x0:
        return np.array([x0])
    xs = np.linspace(x0, x1, samples)
    s = np.maximum(size_fn(xs), 1e-30)
    s = _limit_gradation(s, xs, gradation)
    density = 1.0 / s
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(xs))])
    total = cum[-1]
    n = max(1, int(round(total)))
    targets = np.linspace(0.0, total, n + 1)
    return np.interp(targets, cum, xs)


def _strip_triangles(inner: np.ndarray, outer: np.ndarray, inner_t: np.ndarray, outer_t: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate the band between two rings by merging their angle lists."""
    tris = []
    i, j = 0, 0
    ni, nj = len(inner) - 1, len(outer) - 1
    while i < ni or j < nj:
        advance_inner = False
        if j == nj:
            advance_inner = True
        elif i < ni:
            advance_inner = inner_t[i + 1] <= outer_t[j + 1]
        if advance_inner:
            tris.append((inner[i], outer[j], inner[i + 1]))
            i += 1
        else:
            tris.append((inner[i], outer[j], outer[j + 1]))
            j += 1
    return tris


# ---------------------------------------------------------------------------
# particle mesh
# ---------------------------------------------------------------------------

def build_particle_mesh(spec: ParticleSpec, resolution: MeshResolution) -> Mesh:
    """Generate the quarter cross-section mesh of a core-shell particle.

    Returns a conforming triangulation with region tags, boundary node and
    edge sets (outer surface, symmetry axis, symmetry plane, interface ring)
    and duplicated interface dofs for the concentration field.
    """
    R = spec.core_radius
    b = spec.outer_radius
    res = resolution

    tips: list[float] = []
    band = spec.crack_band()
    if band is not None:
        for t in band:
            if 1e-12 < t < b - 1e-12:
                tips.append(t)

    zeta_halfwidth = 9.0 * res.interface_band  # 3 * ell_zeta with interface_band = ell_zeta / 3

    def radial_size(rho):
        rho = np.asarray(rho, dtype=float)
        s = np.where(rho < R, res.bulk_core, res.shell).astype(float)
        d_if = np.abs(rho - R)
        s = np.where(d_if <= res.interface_halfwidth, np.minimum(s, res.crack_band), s)
        s = np.where(d_if <= zeta_halfwidth, np.minimum(s, res.interface_band), s)
        for t in tips:
            s = np.where(np.abs(rho - t) <= res.tip_halfwidth, np.minimum(s, res.crack_band), s)
        return s

    knots = sorted({0.0, R, b, *tips})
    radii = [0.0]
    for k0, k1 in zip(knots[:-1], knots[1:]):
        pts = _graded_points(k0, k1, radial_size, res.gradation)
        radii.extend(pts[1:])
    radii = np.array(radii)

    def arc_size(rho, theta):
        z = rho * np.sin(theta)
        s = np.full_like(theta, res.bulk_core, dtype=float)
        if rho >= R - res.interface_halfwidth:
            s[:] = res.crack_band
        else:
            # Blend the arc target up from the fine zone radius.
            dist = (R - res.interface_halfwidth) - rho
            s[:] = min(res.bulk_core, res.crack_band + res.gradation * dist)
        return np.where(z <= res.z_band, np.minimum(s, res.crack_band), s)

    # Nodes ring by ring; origin is a single node.
    coords = [(0.0, 0.0)]
    ring_ids: list[np.ndarray] = [np.array([0])]
    ring_thetas: list[np.ndarray] = [np.array([0.0])]
    for rho in radii[1:]:
        thetas = _graded_points(0.0, 0.5 * np.pi, lambda t: arc_size(rho, t) / rho, res.gradation)
        ids = np.arange(len(coords), len(coords) + len(thetas))
        r_coords = rho * np.cos(thetas)
        z_coords = rho * np.sin(thetas)
        r_coords[np.abs(thetas - 0.5 * np.pi) < 1e-12] = 0.0
        z_coords[np.abs(thetas) < 1e-12] = 0.0
        coords.extend(zip(r_coords, z_coords))
        ring_ids.append(ids)
        ring_thetas.append(thetas)

    tris: list[tuple[int, int, int]] = []
    for k in range(len(radii) - 1):
        if k == 0:
            outer = ring_ids[1]
            for j in range(len(outer) - 1):
                tris.append((0, outer[j], outer[j + 1]))
        else:
            tris.extend(
                _strip_triangles(ring_ids[k], ring_ids[k + 1], ring_thetas[k], ring_thetas[k + 1])
            )

    nodes = np.array(coords)
    tri_arr = np.array(tris, dtype=np.int64)

    # Enforce counter-clockwise orientation.
    p0, p1, p2 = nodes[tri_arr[:, 0]], nodes[tri_arr[:, 1]], nodes[tri_arr[:, 2]]
    det = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    flip = det < 0.0
    tri_arr[flip, 1], tri_arr[flip, 2] = tri_arr[flip, 2].copy(), tri_arr[flip, 1].copy()
    if np.any(np.abs(det) < 1e-30):
        raise MeshError("degenerate (zero-area) triangle produced")

    rho_nodes = np.hypot(nodes[:, 0], nodes[:, 1])
    centroid_rho = (rho_nodes[tri_arr[:, 0]] + rho_nodes[tri_arr[:, 1]] + rho_nodes[tri_arr[:, 2]]) / 3.0
    region = (centroid_rho > R).astype(np.int8)

    # Interface conformity: all three nodes of an element on one side of R.
    tol = 1e-9 * R
    mins = np.min(rho_nodes[tri_arr] - R, axis=1)
    maxs = np.max(rho_nodes[tri_arr] - R, axis=1)
    if np.any((mins < -tol) & (maxs > tol)):
        raise MeshError("an element crosses the core-shell interface")

    interface_ring_idx = int(np.argmin(np.abs(radii - R)))
    interface_nodes = ring_ids[interface_ring_idx]
    if abs(radii[interface_ring_idx] - R) > tol:
        raise MeshError("no node ring lies on the interface radius")

    surface_nodes = ring_ids[-1]
    axis_nodes = np.nonzero(nodes[:, 0] == 0.0)[0]
    plane_nodes = np.nonzero(nodes[:, 1] == 0.0)[0]

    node_sets = {
        "surface": surface_nodes,
        "axis": axis_nodes,
        "plane": plane_nodes,
        "interface": interface_nodes,
    }
    edge_sets = {
        "surface": np.stack([surface_nodes[:-1], surface_nodes[1:]], axis=1),
    }

    # Duplicated concentration dofs on the interface ring (core side).
    n_nodes = len(nodes)
    twin_map = np.full(n_nodes, -1, dtype=np.int64)
    twin_map[interface_nodes] = n_nodes + np.arange(len(interface_nodes))
    c_conn = tri_arr.copy()
    core_elems = region == 0
    local = twin_map[tri_arr[core_elems]]
    c_conn[core_elems] = np.where(local >= 0, local, tri_arr[core_elems])
    n_cdof = n_nodes + len(interface_nodes)

    meta = {
        "core_radius": R,
        "shell_thickness": spec.shell_thickness,
        "outer_radius": b,
        "grading": spec.grading,
        "crack": {"location": spec.crack.location, "size": spec.crack.size},
        "n_nodes": n_nodes,
        "n_elems": len(tri_arr),
        "n_rings": len(radii),
        "resolution": {
            "bulk_core": res.bulk_core,
            "shell": res.shell,
            "interface_band": res.interface_band,
            "crack_band": res.crack_band,
            "z_band": res.z_band,
        },
    }
    mesh = Mesh(
        nodes=nodes,
        tris=tri_arr,
        region=region,
        node_sets=node_sets,
        edge_sets=edge_sets,
        interface_nodes=interface_nodes,
        c_conn=c_conn,
        n_cdof=n_cdof,
        meta=meta,
    )
    logger.info(
        "particle mesh: %d nodes, %d elements, %d rings, %d interface pairs",
        n_nodes,
        len(tri_arr),
        len(radii),
        len(interface_nodes),
    )
    return mesh


def rectangle_mesh(width: float, height: float, nx: int, ny: int, x0: float = 0.0) -> Mesh:
    """Structured rectangle triangulation for slab-type verification cases.

    Node sets ``left``, ``right``, ``bottom``, ``top`` mark the edges; all
    elements carry region 0 and the concentration connectivity is plain.
    """
    xs = np.linspace(x0, x0 + width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    xv, yv = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.stack([xv.ravel(), yv.ravel()], axis=1)

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, c_, d, e = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
            tris.append((a, c_, d))
            tris.append((a, d, e))
    tri_arr = np.array(tris, dtype=np.int64)

    idx = np.arange(len(nodes))
    node_sets = {
        "left": idx[nodes[:, 0] == xs[0]],
        "right": idx[nodes[:, 0] == xs[-1]],
        "bottom": idx[nodes[:, 1] == ys[0]],
        "top": idx[nodes[:, 1] == ys[-1]],
    }
    left = node_sets["left"][np.argsort(nodes[node_sets["left"], 1])]
    right = node_sets["right"][np.argsort(nodes[node_sets["right"], 1])]
    edge_sets = {
        "left": np.stack([left[:-1], left[1:]], axis=1),
        "right": np.stack([right[:-1], right[1:]], axis=1),
    }
    return Mesh(
        nodes=nodes,
        tris=tri_arr,
        region=np.zeros(len(tri_arr), dtype=np.int8),
        node_sets=node_sets,
        edge_sets=edge_sets,
        interface_nodes=np.array([], dtype=np.int64),
        c_conn=tri_arr.copy(),
        n_cdof=len(nodes),
        meta={"width": width, "height": height},
    )
