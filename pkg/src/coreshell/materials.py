"""Material data, parameter derivation and per-quadrature-point fields."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fem import ElementData
from .mesh import Mesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhysicalConstants:
    """Gas constant, Faraday constant and operating temperature."""

    gas_constant: float = 8.314       # J / (mol K)
    faraday: float = 96485.0          # C / mol
    temperature: float = 298.15       # K

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise ConfigError("temperature must be positive")

    @property
    def rt(self) -> float:
        return self.gas_constant * self.temperature


def gc_from_fracture_toughness(k_c: float, youngs_modulus: float, poisson: float) -> float:
    """Critical energy release rate from indentation fracture toughness.

    Plane-strain relation ``G_c = (1 - nu^2) K_c^2 / E`` with all inputs in
    SI units (Pa sqrt(m), Pa). Returns N/m.
    """
    return (1.0 - poisson**2) * k_c**2 / youngs_modulus


def length_scale_from_strength(k_c: float, sigma_c: float) -> float:
    """Regularisation length from toughness and tensile strength.

    ``l = (27/256) (K_c / sigma_c)^2``, the value at which the homogeneous
    solution of the quadratic damage model peaks at ``sigma_c``.
    """
    if sigma_c <= 0.0:
        raise ConfigError("tensile strength must be positive")
    return 27.0 / 256.0 * (k_c / sigma_c) ** 2


class OcpCurve:
    """Sampled open-circuit potential, strictly decreasing in stoichiometry.

    Piecewise-linear interpolation in both directions; the inverse clamps to
    the table range with a logged warning, which usually means the table does
    not span the operating window.
    """

    def __init__(self, x: np.ndarray, u: np.ndarray, name: str = "ocp"):
        self.x = np.asarray(x, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.name = name
        if self.x.ndim != 1 or self.x.shape != self.u.shape or len(self.x) < 2:
            raise ConfigError(f"OCP table {name!r} must be two equal-length columns")
        if not np.all(np.diff(self.x) > 0.0):
            raise ConfigError(f"OCP table {name!r}: stoichiometry column must increase strictly")
        if not np.all(np.diff(self.u) < 0.0):
            raise ConfigError(f"OCP table {name!r}: potential must decrease strictly with x")
        if self.x[0] > 0.05 or self.x[-1] < 1.0:
            raise ConfigError(
                f"OCP table {name!r} spans [{self.x[0]:g}, {self.x[-1]:g}]; "
                "it must cover [0.05, 1.0]"
            )
        self._slopes = np.diff(self.u) / np.diff(self.x)

    def u_of_x(self, x: np.ndarray | float) -> np.ndarray | float:
        return np.interp(x, self.x, self.u)

    def x_of_u(self, u: np.ndarray | float) -> np.ndarray | float:
        u_arr = np.atleast_1d(np.asarray(u, dtype=float))
        lo, hi = self.u[-1], self.u[0]
        n_clamped = int(np.sum((u_arr < lo) | (u_arr > hi)))
        if n_clamped:
            logger.warning(
                "OCP %s: %d potential value(s) outside [%.4f, %.4f] V clamped "
                "(table may be too narrow)",
                self.name,
                n_clamped,
                lo,
                hi,
            )
        out = np.interp(u_arr, self.u[::-1], self.x[::-1])
        return out if np.ndim(u) else float(out[0])

    def du_dx(self, x: np.ndarray | float) -> np.ndarray | float:
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.clip(np.searchsorted(self.x, x_arr, side="right") - 1, 0, len(self._slopes) - 1)
        out = self._slopes[idx]
        return out if np.ndim(x) else float(out[0])

    @classmethod
    def from_csv(cls, path: str | Path, name: str | None = None) -> "OcpCurve":
        xs, us = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    xs.append(float(row[0]))
                    us.append(float(row[1]))
                except (ValueError, IndexError):
                    continue  # header line
        return cls(np.array(xs), np.array(us), name=name or Path(path).stem)


_BUILTIN_OCP = {"nmc811": "ocp_nmc811_synthetic.csv", "nmc532": "ocp_nmc532_synthetic.csv"}


def builtin_ocp(name: str) -> OcpCurve:
    """Load one of the packaged example OCP tables.

    The shipped tables are synthetic curves with a literature-informed NMC
    shape, not measured data; replace them for quantitative work on a real
    chemistry.
    """
    key = name.lower()
    if key not in _BUILTIN_OCP:
        raise ConfigError(f"unknown builtin OCP {name!r}; have {sorted(_BUILTIN_OCP)}")
    ref = resources.files("coreshell").joinpath("data", _BUILTIN_OCP[key])
    with resources.as_file(ref) as path:
        return OcpCurve.from_csv(path, name=key)


@dataclass
class Material:
    """Bulk material parameters of one phase (core or shell)."""

    c_max: float                 # mol / m^3
    partial_molar_volume: float  # m^3 / mol
    diffusivity: float           # m^2 / s
    youngs_modulus: float        # Pa
    poisson: float
    gc: float                    # N / m
    ell: float                   # m
    ocp: OcpCurve | None = None
    name: str = "material"

    def __post_init__(self):
        positive = {
            "c_max": self.c_max,
            "partial_molar_volume": self.partial_molar_volume,
            "diffusivity": self.diffusivity,
            "youngs_modulus": self.youngs_modulus,
            "gc": self.gc,
            "ell": self.ell,
        }
        bad = [k for k, v in positive.items() if not v > 0.0]
        if bad:
            raise ConfigError(f"material {self.name!r}: non-positive {', '.join(bad)}")
        if not 0.0 < self.poisson < 0.5:
            raise ConfigError(f"material {self.name!r}: Poisson ratio must lie in (0, 0.5)")

    @property
    def shear_modulus(self) -> float:
        return self.youngs_modulus / (2.0 * (1.0 + self.poisson))

    @property
    def lame_lambda(self) -> float:
        nu = self.poisson
        return self.youngs_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    @property
    def bulk_modulus(self) -> float:
        return self.lame_lambda + 2.0 * self.shear_modulus / 3.0


@dataclass
class MaterialFields:
    """Material parameters evaluated on the mesh.

    Quadrature-point arrays have shape (E, nqp); ``ell_elem`` is per element
    and ``gc_bulk_nodal`` holds the bulk-branch toughness at nodes (the
    diffuse-interface interpolation is applied on top of it).
    """

    omega_qp: np.ndarray
    d0_qp: np.ndarray
    cmax_qp: np.ndarray
    bulk_qp: np.ndarray    # bulk modulus K
    shear_qp: np.ndarray   # shear modulus G
    ell_elem: np.ndarray
    gc_bulk_nodal: np.ndarray
    core: Material
    shell: Material
    grading: str

    @property
    def graded(self) -> bool:
        return self.grading == "graded"

    def surface_c_max(self) -> float:
        return self.shell.c_max

    def interface_pair(self) -> tuple[Material, Material]:
        """(core-side, shell-side) materials governing the interface jump.

        In graded mode the shell properties at the interface equal the core
        material, so both sides are the core material and the concentration
        jump vanishes.
        """
        if self.graded:
            return self.core, self.core
        return self.core, self.shell


def graded_value(rho: np.ndarray, core_value: float, surface_value: float, r_core: float, h: float) -> np.ndarray:
    """Linear radial interpolation across the shell, core value elsewhere."""
    w = np.clip((np.asarray(rho, dtype=float) - r_core) / h, 0.0, 1.0)
    return core_value + w * (surface_value - core_value)


def build_material_fields(
    mesh: Mesh,
    edata: ElementData,
    core: Material,
    shell: Material,
    grading: str | None = None,
) -> MaterialFields:
    """Evaluate material parameters at quadrature points, elements and nodes."""
    grading = grading or mesh.meta.get("grading", "uniform")
    r_core = mesh.meta["core_radius"]
    h = mesh.meta["shell_thickness"]
    in_shell = mesh.region == 1

    def qp_field(attr):
        cv = getattr(core, attr)
        sv = getattr(shell, attr)
        if grading == "graded":
            rho_qp = np.hypot(edata.qp_xy[:, :, 0], edata.qp_xy[:, :, 1])
            return graded_value(rho_qp, cv, sv, r_core, h)
        out = np.full((edata.n_elems, edata.n_qp), cv)
        out[in_shell] = sv
        return out

    ell_elem = np.where(in_shell, shell.ell, core.ell).astype(float)
    if grading == "graded":
        cen = edata.qp_xy.mean(axis=1)
        rho_c = np.hypot(cen[:, 0], cen[:, 1])
        ell_elem = graded_value(rho_c, core.ell, shell.ell, r_core, h)

    rho_nodes = mesh.rho
    node_shell = rho_nodes >= r_core - 1e-9 * r_core
    if grading == "graded":
        gc_nodal = graded_value(rho_nodes, core.gc, shell.gc, r_core, h)
    else:
        gc_nodal = np.where(node_shell, shell.gc, core.gc).astype(float)

    # Elastic moduli derive from the (possibly graded) E and nu fields.
    e_qp = qp_field("youngs_modulus")
    nu_qp = qp_field("poisson")
    shear_qp = e_qp / (2.0 * (1.0 + nu_qp))
    lam_qp = e_qp * nu_qp / ((1.0 + nu_qp) * (1.0 - 2.0 * nu_qp))

    return MaterialFields(
        omega_qp=qp_field("partial_molar_volume"),
        d0_qp=qp_field("diffusivity"),
        cmax_qp=qp_field("c_max"),
        bulk_qp=lam_qp + 2.0 * shear_qp / 3.0,
        shear_qp=shear_qp,
        ell_elem=ell_elem,
        gc_bulk_nodal=gc_nodal,
        core=core,
        shell=shell,
        grading=grading,
    )
