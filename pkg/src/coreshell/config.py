"""Run configuration: TOML schema, validation, derivation and echo.

Geometry keys carry explicit unit suffixes (``_um``, ``_gpa``, ``_mpa``);
bare keys are SI. Fracture parameters may be given directly (``gc``,
``ell_um``) or derived from indentation data (``fracture_toughness_mpa_sqrt_m``
plus ``tensile_strength_mpa``). The effective configuration, with every
default and derived quantity resolved, can be emitted back as TOML and
re-parsed into an identical run.
"""
from __future__ import annotations

import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .driver import Protocol, SolverSettings
from .errors import ConfigError
from .interface import InterfaceParams
from .materials import (
    Material,
    OcpCurve,
    builtin_ocp,
    gc_from_fracture_toughness,
    length_scale_from_strength,
)
from .mesh import InitialCrack, MeshResolution, ParticleSpec

logger = logging.getLogger(__name__)

MESH_LEVELS = ("coarse", "medium", "fine")


@dataclass
class OutputOptions:
    directory: str = "runs/out"
    snapshot_every: int = 0
    write_vtk: bool = True
    write_plots: bool = True
    log_every: int = 10


@dataclass
class RunConfig:
    """Fully resolved configuration of one simulation run."""

    spec: ParticleSpec
    core: Material
    shell: Material
    interface: InterfaceParams
    protocol: Protocol
    settings: SolverSettings
    mesh_level: str
    output: OutputOptions
    effective: dict = field(default_factory=dict)
    source_path: str | None = None


def _require(table: dict, key: str, section: str) -> Any:
    if key not in table:
        raise ConfigError(f"missing key '{section}.{key}'")
    return table[key]


def _unknown_keys(table: dict, allowed: set[str], section: str) -> None:
    extra = sorted(set(table) - allowed)
    if extra:
        raise ConfigError(
            f"unknown key(s) in [{section}]: " + ", ".join(f"'{k}'" for k in extra)
        )


def _load_ocp(value: str, base_dir: Path) -> OcpCurve:
    if value.lower().endswith(".csv"):
        path = Path(value)
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"OCP table not found: {path}")
        return OcpCurve.from_csv(path)
    return builtin_ocp(value)


def _parse_material(table: dict, section: str, base_dir: Path) -> tuple[Material, dict]:
    allowed = {
        "name",
        "c_max",
        "partial_molar_volume",
        "diffusivity",
        "youngs_modulus_gpa",
        "poisson",
        "gc",
        "ell_um",
        "fracture_toughness_mpa_sqrt_m",
        "tensile_strength_mpa",
        "ocp",
    }
    _unknown_keys(table, allowed, section)
    name = table.get("name", section.split(".")[-1])
    e_pa = float(_require(table, "youngs_modulus_gpa", section)) * 1e9
    nu = float(_require(table, "poisson", section))

    kc = table.get("fracture_toughness_mpa_sqrt_m")
    sc = table.get("tensile_strength_mpa")
    if "gc" in table:
        gc = float(table["gc"])
    elif kc is not None:
        gc = gc_from_fracture_toughness(float(kc) * 1e6, e_pa, nu)
    else:
        raise ConfigError(
            f"[{section}] needs either 'gc' or 'fracture_toughness_mpa_sqrt_m'"
        )
    if "ell_um" in table:
        ell = float(table["ell_um"]) * 1e-6
    elif kc is not None and sc is not None:
        ell = length_scale_from_strength(float(kc) * 1e6, float(sc) * 1e6)
    else:
        raise ConfigError(
            f"[{section}] needs either 'ell_um' or both "
            "'fracture_toughness_mpa_sqrt_m' and 'tensile_strength_mpa'"
        )

    ocp = None
    if "ocp" in table:
        ocp = _load_ocp(str(table["ocp"]), base_dir)

    mat = Material(
        c_max=float(_require(table, "c_max", section)),
        partial_molar_volume=float(_require(table, "partial_molar_volume", section)),
        diffusivity=float(_require(table, "diffusivity", section)),
        youngs_modulus=e_pa,
        poisson=nu,
        gc=gc,
        ell=ell,
        ocp=ocp,
        name=str(name),
    )
    # Echo inputs as given; derived quantities are only materialised when the
    # deriving keys are absent, so emit/parse round-trips bit-identically.
    echo = {
        "name": mat.name,
        "c_max": mat.c_max,
        "partial_molar_volume": mat.partial_molar_volume,
        "diffusivity": mat.diffusivity,
        "youngs_modulus_gpa": float(table["youngs_modulus_gpa"]),
        "poisson": nu,
    }
    if kc is not None:
        echo["fracture_toughness_mpa_sqrt_m"] = float(kc)
    if sc is not None:
        echo["tensile_strength_mpa"] = float(sc)
    if "gc" in table or kc is None:
        echo["gc"] = gc
    if "ell_um" in table or kc is None or sc is None:
        echo["ell_um"] = ell * 1e6
    if "ocp" in table:
        echo["ocp"] = str(table["ocp"])
    return mat, echo


def parse_config(data: dict, base_dir: Path | str = ".", source: str | None = None) -> RunConfig:
    """Validate a parsed TOML mapping and resolve it into a RunConfig."""
    base_dir = Path(base_dir)
    _unknown_keys(
        data,
        {"particle", "materials", "interface", "protocol", "solver", "mesh", "output"},
        "top level",
    )

    # -- particle ---------------------------------------------------------
    part = _require(data, "particle", "top level")
    _unknown_keys(
        part, {"core_radius_um", "hbar", "shell_thickness_um", "grading", "crack"}, "particle"
    )
    r = float(_require(part, "core_radius_um", "particle")) * 1e-6
    if "shell_thickness_um" in part:
        h = float(part["shell_thickness_um"]) * 1e-6
    elif "hbar" in part:
        h = float(part["hbar"]) * r
    else:
        raise ConfigError("missing key 'particle.hbar' or 'particle.shell_thickness_um'")
    grading = str(part.get("grading", "uniform"))

    crack_tab = part.get("crack", {"location": "none"})
    _unknown_keys(crack_tab, {"location", "size_fraction", "size_um"}, "particle.crack")
    location = str(crack_tab.get("location", "none"))
    if location == "none":
        crack = InitialCrack()
    else:
        if "size_um" in crack_tab:
            size = float(crack_tab["size_um"]) * 1e-6
        elif "size_fraction" in crack_tab:
            frac = float(crack_tab["size_fraction"])
            size = frac * (r if location == "center" else h)
        else:
            raise ConfigError("crack needs 'size_fraction' or 'size_um'")
        crack = InitialCrack(location, size)
    try:
        spec = ParticleSpec(r, h, grading=grading, crack=crack)
    except Exception as exc:
        raise ConfigError(f"invalid [particle]: {exc}") from exc

    # -- materials ----------------------------------------------------------
    mats = _require(data, "materials", "top level")
    _unknown_keys(mats, {"core", "shell"}, "materials")
    core, core_echo = _parse_material(_require(mats, "core", "materials"), "materials.core", base_dir)
    shell, shell_echo = _parse_material(
        _require(mats, "shell", "materials"), "materials.shell", base_dir
    )

    # -- interface ----------------------------------------------------------
    itab = data.get("interface", {})
    _unknown_keys(itab, {"ell_zeta_um", "bonding_ratio", "gc_interface"}, "interface")
    ell_zeta = float(itab.get("ell_zeta_um", 0.1)) * 1e-6
    if "gc_interface" in itab:
        gci = float(itab["gc_interface"])
        ratio = gci / (0.5 * (core.gc + shell.gc))
    else:
        ratio = float(itab.get("bonding_ratio", 1.0))
    try:
        iface = InterfaceParams(ell_zeta=ell_zeta, bonding_ratio=ratio)
    except Exception as exc:
        raise ConfigError(f"invalid [interface]: {exc}") from exc

    # -- protocol -------------------------------------------------------------
    ptab = data.get("protocol", {})
    allowed_p = {"c_rate", "cutoff_fraction", "x_cv", "x_shell_initial", "temperature"}
    _unknown_keys(ptab, allowed_p, "protocol")
    try:
        protocol = Protocol(**{k: float(v) for k, v in ptab.items()})
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid [protocol]: {exc}") from exc

    # -- solver ---------------------------------------------------------------
    stab = dict(data.get("solver", {}))
    allowed_s = {
        "newton_tol",
        "equilibrium_tol",
        "stagger_tol",
        "stagger_max_iter",
        "dt_initial",
        "dt_min",
        "dt_max_factor",
        "dt_growth",
        "dt_shrink",
        "grow_iters",
        "grow_dphi",
        "linear_solver",
        "damage_diffusion_coupling",
        "max_steps",
    }
    _unknown_keys(stab, allowed_s, "solver")
    if "linear_solver" in stab and stab["linear_solver"] not in ("direct", "cg", "auto"):
        raise ConfigError("solver.linear_solver must be 'direct', 'cg' or 'auto'")
    try:
        settings = SolverSettings(**stab)
    except Exception as exc:
        raise ConfigError(f"invalid [solver]: {exc}") from exc

    # -- mesh ----------------------------------------------------------------
    mtab = data.get("mesh", {})
    _unknown_keys(mtab, {"level"}, "mesh")
    level = str(mtab.get("level", "coarse"))
    if level not in MESH_LEVELS:
        raise ConfigError(f"mesh.level must be one of {MESH_LEVELS}")

    # -- output --------------------------------------------------------------
    otab = data.get("output", {})
    allowed_o = {"directory", "snapshot_every", "write_vtk", "write_plots", "log_every"}
    _unknown_keys(otab, allowed_o, "output")
    output = OutputOptions(
        directory=str(otab.get("directory", "runs/out")),
        snapshot_every=int(otab.get("snapshot_every", 0)),
        write_vtk=bool(otab.get("write_vtk", True)),
        write_plots=bool(otab.get("write_plots", True)),
        log_every=int(otab.get("log_every", 10)),
    )

    # Echo the geometry keys exactly as given so that emit/parse round-trips
    # bit-identically (no repeated unit conversion).
    particle_echo: dict[str, Any] = {"core_radius_um": float(part["core_radius_um"])}
    if "shell_thickness_um" in part:
        particle_echo["shell_thickness_um"] = float(part["shell_thickness_um"])
    else:
        particle_echo["hbar"] = float(part["hbar"])
    particle_echo["grading"] = grading
    crack_echo: dict[str, Any] = {"location": location}
    if location != "none":
        if "size_um" in crack_tab:
            crack_echo["size_um"] = float(crack_tab["size_um"])
        else:
            crack_echo["size_fraction"] = float(crack_tab["size_fraction"])
    particle_echo["crack"] = crack_echo

    effective = {
        "particle": particle_echo,
        "materials": {"core": core_echo, "shell": shell_echo},
        "interface": {"ell_zeta_um": float(itab.get("ell_zeta_um", 0.1)), "bonding_ratio": ratio},
        "protocol": {
            "c_rate": protocol.c_rate,
            "cutoff_fraction": protocol.cutoff_fraction,
            "x_cv": protocol.x_cv,
            "x_shell_initial": protocol.x_shell_initial,
            "temperature": protocol.temperature,
        },
        "solver": asdict(settings),
        "mesh": {"level": level},
        "output": asdict(output),
    }
    return RunConfig(
        spec=spec,
        core=core,
        shell=shell,
        interface=iface,
        protocol=protocol,
        settings=settings,
        mesh_level=level,
        output=output,
        effective=effective,
        source_path=source,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return parse_config(data, base_dir=path.parent, source=str(path))


def set_by_path(data: dict, dotted: str, value: Any) -> None:
    """Set a nested key like ``interface.bonding_ratio`` in a config mapping."""
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError(f"unknown config section '{k}' in '{dotted}'")
        node = node[k]
    node[keys[-1]] = value


def _toml_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot emit TOML value of type {type(v).__name__}")


def dump_toml(data: dict, path: str | Path | None = None) -> str:
    """Emit a nested mapping of scalars as TOML (sections in insertion order)."""
    lines: list[str] = []

    def emit(table: dict, prefix: str) -> None:
        scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
        subtables = {k: v for k, v in table.items() if isinstance(v, dict)}
        if prefix and (scalars or not subtables):
            lines.append(f"[{prefix}]")
        for k, v in scalars.items():
            lines.append(f"{k} = {_toml_value(v)}")
        if scalars:
            lines.append("")
        for k, v in subtables.items():
            emit(v, f"{prefix}.{k}" if prefix else k)

    emit(data, "")
    text = "\n".join(lines).rstrip() + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
