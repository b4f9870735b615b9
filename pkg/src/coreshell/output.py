"""Run artefacts: VTK snapshots, metrics CSV, summary plots, run metadata."""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .driver import FieldState, RunResult, Simulation
from .fracture import degradation
from .mesh import Mesh
from .metrics import MetricsSeries

logger = logging.getLogger(__name__)


def write_vtk(
    mesh: Mesh,
    path: str | Path,
    point_data: dict[str, np.ndarray] | None = None,
    cell_data: dict[str, np.ndarray] | None = None,
    title: str = "coreshell snapshot",
) -> Path:
    """Write the mesh and fields as a legacy ASCII VTK unstructured grid.

    Scalar point/cell arrays are written as SCALARS, (N, 2) arrays as
    3-component VECTORS with a zero out-of-plane component.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, e = mesh.n_nodes, mesh.n_elems
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        for r, z in mesh.nodes:
            fh.write(f"{r:.9e} {z:.9e} 0.0\n")
        fh.write(f"CELLS {e} {4 * e}\n")
        for a, b, c in mesh.tris:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {e}\n")
        fh.write("\n".join(["5"] * e) + "\n")

        def write_arrays(data: dict[str, np.ndarray], count: int) -> None:
            for name, arr in data.items():
                arr = np.asarray(arr)
                if arr.ndim == 1:
                    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    fh.write("\n".join(f"{v:.9e}" for v in arr) + "\n")
                else:
                    fh.write(f"VECTORS {name} double\n")
                    for row in arr:
                        fh.write(f"{row[0]:.9e} {row[1]:.9e} 0.0\n")

        if point_data:
            fh.write(f"POINT_DATA {n}\n")
            write_arrays(point_data, n)
        if cell_data:
            fh.write(f"CELL_DATA {e}\n")
            write_arrays(cell_data, e)
    return path


def snapshot_writer(directory: str | Path, threshold: float = 0.95):
    """Driver callback writing numbered VTK snapshots of the evolving fields.

    The ``cracked`` cell mask marks fully damaged elements so viewers can
    blank them out when rendering crack patterns.
    """
    directory = Path(directory)
    counter = {"i": 0}

    def callback(state: FieldState, sim: Simulation) -> None:
        mesh = sim.mesh
        c_nodal = state.c[: mesh.n_nodes]
        x_nodal = c_nodal / sim.cmax_nodal
        u = state.u.reshape(-1, 2)
        phi_c = state.phi[mesh.tris].mean(axis=1)
        cell = {
            "region": mesh.region.astype(float),
            "cracked": (phi_c > threshold).astype(float),
        }
        point = {
            "concentration": c_nodal,
            "stoichiometry": x_nodal,
            "damage": state.phi,
            "interface_indicator": sim.zeta,
            "toughness": sim.gc_nodal,
            "hydrostatic_stress": state.sigma_h,
            "displacement": u,
        }
        name = directory / f"snapshot_{counter['i']:05d}.vtk"
        write_vtk(mesh, name, point, cell, title=f"t = {state.time:.6g} s")
        counter["i"] += 1

    return callback


def write_metrics_csv(metrics: MetricsSeries, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(metrics.csv_lines()) + "\n")
    return path


def write_pattern_json(result: RunResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "pattern": result.pattern.code,
        "flags": {
            "propagation": result.pattern.propagation,
            "initiation": result.pattern.initiation,
            "debonding": result.pattern.debonding,
            "branching": result.pattern.branching,
        },
        "final_sol": result.final_sol,
        "details": {
            k: v for k, v in result.pattern_details.items() if isinstance(v, (int, float, str))
        },
    }
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def write_run_meta(result: RunResult, sim: Simulation, path: str | Path) -> Path:
    """Machine-readable record of scheme parameters and run diagnostics."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    diag = {k: v for k, v in result.diagnostics.items()}
    meta = {
        "mesh": sim.mesh.meta,
        "protocol_flux": sim.j0,
        "gc_interface": sim.gc_interface,
        "scheme": {
            "time_integration": "backward Euler, iterated staggered coupling",
            "cv_surrogate": "Dirichlet surface stoichiometry x_cv with flux-decay cutoff",
            "cc_flux_redistribution": "degradation-weighted, total preserved",
            "elements": "linear triangles, axisymmetric weight 2*pi*r",
            "phase_field_length_blending": "region value, no diffuse blending",
            "history_storage": "quadrature points",
        },
        "diagnostics": diag,
    }
    path.write_text(json.dumps(meta, indent=2, default=str) + "\n")
    return path


def write_plots(metrics: MetricsSeries, directory: str | Path) -> list[Path]:
    """SOL and crack-volume time series as standalone SVG plots."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    t = metrics.column("time")
    written = []
    for column, label, fname in [
        ("sol", "state of lithiation", "sol.svg"),
        ("crack_volume", "normalised crack volume", "crack_volume.svg"),
    ]:
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        ax.plot(t, metrics.column(column), lw=1.5)
        ax.set_xlabel("time (s)")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
        fig.tight_layout()
        out = directory / fname
        fig.savefig(out)
        plt.close(fig)
        written.append(out)
    return written


def persist_run(
    result: RunResult,
    sim: Simulation,
    directory: str | Path,
    effective_config: dict | None = None,
    write_plots_flag: bool = True,
) -> dict[str, str]:
    """Write the standard artefact set of one run; returns the manifest."""
    from .config import dump_toml

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest: dict[str, str] = {}
    manifest["metrics"] = str(write_metrics_csv(result.metrics, directory / "metrics.csv"))
    manifest["pattern"] = str(write_pattern_json(result, directory / "pattern.json"))
    manifest["meta"] = str(write_run_meta(result, sim, directory / "run_meta.json"))
    if effective_config is not None:
        cfg_path = directory / "config_effective.toml"
        dump_toml(effective_config, cfg_path)
        manifest["config"] = str(cfg_path)
    if write_plots_flag:
        for p in write_plots(result.metrics, directory / "plots"):
            manifest[p.stem] = str(p)
    logger.info("run artefacts written to %s", directory)
    return manifest
