"""Staggered chemo-mechano-damage time integration under CC-CV lithiation.

Each accepted step iterates {transport, equilibrium, history update, damage
solve} until the damage increment between inner iterations is small. Failed
steps (transport rejection, stagger non-convergence, negative concentration)
halve the time step and retry; the step size grows again after easy steps.
The constant-current stage ends when the surface stoichiometry reaches the
hold value, the constant-voltage stage when the mean surface influx drops to
the cutoff fraction of the CC flux.
"""
from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, RunAborted, StepRejected
from .fem import ElementData
from .fracture import PhaseFieldSolver, degradation, seed_initial_crack, update_history
from .interface import InterfaceParams, build_toughness_field, solve_interface_indicator
from .materials import (
    Material,
    MaterialFields,
    PhysicalConstants,
    build_material_fields,
    graded_value,
)
from .mechanics import MechanicsSolver, chemical_strain
from .mesh import Mesh, MeshResolution, ParticleSpec, build_particle_mesh
from .metrics import (
    CrackPattern,
    MetricsSeries,
    StepRecord,
    classify_pattern,
    compute_crack_volume,
    compute_sol,
)
from .transport import InterfaceRelation, TransportBC, TransportSolver, cc_flux

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Protocol:
    """CC-CV lithiation protocol parameters."""

    c_rate: float = 1.0
    cutoff_fraction: float = 0.1
    x_cv: float = 0.98
    x_shell_initial: float = 0.1
    temperature: float = 298.15

    def __post_init__(self):
        if not 0.0 < self.cutoff_fraction < 1.0:
            raise ConfigError("cutoff fraction must lie in (0, 1)")
        if not 0.0 < self.x_shell_initial < self.x_cv <= 1.0:
            raise ConfigError("need 0 < initial shell stoichiometry < x_cv <= 1")


@dataclass(frozen=True)
class SolverSettings:
    """Numerical controls for one run."""

    newton_tol: float = 1e-9
    equilibrium_tol: float = 1e-9
    stagger_tol: float = 1e-3
    # Crack propagation is a snap-through: the staggered loop walks the
    # front forward roughly one element per iteration, and a debonding
    # avalanche can span hundreds of elements no matter how small dt is.
    # Every iterate is an admissible, irreversible state, so a step that
    # exhausts the cap is accepted as-is and the event continues in the
    # next (shortened) step; time-step halving is reserved for transport
    # and solver failures, where it actually helps.
    stagger_max_iter: int = 200
    dt_initial: float = 1.0
    dt_min: float = 1e-3
    dt_max_factor: float = 0.01     # dt_max = factor * 3600 / |C|
    dt_growth: float = 1.2
    dt_shrink: float = 0.5
    grow_iters: int = 3
    grow_dphi: float = 0.02
    linear_solver: str = "direct"   # SPD solves: "direct", "cg" or "auto"
    damage_diffusion_coupling: bool = True
    max_steps: int = 100000

    def dt_max(self, c_rate: float) -> float:
        rate = abs(c_rate) if c_rate else 1.0
        return self.dt_max_factor * 3600.0 / rate


@dataclass
class FieldState:
    """All evolving fields plus clock and stage of a simulation."""

    c: np.ndarray            # concentration over duplicated-dof layout
    u: np.ndarray            # displacement (2 dofs per node)
    phi: np.ndarray          # nodal damage
    history: np.ndarray      # (E, nqp) driving-force history
    sigma_h: np.ndarray      # nodal hydrostatic stress
    sigma_if_core: np.ndarray
    sigma_if_shell: np.ndarray
    time: float = 0.0
    dt: float = 1.0
    stage: str = "cc"
    step: int = 0

    def copy(self) -> "FieldState":
        return FieldState(
            c=self.c.copy(),
            u=self.u.copy(),
            phi=self.phi.copy(),
            history=self.history.copy(),
            sigma_h=self.sigma_h.copy(),
            sigma_if_core=self.sigma_if_core.copy(),
            sigma_if_shell=self.sigma_if_shell.copy(),
            time=self.time,
            dt=self.dt,
            stage=self.stage,
            step=self.step,
        )


@dataclass
class StepInfo:
    inner_iterations: int
    max_dphi_inner: float
    max_dphi_step: float
    min_dphi_step: float
    transport_iterations: int
    equilibrium_iterations: int
    converged: bool = True


@dataclass
class RunResult:
    """Outcome of one CC-CV run."""

    metrics: MetricsSeries
    pattern: CrackPattern
    pattern_details: dict
    diagnostics: dict
    final_state: FieldState

    @property
    def final_sol(self) -> float:
        return self.metrics.last().sol


def adapt_dt(
    settings: SolverSettings,
    dt: float,
    c_rate: float,
    inner_iterations: int,
    max_dphi: float,
) -> float:
    """Grow the step after easy steps, clamped to the protocol bounds."""
    if inner_iterations <= settings.grow_iters and max_dphi < settings.grow_dphi:
        dt = dt * settings.dt_growth
    return float(np.clip(dt, settings.dt_min, settings.dt_max(c_rate)))


class Simulation:
    """Bundles mesh, material fields and sub-solvers for one particle run."""

    def __init__(
        self,
        spec: ParticleSpec,
        core: Material,
        shell: Material,
        interface: InterfaceParams,
        protocol: Protocol,
        settings: SolverSettings | None = None,
        resolution: MeshResolution | None = None,
        mesh_level: str = "coarse",
    ):
        self.spec = spec
        self.core = core
        self.shell = shell
        self.interface_params = interface
        self.protocol = protocol
        self.settings = settings or SolverSettings()
        self.constants = PhysicalConstants(temperature=protocol.temperature)

        if resolution is None:
            resolution = MeshResolution.for_particle(
                spec, core.ell, shell.ell, interface.ell_zeta, mesh_level
            )
        self.resolution = resolution
        self.mesh: Mesh = build_particle_mesh(spec, resolution)
        self.edata = ElementData(self.mesh.nodes, self.mesh.tris)
        self.fields: MaterialFields = build_material_fields(self.mesh, self.edata, core, shell)

        self.mech = MechanicsSolver(self.mesh, self.edata, self.fields)
        self.transport = TransportSolver(self.mesh, self.edata, self.fields, self.constants)

        spd = self.settings.linear_solver
        self.zeta = solve_interface_indicator(
            self.mesh, self.edata, interface.ell_zeta, method=spd
        )
        self.gc_interface = interface.gc_interface(core.gc, shell.gc)
        self.gc_nodal = build_toughness_field(self.zeta, self.fields.gc_bulk_nodal, self.gc_interface)

        self.phase_field = PhaseFieldSolver(self.edata, self.gc_nodal, self.fields.ell_elem)

        pair_core, pair_shell = self.fields.interface_pair()
        self.relation = InterfaceRelation(
            pair_core,
            pair_shell,
            self.constants,
            len(self.mesh.interface_nodes),
            trivial=self.fields.graded,
        )
        self.j0 = cc_flux(spec, core, shell, protocol.c_rate)

        rho_n = self.mesh.rho
        if self.fields.graded:
            self.cmax_nodal = graded_value(
                rho_n, core.c_max, shell.c_max, spec.core_radius, spec.shell_thickness
            )
        else:
            node_core = rho_n < spec.core_radius * (1.0 - 1e-12)
            self.cmax_nodal = np.where(node_core, core.c_max, shell.c_max)

        # Interface band for debond-onset tracking (seed-cracked nodes excluded).
        self._band_nodes = np.nonzero(self.zeta > 0.5)[0]

    # -- state construction ------------------------------------------------

    def initial_state(self) -> FieldState:
        mesh = self.mesh
        prot = self.protocol
        n = mesh.n_nodes
        c = np.empty(mesh.n_cdof)
        rho_n = mesh.rho
        node_core = rho_n < self.spec.core_radius * (1.0 - 1e-12)

        if self.fields.graded:
            c[:n] = prot.x_shell_initial * self.cmax_nodal
            c[n:] = c[mesh.interface_nodes]
        else:
            c2_init = prot.x_shell_initial * self.shell.c_max
            c1_init = float(self.relation.c1_of_c2(np.array([c2_init]))[0])
            c[:n] = np.where(node_core, c1_init, c2_init)
            c[n:] = c1_init
        self._c_ref = c.copy()
        self._c_ref_qp = self.edata.interp_qp(c, conn=mesh.c_conn)

        history = seed_initial_crack(self.spec, self.edata, self.fields.ell_elem)
        phi = self.phase_field.solve(history, method=self.settings.linear_solver)
        n_if = len(mesh.interface_nodes)
        state = FieldState(
            c=c,
            u=np.zeros(2 * n),
            phi=phi,
            history=history,
            sigma_h=np.zeros(n),
            sigma_if_core=np.zeros(n_if),
            sigma_if_shell=np.zeros(n_if),
            dt=self.settings.dt_initial,
        )
        self._phi0 = phi.copy()
        return state

    # -- one staggered step --------------------------------------------------

    def staggered_step(self, state: FieldState, dt: float) -> tuple[FieldState, StepInfo]:
        """Advance by dt; raises StepRejected when the step must be retried."""
        s = self.settings
        bc = TransportBC(
            stage=state.stage,
            flux=self.j0,
            x_cv=self.protocol.x_cv,
            cutoff_fraction=self.protocol.cutoff_fraction,
        )

        phi_k = state.phi
        sigma_h_k = state.sigma_h
        self.relation.update_stress(state.sigma_if_core, state.sigma_if_shell)

        c_k = state.c
        u_k = state.u
        history_k = state.history
        transport_iters = 0
        equilibrium_iters = 0
        max_dphi_inner = np.inf
        dphi_hist: list[float] = []
        converged = False

        for inner in range(1, s.stagger_max_iter + 1):
            c_k, it_t = self.transport.step(
                state.c,
                dt,
                bc,
                self.relation,
                phi_nodal=phi_k,
                sigma_h_nodal=sigma_h_k,
                damage_coupling=s.damage_diffusion_coupling,
                tol=s.newton_tol,
            )
            transport_iters += it_t

            c_qp = self.edata.interp_qp(c_k, conn=self.mesh.c_conn)
            eps_li = chemical_strain(c_qp, self._c_ref_qp, self.fields.omega_qp)
            g_qp = degradation(self.edata.interp_qp(phi_k))
            try:
                u_k, stress = self.mech.solve(
                    eps_li,
                    g_qp,
                    u0=u_k,
                    tol=s.equilibrium_tol,
                    method="direct" if s.linear_solver == "auto" else s.linear_solver,
                )
            except Exception as exc:  # solver failure -> retry with smaller dt
                raise StepRejected(f"equilibrium failed: {exc}") from exc
            equilibrium_iters += stress.iterations

            sigma_h_k = self.mech.nodal_hydrostatic(stress, method="direct")
            sif_core, sif_shell = self.mech.interface_side_stress(stress)
            self.relation.update_stress(sif_core, sif_shell)

            history_k = update_history(state.history, stress.psi_plus)
            phi_new = self.phase_field.solve(history_k, method=self.settings.linear_solver)
            max_dphi_inner = float(np.abs(phi_new - phi_k).max())
            dphi_hist.append(max_dphi_inner)
            phi_k = phi_new
            if max_dphi_inner < s.stagger_tol:
                converged = True
                break
            # Stall detection: near-critical crack growth can creep or cycle
            # at a finite damage increment per pass. Once the increment stops
            # contracting, further passes are wasted; the state is admissible
            # and the event continues in the next, shortened step.
            if inner >= 30 and max_dphi_inner > 0.9 * dphi_hist[-15]:
                logger.info(
                    "damage event in progress (dphi %.3e after %d staggered "
                    "iterations); accepting intermediate state",
                    max_dphi_inner,
                    inner,
                )
                break
        else:
            logger.info(
                "damage event still running after %d staggered iterations "
                "(dphi %.3e); accepting intermediate state",
                s.stagger_max_iter,
                max_dphi_inner,
            )

        dphi_step = phi_k - state.phi
        new = FieldState(
            c=c_k,
            u=u_k,
            phi=phi_k,
            history=history_k,
            sigma_h=sigma_h_k,
            sigma_if_core=sif_core,
            sigma_if_shell=sif_shell,
            time=state.time + dt,
            dt=dt,
            stage=state.stage,
            step=state.step + 1,
        )
        info = StepInfo(
            inner_iterations=inner,
            max_dphi_inner=max_dphi_inner,
            max_dphi_step=float(dphi_step.max(initial=0.0)),
            min_dphi_step=float(dphi_step.min(initial=0.0)),
            transport_iterations=transport_iters,
            equilibrium_iterations=equilibrium_iters,
            converged=converged,
        )
        return new, info

    # -- full protocol ------------------------------------------------------

    def run(
        self,
        snapshot_callback: Callable[[FieldState, "Simulation"], None] | None = None,
        snapshot_every: int = 0,
        log_every: int = 10,
    ) -> RunResult:
        """Run the CC-CV protocol to cutoff; returns metrics and pattern."""
        t_wall = _time.perf_counter()
        s = self.settings
        state = self.initial_state()
        metrics = MetricsSeries()
        diagnostics = {
            "rejects": 0,
            "min_dphi": 0.0,
            "cv_transition_time": None,
            "debond_onset_time": None,
            "termination": "running",
            "stage_change_steps": [],
        }

        band_seeded = state.phi[self._band_nodes] > 0.95

        def record(info: StepInfo | None, flux: float) -> StepRecord:
            sol, sol_core, sol_shell, dsol = compute_sol(
                self.edata, self.mesh, state.c, self.fields.cmax_qp
            )
            ac = compute_crack_volume(self.edata, state.phi)
            row = StepRecord(
                step=state.step,
                time=state.time,
                dt=state.dt,
                stage=state.stage,
                sol=sol,
                sol_core=sol_core,
                sol_shell=sol_shell,
                delta_sol=dsol,
                crack_volume=ac,
                crack_volume_growth=ac - metrics.rows[0].crack_volume if metrics.rows else 0.0,
                surface_flux=flux,
                surface_x_max=self.transport.surface_stoichiometry(state.c)[0],
                inner_iterations=info.inner_iterations if info else 0,
                min_dphi=info.min_dphi_step if info else 0.0,
            )
            metrics.append(row)
            return row

        record(None, 0.0)
        if snapshot_callback is not None:
            snapshot_callback(state, self)

        if self.j0 <= 0.0:
            logger.info("zero CC flux: null protocol, terminating immediately")
            diagnostics["termination"] = "null"
            return self._finish(metrics, diagnostics, state, t_wall)

        dt = s.dt_initial
        lithium_prev = self.transport.total_lithium(state.c)
        below_cutoff_streak = 0

        while state.step < s.max_steps:
            try:
                new_state, info = self.staggered_step(state, dt)
            except StepRejected as exc:
                diagnostics["rejects"] += 1
                dt_new = dt * s.dt_shrink
                logger.debug("step rejected (%s); dt %.3e -> %.3e", exc, dt, dt_new)
                if dt_new < s.dt_min:
                    logger.error("time step underflow at t=%.4e s: %s", state.time, exc)
                    diagnostics["termination"] = "aborted"
                    diagnostics["abort_reason"] = str(exc)
                    return self._finish(metrics, diagnostics, state, t_wall)
                dt = dt_new
                continue

            state = new_state
            if not (
                np.all(np.isfinite(state.c))
                and np.all(np.isfinite(state.u))
                and np.all(np.isfinite(state.phi))
            ):
                diagnostics["termination"] = "aborted"
                diagnostics["abort_reason"] = "non-finite field values"
                return self._finish(metrics, diagnostics, state, t_wall)

            diagnostics["min_dphi"] = min(diagnostics["min_dphi"], info.min_dphi_step)
            if info.min_dphi_step < -1e-6:
                logger.warning(
                    "damage irreversibility violated by %.3e at step %d",
                    info.min_dphi_step,
                    state.step,
                )

            lithium_now = self.transport.total_lithium(state.c)
            flux = (lithium_now - lithium_prev) / (dt * self.transport.surface_area)
            lithium_prev = lithium_now

            if diagnostics["debond_onset_time"] is None:
                newly = (state.phi[self._band_nodes] > 0.95) & ~band_seeded
                if np.any(newly):
                    diagnostics["debond_onset_time"] = state.time
                    logger.info("interface-band damage onset at t=%.2f s", state.time)

            row = record(info, flux)
            if log_every and state.step % log_every == 0:
                logger.info(
                    "step %5d t=%8.1f s stage=%s dt=%6.2f SOL=%.4f a_c=%.5f "
                    "inner=%d flux/J0=%.3f",
                    state.step,
                    state.time,
                    state.stage,
                    dt,
                    row.sol,
                    row.crack_volume,
                    info.inner_iterations,
                    flux / self.j0,
                )
            if snapshot_callback is not None and snapshot_every and state.step % snapshot_every == 0:
                snapshot_callback(state, self)

            if state.stage == "cc" and row.surface_x_max >= self.protocol.x_cv:
                state.stage = "cv"
                diagnostics["cv_transition_time"] = state.time
                diagnostics["stage_change_steps"].append(state.step)
                logger.info("CC -> CV at t=%.1f s (SOL=%.4f)", state.time, row.sol)
            elif state.stage == "cv":
                # Two consecutive below-threshold steps end the hold: robust
                # against single-step dips while a damage event is running.
                if flux <= self.protocol.cutoff_fraction * self.j0:
                    below_cutoff_streak += 1
                else:
                    below_cutoff_streak = 0
                if below_cutoff_streak >= 2:
                    diagnostics["termination"] = "cutoff"
                    logger.info(
                        "cutoff reached at t=%.1f s: flux %.3e <= %.1f%% of J0, "
                        "final SOL %.4f",
                        state.time,
                        flux,
                        100 * self.protocol.cutoff_fraction,
                        row.sol,
                    )
                    break

            if info.converged:
                dt = adapt_dt(s, dt, self.protocol.c_rate, info.inner_iterations, info.max_dphi_step)
            elif info.max_dphi_step < s.grow_dphi:
                # The event iterated without net damage change (small-amplitude
                # trickle): growing dt is safe and reaches cutoff sooner.
                dt = adapt_dt(s, dt, self.protocol.c_rate, 1, info.max_dphi_step)
            # Otherwise (an active damage event) dt stays unchanged: shrinking
            # it cannot converge a snap-through, it only multiplies steps.
        else:
            diagnostics["termination"] = "max_steps"

        if diagnostics["termination"] == "running":
            diagnostics["termination"] = "cutoff"
        if snapshot_callback is not None:
            snapshot_callback(state, self)
        return self._finish(metrics, diagnostics, state, t_wall)

    def _finish(self, metrics, diagnostics, state, t_wall) -> RunResult:
        pattern, details = classify_pattern(
            self.mesh,
            state.phi,
            self._phi0,
            self.zeta,
            self.spec,
            ell_mean=0.5 * (self.core.ell + self.shell.ell),
        )
        diagnostics["wall_time"] = _time.perf_counter() - t_wall
        diagnostics["final_sol"] = metrics.last().sol
        diagnostics["pattern"] = pattern.code
        logger.info(
            "run finished: %s, final SOL %.4f, pattern %s, %.1f s wall",
            diagnostics["termination"],
            metrics.last().sol,
            pattern.code,
            diagnostics["wall_time"],
        )
        return RunResult(
            metrics=metrics,
            pattern=pattern,
            pattern_details=details,
            diagnostics=diagnostics,
            final_state=state,
        )
