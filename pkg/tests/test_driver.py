"""Staggered stepping, dt adaptation and protocol control."""
import numpy as np
import pytest

from coreshell.driver import Protocol, Simulation, SolverSettings, adapt_dt
from coreshell.errors import ConfigError
from coreshell.interface import InterfaceParams
from coreshell.mesh import InitialCrack, MeshResolution, ParticleSpec
from coreshell.verification import reference_materials


class TestAdaptDt:
    settings = SolverSettings()

    def test_easy_step_grows(self):
        out = adapt_dt(self.settings, 1.0, 1.0, inner_iterations=1, max_dphi=0.0)
        assert np.isclose(out, 1.2)

    def test_hard_step_holds(self):
        out = adapt_dt(self.settings, 1.0, 1.0, inner_iterations=7, max_dphi=0.0)
        assert out == 1.0
        out = adapt_dt(self.settings, 1.0, 1.0, inner_iterations=1, max_dphi=0.5)
        assert out == 1.0

    def test_clamped_at_maximum(self):
        dt_max = self.settings.dt_max(1.0)
        out = adapt_dt(self.settings, dt_max, 1.0, inner_iterations=1, max_dphi=0.0)
        assert out == dt_max
        assert np.isclose(dt_max, 36.0)

    def test_clamped_at_minimum(self):
        out = adapt_dt(self.settings, 1e-9, 1.0, inner_iterations=9, max_dphi=1.0)
        assert out == self.settings.dt_min


class TestProtocolValidation:
    def test_rejects_bad_cutoff(self):
        with pytest.raises(ConfigError):
            Protocol(cutoff_fraction=1.5)

    def test_rejects_inconsistent_stoichiometry(self):
        with pytest.raises(ConfigError):
            Protocol(x_shell_initial=0.99, x_cv=0.98)


COARSE_MINI = MeshResolution(
    bulk_core=0.25e-6,
    shell=0.1e-6,
    interface_band=0.06e-6,
    crack_band=0.1e-6,
    z_band=0.4e-6,
    interface_halfwidth=0.3e-6,
    tip_halfwidth=0.2e-6,
)


@pytest.fixture(scope="module")
def mini_sim():
    """Small particle, no crack, for cheap end-to-end stepping."""
    core, shell = reference_materials()
    spec = ParticleSpec(1.5e-6, 0.3e-6)
    return Simulation(
        spec,
        core,
        shell,
        InterfaceParams(1e-7, 1.0),
        Protocol(c_rate=1.0),
        SolverSettings(max_steps=10, dt_initial=2.0),
        resolution=COARSE_MINI,
    )


class TestStaggeredStep:
    def test_quiescent_state_is_fixed_point(self, mini_sim):
        state = mini_sim.initial_state()
        j0 = mini_sim.j0
        mini_sim.j0 = 0.0
        try:
            new, info = mini_sim.staggered_step(state, 5.0)
        finally:
            mini_sim.j0 = j0
        assert info.inner_iterations == 1
        assert np.abs(new.c - state.c).max() / mini_sim.core.c_max < 1e-12
        assert np.abs(new.phi - state.phi).max() < 1e-12
        assert new.time == state.time + 5.0

    def test_cc_step_flux_balance(self, mini_sim):
        state = mini_sim.initial_state()
        li0 = mini_sim.transport.total_lithium(state.c)
        dt = 3.0
        new, info = mini_sim.staggered_step(state, dt)
        gained = mini_sim.transport.total_lithium(new.c) - li0
        expected = mini_sim.j0 * mini_sim.transport.surface_area * dt
        assert abs(gained - expected) / expected < 1e-8
        assert info.min_dphi_step >= -1e-6

    def test_monotone_damage_across_steps(self, mini_sim):
        state = mini_sim.initial_state()
        for _ in range(3):
            state, info = mini_sim.staggered_step(state, 5.0)
            assert info.min_dphi_step >= -1e-6


class TestRunControl:
    def test_null_protocol_terminates_immediately(self):
        core, shell = reference_materials()
        spec = ParticleSpec(1.5e-6, 0.3e-6)
        sim = Simulation(
            spec,
            core,
            shell,
            InterfaceParams(1e-7, 1.0),
            Protocol(c_rate=0.0),
            SolverSettings(max_steps=5),
            resolution=COARSE_MINI,
        )
        result = sim.run()
        assert result.diagnostics["termination"] == "null"
        assert len(result.metrics.rows) == 1
        first = result.metrics.rows[0]
        assert first.time == 0.0
        assert result.pattern.code == "none"

    def test_run_emits_monotone_crack_volume(self, mini_sim):
        result = mini_sim.run(log_every=0)
        ac = result.metrics.column("crack_volume")
        assert np.all(np.diff(ac) >= -1e-12)
        assert result.metrics.column("time")[-1] > 0.0
        assert result.diagnostics["min_dphi"] >= -1e-6
