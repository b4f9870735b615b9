"""Material data, parameter derivation and OCP curve handling."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coreshell.errors import ConfigError
from coreshell.materials import (
    Material,
    OcpCurve,
    PhysicalConstants,
    builtin_ocp,
    gc_from_fracture_toughness,
    graded_value,
    length_scale_from_strength,
)


class TestDerivations:
    """Fracture parameters derived from indentation data."""

    def test_core_values(self):
        gc = gc_from_fracture_toughness(0.271e6, 230e9, 0.253)
        ell = length_scale_from_strength(0.271e6, 184e6)
        assert abs(gc - 0.299) / 0.299 < 0.02
        assert abs(ell - 0.23e-6) / 0.23e-6 < 0.02

    def test_shell_values(self):
        gc = gc_from_fracture_toughness(0.296e6, 201e9, 0.253)
        ell = length_scale_from_strength(0.296e6, 184e6)
        assert abs(gc - 0.408) / 0.408 < 0.02
        assert abs(ell - 0.27e-6) / 0.27e-6 < 0.02

    def test_zero_toughness_gives_zero(self):
        assert gc_from_fracture_toughness(0.0, 230e9, 0.253) == 0.0

    def test_length_vanishes_for_large_strength(self):
        assert length_scale_from_strength(0.271e6, 1e12) < 1e-12


class TestMaterialValidation:
    def test_rejects_nonpositive(self):
        with pytest.raises(ConfigError, match="diffusivity"):
            Material(5e4, 5e-7, -1e-14, 2e11, 0.3, 0.3, 2e-7)

    def test_rejects_bad_poisson(self):
        with pytest.raises(ConfigError, match="Poisson"):
            Material(5e4, 5e-7, 1e-14, 2e11, 0.6, 0.3, 2e-7)

    def test_elastic_constants_consistent(self):
        m = Material(5e4, 5e-7, 1e-14, 230e9, 0.253, 0.3, 2e-7)
        lam, g = m.lame_lambda, m.shear_modulus
        assert np.isclose(lam, 230e9 * 0.253 / (1.253 * (1 - 0.506)))
        assert np.isclose(g, 230e9 / (2 * 1.253))
        assert np.isclose(m.bulk_modulus, lam + 2 * g / 3)


class TestOcpCurve:
    def test_monotonicity_enforced(self):
        with pytest.raises(ConfigError, match="decrease"):
            OcpCurve(np.array([0.0, 0.5, 1.0]), np.array([4.0, 4.1, 3.0]))
        with pytest.raises(ConfigError, match="increase"):
            OcpCurve(np.array([0.0, 0.6, 0.5, 1.0]), np.array([4.0, 3.8, 3.5, 3.0]))

    def test_domain_coverage_enforced(self):
        with pytest.raises(ConfigError, match="cover"):
            OcpCurve(np.array([0.2, 0.9]), np.array([4.0, 3.0]))

    def test_builtin_tables_usable(self):
        for name in ("nmc811", "nmc532"):
            ocp = builtin_ocp(name)
            assert ocp.x[0] <= 0.05 and ocp.x[-1] >= 1.0
            assert np.all(np.diff(ocp.u) < 0)

    def test_clamping_warns(self, caplog):
        ocp = builtin_ocp("nmc532")
        with caplog.at_level("WARNING"):
            x = ocp.x_of_u(99.0)
        assert x == ocp.x[0]
        assert any("clamped" in r.message for r in caplog.records)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(min_value=0.05, max_value=0.999))
    def test_inversion_roundtrip(self, x):
        ocp = builtin_ocp("nmc811")
        u = ocp.u_of_x(x)
        assert abs(ocp.x_of_u(u) - x) < 1e-9

    def test_slope_matches_secant(self):
        ocp = builtin_ocp("nmc532")
        x = 0.512  # interior of a table segment
        eps = 1e-6
        fd = (ocp.u_of_x(x + eps) - ocp.u_of_x(x - eps)) / (2 * eps)
        assert np.isclose(ocp.du_dx(x), fd, rtol=1e-6)


def test_graded_midpoint_value():
    # linear interpolation across the shell: E from 230 to 201 GPa
    val = graded_value(4.4e-6, 230e9, 201e9, 4e-6, 0.8e-6)
    assert np.isclose(val, 215.5e9)


def test_constants_defaults():
    pc = PhysicalConstants()
    assert pc.gas_constant == 8.314
    assert pc.faraday == 96485.0
    assert np.isclose(pc.rt, 8.314 * 298.15)
    with pytest.raises(ConfigError):
        PhysicalConstants(temperature=-1.0)
