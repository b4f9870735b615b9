#!/usr/bin/env python3
"""Regenerate the packaged example OCP tables.

The shell (NMC532-like) curve is a smooth parametric NMC-shaped potential.
The core (NMC811-like) curve is derived from it through a prescribed
equilibrium stoichiometry map m(x): at equal potential the high-nickel core
sits at stoichiometry m(x) when the shell sits at x, with m(x) > x over most
of the range, as published half-cell curves for the two chemistries show.
Constructing the core table as U_core(m(x)) = U_shell(x) makes that map exact
for the shipped pair.

Both tables are synthetic and literature-shaped, not measured data.
"""
import numpy as np
from scipy.interpolate import PchipInterpolator

HEADER = (
    "# Synthetic open-circuit potential table ({label}).\n"
    "# Literature-shaped example data for the packaged demo configs;\n"
    "# replace with measured OCP data for quantitative work.\n"
    "# columns: stoichiometry x = c/c_max, potential U (V)\n"
)

# Equilibrium stoichiometry map m: shell x -> core x at equal potential.
# The top-end anchors keep the two chemistries nearly converged close to
# full lithiation, so a shell held at x = 0.98 equilibrates the core to
# ~0.9995 of its own maximum.
M_ANCHORS_X = np.array([0.0, 0.10, 0.30, 0.50, 0.70, 0.90, 0.98, 1.0])
M_ANCHORS_Y = np.array([0.0, 0.28, 0.55, 0.72, 0.86, 0.9825, 0.9995, 1.0])


def shell_potential(x):
    """Smooth decreasing NMC-shaped curve, ~4.5 V down to ~3.2 V."""
    return 3.55 + 0.45 * (1.0 - x) + 0.65 * np.exp(-10.0 * x) - 0.35 * np.exp(25.0 * (x - 1.0))


def main():
    m = PchipInterpolator(M_ANCHORS_X, M_ANCHORS_Y)
    x_grid = np.concatenate(
        [
            np.linspace(0.02, 0.16, 15),
            np.linspace(0.18, 0.88, 36),
            np.linspace(0.90, 1.0, 21),
        ]
    )

    u_shell = shell_potential(x_grid)

    # Core curve tabulated at the mapped abscissae: U_core(m(x)) = U_shell(x)
    # holds exactly at the table knots, so the equilibrium map survives the
    # piecewise-linear interpolation.
    x_core = m(x_grid)
    x_core[0] = min(x_core[0], 0.02)  # keep the required domain coverage
    u_core = u_shell

    for label, fname, xcol, u in [
        ("NMC532-like shell", "ocp_nmc532_synthetic.csv", x_grid, u_shell),
        ("NMC811-like core", "ocp_nmc811_synthetic.csv", x_core, u_core),
    ]:
        path = f"src/coreshell/data/{fname}"
        with open(path, "w") as fh:
            fh.write(HEADER.format(label=label))
            fh.write("x,U\n")
            for xv, uv in zip(xcol, u):
                fh.write(f"{xv:.6f},{uv:.6f}\n")
        print("wrote", path)

    # report the realised map at a few probes
    from coreshell.materials import OcpCurve

    core = OcpCurve.from_csv("src/coreshell/data/ocp_nmc811_synthetic.csv")
    shell = OcpCurve.from_csv("src/coreshell/data/ocp_nmc532_synthetic.csv")
    for xq in (0.1, 0.3, 0.5, 0.7, 0.9, 0.98):
        print(f"m({xq:4.2f}) = {core.x_of_u(shell.u_of_x(xq)):.4f}")


if __name__ == "__main__":
    main()
