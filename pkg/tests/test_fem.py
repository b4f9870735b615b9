"""Generic finite-element machinery: assembly identities and solvers."""
import numpy as np
import pytest
import scipy.sparse as sp

from coreshell.errors import SolveError
from coreshell.fem import ElementData, SparseSystem, l2_project, newton_solve, solve_spd
from coreshell.mesh import rectangle_mesh


@pytest.fixture(scope="module")
def strip():
    mesh = rectangle_mesh(1.0, 0.2, 50, 3)
    return mesh, ElementData(mesh.nodes, mesh.tris, axisymmetric=False)


def test_mass_matrix_integrates_area(strip):
    mesh, edata = strip
    m = edata.mass_matrix()
    assert np.isclose(m.sum(), 1.0 * 0.2, rtol=1e-12)
    lumped = edata.mass_matrix(lumped=True)
    assert np.allclose(lumped, np.asarray(m.sum(axis=1)).ravel())


def test_assembly_is_symmetric(strip):
    mesh, edata = strip
    coeff = 1.0 + np.random.default_rng(0).random((edata.n_elems, edata.n_qp))
    for mat in (edata.mass_matrix(coeff), edata.stiffness_matrix(coeff)):
        asym = abs(mat - mat.T).max()
        assert asym == 0.0


def test_solve_spd_identity():
    rng = np.random.default_rng(1)
    b = rng.random(20)
    system = SparseSystem(sp.eye(20, format="csr"), b)
    assert np.allclose(solve_spd(system), b)


@pytest.mark.parametrize("method", ["cg", "direct"])
def test_solve_spd_1d_laplace(strip, method):
    mesh, edata = strip
    a = edata.stiffness_matrix()
    dirichlet = {int(i): 0.0 for i in mesh.node_sets["left"]}
    dirichlet.update({int(i): 1.0 for i in mesh.node_sets["right"]})
    u = solve_spd(SparseSystem(a, np.zeros(mesh.n_nodes), dirichlet), method=method)
    assert np.abs(u - mesh.nodes[:, 0]).max() < 1e-10


def test_solve_spd_rejects_indefinite():
    a = sp.diags([1.0, -1.0]).tocsr()
    with pytest.raises(SolveError):
        solve_spd(SparseSystem(a, np.ones(2)), method="cg")


def test_l2_project_reproduces_constants_and_linears(strip):
    mesh, edata = strip
    const = l2_project(edata, np.full((edata.n_elems, edata.n_qp), 5.0))
    assert np.allclose(const, 5.0, atol=1e-12)
    lin_qp = 2.0 + 3.0 * edata.qp_xy[:, :, 0]
    lin = l2_project(edata, lin_qp)
    assert np.abs(lin - (2.0 + 3.0 * mesh.nodes[:, 0])).max() < 1e-8


def test_newton_linear_converges_in_one_iteration():
    a = sp.diags([2.0, 3.0, 4.0]).tocsr()
    b = np.array([2.0, 6.0, 12.0])

    def fun(x):
        return a @ x - b, a

    x, iters = newton_solve(fun, np.zeros(3))
    assert iters == 1
    assert np.allclose(x, [1.0, 2.0, 3.0])


def test_newton_scalar_quadratic():
    def fun(x):
        return np.array([x[0] ** 2 - 4.0]), np.array([[2.0 * x[0]]])

    x, _ = newton_solve(fun, np.array([3.0]), tol=1e-12)
    assert abs(x[0] - 2.0) < 1e-9


def test_newton_raises_on_stall():
    def fun(x):
        return np.array([1.0]), np.array([[1e-30]])

    with pytest.raises(SolveError):
        newton_solve(fun, np.array([0.0]), max_iter=3)


def test_interp_and_gradient(strip):
    mesh, edata = strip
    nodal = 1.0 + 2.0 * mesh.nodes[:, 0] - 0.5 * mesh.nodes[:, 1]
    qp = edata.interp_qp(nodal)
    expect = 1.0 + 2.0 * edata.qp_xy[:, :, 0] - 0.5 * edata.qp_xy[:, :, 1]
    assert np.abs(qp - expect).max() < 1e-12
    grad = edata.elem_gradient(nodal)
    assert np.allclose(grad, [2.0, -0.5])
