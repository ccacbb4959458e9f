from dataclasses import replace

import numpy as np
import pytest

from kacanov_afem.assembly import (AssemblyError, MissingPrimitive, apply_form, assemble, energy,
                                   load_vector, potential, stiffness_matrix)
from kacanov_afem.mesh import Mesh, make_lshape_mesh, make_square_mesh, uniform_refine
from kacanov_afem.problems import catalog
from kacanov_afem.space import P1Function, interpolate, zero


def unit_triangle():
    return Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


def laplace_stiffness_loop(mesh):
    """Dense Laplace stiffness from explicit edge vectors, one element at a time."""
    n = mesh.n_vertices
    K = np.zeros((n, n))
    for tri in mesh.elements:
        p = mesh.points[tri]
        d1, d2 = p[1] - p[0], p[2] - p[0]
        area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
        for i in range(3):
            ei = p[(i + 2) % 3] - p[(i + 1) % 3]  # edge opposite vertex i
            for j in range(3):
                ej = p[(j + 2) % 3] - p[(j + 1) % 3]
                K[tri[i], tri[j]] += ei @ ej / (4 * area)
    return K


@pytest.fixture
def mesh():
    m, _ = uniform_refine(make_lshape_mesh(), 3)
    return m


def test_reference_element_stiffness():
    K = stiffness_matrix(unit_triangle(), np.ones(1)).toarray()
    assert np.allclose(K, 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]]), atol=1e-15)


def test_stiffness_matches_loop_oracle(mesh):
    K = stiffness_matrix(mesh, np.ones(mesh.n_elements)).toarray()
    assert np.allclose(K, laplace_stiffness_loop(mesh), atol=1e-13)
    assert np.allclose(K.sum(axis=1), 0.0, atol=1e-13)


def test_zero_weight_function_gives_alpha_zero(mesh):
    sys_ = assemble(mesh, zero(mesh), catalog("ex1"))
    assert np.allclose(sys_.weights, 1.5)
    assert np.allclose(sys_.full_matrix.toarray(), 1.5 * laplace_stiffness_loop(mesh), atol=1e-13)


def test_matrix_is_symmetric_positive_definite(mesh):
    rng = np.random.default_rng(0)
    w = P1Function(mesh, rng.standard_normal(mesh.n_vertices))
    A = assemble(mesh, w, catalog("ex2")).matrix.toarray()
    assert np.allclose(A, A.T, atol=1e-14)
    for _ in range(10):
        v = rng.standard_normal(len(A))
        assert v @ A @ v > 0


def test_unit_load_sums_to_area():
    m, _ = uniform_refine(make_square_mesh(), 3)
    F = load_vector(m, catalog("poisson"))
    assert F.sum() == pytest.approx(4.0, rel=1e-14)


def test_lift_and_rhs_reproduce_boundary_data(mesh):
    prob = catalog("ex1")
    sys_ = assemble(mesh, zero(mesh), prob)
    b = mesh.on_boundary
    p = mesh.points[b]
    assert np.allclose(sys_.lift.coeffs[b], prob.g(p[:, 0], p[:, 1]))
    assert np.all(sys_.lift.coeffs[~b] == 0)
    free = sys_.dofs.free
    expected = sys_.full_load[free] - sys_.full_matrix[free] @ sys_.lift.coeffs
    assert np.allclose(sys_.rhs, expected)


def test_apply_form_of_linear_function():
    m = make_lshape_mesh()
    u = interpolate(m, lambda x, y: x)
    assert apply_form(m, u, u, u, catalog("poisson")) == pytest.approx(3.0)


def test_apply_form_agrees_with_matrix(mesh):
    rng = np.random.default_rng(1)
    prob = catalog("ex4")
    w, u, v = (P1Function(mesh, rng.standard_normal(mesh.n_vertices)) for _ in range(3))
    K = assemble(mesh, w, prob).full_matrix
    assert apply_form(mesh, w, u, v, prob) == pytest.approx(u.coeffs @ K @ v.coeffs, rel=1e-12)


@pytest.mark.parametrize("name", ["ex1", "ex2", "ex3", "ex4"])
def test_coercivity_and_boundedness(mesh, name):
    prob = catalog(name)
    rng = np.random.default_rng(2)
    for _ in range(20):
        w = P1Function(mesh, 10 ** rng.uniform(-1, 1) * rng.standard_normal(mesh.n_vertices))
        u = P1Function(mesh, rng.standard_normal(mesh.n_vertices))
        a = apply_form(mesh, w, u, u, prob)
        norm2 = apply_form(mesh, w, u, u, catalog("poisson"))
        assert prob.c_a * norm2 * (1 - 1e-12) <= a <= prob.C_a * norm2 * (1 + 1e-12)


def test_energy_of_zero_is_zero(mesh):
    for name in ("ex1", "ex4", "curvature"):
        prob = catalog(name, homogeneous=True)
        m = prob.make_mesh()
        assert energy(m, zero(m), prob) == 0.0


def test_potential_of_linear_function():
    m = make_lshape_mesh()
    prob = catalog("ex1")
    u = interpolate(m, lambda x, y: 2 * x)
    assert potential(m, u, prob) == pytest.approx(0.5 * 3.0 * prob.primitive(4.0))


def test_missing_primitive():
    prob = replace(catalog("ex1"), primitive=None)
    m = make_lshape_mesh()
    with pytest.raises(MissingPrimitive, match="register"):
        energy(m, zero(m), prob)


def test_non_finite_alpha_names_the_element(mesh):
    prob = replace(catalog("ex1"), alpha=lambda t: np.where(t > 0, np.inf, 1.0))
    w = interpolate(mesh, lambda x, y: np.where(x > 0.9, x, 0.0))
    with pytest.raises(AssemblyError, match="element"):
        assemble(mesh, w, prob)


def test_non_finite_rhs_names_the_element(mesh):
    prob = replace(catalog("ex1"), f=lambda x, y: np.where(x > 0.95, np.nan, 1.0))
    with pytest.raises(AssemblyError, match="element"):
        assemble(mesh, zero(mesh), prob)
