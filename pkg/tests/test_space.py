import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kacanov_afem.mesh import MeshError, bisect, make_lshape_mesh, make_square_mesh, uniform_refine
from kacanov_afem.problems import exact_grad, exact_u
from kacanov_afem.space import (DofMap, P1Function, dumps_p1, gradient_on_element, h1_seminorm,
                                h1_seminorm_error, interpolate, loads_p1, prolong, zero)


@pytest.fixture
def mesh():
    m, _ = uniform_refine(make_lshape_mesh(), 3)
    return m


def test_gradient_of_affine_interpolant(mesh):
    u = interpolate(mesh, lambda x, y: 2 * x + 3 * y - 1)
    assert np.allclose(u.gradients(), [2.0, 3.0], atol=1e-13)
    assert np.allclose(gradient_on_element(interpolate(mesh, lambda x, y: x), 5), [1.0, 0.0])
    assert np.array_equal(gradient_on_element(zero(mesh), 0), [0.0, 0.0])


def test_gradient_on_degenerate_element():
    class Flat:
        areas = np.array([0.0])
    u = type("U", (), {"mesh": Flat()})()
    with pytest.raises(MeshError):
        gradient_on_element(u, 0)


def test_interpolate_constant_and_affine(mesh):
    assert np.all(interpolate(mesh, lambda x, y: 4.5).coeffs == 4.5)
    g = lambda x, y: 0.3 * x - 1.7 * y + 0.2  # noqa: E731
    u = interpolate(mesh, g)
    c = mesh.centroids
    assert np.allclose(u.evaluate(c, np.arange(mesh.n_elements)), g(c[:, 0], c[:, 1]), atol=1e-14)


def test_interpolate_rejects_non_finite(mesh):
    with pytest.raises(ValueError):
        interpolate(mesh, lambda x, y: np.where(x == 0, np.nan, x))


def test_singular_solution_vanishes_on_the_corner_legs(mesh):
    u = interpolate(mesh, exact_u)
    p = mesh.points
    legs = ((p[:, 1] == 0) & (p[:, 0] >= 0)) | ((p[:, 0] == 0) & (p[:, 1] <= 0))
    assert legs.sum() >= 2
    assert np.allclose(u.coeffs[legs], 0.0, atol=1e-15)


def test_dofmap(mesh):
    dm = DofMap.of(mesh)
    assert dm.n_free == np.count_nonzero(~mesh.on_boundary)
    assert np.array_equal(dm.index_of[dm.free], np.arange(dm.n_free))
    assert np.all(dm.index_of[mesh.on_boundary] == -1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 3))
def test_prolongation_is_exact(seed, n):
    rng = np.random.default_rng(seed)
    coarse, _ = uniform_refine(make_square_mesh(), 2)
    u = P1Function(coarse, rng.standard_normal(coarse.n_vertices))
    marked = rng.choice(coarse.n_elements, size=int(rng.integers(1, coarse.n_elements)), replace=False)
    fine, rmap = bisect(coarse, marked, n)
    uf = prolong(u, coarse, fine, rmap)
    elems = np.repeat(np.arange(fine.n_elements), 5)
    lam = rng.dirichlet(np.ones(3), size=len(elems))
    pts = np.einsum("ni,nid->nd", lam, fine.points[fine.elements[elems]])
    assert np.allclose(uf.evaluate(pts, elems), u.evaluate(pts, rmap.parent[elems]), atol=1e-12)


def test_prolong_constant_and_affine(mesh):
    fine, rmap = bisect(mesh, [0, 7, 11], 2)
    one = prolong(interpolate(mesh, lambda x, y: 1.0), mesh, fine, rmap)
    assert np.all(one.coeffs == 1.0)
    g = lambda x, y: 1.5 * x - y  # noqa: E731
    up = prolong(interpolate(mesh, g), mesh, fine, rmap)
    assert np.allclose(up.coeffs, g(fine.points[:, 0], fine.points[:, 1]), atol=1e-14)


def test_prolong_mesh_mismatch(mesh):
    fine, rmap = bisect(mesh, [0])
    with pytest.raises(ValueError):
        prolong(zero(fine), mesh, fine, rmap)
    other, _ = bisect(mesh, [1, 2, 3])
    with pytest.raises(ValueError):
        prolong(zero(mesh), mesh, other, rmap)


def test_h1_error_of_affine_interpolant_is_zero(mesh):
    u = interpolate(mesh, lambda x, y: 2 * x - y)
    err = h1_seminorm_error(u, lambda x, y: (2.0 + 0 * x, -1.0 + 0 * y))
    assert err <= 1e-12


def test_h1_error_of_zero_against_unit_gradient():
    m = make_lshape_mesh()
    err = h1_seminorm_error(zero(m), lambda x, y: (1.0 + 0 * x, 0 * y))
    assert err == pytest.approx(np.sqrt(3.0), rel=1e-14)


def test_h1_seminorm_of_linear_function():
    m, _ = uniform_refine(make_square_mesh(), 2)
    assert h1_seminorm(interpolate(m, lambda x, y: 3 * x)) == pytest.approx(6.0)


def test_interpolation_error_decays_at_one_third_rate():
    m = make_lshape_mesh()
    dofs, errs = [], []
    for _ in range(8):
        m, _ = uniform_refine(m, 2)
        dofs.append(m.n_free)
        errs.append(h1_seminorm_error(interpolate(m, exact_u), exact_grad))
    slope = np.polyfit(np.log(dofs[-4:]), np.log(errs[-4:]), 1)[0]
    assert -0.40 <= slope <= -0.30


def test_p1_dump_roundtrip(mesh):
    u = interpolate(mesh, exact_u)
    back = loads_p1(dumps_p1(u), mesh)
    assert np.array_equal(back.coeffs, u.coeffs)
    with pytest.raises(ValueError):
        loads_p1("p1 3\n0\n1\n2\n", mesh)


def test_functions_on_different_meshes_do_not_mix(mesh):
    fine, _ = bisect(mesh, [0])
    with pytest.raises(ValueError):
        zero(mesh) - zero(fine)
