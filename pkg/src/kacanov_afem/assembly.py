"""Kacanov-linearised systems: weighted stiffness, load vector, Dirichlet lift.

The weight ``alpha(|grad w|^2)`` is frozen at a given P1 function ``w``; its
gradient is constant per element so each element carries a single weight.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .quadrature import map_points, triangle_rule
from .space import DofMap, P1Function


class AssemblyError(ValueError):
    pass


class MissingPrimitive(AssemblyError):
    pass


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Free-dof system ``matrix @ x = rhs``; the solution is ``lift + x`` on free vertices."""
    matrix: sp.csr_matrix
    rhs: np.ndarray
    lift: P1Function
    dofs: DofMap
    weights: np.ndarray
    full_matrix: sp.csr_matrix
    full_load: np.ndarray

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def expand(self, x):
        c = self.lift.coeffs.copy()
        c[self.dofs.free] += x
        return P1Function(self.lift.mesh, c)


def element_weights(mesh, w, problem):
    """``alpha(|grad w|_T^2)`` for every element."""
    if w.mesh is not mesh:
        raise AssemblyError("frozen coefficient function lives on a different mesh")
    g = w.gradients()
    a = np.asarray(problem.alpha(np.sum(g * g, axis=1)), dtype=float)
    a = np.broadcast_to(a, (mesh.n_elements,))
    bad = np.flatnonzero(~np.isfinite(a))
    if bad.size:
        raise AssemblyError(f"alpha is not finite on element {bad[0]}")
    return a


def stiffness_matrix(mesh, weights):
    """Full (all vertices) matrix ``sum_T weight_T int_T grad phi_i . grad phi_j``."""
    G = mesh.basis_gradients
    local = np.einsum("mid,mjd->mij", G, G) * (weights * mesh.areas)[:, None, None]
    rows = np.repeat(mesh.elements, 3, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _eval_rhs(mesh, problem, quad_order):
    bary, w = triangle_rule(quad_order)
    xq = map_points(mesh.points, mesh.elements, bary)
    fq = np.broadcast_to(np.asarray(problem.f(xq[..., 0], xq[..., 1]), dtype=float), xq.shape[:2])
    bad = np.flatnonzero(~np.all(np.isfinite(fq), axis=1))
    if bad.size:
        raise AssemblyError(f"right-hand side is not finite in element {bad[0]}")
    return fq, bary, w


def load_vector(mesh, problem, quad_order=5):
    """Full vector ``int f phi_i`` for all vertices."""
    fq, bary, w = _eval_rhs(mesh, problem, quad_order)
    local = mesh.areas[:, None] * ((fq * w) @ bary)
    return np.bincount(mesh.elements.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def f_l2_sq(mesh, problem, quad_order=5):
    """Elementwise ``||f||_T^2``."""
    fq, _, w = _eval_rhs(mesh, problem, quad_order)
    return mesh.areas * ((fq * fq) @ w)


def dirichlet_lift(mesh, problem):
    """Interpolant of ``g`` on boundary vertices, zero elsewhere."""
    c = np.zeros(mesh.n_vertices)
    b = mesh.on_boundary
    gb = np.asarray(problem.g(mesh.points[b, 0], mesh.points[b, 1]), dtype=float)
    c[b] = gb
    return P1Function(mesh, c)


def assemble(mesh, w, problem, quad_order=5):
    """Linear system of one Kacanov step with the weight frozen at ``w``."""
    weights = element_weights(mesh, w, problem)
    K = stiffness_matrix(mesh, weights)
    F = load_vector(mesh, problem, quad_order)
    lift = dirichlet_lift(mesh, problem)
    dofs = DofMap.of(mesh)
    free = dofs.free
    Kf = K[free]
    A = Kf[:, free].tocsr()
    rhs = F[free] - Kf @ lift.coeffs
    return LinearSystem(A, rhs, lift, dofs, weights, K, F)


def apply_form(mesh, w, u, v, problem):
    """``a(w; u, v) = int alpha(|grad w|^2) grad u . grad v``."""
    for fn in (u, v):
        if fn.mesh is not mesh:
            raise AssemblyError("all functions must live on the same mesh")
    a = element_weights(mesh, w, problem)
    return float(np.sum(a * mesh.areas * np.sum(u.gradients() * v.gradients(), axis=1)))


def load_functional(mesh, v, problem, quad_order=5):
    """``L(v) = int f v``."""
    return float(load_vector(mesh, problem, quad_order) @ v.coeffs)


def potential(mesh, u, problem):
    """``J(u) = 1/2 int A(|grad u|^2)`` with ``A`` the primitive of ``alpha``."""
    if problem.primitive is None:
        raise MissingPrimitive(
            f"problem {problem.name!r} has no primitive of alpha; register one to evaluate the energy")
    g = u.gradients()
    return 0.5 * float(np.sum(mesh.areas * problem.primitive(np.sum(g * g, axis=1))))


def energy(mesh, u, problem, quad_order=5):
    """``F(u) = J(u) - L(u)`` for the full function, lift included."""
    if u.mesh is not mesh:
        raise AssemblyError("function lives on a different mesh")
    return potential(mesh, u, problem) - load_functional(mesh, u, problem, quad_order)


def dumps_coo(matrix):
    m = matrix.tocoo()
    return "".join(f"{i} {j} {v:.17g}\n" for i, j, v in zip(m.row, m.col, m.data))
