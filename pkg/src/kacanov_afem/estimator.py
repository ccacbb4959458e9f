"""Residual a posteriori estimator for the Kacanov-linearised problem.

For each element

    eta_T^2 = H_T^2 ||R||_T^2 + H_T ||J||_{dT}^2,

with ``R = -div(alpha_T grad u_curr) - f = -f`` (P1 trial functions and an
elementwise constant weight) and, on each interior side ``S`` shared by
``T`` and ``T'``, the averaged flux jump
``J = 1/2 (alpha_T grad u_T . n + alpha_T' grad u_T' . n')``.
Boundary sides carry no jump.
"""
from dataclasses import dataclass

import numpy as np

from .assembly import element_weights, f_l2_sq, load_vector
from .mesh import compose_maps
from .space import prolong


@dataclass(frozen=True)
class LocalEstimates:
    eta: np.ndarray
    interior: np.ndarray
    jump: np.ndarray

    @property
    def global_(self):
        return float(np.sqrt(np.sum(self.eta ** 2)))

    def __len__(self):
        return len(self.eta)


def edge_normals(mesh):
    """Unit normals of every edge pointing out of ``edge_elements[:, 0]``, and lengths."""
    p = mesh.points
    a, b = p[mesh.edges[:, 0]], p[mesh.edges[:, 1]]
    d = b - a
    length = np.hypot(d[:, 0], d[:, 1])
    n = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    out = 0.5 * (a + b) - mesh.centroids[mesh.edge_elements[:, 0]]
    flip = np.sum(n * out, axis=1) < 0
    n[flip] *= -1.0
    return n, length


def flux_jumps(mesh, weights, u_curr):
    """``J_S`` for every edge (zero on boundary edges) and the edge lengths."""
    flux = weights[:, None] * u_curr.gradients()
    n, length = edge_normals(mesh)
    t1, t2 = mesh.edge_elements[:, 0], mesh.edge_elements[:, 1]
    interior = t2 >= 0
    J = np.zeros(len(length))
    J[interior] = 0.5 * np.sum((flux[t1[interior]] - flux[t2[interior]]) * n[interior], axis=1)
    return J, length


def estimate(mesh, u_prev, u_curr, problem, quad_order=5):
    """Local indicators ``eta_T`` for the pair ``(u_prev, u_curr)`` on ``mesh``."""
    if u_prev.mesh is not mesh or u_curr.mesh is not mesh:
        raise ValueError("both iterates must live on the estimated mesh")
    weights = element_weights(mesh, u_prev, problem)
    H = mesh.h
    interior = H ** 2 * f_l2_sq(mesh, problem, quad_order)
    J, length = flux_jumps(mesh, weights, u_curr)
    side = length * J ** 2
    jump = H * side[mesh.elem_edges].sum(axis=1)
    eta = np.sqrt(interior + jump)
    return LocalEstimates(eta, interior, jump)


def residual_pairing(mesh, u_prev, u_curr, problem, v, maps, quad_order=5):
    """``<R(u_curr), v> = a(u_prev; u_curr, v) - L(v)`` for ``v`` on a refinement.

    ``maps`` is the sequence of refinement maps leading from ``mesh`` to
    ``v.mesh`` (empty if ``v`` lives on ``mesh`` itself).
    """
    maps = list(maps)
    if not maps:
        if v.mesh is not mesh:
            raise ValueError("v does not live on the mesh or a given refinement of it")
        fine, up, uc = mesh, u_prev, u_curr
    else:
        rmap = maps[0]
        for nxt in maps[1:]:
            rmap = compose_maps(rmap, nxt)
        fine = v.mesh
        if rmap.n_old_vertices != mesh.n_vertices or len(rmap.parent) != fine.n_elements \
                or rmap.n_old_vertices + rmap.n_new_vertices != fine.n_vertices:
            raise ValueError("v does not live on a refinement of the mesh")
        up = prolong(u_prev, mesh, fine, rmap)
        uc = prolong(u_curr, mesh, fine, rmap)
    weights = element_weights(fine, up, problem)
    a = np.sum(weights * fine.areas * np.sum(uc.gradients() * v.gradients(), axis=1))
    return float(a - load_vector(fine, problem, quad_order) @ v.coeffs)


def dumps_estimates(est):
    return "".join(f"{i} {e:.17g}\n" for i, e in enumerate(est.eta))

