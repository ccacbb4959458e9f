"""Continuous piecewise-linear functions on a :class:`~kacanov_afem.mesh.Mesh`."""
from dataclasses import dataclass

import numpy as np

from .mesh import MeshError, barycentric
from .quadrature import map_points, triangle_rule


@dataclass(frozen=True, eq=False)
class P1Function:
    """Nodal coefficients of a P1 function; ``coeffs[i]`` is the value at vertex ``i``."""
    mesh: object
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.shape != (self.mesh.n_vertices,):
            raise ValueError(f"expected {self.mesh.n_vertices} coefficients, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise ValueError("P1 coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def gradients(self):
        """Elementwise constant gradients, shape ``(M, 2)``."""
        return np.einsum("mi,mid->md", self.coeffs[self.mesh.elements], self.mesh.basis_gradients)

    def __add__(self, other):
        _same_mesh(self, other)
        return P1Function(self.mesh, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same_mesh(self, other)
        return P1Function(self.mesh, self.coeffs - other.coeffs)

    def __mul__(self, s):
        return P1Function(self.mesh, s * self.coeffs)

    __rmul__ = __mul__

    def evaluate(self, pts, elems):
        """Values at points ``pts[i]`` known to lie in element ``elems[i]``."""
        lam = barycentric(self.mesh, np.asarray(pts, float), np.asarray(elems))
        return np.sum(lam * self.coeffs[self.mesh.elements[elems]], axis=1)


@dataclass(frozen=True)
class DofMap:
    """Free (interior) vertices and the inverse map vertex -> free slot or -1."""
    free: np.ndarray
    index_of: np.ndarray

    @classmethod
    def of(cls, mesh):
        free = mesh.free_vertices
        index_of = np.full(mesh.n_vertices, -1, dtype=np.int64)
        index_of[free] = np.arange(len(free))
        return cls(free, index_of)

    @property
    def n_free(self):
        return len(self.free)


def _same_mesh(u, v):
    if u.mesh is not v.mesh:
        raise ValueError("functions live on different meshes")


def zero(mesh):
    return P1Function(mesh, np.zeros(mesh.n_vertices))


def gradient_on_element(u, t):
    if u.mesh.areas[t] <= 0.0:
        raise MeshError(f"element {t} is degenerate")
    return u.coeffs[u.mesh.elements[t]] @ u.mesh.basis_gradients[t]


def interpolate(mesh, g):
    """Nodal interpolant of ``g(x, y)`` (vectorised over arrays)."""
    x, y = mesh.points[:, 0], mesh.points[:, 1]
    vals = np.broadcast_to(np.asarray(g(x, y), dtype=float), x.shape)
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise ValueError(f"interpolated function is not finite at vertex {bad[0]} {tuple(mesh.points[bad[0]])}")
    return P1Function(mesh, vals)


def prolong(u, old_mesh, new_mesh, rmap):
    """Exact representation of ``u`` on a refinement of its mesh."""
    if u.mesh is not old_mesh:
        raise ValueError("function does not live on the coarse mesh")
    if rmap.n_old_vertices != old_mesh.n_vertices or \
            rmap.n_old_vertices + rmap.n_new_vertices != new_mesh.n_vertices or \
            len(rmap.parent) != new_mesh.n_elements:
        raise ValueError("refinement map does not connect the given meshes")
    c = np.empty(new_mesh.n_vertices)
    c[:rmap.n_old_vertices] = u.coeffs
    start = rmap.n_old_vertices
    sizes = rmap.round_sizes or (rmap.n_new_vertices,)
    offset = 0
    for size in sizes:
        ends = rmap.vertex_parents[offset:offset + size]
        c[start:start + size] = 0.5 * (c[ends[:, 0]] + c[ends[:, 1]])
        start += size
        offset += size
    return P1Function(new_mesh, c)


def h1_seminorm(u):
    """``||grad u||`` on the whole domain."""
    g = u.gradients()
    return float(np.sqrt(np.sum(u.mesh.areas * np.sum(g * g, axis=1))))


def local_h1_sq(u):
    """Elementwise ``||grad u||_T^2``."""
    g = u.gradients()
    return u.mesh.areas * np.sum(g * g, axis=1)


def h1_seminorm_error(u_h, grad_exact, quad_order=5):
    """``||grad u_h - grad_exact||`` by elementwise quadrature.

    ``grad_exact(x, y)`` returns the two Cartesian components; quadrature
    nodes are interior so point singularities at vertices are never hit.
    """
    mesh = u_h.mesh
    bary, w = triangle_rule(quad_order)
    xq = map_points(mesh.points, mesh.elements, bary)
    gx, gy = grad_exact(xq[..., 0], xq[..., 1])
    gh = u_h.gradients()
    dx = gh[:, 0:1] - gx
    dy = gh[:, 1:2] - gy
    local = mesh.areas * ((dx * dx + dy * dy) @ w)
    return float(np.sqrt(np.sum(local)))


def dumps_p1(u):
    return f"p1 {len(u.coeffs)}\n" + "".join(f"{c:.17g}\n" for c in u.coeffs)


def dump_p1(u, path):
    with open(path, "w") as fh:
        fh.write(dumps_p1(u))


def loads_p1(text, mesh):
    lines = text.strip().splitlines()
    head = lines[0].split()
    if len(head) != 2 or head[0] != "p1" or int(head[1]) != len(lines) - 1:
        raise ValueError("malformed P1 dump")
    return P1Function(mesh, np.array(lines[1:], dtype=float))
