"""Conforming triangular meshes with newest-vertex bisection.

Element convention: ``elements[t] = (v0, v1, v2)`` listed counter-clockwise,
with the refinement edge ``(v1, v2)`` opposite the newest vertex ``v0``.
Local edge ``i`` is the edge opposite local vertex ``i``, so local edge 0 is
always the refinement edge.  Meshes are immutable; refinement returns a new
mesh together with a :class:`RefinementMap` describing parents and the two
endpoints of every new vertex.
"""
from dataclasses import dataclass, field
from functools import cached_property
import io

import numpy as np

# local edge i = (v[(i+1) % 3], v[(i+2) % 3])
_LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


class MeshError(ValueError):
    """Invalid mesh data or refinement request."""


@dataclass(frozen=True, eq=False)
class Mesh:
    points: np.ndarray
    elements: np.ndarray
    generation: np.ndarray = None

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        elements = np.array(self.elements, dtype=np.int64)
        if points.ndim != 2 or points.shape[1] != 2:
            raise MeshError("points must have shape (N, 2)")
        if elements.ndim != 2 or elements.shape[1] != 3:
            raise MeshError("elements must have shape (M, 3)")
        if not np.all(np.isfinite(points)):
            raise MeshError("vertex coordinates must be finite")
        if elements.size and (elements.min() < 0 or elements.max() >= len(points)):
            raise MeshError("element references a vertex index out of range")
        if self.generation is None:
            generation = np.zeros(len(elements), dtype=np.int64)
        else:
            generation = np.array(self.generation, dtype=np.int64)
            if generation.shape != (len(elements),) or np.any(generation < 0):
                raise MeshError("generation must be a non-negative vector with one entry per element")
        for arr in (points, elements, generation):
            arr.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "generation", generation)

        bad = np.flatnonzero(self.signed_areas <= 0.0)
        if bad.size:
            raise MeshError(
                f"element {bad[0]} is degenerate or clockwise (signed area {self.signed_areas[bad[0]]:.3e})")
        self._build_topology()

    def _build_topology(self):
        n, m = len(self.points), len(self.elements)
        loc = self.elements[:, _LOCAL_EDGES]  # (M, 3, 2)
        lo = np.minimum(loc[..., 0], loc[..., 1]).ravel()
        hi = np.maximum(loc[..., 0], loc[..., 1]).ravel()
        keys, inv = np.unique(lo * n + hi, return_inverse=True)
        edges = np.column_stack([keys // n, keys % n])
        counts = np.bincount(inv, minlength=len(keys))
        if counts.size and counts.max() > 2:
            raise MeshError("an edge is shared by more than two elements")

        order = np.argsort(inv, kind="stable")
        start = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
        first = order[start] // 3
        second = np.full(len(keys), -1, dtype=np.int64)
        two = counts == 2
        second[two] = order[start[two] + 1] // 3

        elem_edges = inv.reshape(m, 3)
        edge_elements = np.column_stack([first, second])
        owner = np.repeat(np.arange(m), 3).reshape(m, 3)
        a = edge_elements[elem_edges, 0]
        b = edge_elements[elem_edges, 1]
        neighbors = np.where(a == owner, b, a)

        boundary_edges = edges[~two]
        on_boundary = np.zeros(n, dtype=bool)
        on_boundary[boundary_edges.ravel()] = True

        for name, arr in [("edges", edges), ("elem_edges", elem_edges),
                          ("edge_elements", edge_elements), ("neighbors", neighbors),
                          ("boundary_edges", boundary_edges), ("on_boundary", on_boundary)]:
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # -- sizes -----------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.points)

    @property
    def n_elements(self):
        return len(self.elements)

    @cached_property
    def free_vertices(self):
        return np.flatnonzero(~self.on_boundary)

    @property
    def n_free(self):
        return len(self.free_vertices)

    # -- geometry --------------------------------------------------------
    @cached_property
    def signed_areas(self):
        p = self.points[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def areas(self):
        return self.signed_areas

    @cached_property
    def edge_lengths(self):
        """Per element length of local edges, shape ``(M, 3)``."""
        p = self.points[self.elements]
        d = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
        return np.hypot(d[..., 0], d[..., 1])

    @cached_property
    def h(self):
        """Local mesh size ``|T|**(1/2)`` of every element."""
        return np.sqrt(self.areas)

    @cached_property
    def basis_gradients(self):
        """Gradients of the three hat functions on each element, ``(M, 3, 2)``."""
        p = self.points[self.elements]
        nxt = p[:, [1, 2, 0]]
        prv = p[:, [2, 0, 1]]
        g = np.stack([nxt[..., 1] - prv[..., 1], prv[..., 0] - nxt[..., 0]], axis=-1)
        return g / (2.0 * self.areas)[:, None, None]

    @cached_property
    def centroids(self):
        return self.points[self.elements].mean(axis=1)

    def total_area(self):
        return float(np.sum(self.areas))


@dataclass(frozen=True)
class RefinementMap:
    """Provenance of a refined mesh.

    ``parent[t]`` is the index in the coarse mesh of the element that new
    element ``t`` descends from.  New vertices are numbered after the
    ``n_old_vertices`` inherited ones; ``vertex_parents[i]`` holds the edge
    endpoints of vertex ``n_old_vertices + i`` in creation order, so any
    endpoint is either an old vertex or an earlier new one.
    """
    n_old_vertices: int
    n_old_elements: int
    parent: np.ndarray
    vertex_parents: np.ndarray
    round_sizes: tuple = field(default=())
    closure_passes: int = 0

    def children(self, t):
        return np.flatnonzero(self.parent == t)

    @property
    def n_new_vertices(self):
        return len(self.vertex_parents)

    @classmethod
    def identity(cls, mesh):
        return cls(mesh.n_vertices, mesh.n_elements, np.arange(mesh.n_elements),
                   np.zeros((0, 2), dtype=np.int64))


# -- constructors -------------------------------------------------------

def make_lshape_mesh():
    """Six right isoceles triangles covering ``(-1,1)^2 \\ [0,1]x[-1,0]``.

    Each unit square is cut along its diagonal through the re-entrant corner,
    and that diagonal is the refinement edge of both halves, so the labeling
    is compatible.
    """
    points = [(0, 0), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1)]
    elements = [
        (1, 2, 0), (3, 0, 2),   # [0,1]x[0,1], diagonal 0-2
        (3, 4, 0), (5, 0, 4),   # [-1,0]x[0,1], diagonal 0-4
        (5, 6, 0), (7, 0, 6),   # [-1,0]x[-1,0], diagonal 0-6
    ]
    return Mesh(np.array(points, float), elements)


def make_square_mesh():
    """Four triangles of ``(-1,1)^2`` meeting at the centre, newest vertex at the centre."""
    points = [(-1, -1), (1, -1), (1, 1), (-1, 1), (0, 0)]
    elements = [(4, 0, 1), (4, 1, 2), (4, 2, 3), (4, 3, 0)]
    return Mesh(np.array(points, float), elements)


def label_longest_edge(points, elements):
    """Rotate each triangle so its longest edge becomes the refinement edge.

    Triangles are also reoriented counter-clockwise.  Compatibility of the
    resulting labels is not guaranteed; see :func:`closure_is_compatible`.
    """
    points = np.asarray(points, float)
    el = np.array(elements, dtype=np.int64)
    p = points[el]
    cross = ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
             - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    el[cross < 0] = el[cross < 0][:, [0, 2, 1]]
    p = points[el]
    d = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
    longest = np.argmax(np.hypot(d[..., 0], d[..., 1]), axis=1)
    rot = (longest[:, None] + np.arange(3)) % 3
    return np.take_along_axis(el, rot, axis=1)


def closure_is_compatible(mesh):
    """Whether a full refinement closes within ``max generation + 2`` passes."""
    _, rmap = bisect(mesh, np.arange(mesh.n_elements), 1)
    return rmap.closure_passes <= int(mesh.generation.max(initial=0)) + 2


# -- refinement ---------------------------------------------------------

def _bisect_round(mesh, marked_mask):
    ee = mesh.elem_edges
    cut = np.zeros(len(mesh.edges), dtype=bool)
    cut[ee[marked_mask, 0]] = True
    passes = 0
    # Closure: an element with any cut edge must have its refinement edge cut.
    while True:
        need = (cut[ee[:, 1]] | cut[ee[:, 2]]) & ~cut[ee[:, 0]]
        if not need.any():
            break
        cut[ee[need, 0]] = True
        passes += 1
        if passes > len(mesh.edges):
            raise MeshError("refinement closure did not terminate")

    cut_idx = np.flatnonzero(cut)
    n = mesh.n_vertices
    mid = np.full(len(mesh.edges), -1, dtype=np.int64)
    mid[cut_idx] = n + np.arange(len(cut_idx))
    ends = mesh.edges[cut_idx]
    new_points = 0.5 * (mesh.points[ends[:, 0]] + mesh.points[ends[:, 1]])

    refined = np.flatnonzero(cut[ee[:, 0]])
    v0, v1, v2 = mesh.elements[refined].T
    g = mesh.generation[refined]
    m = mid[ee[refined, 0]]
    m1 = mid[ee[refined, 1]]
    m2 = mid[ee[refined, 2]]
    cl = cut[ee[refined, 2]]
    cr = cut[ee[refined, 1]]

    # left child (m, v0, v1), right child (m, v2, v0); each split again on its
    # own refinement edge when that edge is cut.
    slot0 = np.where(cl[:, None], np.column_stack([m2, m, v0]), np.column_stack([m, v0, v1]))
    slot1 = np.column_stack([m2, v1, m])
    slot2 = np.where(cr[:, None], np.column_stack([m1, m, v2]), np.column_stack([m, v2, v0]))
    slot3 = np.column_stack([m1, v0, m])
    kids = np.stack([slot0, slot1, slot2, slot3], axis=1)
    kid_gen = np.stack([g + 1 + cl, g + 2, g + 1 + cr, g + 2], axis=1)
    valid = np.column_stack([np.ones_like(cl), cl, np.ones_like(cr), cr])

    elements = mesh.elements.copy()
    generation = mesh.generation.copy()
    elements[refined] = kids[:, 0]
    generation[refined] = kid_gen[:, 0]
    extra = valid[:, 1:]
    parent_extra = np.repeat(refined[:, None], 3, axis=1)[extra]
    elements = np.concatenate([elements, kids[:, 1:][extra]])
    generation = np.concatenate([generation, kid_gen[:, 1:][extra]])
    parent = np.concatenate([np.arange(mesh.n_elements), parent_extra])

    new_mesh = Mesh(np.concatenate([mesh.points, new_points]), elements, generation)
    return new_mesh, parent, ends, passes


def bisect(mesh, marked, n=1):
    """Bisect every marked element at least ``n`` times and restore conformity.

    Returns ``(new_mesh, RefinementMap)``.  An empty marking returns the input
    mesh unchanged.
    """
    if int(n) != n or n < 1:
        raise MeshError(f"number of bisections must be a positive integer, got {n}")
    marked = np.unique(np.asarray(list(marked) if isinstance(marked, (set, frozenset)) else marked,
                                  dtype=np.int64).ravel())
    if marked.size and (marked[0] < 0 or marked[-1] >= mesh.n_elements):
        raise MeshError("marked element index out of range")
    if marked.size == 0:
        return mesh, RefinementMap.identity(mesh)

    in_marked = np.zeros(mesh.n_elements, dtype=bool)
    in_marked[marked] = True
    ancestor = np.arange(mesh.n_elements)
    current = mesh
    vparents, sizes, passes = [], [], 0
    for _ in range(int(n)):
        current, parent, ends, p = _bisect_round(current, in_marked[ancestor])
        ancestor = ancestor[parent]
        vparents.append(ends)
        sizes.append(len(ends))
        passes = max(passes, p)
    rmap = RefinementMap(mesh.n_vertices, mesh.n_elements, ancestor,
                         np.concatenate(vparents), tuple(sizes), passes)
    return current, rmap


def uniform_refine(mesh, n=1):
    """Bisect every element at least ``n`` times."""
    return bisect(mesh, np.arange(mesh.n_elements), n)


def compose_maps(first, second):
    """Map from the mesh before ``first`` to the mesh after ``second``."""
    return RefinementMap(
        first.n_old_vertices, first.n_old_elements, first.parent[second.parent],
        np.concatenate([first.vertex_parents, second.vertex_parents]),
        first.round_sizes + second.round_sizes,
        max(first.closure_passes, second.closure_passes))


# -- queries ------------------------------------------------------------

def mesh_size(mesh, t):
    """``H_T = |T|^(1/2)``."""
    return float(mesh.h[t])


def patch(mesh, t):
    """``T`` together with its edge neighbours."""
    nb = mesh.neighbors[t]
    return {int(t)} | {int(s) for s in nb if s >= 0}


def shape_regularity(mesh):
    """Per element ratio ``diam(T) / rho_T`` with ``rho_T`` the inradius."""
    lengths = mesh.edge_lengths
    rho = 2.0 * mesh.areas / lengths.sum(axis=1)
    return lengths.max(axis=1) / rho


def audit_shape_regularity(mesh):
    return float(shape_regularity(mesh).max())


def barycentric(mesh, pts, elems):
    """Barycentric coordinates of ``pts[i]`` with respect to element ``elems[i]``."""
    p = mesh.points[mesh.elements[elems]]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    r = pts - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    l1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    l2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def check_conformity(mesh, tol=1e-12, chunk=200_000):
    """Brute-force pairwise conformity test.

    Returns a list of human-readable violations, empty when the mesh is
    conforming.  Checks every (vertex, element) pair for a vertex lying in a
    closed element it does not belong to, every pair of edges without a
    common endpoint for a crossing, and duplicated elements.  Together with
    positive orientation this rules out every intersection other than a full
    shared vertex or a full shared edge.
    """
    problems = []
    el = mesh.elements
    key = np.sort(el, axis=1)
    if len(np.unique(key, axis=0)) != len(key):
        problems.append("duplicate elements")

    scale = tol * max(1.0, float(np.abs(mesh.points).max(initial=0.0)))
    pts, nv, ne = mesh.points, mesh.n_vertices, mesh.n_elements
    tri = pts[el]
    pairs = np.arange(nv * ne, dtype=np.int64)
    for s in range(0, len(pairs), chunk):
        idx = pairs[s:s + chunk]
        v, t = idx // ne, idx % ne
        keep = ~np.any(el[t] == v[:, None], axis=1)
        v, t = v[keep], t[keep]
        a, b, c = tri[t, 0], tri[t, 1], tri[t, 2]
        p = pts[v]
        o1 = _orient(a, b, p)
        o2 = _orient(b, c, p)
        o3 = _orient(c, a, p)
        inside = (o1 >= -scale) & (o2 >= -scale) & (o3 >= -scale)
        if inside.any():
            i = np.flatnonzero(inside)[0]
            problems.append(f"vertex {v[i]} lies in element {t[i]} without being one of its vertices")
            break

    edges = mesh.edges
    ne_ = len(edges)
    pairs = np.arange(ne_ * ne_, dtype=np.int64)
    for s in range(0, len(pairs), chunk):
        idx = pairs[s:s + chunk]
        i, j = idx // ne_, idx % ne_
        sel = i < j
        i, j = i[sel], j[sel]
        ei, ej = edges[i], edges[j]
        share = (ei[:, :1] == ej).any(axis=1) | (ei[:, 1:] == ej).any(axis=1)
        i, j = i[~share], j[~share]
        if not len(i):
            continue
        p1, p2 = pts[edges[i, 0]], pts[edges[i, 1]]
        q1, q2 = pts[edges[j, 0]], pts[edges[j, 1]]
        d1 = _orient(p1, p2, q1)
        d2 = _orient(p1, p2, q2)
        d3 = _orient(q1, q2, p1)
        d4 = _orient(q1, q2, p2)
        cross = (d1 * d2 < -scale ** 2) & (d3 * d4 < -scale ** 2)
        if cross.any():
            k = np.flatnonzero(cross)[0]
            problems.append(f"edges {i[k]} and {j[k]} cross")
            break
    return problems


def _orient(a, b, c):
    return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])


# -- text dump ----------------------------------------------------------

def dumps_mesh(mesh):
    out = io.StringIO()
    out.write(f"vertices {mesh.n_vertices}\n")
    out.write(f"elements {mesh.n_elements}\n")
    for (x, y), b in zip(mesh.points, mesh.on_boundary):
        out.write(f"{x:.17g} {y:.17g} {int(b)}\n")
    for (a, b, c), g in zip(mesh.elements, mesh.generation):
        out.write(f"{a} {b} {c} {g}\n")
    return out.getvalue()


def dump_mesh(mesh, path):
    with open(path, "w") as fh:
        fh.write(dumps_mesh(mesh))


def loads_mesh(text):
    lines = text.strip().splitlines()
    try:
        kw1, nv = lines[0].split()
        kw2, ne = lines[1].split()
        if (kw1, kw2) != ("vertices", "elements"):
            raise ValueError
        nv, ne = int(nv), int(ne)
        vert = np.array([ln.split() for ln in lines[2:2 + nv]], dtype=float).reshape(nv, 3)
        elem = np.array([ln.split() for ln in lines[2 + nv:2 + nv + ne]], dtype=np.int64).reshape(ne, 4)
    except (ValueError, IndexError) as exc:
        raise MeshError(f"malformed mesh dump: {exc}") from None
    mesh = Mesh(vert[:, :2], elem[:, :3], elem[:, 3])
    if not np.array_equal(mesh.on_boundary, vert[:, 2].astype(bool)):
        raise MeshError("boundary flags in dump disagree with mesh topology")
    return mesh


def load_mesh(path):
    with open(path) as fh:
        return loads_mesh(fh.read())
