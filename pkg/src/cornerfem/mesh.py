"""Triangulations of the corner domains and newest-vertex bisection.

The corner domain for an interior angle ``omega`` is the part of the square
``(-1, 1)^2`` whose polar angle (around the origin) lies in ``[0, omega]``.
Its boundary is traversed counterclockwise starting at the origin, so the
first boundary segment is the positive x-axis.

Triangles are stored as ``(a, b, n)`` in counterclockwise order, where ``n``
is the newest vertex and ``(a, b)`` the refinement edge opposite to it.

Examples
--------
>>> mesh = build_domain_mesh(DomainSpec(3 * np.pi / 4))
>>> mesh.n_vertices, mesh_size(mesh)
(19, 0.5)
>>> refine_uniform(mesh).n_vertices
61
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi
DIAMETER = 2.0 * np.sqrt(2.0)
#: Relative tolerance for point-on-line decisions, scaled by the domain diameter.
GEOM_TOL = 1e-12 * DIAMETER
COARSE_H = 0.5

# Corners of the square together with their polar angle.
_SQUARE_CORNERS = [
    (np.pi / 4, (1.0, 1.0)),
    (3 * np.pi / 4, (-1.0, 1.0)),
    (5 * np.pi / 4, (-1.0, -1.0)),
    (7 * np.pi / 4, (1.0, -1.0)),
]


class MeshError(ValueError):
    """Raised for invalid domain parameters or malformed meshes."""


@dataclass(frozen=True)
class DomainSpec:
    """Corner domain with interior angle ``omega`` at the origin."""

    omega: float

    def __post_init__(self):
        omega = float(self.omega)
        if not np.isfinite(omega) or omega <= 0.0 or omega >= TWO_PI:
            raise MeshError(f"omega={omega!r} outside (0, 2*pi)")
        if omega < 1e-9 or TWO_PI - omega < 1e-9:
            raise MeshError(f"omega={omega!r} degenerates the sector cut")
        object.__setattr__(self, "omega", omega)

    @property
    def lambda_(self) -> float:
        """Singularity exponent ``pi / omega``."""
        return np.pi / self.omega

    def ray(self) -> np.ndarray:
        return np.array([np.cos(self.omega), np.sin(self.omega)])

    def corners(self) -> np.ndarray:
        """Corners of the domain polygon, counterclockwise from the origin."""
        pts = [(0.0, 0.0), (1.0, 0.0)]
        for angle, corner in _SQUARE_CORNERS:
            if angle < self.omega - 1e-14:
                pts.append(corner)
        exit_point = _ray_exit(self.ray())
        if np.hypot(*(exit_point - pts[-1])) > GEOM_TOL:
            pts.append(tuple(exit_point))
        return np.array(pts, dtype=float)

    def area(self) -> float:
        return polygon_area(self.corners())

    def perimeter(self) -> float:
        c = self.corners()
        return float(np.sum(np.linalg.norm(np.roll(c, -1, axis=0) - c, axis=1)))

    def polar_angle(self, points: np.ndarray) -> np.ndarray:
        """Polar angle in ``[0, omega]`` (points in the excluded wedge are folded
        towards the nearer side so that rounding never flips a value across it)."""
        points = np.asarray(points, dtype=float)
        phi = np.mod(np.arctan2(points[..., 1], points[..., 0]), TWO_PI)
        cut = 0.5 * (self.omega + TWO_PI)
        return np.where(phi > cut, phi - TWO_PI, phi)


def _ray_exit(d: np.ndarray) -> np.ndarray:
    """Point where the ray ``t * d`` leaves the square (-1, 1)^2."""
    t = 1.0 / np.max(np.abs(d))
    p = t * d
    # snap to the square boundary exactly
    p[np.abs(np.abs(p) - 1.0) < 1e-14] = np.sign(p[np.abs(np.abs(p) - 1.0) < 1e-14])
    p[np.abs(p) < 1e-15] = 0.0
    return p


def polygon_area(points: np.ndarray) -> float:
    """Signed shoelace area of a closed polygon given by its vertices."""
    x, y = np.asarray(points, dtype=float).T
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Conforming triangulation with an ordered boundary loop.

    Attributes
    ----------
    vertices : (N, 2) float array
    triangles : (T, 3) int array
        Rows ``(a, b, n)``, counterclockwise, ``n`` the newest vertex.
    boundary_edges : (K, 2) int array
        Boundary edges in counterclockwise traversal order; the first edge
        starts at ``boundary_edges[0, 0]`` (the origin for corner domains).
    boundary_segments : (K,) int array
        Boundary segment id (1-based) of every boundary edge.
    level : int
        Number of refinement steps applied to the coarse mesh.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_segments: np.ndarray
    level: int = 0
    domain: DomainSpec | None = field(default=None, compare=False)

    def __post_init__(self):
        for name, dtype in (("vertices", float), ("triangles", np.int64),
                            ("boundary_edges", np.int64),
                            ("boundary_segments", np.int64)):
            arr = np.array(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique edges as sorted vertex pairs, shape (E, 2)."""
        return self._edge_data[0]

    @cached_property
    def triangle_edges(self) -> np.ndarray:
        """Edge ids of each triangle: refinement edge ``(a, b)``, then
        ``(n, a)`` and ``(b, n)``."""
        return self._edge_data[1]

    @cached_property
    def _edge_data(self):
        t = self.triangles
        local = np.concatenate([t[:, [0, 1]], t[:, [2, 0]], t[:, [1, 2]]])
        local.sort(axis=1)
        # integer keys sort like the pairs and are much faster than unique(axis=0)
        keys, inverse = np.unique(local[:, 0] * self.n_vertices + local[:, 1],
                                  return_inverse=True)
        edges = np.stack(np.divmod(keys, self.n_vertices), axis=1)
        tri_edges = inverse.reshape(3, -1).T.copy()
        return edges, tri_edges

    @cached_property
    def boundary_vertex_ids(self) -> np.ndarray:
        """Boundary vertices in traversal order (each once)."""
        return self.boundary_edges[:, 0].copy()

    @cached_property
    def interior_vertex_ids(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_edges[:, 0]] = False
        return np.flatnonzero(mask)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def min_angles(self) -> np.ndarray:
        """Smallest interior angle of every triangle, in radians."""
        p = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            cos = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
        return np.min(angles, axis=0)


def mesh_size(mesh: TriangleMesh) -> float:
    """Maximum edge length."""
    if mesh.n_triangles == 0:
        raise MeshError("empty mesh")
    return float(mesh.edge_lengths().max())


def boundary_nodes(mesh: TriangleMesh) -> tuple[np.ndarray, np.ndarray]:
    """Closed boundary loop.

    Returns
    -------
    nodes : (K + 1,) int array
        Boundary vertex ids counterclockwise; ``nodes[0] == nodes[-1]``.
    segments : (K,) int array
        Segment id of the edge ``(nodes[k], nodes[k + 1])``.
    """
    be = mesh.boundary_edges
    nodes = np.append(be[:, 0], be[0, 0])
    return nodes, mesh.boundary_segments.copy()


# ---------------------------------------------------------------------------
# coarse mesh construction


def _clip(poly: list, normal: np.ndarray) -> list:
    """Sutherland-Hodgman clip of a polygon against ``normal . p <= 0``."""
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        sp, sq = float(normal @ p), float(normal @ q)
        p_in, q_in = sp <= GEOM_TOL, sq <= GEOM_TOL
        if p_in:
            out.append(p)
        if p_in != q_in and abs(sp) > GEOM_TOL and abs(sq) > GEOM_TOL:
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    return out


def _triangulate_cell(poly: list, center: np.ndarray, h: float) -> list:
    """Triangles (as coordinate triples) covering a clipped grid cell."""
    poly = [np.asarray(p, dtype=float) for p in poly]
    if len(poly) < 3 or abs(polygon_area(np.array(poly))) < GEOM_TOL:
        return []
    # long edges only occur on the sector cut; grid edges are never split
    split = []
    for i, p in enumerate(poly):
        q = poly[(i + 1) % len(poly)]
        split.append(p)
        if np.hypot(*(q - p)) > h * (1 + 1e-9):
            split.append(0.5 * (p + q))
    poly = split
    pts = np.array(poly)
    inside = all(
        _cross(pts[(i + 1) % len(pts)] - pts[i], center - pts[i]) >= -GEOM_TOL
        for i in range(len(pts))
    )
    apex = center if inside else pts.mean(axis=0)
    tris = []
    for i, p in enumerate(poly):
        q = poly[(i + 1) % len(poly)]
        if abs(_cross(q - p, apex - p)) > GEOM_TOL:
            tris.append((p, q, apex))
    return tris


def _cross(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def _cell_polygons(cells: int, domain: DomainSpec | None):
    size = 2.0 / cells
    for i in range(cells):
        for j in range(cells):
            x0, y0 = -1.0 + i * size, -1.0 + j * size
            poly = [np.array(p) for p in ((x0, y0), (x0 + size, y0),
                                          (x0 + size, y0 + size), (x0, y0 + size))]
            center = np.array([x0 + 0.5 * size, y0 + 0.5 * size])
            if domain is not None:
                d = domain.ray()
                ray_normal = np.array([-d[1], d[0]])  # p . normal = cross(d, p)
                if domain.omega <= np.pi:
                    poly = _clip(poly, np.array([0.0, -1.0]))
                    poly = _clip(poly, ray_normal)
                elif y0 + size <= GEOM_TOL:
                    poly = _clip(poly, ray_normal)
            yield poly, center, size


def _assemble(triangles_xyz: list, corners: np.ndarray, start: np.ndarray,
              domain: DomainSpec | None) -> TriangleMesh:
    """Merge coordinate triangles into an indexed mesh with boundary loop."""
    index: dict = {}
    vertices = []

    def vid(p):
        key = (round(p[0] * 1e9), round(p[1] * 1e9))
        if key not in index:
            index[key] = len(vertices)
            vertices.append((float(p[0]), float(p[1])))
        return index[key]

    tris = np.array([[vid(p) for p in tri] for tri in triangles_xyz], dtype=np.int64)
    vertices = np.array(vertices)
    tris = _orient_longest_edge(vertices, tris)
    edges, segs = _boundary_loop(vertices, tris, corners, start)
    return TriangleMesh(vertices, tris, edges, segs, 0, domain)


def _orient_longest_edge(vertices: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Reorder rows counterclockwise with the longest edge first."""
    p = vertices[tris]
    area = _cross_rows(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    if np.any(np.abs(area) <= GEOM_TOL ** 2):
        raise MeshError("degenerate triangle")
    tris = tris.copy()
    flip = area < 0
    tris[flip] = tris[flip][:, [1, 0, 2]]
    p = vertices[tris]
    # length of the edge opposite vertex k
    opp = np.stack([np.linalg.norm(p[:, (k + 2) % 3] - p[:, (k + 1) % 3], axis=1)
                    for k in range(3)], axis=1)
    k = np.argmax(opp, axis=1)
    rows = np.arange(len(tris))
    return np.stack([tris[rows, (k + 1) % 3], tris[rows, (k + 2) % 3], tris[rows, k]], axis=1)


def _cross_rows(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]


def _boundary_loop(vertices, tris, corners, start):
    directed = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    if counts.max() > 2:
        raise MeshError("non-manifold edge")
    bnd = directed[counts[inv.ravel()] == 1]
    succ = dict(zip(bnd[:, 0].tolist(), bnd[:, 1].tolist()))
    if len(succ) != len(bnd):
        raise MeshError("boundary is not a simple loop")
    first = int(np.argmin(np.linalg.norm(vertices - start, axis=1)))
    loop = [first]
    while True:
        nxt = succ[loop[-1]]
        if nxt == first:
            break
        loop.append(nxt)
        if len(loop) > len(bnd):
            raise MeshError("boundary loop does not close")
    if len(loop) != len(bnd):
        raise MeshError("boundary consists of several loops")
    loop = np.array(loop)
    edges = np.stack([loop, np.roll(loop, -1)], axis=1)
    if corners is None:
        return edges, np.ones(len(edges), dtype=np.int64)
    mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    segs = _segment_ids(mid, corners)
    return edges, segs


def _segment_ids(points: np.ndarray, corners: np.ndarray) -> np.ndarray:
    a = corners
    b = np.roll(corners, -1, axis=0)
    d = b - a
    length = np.linalg.norm(d, axis=1)
    rel = points[:, None, :] - a[None, :, :]
    dist = np.abs(rel[..., 0] * d[None, :, 1] - rel[..., 1] * d[None, :, 0]) / length
    t = np.sum(rel * d[None], axis=2) / length ** 2
    dist = np.where((t >= -1e-9) & (t <= 1 + 1e-9), dist, np.inf)
    seg = np.argmin(dist, axis=1)
    if np.any(dist[np.arange(len(points)), seg] > 1e-9):
        raise MeshError("boundary edge off the domain polygon")
    return seg + 1


def build_domain_mesh(spec: DomainSpec) -> TriangleMesh:
    """Coarsest (h = 1/2) criss-cross triangulation of the corner domain.

    Every grid cell of size 1/2 is split into four triangles through its
    center. Cells cut by the ray ``phi = omega`` are clipped and fanned from
    their center; cut edges longer than 1/2 are halved first.
    """
    if not isinstance(spec, DomainSpec):
        spec = DomainSpec(spec)
    tris = []
    for poly, center, _ in _cell_polygons(4, spec):
        tris.extend(_triangulate_cell(poly, center, COARSE_H))
    return _assemble(tris, spec.corners(), np.zeros(2), spec)


def square_mesh(cells: int = 2) -> TriangleMesh:
    """Criss-cross mesh of (-1, 1)^2 with ``cells`` x ``cells`` grid cells.

    The boundary loop starts at the corner (-1, -1).
    """
    tris = []
    for poly, center, size in _cell_polygons(cells, None):
        tris.extend(_triangulate_cell(poly, center, size))
    corners = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])
    return _assemble(tris, corners, corners[0], None)


def mesh_from_arrays(vertices, triangles, start=None) -> TriangleMesh:
    """Wrap raw arrays (any orientation) into a :class:`TriangleMesh`.

    The newest vertex of every triangle is set opposite its longest edge and
    every boundary edge gets segment id 1.
    """
    vertices = np.asarray(vertices, dtype=float)
    tris = _orient_longest_edge(vertices, np.asarray(triangles, dtype=np.int64))
    start = vertices[0] if start is None else np.asarray(start, dtype=float)
    edges, segs = _boundary_loop(vertices, tris, None, start)
    return TriangleMesh(vertices, tris, edges, segs)


# ---------------------------------------------------------------------------
# newest vertex bisection


def refine(mesh: TriangleMesh, marked_edges: np.ndarray) -> TriangleMesh:
    """Newest-vertex bisection of all triangles touching a marked edge.

    ``marked_edges`` is a boolean mask over ``mesh.edges``. The marking is
    closed first (a triangle with any marked edge gets its refinement edge
    marked as well), so the result is conforming.
    """
    marked = np.array(marked_edges, dtype=bool)
    if marked.shape != (len(mesh.edges),):
        raise MeshError("edge mask has wrong length")
    te = mesh.triangle_edges
    while True:
        need = marked[te].any(axis=1) & ~marked[te[:, 0]]
        if not need.any():
            break
        marked[te[need, 0]] = True

    nv = mesh.n_vertices
    new_id = np.full(len(mesh.edges), -1, dtype=np.int64)
    new_id[marked] = nv + np.arange(marked.sum())
    e = mesh.edges[marked]
    vertices = np.concatenate([mesh.vertices, 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])])

    t = mesh.triangles
    bis = marked[te[:, 0]]
    keep = t[~bis]
    a, b, n = t[bis, 0], t[bis, 1], t[bis, 2]
    m = new_id[te[bis, 0]]
    p = new_id[te[bis, 1]]
    q = new_id[te[bis, 2]]
    left_split = p >= 0
    right_split = q >= 0
    pieces = [
        keep,
        np.stack([n, a, m], axis=1)[~left_split],
        np.stack([m, n, p], axis=1)[left_split],
        np.stack([a, m, p], axis=1)[left_split],
        np.stack([b, n, m], axis=1)[~right_split],
        np.stack([m, b, q], axis=1)[right_split],
        np.stack([n, m, q], axis=1)[right_split],
    ]
    triangles = np.concatenate(pieces)

    be = mesh.boundary_edges
    be_ids = _edge_lookup(mesh, be)
    mids = new_id[be_ids]
    split = mids >= 0
    # interleave so the traversal order is preserved
    counts = np.where(split, 2, 1)
    pos = np.concatenate([[0], np.cumsum(counts)[:-1]])
    rows = np.empty((counts.sum(), 2), dtype=np.int64)
    segs = np.empty(counts.sum(), dtype=np.int64)
    rows[pos] = np.where(split[:, None], np.stack([be[:, 0], mids], axis=1), be)
    segs[pos] = mesh.boundary_segments
    second = pos[split] + 1
    rows[second] = np.stack([mids[split], be[split, 1]], axis=1)
    segs[second] = mesh.boundary_segments[split]
    return TriangleMesh(vertices, triangles, rows, segs, mesh.level + 1, mesh.domain)


def _edge_lookup(mesh: TriangleMesh, pairs: np.ndarray) -> np.ndarray:
    nv = mesh.n_vertices
    keys = mesh.edges[:, 0] * nv + mesh.edges[:, 1]
    s = np.sort(pairs, axis=1)
    ids = np.searchsorted(keys, s[:, 0] * nv + s[:, 1])
    return ids


def bisect(mesh: TriangleMesh, marked_triangles) -> TriangleMesh:
    """Bisect the marked triangles once (plus the conforming closure)."""
    marked = np.zeros(len(mesh.edges), dtype=bool)
    marked[mesh.triangle_edges[np.asarray(marked_triangles), 0]] = True
    return refine(mesh, marked)


def refine_uniform(mesh: TriangleMesh) -> TriangleMesh:
    """Halve the mesh size: every edge is bisected, so each triangle is split
    into four children by three newest-vertex bisections."""
    return refine(mesh, np.ones(len(mesh.edges), dtype=bool))


def mesh_hierarchy(spec: DomainSpec, levels: int) -> list[TriangleMesh]:
    meshes = [build_domain_mesh(spec)]
    for _ in range(levels - 1):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


def prolongate_uniform(coarse: TriangleMesh, values: np.ndarray) -> np.ndarray:
    """Nodal values of a P1 function on ``refine_uniform(coarse)``.

    Relies on the numbering used by :func:`refine`: the new vertex for edge
    ``k`` is ``coarse.n_vertices + k`` when every edge is marked.
    """
    values = np.asarray(values, dtype=float)
    e = coarse.edges
    return np.concatenate([values, 0.5 * (values[e[:, 0]] + values[e[:, 1]])])
