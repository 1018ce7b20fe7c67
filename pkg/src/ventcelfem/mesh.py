"""Triangulations of smooth 2D domains and their curved elevation.

An affine mesh is generated hermetically (structured fan plus uniform
bisection, reprojecting boundary vertices), classified element by
element, and elevated to geometric order ``r`` by placing the images of
the P^r lattice nodes under the exact boundary-fitting map.  Elements
with at least two vertices on the boundary are "non-internal": inside
them the exact map displaces points toward the boundary with a weight
``(boundary barycentric weight)^s`` so that reference boundary edges land
exactly on the curve.

A plain-text dump/ingest format is provided so externally generated
curved meshes can be cross-checked; see :func:`dump_mesh`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .geometry import GeometryError, SmoothBoundary
from .reference import (
    REF_EDGES,
    REF_VERTICES,
    barycentric,
    lagrange_basis,
    lagrange_nodes_xy,
    triangle_rule,
)

BOUNDARY_VERTEX_TOL = 1e-12
EDGE_NODE_TOL = 1e-10
CONTINUITY_TOL = 1e-12


class MeshError(ValueError):
    """Raised for invalid or degenerate mesh configurations."""


class MapInversionError(RuntimeError):
    """Raised when Newton inversion of an element map fails to converge."""


# ---------------------------------------------------------------------------
# affine meshes
# ---------------------------------------------------------------------------

class AffineMesh:
    """Straight-edged triangulation with boundary vertices on the curve.

    Parameters
    ----------
    vertices : (V, 2) array
    triangles : (T, 3) int array, counterclockwise
    boundary_vertex : (V,) bool array
        True for vertices lying on the analytic boundary.
    """

    def __init__(self, vertices, triangles, boundary_vertex):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = _orient_ccw(self.vertices, np.asarray(triangles, dtype=int))
        self.boundary_vertex = np.asarray(boundary_vertex, dtype=bool)
        if len(self.boundary_vertex) != len(self.vertices):
            raise MeshError("boundary flag array does not match vertex count")
        flagged = self.triangles_on_boundary()
        if np.any(flagged):
            raise MeshError(
                f"{int(flagged.sum())} triangle(s) have all three vertices on the "
                "boundary; repair with repair_boundary_triangles before use"
            )

    def triangles_on_boundary(self) -> np.ndarray:
        """Mask of triangles whose three vertices are all flagged."""
        return self.boundary_vertex[self.triangles].all(axis=1)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def _edge_data(self):
        edge_ids = {}
        edges = []
        tri_edges = np.empty((self.n_triangles, 3), dtype=int)
        count = []
        incidence = []
        for t, tri in enumerate(self.triangles):
            for le, (a, b) in enumerate(REF_EDGES):
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                e = edge_ids.get(key)
                if e is None:
                    e = len(edges)
                    edge_ids[key] = e
                    edges.append(key)
                    count.append(0)
                    incidence.append((t, le))
                tri_edges[t, le] = e
                count[e] += 1
        return (
            np.array(edges, dtype=int),
            tri_edges,
            np.array(count, dtype=int),
            incidence,
        )

    @property
    def edges(self) -> np.ndarray:
        """Unique edges as (min vertex, max vertex) pairs, shape (E, 2)."""
        return self._edge_data[0]

    @property
    def tri_edges(self) -> np.ndarray:
        """Global edge id per (triangle, local edge), shape (T, 3)."""
        return self._edge_data[1]

    @property
    def edge_is_boundary(self) -> np.ndarray:
        """Mask of edges incident to exactly one triangle."""
        return self._edge_data[2] == 1

    @cached_property
    def boundary_edges(self) -> list[tuple[int, int]]:
        """(triangle, local edge) pairs of the boundary edges, deterministic order."""
        edges, tri_edges, count, incidence = self._edge_data
        return [incidence[e] for e in range(len(edges)) if count[e] == 1]

    @cached_property
    def element_diameters(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        lengths = np.stack(
            [np.linalg.norm(v[:, b] - v[:, a], axis=1) for a, b in REF_EDGES]
        )
        return lengths.max(axis=0)

    @property
    def h(self) -> float:
        """Mesh size: largest element diameter."""
        return float(self.element_diameters.max())

    def element_eps(self) -> np.ndarray:
        """Per-element boundary flags of the three vertices, shape (T, 3)."""
        return self.boundary_vertex[self.triangles]


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _orient_ccw(vertices, triangles):
    tri = triangles.copy()
    v = vertices[tri]
    det = _cross2(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    if np.any(det == 0.0):
        raise MeshError("degenerate (zero-area) triangle in mesh")
    flip = det < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    return tri


def repair_boundary_triangles(vertices, triangles, boundary_vertex):
    """Flip edges until no triangle has all three vertices on the boundary.

    Works on index arrays (not AffineMesh, whose constructor rejects such
    triangles).  Returns the repaired triangle array.
    """
    tri = _orient_ccw(np.asarray(vertices, float), np.asarray(triangles, int))
    flags = np.asarray(boundary_vertex, bool)
    for _ in range(len(tri)):
        bad = np.nonzero(flags[tri].all(axis=1))[0]
        if len(bad) == 0:
            return tri
        t = bad[0]
        edge_map = {}
        for s, tri_s in enumerate(tri):
            for a, b in REF_EDGES:
                edge_map.setdefault((min(tri_s[a], tri_s[b]), max(tri_s[a], tri_s[b])), []).append(s)
        done = False
        for a, b in REF_EDGES:
            p, q = tri[t][a], tri[t][b]
            key = (min(p, q), max(p, q))
            mates = [s for s in edge_map[key] if s != t]
            if not mates:
                continue
            s = mates[0]
            r = [v for v in tri[t] if v not in (p, q)][0]
            w = [v for v in tri[s] if v not in (p, q)][0]
            if flags[w]:
                continue
            tri[t] = (p, w, r)
            tri[s] = (q, r, w)
            tri[t:t + 1] = _orient_ccw(vertices, tri[t:t + 1])
            tri[s:s + 1] = _orient_ccw(vertices, tri[s:s + 1])
            done = True
            break
        if not done:
            raise MeshError("triangle with three boundary vertices cannot be repaired")
    return tri


def _fan_mesh(boundary: SmoothBoundary, n: int = 8) -> AffineMesh:
    theta = 2.0 * np.pi * np.arange(n) / n
    ring = np.column_stack([np.cos(theta), np.sin(theta)])
    vertices = np.vstack([[0.0, 0.0], boundary.project_raw(ring)])
    triangles = np.array([[0, 1 + i, 1 + (i + 1) % n] for i in range(n)])
    flags = np.array([False] + [True] * n)
    return AffineMesh(vertices, triangles, flags)


def uniform_refine(mesh: AffineMesh, boundary: SmoothBoundary) -> AffineMesh:
    """One bisection sweep; midpoints of boundary edges are reprojected."""
    edges = mesh.edges
    tri_edges = mesh.tri_edges
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    on_gamma = mesh.edge_is_boundary
    mid[on_gamma] = boundary.project(mid[on_gamma])
    vertices = np.vstack([mesh.vertices, mid])
    flags = np.concatenate([mesh.boundary_vertex, on_gamma])
    V = mesh.n_vertices
    m01 = V + tri_edges[:, 0]
    m12 = V + tri_edges[:, 1]
    m20 = V + tri_edges[:, 2]
    v0, v1, v2 = mesh.triangles.T
    children = np.concatenate(
        [
            np.column_stack([v0, m01, m20]),
            np.column_stack([v1, m12, m01]),
            np.column_stack([v2, m20, m12]),
            np.column_stack([m01, m12, m20]),
        ]
    )
    return AffineMesh(vertices, children, flags)


def generate_disk_mesh(boundary: SmoothBoundary, level: int) -> AffineMesh:
    """Quasi-uniform triangulation of the disk, refined ``level`` times.

    Level 0 is an 8-sector fan bisected once (32 triangles); each further
    level halves the mesh size.  Boundary vertices are placed exactly on
    the curve at every level.
    """
    if level < 0:
        raise MeshError(f"refinement level must be nonnegative, got {level}")
    mesh = uniform_refine(_fan_mesh(boundary), boundary)
    for _ in range(level):
        mesh = uniform_refine(mesh, boundary)
    _validate_affine(mesh, boundary)
    return mesh


def _validate_affine(mesh: AffineMesh, boundary: SmoothBoundary) -> None:
    d = boundary.signed_distance(mesh.vertices[mesh.boundary_vertex])
    if len(d) and np.max(np.abs(d)) > BOUNDARY_VERTEX_TOL:
        raise MeshError(
            f"flagged vertex at distance {np.max(np.abs(d)):.3e} from the boundary"
        )
    # mesh boundary must sit inside the tubular neighborhood of the curve
    for t, le in mesh.boundary_edges:
        a, b = REF_EDGES[le]
        pts = mesh.vertices[mesh.triangles[t]][[a, b]]
        mid = pts.mean(axis=0)
        if abs(boundary.signed_distance(mid)) >= boundary.tubular_width:
            raise MeshError("mesh boundary leaves the tubular neighborhood; too coarse")


# ---------------------------------------------------------------------------
# boundary barycentric weight and the exact boundary-fitting map
# ---------------------------------------------------------------------------

def boundary_weight(bary, eps):
    """Total barycentric weight carried by boundary-flagged vertices.

    Zero on the internal face of the element, one on the reference edge
    whose two endpoints are flagged.
    """
    bary = np.asarray(bary, dtype=float)
    if np.any(bary < -1e-14) or np.any(np.abs(bary.sum(axis=-1) - 1.0) > 1e-12):
        raise MeshError("barycentric coordinates must be nonnegative and sum to 1")
    return bary @ np.asarray(eps, dtype=float)


def boundary_anchor(bary, eps):
    """Reference point on the hull of the flagged vertices.

    Normalized combination of the flagged reference vertices; undefined
    (singular) where the boundary weight vanishes.
    """
    bary = np.asarray(bary, dtype=float)
    eps = np.asarray(eps, dtype=float)
    w = boundary_weight(bary, eps)
    if np.any(w <= 1e-14):
        raise MeshError("anchor point undefined where the boundary weight vanishes")
    return (bary * eps) @ REF_VERTICES / w[..., None]


def warped_map(
    ref_xy: np.ndarray,
    eps: np.ndarray,
    base: Callable[[np.ndarray], np.ndarray],
    boundary: SmoothBoundary,
    s: int,
    lam_tol: float = 1e-14,
) -> np.ndarray:
    """Exact boundary-fitting map of a non-internal element.

    ``base`` maps reference points to the physical element (affine map
    for mesh construction, order-r map inside the lift).  Points with a
    vanishing boundary weight stay at their base image; elsewhere the
    displacement ``w^s (project(y) - y)`` is added, where ``y`` is the
    base image of the anchor.
    """
    ref_xy = np.atleast_2d(np.asarray(ref_xy, dtype=float))
    eps = np.asarray(eps, dtype=float)
    bary = barycentric(ref_xy)
    lam = bary @ eps
    out = np.array(base(ref_xy), dtype=float, copy=True)
    mask = lam > lam_tol
    if np.any(mask):
        anchor = (bary[mask] * eps) @ REF_VERTICES / lam[mask, None]
        y = base(anchor)
        disp = boundary.project(y) - y
        out[mask] += lam[mask, None] ** s * disp
    return out


def exact_map(tri_vertices, eps, boundary: SmoothBoundary, ref_xy, s: int):
    """Exact map of a single affine element at reference points.

    Internal elements (at most one flagged vertex) map affinely; for
    non-internal ones the warped map is used with exponent ``s``.
    """
    tri_vertices = np.asarray(tri_vertices, dtype=float)
    eps = np.asarray(eps, dtype=bool)

    def affine(p):
        p = np.atleast_2d(p)
        return tri_vertices[0] + p @ np.array(
            [tri_vertices[1] - tri_vertices[0], tri_vertices[2] - tri_vertices[0]]
        )

    if eps.sum() <= 1:
        return affine(ref_xy)
    return warped_map(ref_xy, eps, affine, boundary, s)


# ---------------------------------------------------------------------------
# global lattice numbering (shared by geometric nodes and FE DOFs)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GlobalLattice:
    """Global numbering of the degree-d lattice over a triangulation.

    Nodes are numbered vertices first, then ``d-1`` nodes per edge
    (walked from the smaller to the larger vertex id), then element
    interiors.  ``element_nodes[t]`` lists the global ids in the
    canonical local node order of :func:`reference.lagrange_nodes`.
    """

    degree: int
    element_nodes: np.ndarray
    n_nodes: int
    n_vertices: int
    n_edges: int


def build_lattice(mesh: AffineMesh, degree: int) -> GlobalLattice:
    d = degree
    V, E, T = mesh.n_vertices, len(mesh.edges), mesh.n_triangles
    per_edge = d - 1
    per_int = (d - 1) * (d - 2) // 2
    n_loc = (d + 1) * (d + 2) // 2
    element_nodes = np.empty((T, n_loc), dtype=int)
    element_nodes[:, :3] = mesh.triangles
    for t in range(T):
        tri = mesh.triangles[t]
        col = 3
        for le, (a, b) in enumerate(REF_EDGES):
            e = mesh.tri_edges[t, le]
            slot = V + e * per_edge
            ids = np.arange(slot, slot + per_edge)
            if tri[a] > tri[b]:
                ids = ids[::-1]
            element_nodes[t, col:col + per_edge] = ids
            col += per_edge
        slot = V + E * per_edge + t * per_int
        element_nodes[t, col:] = np.arange(slot, slot + per_int)
    return GlobalLattice(d, element_nodes, V + E * per_edge + T * per_int, V, E)


# ---------------------------------------------------------------------------
# element maps and curved meshes
# ---------------------------------------------------------------------------

class ElementMap:
    """Polynomial map from the reference triangle to one curved element."""

    def __init__(self, degree: int, coords: np.ndarray):
        self.degree = degree
        self.coords = np.asarray(coords, dtype=float)
        self._basis = lagrange_basis(degree)

    def value(self, ref_xy):
        vals, _ = self._basis.eval(ref_xy)
        return vals @ self.coords

    def jacobian(self, ref_xy):
        _, grads = self._basis.eval(ref_xy)
        return np.einsum("mid,ix->mxd", grads, self.coords)

    def jacobian_det(self, ref_xy):
        J = self.jacobian(ref_xy)
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]

    def invert(self, xy, tol: float = 1e-12, maxit: int = 50):
        """Reference preimages by Newton iteration from the barycenter."""
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        ref = np.full_like(xy, 1.0 / 3.0)
        for _ in range(maxit):
            res = self.value(ref) - xy
            if np.max(np.abs(res)) < tol:
                return ref
            J = self.jacobian(ref)
            det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            dx = (J[:, 1, 1] * res[:, 0] - J[:, 0, 1] * res[:, 1]) / det
            dy = (-J[:, 1, 0] * res[:, 0] + J[:, 0, 0] * res[:, 1]) / det
            ref[:, 0] -= dx
            ref[:, 1] -= dy
        raise MapInversionError(
            f"element map inversion did not reach {tol:.1e} in {maxit} iterations"
        )


@dataclass(frozen=True)
class ElementGeometry:
    """Classification and geometric nodes of one curved element."""

    epsilon: tuple
    classification: str
    order: int
    geometric_nodes: np.ndarray
    vertex_ids: tuple


MESH_BUILD_EXPONENT_OFFSET = 2  # node placement always uses exponent r + 2


class CurvedMesh:
    """Order-r curved mesh: affine skeleton plus elevated geometric nodes."""

    def __init__(self, affine, boundary, order, node_coords, lattice):
        self.affine = affine
        self.boundary = boundary
        self.order = order
        self.node_coords = node_coords
        self.lattice = lattice
        self.element_nodes = lattice.element_nodes
        self.eps = affine.element_eps()
        self.is_internal = self.eps.sum(axis=1) <= 1

    @property
    def h(self) -> float:
        return self.affine.h

    @property
    def n_elements(self) -> int:
        return self.affine.n_triangles

    @cached_property
    def boundary_edges(self) -> list[tuple[int, int]]:
        """Boundary edges lying on the curve (both endpoints flagged)."""
        flags = self.affine.boundary_vertex
        out = []
        for t, le in self.affine.boundary_edges:
            a, b = REF_EDGES[le]
            tri = self.affine.triangles[t]
            if flags[tri[a]] and flags[tri[b]]:
                out.append((t, le))
        return out

    def element_coords(self, t: int) -> np.ndarray:
        return self.node_coords[self.element_nodes[t]]

    def element_map(self, t: int) -> ElementMap:
        return ElementMap(self.order, self.element_coords(t))

    def affine_map(self, t: int) -> ElementMap:
        return ElementMap(1, self.affine.vertices[self.affine.triangles[t]])

    def element(self, t: int) -> ElementGeometry:
        return ElementGeometry(
            epsilon=tuple(bool(e) for e in self.eps[t]),
            classification="internal" if self.is_internal[t] else "non_internal",
            order=self.order,
            geometric_nodes=self.element_coords(t),
            vertex_ids=tuple(int(v) for v in self.affine.triangles[t]),
        )


def build_curved_mesh(affine: AffineMesh, boundary: SmoothBoundary, r: int) -> CurvedMesh:
    """Elevate an affine mesh to geometric order ``r``.

    Geometric nodes are the exact-map images of the P^r lattice with
    exponent ``r + 2``: vertices stay, interior-edge nodes stay affine,
    boundary-edge nodes are projected onto the curve, and interior nodes
    of non-internal elements are warped.  Cross-element agreement and
    Jacobian positivity are verified before the mesh is returned.
    """
    if not 1 <= r <= 3:
        raise MeshError(f"geometric order must be in 1..3, got {r}")
    _validate_affine(affine, boundary)
    lattice = build_lattice(affine, r)
    coords = np.empty((lattice.n_nodes, 2))
    coords[: affine.n_vertices] = affine.vertices
    flags = affine.boundary_vertex
    per_edge = r - 1
    if per_edge:
        t = np.arange(1, r) / r
        for e, (ga, gb) in enumerate(affine.edges):
            pts = np.outer(1.0 - t, affine.vertices[ga]) + np.outer(t, affine.vertices[gb])
            if flags[ga] and flags[gb]:
                pts = boundary.project(pts)
            coords[affine.n_vertices + e * per_edge: affine.n_vertices + (e + 1) * per_edge] = pts

    s = r + MESH_BUILD_EXPONENT_OFFSET
    ref_nodes = lagrange_nodes_xy(r)
    n_corner_edge = 3 + 3 * per_edge
    eps = affine.element_eps()
    is_internal = eps.sum(axis=1) <= 1
    mesh_h = affine.h
    for t_id in range(affine.n_triangles):
        local_ids = lattice.element_nodes[t_id]
        tri_verts = affine.vertices[affine.triangles[t_id]]

        def base(p, tv=tri_verts):
            p = np.atleast_2d(p)
            return tv[0] + p @ np.array([tv[1] - tv[0], tv[2] - tv[0]])

        if is_internal[t_id]:
            candidate = base(ref_nodes)
        else:
            try:
                candidate = warped_map(ref_nodes, eps[t_id], base, boundary, s)
            except GeometryError as exc:
                raise MeshError(
                    f"element {t_id}: anchor left the tubular neighborhood "
                    f"(mesh too coarse): {exc}"
                ) from exc
        # interior nodes are element-private; edge/vertex slots must agree
        # with the symmetric global construction
        mismatch = np.abs(coords[local_ids[:n_corner_edge]] - candidate[:n_corner_edge])
        if mismatch.size and mismatch.max() > CONTINUITY_TOL * max(1.0, mesh_h):
            raise MeshError(
                f"element {t_id}: geometric nodes disagree across a shared edge "
                f"by {mismatch.max():.3e}"
            )
        coords[local_ids[n_corner_edge:]] = candidate[n_corner_edge:]

    mesh = CurvedMesh(affine, boundary, r, coords, lattice)
    _validate_curved(mesh)
    return mesh


def _validate_curved(mesh: CurvedMesh) -> None:
    boundary = mesh.boundary
    for t, le in mesh.boundary_edges:
        ids = _edge_local_slots(mesh.order, le)
        pts = mesh.element_coords(t)[ids]
        d = np.abs(boundary.signed_distance(pts))
        if d.max() > EDGE_NODE_TOL:
            raise MeshError(
                f"boundary-edge geometric node at distance {d.max():.3e} from the curve"
            )
    rule = triangle_rule(2 * mesh.order + 2)
    for t in np.nonzero(~mesh.is_internal)[0]:
        det = mesh.element_map(int(t)).jacobian_det(rule.points)
        if det.min() <= 0.0:
            raise MeshError(f"non-positive geometric Jacobian in element {int(t)}")


def _edge_local_slots(degree: int, local_edge: int) -> np.ndarray:
    """Local node indices along a local edge, endpoints included, walked a->b."""
    a, b = REF_EDGES[local_edge]
    inner = 3 + local_edge * (degree - 1) + np.arange(degree - 1)
    return np.concatenate([[a], inner, [b]]) if degree > 1 else np.array([a, b])


def edge_reference_points(local_edge: int, t: np.ndarray) -> np.ndarray:
    """Reference coordinates along a local edge for parameters ``t`` in [0, 1]."""
    a, b = REF_EDGES[local_edge]
    va, vb = REF_VERTICES[a], REF_VERTICES[b]
    t = np.asarray(t, dtype=float)
    return np.outer(1.0 - t, va) + np.outer(t, vb)


def edge_reference_direction(local_edge: int) -> np.ndarray:
    a, b = REF_EDGES[local_edge]
    return REF_VERTICES[b] - REF_VERTICES[a]


# ---------------------------------------------------------------------------
# plain-text dump / ingest
# ---------------------------------------------------------------------------

def dump_mesh(mesh: CurvedMesh, path) -> None:
    """Write a curved mesh in the plain-text exchange format.

    Layout: header ``order r nv NV nt NT``; NV node lines ``x y`` (17
    significant digits); NT element lines with (r+1)(r+2)/2 node indices
    in canonical local order (vertices first); then ``nb NB`` and NB
    boundary edge lines ``triangle local_edge``.
    """
    lines = [f"order {mesh.order} nv {len(mesh.node_coords)} nt {mesh.n_elements}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.node_coords]
    lines += [" ".join(str(i) for i in row) for row in mesh.element_nodes]
    lines.append(f"nb {len(mesh.boundary_edges)}")
    lines += [f"{t} {le}" for t, le in mesh.boundary_edges]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path, boundary: SmoothBoundary) -> CurvedMesh:
    """Read a curved mesh written by :func:`dump_mesh`.

    Vertex boundary flags are recovered from the signed distance; the
    loaded mesh passes the same validation as a freshly built one.
    """
    with open(path) as fh:
        tokens = fh.read().split()
    pos = 0

    def expect(word):
        nonlocal pos
        if tokens[pos] != word:
            raise MeshError(f"malformed mesh file: expected {word!r} at token {pos}")
        pos += 1
        val = int(tokens[pos])
        pos += 1
        return val

    r = expect("order")
    nv = expect("nv")
    nt = expect("nt")
    coords = np.array(tokens[pos: pos + 2 * nv], dtype=float).reshape(nv, 2)
    pos += 2 * nv
    n_loc = (r + 1) * (r + 2) // 2
    element_nodes = np.array(tokens[pos: pos + n_loc * nt], dtype=int).reshape(nt, n_loc)
    pos += n_loc * nt
    nb = expect("nb")
    bedges = np.array(tokens[pos: pos + 2 * nb], dtype=int).reshape(nb, 2)

    n_vert = int(element_nodes[:, :3].max()) + 1
    vertices = coords[:n_vert]
    flags = np.abs(boundary.signed_distance(vertices)) < EDGE_NODE_TOL
    affine = AffineMesh(vertices, element_nodes[:, :3], flags)
    listed = sorted(tuple(row) for row in bedges)
    derived = sorted(affine.boundary_edges)
    if listed != derived:
        raise MeshError("boundary edge list does not match mesh topology")
    lattice = GlobalLattice(r, element_nodes, nv, n_vert, len(affine.edges))
    mesh = CurvedMesh(affine, boundary, r, coords, lattice)
    _validate_curved(mesh)
    return mesh
