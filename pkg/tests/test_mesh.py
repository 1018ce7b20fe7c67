import numpy as np
import pytest

from ventcelfem import (
    AffineMesh,
    MeshError,
    boundary_anchor,
    boundary_weight,
    build_curved_mesh,
    dump_mesh,
    exact_map,
    generate_disk_mesh,
    load_mesh,
)
from ventcelfem.analysis import eoc_fit
from ventcelfem.mesh import (
    _edge_local_slots,
    edge_reference_points,
    repair_boundary_triangles,
)
from ventcelfem.reference import lagrange_basis, segment_rule


class TestDiskGenerator:
    def test_boundary_vertices_on_circle(self, cache):
        mesh = cache.affine(0)
        pts = mesh.vertices[mesh.boundary_vertex]
        assert np.abs(np.linalg.norm(pts, axis=1) - 1.0).max() < 1e-12

    def test_refinement_halves_h(self, cache):
        hs = [cache.affine(level).h for level in range(4)]
        for coarse, fine in zip(hs, hs[1:]):
            assert 0.45 <= fine / coarse <= 0.55

    @pytest.mark.parametrize("level", [0, 1, 2])
    def test_euler_formula(self, cache, level):
        mesh = cache.affine(level)
        assert mesh.n_vertices - len(mesh.edges) + mesh.n_triangles == 1

    def test_quasi_uniformity(self, cache):
        for level in range(4):
            d = cache.affine(level).element_diameters
            assert d.max() / d.min() <= 4.0

    def test_no_triangle_with_three_boundary_vertices(self, cache):
        for level in range(3):
            assert not cache.affine(level).triangles_on_boundary().any()

    def test_negative_level_rejected(self, disk):
        with pytest.raises(MeshError):
            generate_disk_mesh(disk, -1)

    def test_orientation(self, cache):
        mesh = cache.affine(1)
        v = mesh.vertices[mesh.triangles]
        a, b = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
        det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        assert det.min() > 0.0


class TestBoundaryWeight:
    def test_barycenter(self):
        assert abs(boundary_weight([1 / 3, 1 / 3, 1 / 3], [0, 1, 1]) - 2 / 3) < 1e-15

    def test_vanishes_at_unflagged_vertex(self):
        assert boundary_weight([1, 0, 0], [0, 1, 1]) == 0.0

    def test_one_on_flagged_edge(self):
        for t in (0.0, 0.3, 1.0):
            assert abs(boundary_weight([0, 1 - t, t], [0, 1, 1]) - 1.0) < 1e-15

    def test_rejects_bad_barycentrics(self):
        with pytest.raises(MeshError):
            boundary_weight([0.5, 0.2, 0.2], [0, 1, 1])


class TestBoundaryAnchor:
    def test_edge_midpoint(self):
        # flagged vertices are v2=(1,0), v3=(0,1)
        anchor = boundary_anchor([0.0, 0.5, 0.5], [0, 1, 1])
        assert np.allclose(anchor, [0.5, 0.5])

    def test_barycenter_normalizes(self):
        anchor = boundary_anchor([1 / 3, 1 / 3, 1 / 3], [0, 1, 1])
        assert np.allclose(anchor, [0.5, 0.5])

    def test_singular_at_internal_face(self):
        with pytest.raises(MeshError):
            boundary_anchor([1.0, 0.0, 0.0], [0, 1, 1])


class TestExactMap:
    def setup_method(self):
        # one coarse element of the disk: two vertices on the circle
        self.verts = np.array([[0.0, 0.0], [1.0, 0.0],
                               [np.cos(np.pi / 4), np.sin(np.pi / 4)]])
        self.eps = np.array([False, True, True])

    def test_boundary_edge_lands_on_circle(self, disk):
        # reference edge v2->v3 has full boundary weight; images are the
        # radial projections of the chord points
        t = np.linspace(0.0, 1.0, 9)
        ref = np.column_stack([1.0 - t, t])
        got = exact_map(self.verts, self.eps, disk, ref, s=3)
        assert np.abs(np.linalg.norm(got, axis=1) - 1.0).max() < 1e-12
        chord = (1 - t)[:, None] * self.verts[1] + t[:, None] * self.verts[2]
        assert np.abs(got - disk.project(chord)).max() < 1e-12

    def test_internal_element_is_affine(self, disk):
        ref = np.array([[0.2, 0.3], [0.5, 0.1]])
        got = exact_map(self.verts, [False, True, False], disk, ref, s=3)
        affine = self.verts[0] + ref @ np.array(
            [self.verts[1] - self.verts[0], self.verts[2] - self.verts[0]])
        assert np.abs(got - affine).max() == 0.0

    def test_anchor_outside_projection_domain_is_an_error(self, disk):
        # a chord through the disk center puts the anchor where the
        # projection is undefined: the mesh is too coarse
        verts = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, -0.8]])
        from ventcelfem import GeometryError

        with pytest.raises(GeometryError):
            # barycentrics (0.3, 0.3, 0.4): the anchor is the chord
            # midpoint, which is the disk center
            exact_map(verts, [True, True, False], disk, np.array([[0.3, 0.4]]), s=3)

    def test_displacement_vanishes_toward_internal_face(self, disk):
        s = 3
        sagitta = 1.0 - np.cos(np.pi / 8)
        for lam in (1e-2, 1e-4, 1e-6):
            ref = np.array([[lam / 2, lam / 2]])
            got = exact_map(self.verts, self.eps, disk, ref, s=s)
            affine = self.verts[0] + ref @ np.array(
                [self.verts[1] - self.verts[0], self.verts[2] - self.verts[0]])
            assert np.abs(got - affine).max() <= lam**s * sagitta + 1e-15


class TestCurvedMesh:
    def test_order1_equals_affine(self, cache):
        mesh = cache.curved(1, 1)
        assert np.array_equal(mesh.element_nodes, mesh.affine.triangles)
        assert np.abs(mesh.node_coords - mesh.affine.vertices).max() == 0.0

    def test_quadratic_boundary_midpoints_on_circle(self, cache):
        mesh = cache.curved(1, 2)
        for t, le in mesh.boundary_edges:
            nodes = mesh.element_coords(t)[_edge_local_slots(2, le)]
            assert np.abs(np.linalg.norm(nodes, axis=1) - 1.0).max() < 1e-10

    def test_cubic_internal_elements_affine(self, cache):
        mesh = cache.curved(1, 3)
        basis = lagrange_basis(3)
        for t in np.nonzero(mesh.is_internal)[0][:10]:
            tri = mesh.affine.vertices[mesh.affine.triangles[t]]
            affine = tri[0] + basis.nodes_xy @ np.array([tri[1] - tri[0], tri[2] - tri[0]])
            assert np.abs(mesh.element_coords(int(t)) - affine).max() < 1e-14
            assert len(mesh.element_coords(int(t))) == 10

    @pytest.mark.parametrize("r", [1, 2, 3])
    def test_boundary_edge_nodes_on_circle(self, cache, r):
        mesh = cache.curved(2, r)
        for t, le in mesh.boundary_edges:
            nodes = mesh.element_coords(t)[_edge_local_slots(r, le)]
            assert np.abs(np.linalg.norm(nodes, axis=1) - 1.0).max() < 1e-10

    @pytest.mark.parametrize("r", [2, 3])
    def test_shared_edge_nodes_agree(self, cache, r):
        mesh = cache.curved(1, r)
        # evaluate each element map along every shared edge; neighbors
        # must produce the same physical points
        t_params = np.linspace(0, 1, 7)
        seen = {}
        for t in range(mesh.n_elements):
            emap = mesh.element_map(t)
            tri = mesh.affine.triangles[t]
            for le, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                pts = emap.value(edge_reference_points(le, t_params))
                pts = pts[np.argsort(pts[:, 0] * 7.3 + pts[:, 1])]
                if key in seen:
                    assert np.abs(seen[key] - pts).max() < 1e-12
                else:
                    seen[key] = pts

    def test_element_record(self, cache):
        mesh = cache.curved(0, 2)
        t = int(np.nonzero(~mesh.is_internal)[0][0])
        elem = mesh.element(t)
        assert elem.classification == "non_internal"
        assert sum(elem.epsilon) >= 2
        assert elem.order == 2
        t = int(np.nonzero(mesh.is_internal)[0][0])
        assert mesh.element(t).classification == "internal"
        assert sum(mesh.element(t).epsilon) <= 1

    @pytest.mark.parametrize("r", [1, 2, 3])
    def test_boundary_distance_slope(self, cache, r):
        # distance of the order-r mesh boundary to the circle decays at
        # rate r+1 at least; symmetric quadratic edges superconverge to 4
        rule = segment_rule(8)
        hs, dists = [], []
        for level in range(4):
            mesh = cache.curved(level, r)
            worst = 0.0
            for t, le in mesh.boundary_edges:
                pts = mesh.element_map(t).value(edge_reference_points(le, rule.points))
                worst = max(worst, np.abs(np.linalg.norm(pts, axis=1) - 1.0).max())
            hs.append(mesh.h)
            dists.append(worst)
        slope, _ = eoc_fit(hs, dists)
        assert slope >= (r + 1) - 0.4
        expected = 4.0 if r >= 2 else r + 1.0
        assert abs(slope - expected) <= 0.4

    def test_invalid_order(self, cache, disk):
        with pytest.raises(MeshError):
            build_curved_mesh(cache.affine(0), disk, 4)


class TestRepair:
    def test_rejects_all_boundary_triangle(self):
        verts = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -0.2]])
        tris = np.array([[0, 1, 2], [0, 2, 3]])
        flags = np.array([True, True, True, False])
        with pytest.raises(MeshError):
            AffineMesh(verts, tris, flags)

    def test_edge_flip_repair(self):
        verts = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -0.2]])
        tris = np.array([[0, 1, 2], [0, 2, 3]])
        flags = np.array([True, True, True, False])
        repaired = repair_boundary_triangles(verts, tris, flags)
        mesh = AffineMesh(verts, repaired, flags)
        assert not mesh.triangles_on_boundary().any()
        assert mesh.n_triangles == 2


class TestDumpLoad:
    @pytest.mark.parametrize("r", [1, 2, 3])
    def test_roundtrip(self, cache, disk, tmp_path, r):
        mesh = cache.curved(1, r)
        path = tmp_path / f"mesh_r{r}.txt"
        dump_mesh(mesh, path)
        loaded = load_mesh(path, disk)
        assert loaded.order == r
        assert np.abs(loaded.node_coords - mesh.node_coords).max() == 0.0
        assert np.array_equal(loaded.element_nodes, mesh.element_nodes)
        assert sorted(loaded.boundary_edges) == sorted(mesh.boundary_edges)

    def test_full_precision(self, cache, tmp_path):
        mesh = cache.curved(0, 2)
        path = tmp_path / "mesh.txt"
        dump_mesh(mesh, path)
        # a 17-significant-digit dump reproduces doubles exactly
        text = path.read_text().splitlines()
        x, y = map(float, text[1].split())
        assert x == mesh.node_coords[0, 0] and y == mesh.node_coords[0, 1]

    def test_malformed_header(self, tmp_path, disk):
        path = tmp_path / "bad.txt"
        path.write_text("orderx 2 nv 3 nt 1\n")
        with pytest.raises(MeshError):
            load_mesh(path, disk)
