import numpy as np
import pytest

from ventcelfem import GeometryError, unit_disk


class TestProjection:
    def test_radial_projection(self, disk):
        assert np.allclose(disk.project([2.0, 0.0]), [1.0, 0.0])

    def test_projection_scales(self, disk):
        assert np.allclose(disk.project([0.3, 0.4]), [0.6, 0.8], atol=1e-15)

    def test_center_is_an_error(self, disk):
        with pytest.raises(GeometryError, match="-1"):
            disk.project([0.0, 0.0])

    def test_idempotent(self, disk):
        rng = np.random.default_rng(0)
        theta = 2 * np.pi * rng.random(200)
        radius = 0.6 + 0.8 * rng.random(200)
        pts = radius[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
        once = disk.project(pts)
        twice = disk.project(once)
        assert np.abs(once - twice).max() < 1e-12

    def test_projection_distance_matches_signed_distance(self, disk):
        pts = np.array([[1.2, 0.0], [0.5, 0.5], [0.0, -1.4]])
        proj = disk.project(pts)
        moved = np.linalg.norm(proj - pts, axis=1)
        assert np.abs(moved - np.abs(disk.signed_distance(pts))).max() < 1e-12

    def test_projection_formula(self, disk):
        # b(x) = x - d(x) grad d(x) inside the tubular neighborhood
        rng = np.random.default_rng(1)
        theta = 2 * np.pi * rng.random(100)
        radius = 1.0 + 0.4 * (rng.random(100) - 0.5)
        pts = radius[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
        d = disk.signed_distance(pts)
        n = disk.normal(pts)
        assert np.abs(disk.project(pts) - (pts - d[:, None] * n)).max() < 1e-12


class TestSignedDistance:
    def test_inside(self, disk):
        assert abs(disk.signed_distance([0.5, 0.0]) + 0.5) < 1e-15

    def test_on_boundary(self, disk):
        assert abs(disk.signed_distance([1.0, 0.0])) < 1e-15

    def test_outside(self, disk):
        assert abs(disk.signed_distance([3.0, 4.0]) - 4.0) < 1e-15

    def test_boundary_points(self, disk):
        theta = np.linspace(0, 2 * np.pi, 37)
        pts = np.column_stack([np.cos(theta), np.sin(theta)])
        assert np.abs(disk.signed_distance(pts)).max() < 1e-12
        assert np.abs(np.linalg.norm(disk.normal(pts), axis=1) - 1).max() < 1e-12


def test_gradient_direction_consistency(disk):
    # central differences of d against the analytic direction (x - b)/d
    rng = np.random.default_rng(2)
    theta = 2 * np.pi * rng.random(1000)
    radius = 1.0 + 0.45 * (2 * rng.random(1000) - 1.0)
    pts = radius[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    step = 1e-6
    grad = np.empty_like(pts)
    for j, e in enumerate(np.eye(2)):
        grad[:, j] = (disk.signed_distance(pts + step * e)
                      - disk.signed_distance(pts - step * e)) / (2 * step)
    d = disk.signed_distance(pts)
    direction = (pts - disk.project(pts)) / d[:, None]
    assert np.abs(grad - direction).max() < 1e-6


def test_weingarten_on_the_circle(disk):
    theta = np.linspace(0.1, 2 * np.pi, 25)
    p = np.column_stack([np.cos(theta), np.sin(theta)])
    tangent = np.column_stack([-np.sin(theta), np.cos(theta)])
    W = disk.weingarten(p)
    # tangent direction scaled by curvature 1, normal annihilated
    assert np.abs(np.einsum("qij,qj->qi", W, tangent) - tangent).max() < 1e-10
    assert np.abs(np.einsum("qij,qj->qi", W, p)).max() < 1e-10


def test_projection_jacobian_analytic_vs_fd(disk):
    pts = np.array([[1.1, 0.2], [0.7, -0.4], [-0.9, 0.35]])
    analytic = disk.projection_jacobian(pts)
    step = 1e-7
    for j, e in enumerate(np.eye(2)):
        fd = (disk.project_raw(pts + step * e) - disk.project_raw(pts - step * e)) / (2 * step)
        assert np.abs(analytic[:, :, j] - fd).max() < 1e-6


def test_invalid_tubular_width():
    with pytest.raises(GeometryError):
        unit_disk(tubular_width=1.5)
