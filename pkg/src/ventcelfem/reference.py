"""Reference triangle tools: Lagrange bases and Gauss quadrature.

The reference triangle ``That`` has vertices (0,0), (1,0), (0,1).
Barycentric coordinates are ordered ``(l1, l2, l3)`` with

    l1 = 1 - x - y,   l2 = x,   l3 = y,

so vertex ``i`` carries coordinate ``l_{i+1}``.  Lagrange nodes of degree
``k`` live on the uniform principal lattice and are numbered vertices
first, then edge nodes (edge 0: v1->v2, edge 1: v2->v3, edge 2: v3->v1,
each walked from its first to its second vertex), then interior nodes in
lexicographic (i, j) order.  This ordering is the one used by the mesh
text format and by the global degree-of-freedom numbering.

Triangle quadrature is built by collapsing a tensor Gauss-Legendre rule
onto the triangle (Duffy transform), which yields positive weights and
degree-exactness for any requested degree up to ``MAX_QUAD_DEGREE``.
Segment rules are plain Gauss-Legendre on [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

MAX_DEGREE = 4
MAX_QUAD_DEGREE = 20

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
#: local edges as (first vertex, second vertex) pairs
REF_EDGES = ((0, 1), (1, 2), (2, 0))
#: gradients of the three barycentric coordinates (constant on That)
BARY_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


class UnsupportedDegreeError(ValueError):
    """Raised for polynomial or quadrature degrees outside the shipped range."""


def barycentric(points: np.ndarray) -> np.ndarray:
    """Barycentric triples (l1, l2, l3) for reference points of shape (..., 2)."""
    points = np.asarray(points, dtype=float)
    l1 = 1.0 - points[..., 0] - points[..., 1]
    return np.stack([l1, points[..., 0], points[..., 1]], axis=-1)


def _lattice_multi_indices(k: int) -> list[tuple[int, int]]:
    """Lattice (i, j) indices, node at (i/k, j/k), in canonical order."""
    verts = [(0, 0), (k, 0), (0, k)]
    edges = []
    for a, b in REF_EDGES:
        va, vb = verts[a], verts[b]
        for s in range(1, k):
            edges.append(
                (va[0] + (vb[0] - va[0]) * s // k, va[1] + (vb[1] - va[1]) * s // k)
            )
    interior = [
        (i, j)
        for i in range(1, k)
        for j in range(1, k)
        if i + j <= k - 1
    ]
    interior.sort()
    return verts + edges + interior


def lagrange_nodes(k: int) -> np.ndarray:
    """Barycentric triples of the P^k Lagrange nodes on That.

    Parameters
    ----------
    k : int
        Polynomial degree, 1 <= k <= 4.

    Returns
    -------
    numpy.ndarray
        Array of shape ((k+1)(k+2)/2, 3), rows ordered vertices first,
        then edge nodes, then interior nodes.
    """
    if not 1 <= k <= MAX_DEGREE:
        raise UnsupportedDegreeError(
            f"Lagrange degree {k} unsupported; shipped range is 1..{MAX_DEGREE}"
        )
    idx = _lattice_multi_indices(k)
    xy = np.array([(i / k, j / k) for i, j in idx])
    return barycentric(xy)


def lagrange_nodes_xy(k: int) -> np.ndarray:
    """Reference (x, y) coordinates of the P^k Lagrange nodes."""
    nodes = lagrange_nodes(k)
    return nodes[:, 1:].copy()


@lru_cache(maxsize=None)
def _basis_coefficients(k: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Exact monomial coefficients of the P^k Lagrange basis.

    The Vandermonde matrix on the lattice is rational, so it is inverted
    exactly with sympy and converted to floats once.
    """
    exps = [(a, b) for d in range(k + 1) for a in range(d, -1, -1) for b in [d - a]]
    idx = _lattice_multi_indices(k)
    n = len(exps)
    vand = sp.zeros(n, n)
    for p, (i, j) in enumerate(idx):
        xr, yr = sp.Rational(i, k), sp.Rational(j, k)
        for q, (a, b) in enumerate(exps):
            vand[p, q] = xr**a * yr**b
    coeff = np.array(vand.inv(), dtype=float)
    return coeff, exps


class LagrangeBasis:
    """Nodal P^k Lagrange basis on the reference triangle.

    Attributes
    ----------
    degree : int
        Polynomial degree k.
    nodes : numpy.ndarray
        Barycentric triples of the nodes, canonical order.
    n : int
        Number of basis functions, (k+1)(k+2)/2.
    """

    def __init__(self, degree: int):
        self.degree = degree
        self.nodes = lagrange_nodes(degree)
        self.nodes_xy = self.nodes[:, 1:].copy()
        self.n = len(self.nodes)
        self._coeff, self._exps = _basis_coefficients(degree)

    def eval(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Values and gradients of all basis functions.

        Parameters
        ----------
        points : numpy.ndarray
            Reference coordinates, shape (m, 2).

        Returns
        -------
        values : numpy.ndarray, shape (m, n)
        gradients : numpy.ndarray, shape (m, n, 2)
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        m, n = len(pts), self.n
        mono = np.empty((m, n))
        dmono = np.empty((m, n, 2))
        for q, (a, b) in enumerate(self._exps):
            xa = x**a
            yb = y**b
            mono[:, q] = xa * yb
            dmono[:, q, 0] = a * x ** (a - 1) * yb if a > 0 else 0.0
            dmono[:, q, 1] = b * xa * y ** (b - 1) if b > 0 else 0.0
        values = mono @ self._coeff
        gradients = np.einsum("mqd,qi->mid", dmono, self._coeff)
        return values, gradients


@lru_cache(maxsize=None)
def lagrange_basis(k: int) -> LagrangeBasis:
    """Shared, immutable LagrangeBasis instance for degree k."""
    return LagrangeBasis(k)


@dataclass(frozen=True)
class QuadratureRule:
    """Positive-weight quadrature rule on That or on the segment [0, 1].

    ``points`` has shape (m, 2) for the triangle and (m,) for the
    segment; ``weights`` sums to the reference measure (1/2 or 1).
    """

    domain: str
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int


def _check_quad_degree(degree: int, domain: str) -> None:
    if degree < 0 or degree > MAX_QUAD_DEGREE:
        raise UnsupportedDegreeError(
            f"{domain} quadrature of degree {degree} unavailable; "
            f"maximum shipped degree is {MAX_QUAD_DEGREE}"
        )


@lru_cache(maxsize=None)
def segment_rule(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] exact for polynomials of the given degree."""
    _check_quad_degree(degree, "segment")
    n = max(1, (degree + 2) // 2)
    t, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule("segment", 0.5 * (t + 1.0), 0.5 * w, 2 * n - 1)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Collapsed tensor Gauss rule on That exact for the given total degree.

    A degree-d integrand pulled back through x = u, y = v(1-u) has degree
    d+1 in u (including the 1-u measure factor) and d in v, so n Gauss
    points per direction with 2n-1 >= d+1 are exact.
    """
    _check_quad_degree(degree, "triangle")
    n = max(1, (degree + 3) // 2)
    t, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (t + 1.0)
    wu = 0.5 * w
    uu, vv = np.meshgrid(u, u, indexing="ij")
    ww = np.outer(wu, wu) * (1.0 - uu)
    pts = np.column_stack([uu.ravel(), (vv * (1.0 - uu)).ravel()])
    return QuadratureRule("triangle", pts, ww.ravel(), 2 * n - 2)


def quadrature(domain: str, degree: int) -> QuadratureRule:
    """Quadrature rule on ``'triangle'`` or ``'segment'`` for the given degree."""
    if domain == "triangle":
        return triangle_rule(degree)
    if domain == "segment":
        return segment_rule(degree)
    raise ValueError(f"unknown quadrature domain {domain!r}")
