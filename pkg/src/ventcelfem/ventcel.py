"""Discrete Ventcel problem: DOF management, assembly, and the SPD solve.

The bilinear form couples a volume diffusion/reaction part with boundary
terms involving the Laplace-Beltrami operator; on a plane curve the
tangential gradient is the arc-length derivative, so boundary stiffness
reduces to 1D differentiation along each curved edge.  The right hand
side pulls the data back from the physical domain through the configured
lift, weighting with the volume and boundary measure ratios so that the
discrete linear form agrees with the exact one applied to lifted test
functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla
import sympy as sp

from .geometry import SmoothBoundary
from .lift import EdgeLift, LiftConfig, LiftMap, edge_lift
from .mesh import AffineMesh, CurvedMesh, build_lattice, edge_reference_direction, edge_reference_points
from .reference import lagrange_basis, segment_rule, triangle_rule

DIRECT_SOLVE_LIMIT = 200_000


class SolverError(RuntimeError):
    """Raised when the linear solve misses its residual target."""


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients and data of the Ventcel problem.

    ``f`` is the volume source on the physical domain, ``g`` the
    boundary source on the physical boundary; both are vectorized over
    points of shape (..., 2).
    """

    kappa: float
    alpha: float
    beta: float
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be strictly positive")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")


@dataclass(frozen=True)
class ManufacturedSolution:
    """Analytic solution bundle with the derivatives needed downstream."""

    name: str
    u: Callable[[np.ndarray], np.ndarray]
    grad_u: Callable[[np.ndarray], np.ndarray]
    laplacian_u: Callable[[np.ndarray], np.ndarray]
    hessian_u: Callable[[np.ndarray], np.ndarray]


def _scalar_field(fn):
    def call(p):
        p = np.asarray(p, dtype=float)
        out = np.asarray(fn(p[..., 0], p[..., 1]), dtype=float)
        if out.shape != p.shape[:-1]:
            out = np.broadcast_to(out, p.shape[:-1]).copy()
        return out

    return call


def manufactured_from_expression(name: str, expression) -> ManufacturedSolution:
    """Build a solution bundle from a symbolic expression in x and y."""
    x, y = sp.symbols("x y")
    u = sp.sympify(expression)
    ux, uy = sp.diff(u, x), sp.diff(u, y)
    uxx, uxy, uyy = sp.diff(ux, x), sp.diff(ux, y), sp.diff(uy, y)
    fns = {
        key: _scalar_field(sp.lambdify((x, y), expr, "numpy"))
        for key, expr in
        [("u", u), ("ux", ux), ("uy", uy), ("lap", uxx + uyy),
         ("uxx", uxx), ("uxy", uxy), ("uyy", uyy)]
    }

    def grad(p):
        return np.stack([fns["ux"](p), fns["uy"](p)], axis=-1)

    def hess(p):
        hxx, hxy, hyy = fns["uxx"](p), fns["uxy"](p), fns["uyy"](p)
        return np.stack(
            [np.stack([hxx, hxy], axis=-1), np.stack([hxy, hyy], axis=-1)], axis=-2
        )

    return ManufacturedSolution(name, fns["u"], grad, fns["lap"], hess)


_CASES = {
    "y_exp_x": "y*exp(x)",
    "one": "1",
    "linear": "2*x - y + 1",
}


def manufactured_case(name: str) -> ManufacturedSolution:
    """Named manufactured solution; 'y_exp_x' is the reproduction case."""
    try:
        return manufactured_from_expression(name, _CASES[name])
    except KeyError:
        raise KeyError(
            f"unknown manufactured case {name!r}; available: {sorted(_CASES)}"
        ) from None


def derive_manufactured(
    solution: ManufacturedSolution,
    kappa: float,
    alpha: float,
    beta: float,
    boundary: SmoothBoundary,
) -> ProblemSpec:
    """Source terms matching a manufactured solution.

    The volume source is ``-laplacian(u) + kappa u``.  The boundary
    source combines the surface Laplacian (written through the Hessian,
    the normal derivative and the curvature trace), the normal
    derivative, and the reaction term.
    """

    def f(p):
        return -solution.laplacian_u(p) + kappa * solution.u(p)

    def g(p):
        p = np.asarray(p, dtype=float)
        n = boundary.normal(p)
        gu = solution.grad_u(p)
        dn = np.einsum("...d,...d->...", gu, n)
        hess = solution.hessian_u(p)
        nng = np.einsum("...d,...de,...e->...", n, hess, n)
        curv = np.trace(boundary.weingarten(p), axis1=-2, axis2=-1)
        lap_gamma = solution.laplacian_u(p) - curv * dn - nng
        return -beta * lap_gamma + dn + alpha * solution.u(p)

    return ProblemSpec(kappa=kappa, alpha=alpha, beta=beta, f=f, g=g)


# ---------------------------------------------------------------------------
# degrees of freedom
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DofMap:
    """Global P^k DOF numbering over a conforming triangulation."""

    degree: int
    element_dofs: np.ndarray
    n_dofs: int
    n_vertices: int
    n_edges: int
    n_triangles: int


def build_dofmap(affine: AffineMesh, k: int) -> DofMap:
    lattice = build_lattice(affine, k)
    return DofMap(
        degree=k,
        element_dofs=lattice.element_nodes,
        n_dofs=lattice.n_nodes,
        n_vertices=affine.n_vertices,
        n_edges=len(affine.edges),
        n_triangles=affine.n_triangles,
    )


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _volume_tables(k: int, degree: int):
    rule = triangle_rule(degree)
    vals, grads = lagrange_basis(k).eval(rule.points)
    return rule, vals, grads


@lru_cache(maxsize=None)
def _edge_tables(k: int, local_edge: int, degree: int):
    rule = segment_rule(degree)
    ref = edge_reference_points(local_edge, rule.points)
    vals, grads = lagrange_basis(k).eval(ref)
    dt = grads @ edge_reference_direction(local_edge)
    return rule, vals, dt


def _affine_geometry(mesh: CurvedMesh, elements: np.ndarray):
    v = mesh.affine.vertices[mesh.affine.triangles[elements]]
    J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1] / det
    inv[:, 0, 1] = -J[:, 0, 1] / det
    inv[:, 1, 0] = -J[:, 1, 0] / det
    inv[:, 1, 1] = J[:, 0, 0] / det
    return v[:, 0], J, inv, det


def _curved_geometry(emap, pts):
    J = emap.jacobian(pts)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if det.min() <= 0.0:
        raise ValueError("non-positive element Jacobian during assembly")
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1] / det
    inv[:, 0, 1] = -J[:, 0, 1] / det
    inv[:, 1, 0] = -J[:, 1, 0] / det
    inv[:, 1, 1] = J[:, 0, 0] / det
    return J, inv, det


def _internal_element_matrices(mesh, k, kappa, degree, elements):
    rule, vals, grads = _volume_tables(k, degree)
    w = rule.weights
    _, _, inv, det = _affine_geometry(mesh, elements)
    metric = np.einsum("tdx,tex->tde", inv, inv)
    kref = np.einsum("q,qid,qje->deij", w, grads, grads)
    mref = np.einsum("q,qi,qj->ij", w, vals, vals)
    K = np.einsum("t,tde,deij->tij", det, metric, kref)
    if kappa:
        K = K + kappa * det[:, None, None] * mref
    return K


def _noninternal_element_matrix(mesh, t, k, kappa, degree):
    rule, vals, grads = _volume_tables(k, degree)
    w = rule.weights
    _, inv, det = _curved_geometry(mesh.element_map(t), rule.points)
    g = np.einsum("qdx,qid->qix", inv, grads)
    K = np.einsum("q,qix,qjx->ij", w * det, g, g)
    if kappa:
        K = K + kappa * np.einsum("q,qi,qj->ij", w * det, vals, vals)
    return K


def _boundary_edge_matrix(mesh, t, le, k, alpha, beta, degree):
    rule, vals, dt = _edge_tables(k, le, degree)
    emap = mesh.element_map(t)
    ref = edge_reference_points(le, rule.points)
    tangent = emap.jacobian(ref) @ edge_reference_direction(le)
    speed = np.linalg.norm(tangent, axis=-1)
    K = beta * np.einsum("q,qi,qj->ij", rule.weights / speed, dt, dt)
    K += alpha * np.einsum("q,qi,qj->ij", rule.weights * speed, vals, vals)
    return K


def assemble_matrix(
    mesh: CurvedMesh,
    k: int,
    kappa: float,
    alpha: float,
    beta: float,
    volume_degree: Optional[int] = None,
    boundary_degree: Optional[int] = None,
) -> sparse.csr_matrix:
    """Sparse symmetric Ventcel system matrix (lift-independent)."""
    r = mesh.order
    deg_v = 2 * k + 2 * r + 2 if volume_degree is None else volume_degree
    deg_b = 2 * k + 2 * r + 4 if boundary_degree is None else boundary_degree
    dofmap = build_dofmap(mesh.affine, k)
    dofs = dofmap.element_dofs
    rows, cols, data = [], [], []

    def scatter(element_ids, local):
        d = dofs[element_ids]
        rows.append(np.repeat(d, d.shape[-1], axis=-1).ravel())
        cols.append(np.tile(d, d.shape[-1]).ravel())
        data.append(np.asarray(local).ravel())

    internal = np.nonzero(mesh.is_internal)[0]
    if len(internal):
        scatter(internal, _internal_element_matrices(mesh, k, kappa, deg_v, internal))
    for t in np.nonzero(~mesh.is_internal)[0]:
        scatter(int(t), _noninternal_element_matrix(mesh, int(t), k, kappa, deg_v))
    for t, le in mesh.boundary_edges:
        scatter(t, _boundary_edge_matrix(mesh, t, le, k, alpha, beta, deg_b))

    n = dofmap.n_dofs
    mat = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return mat.tocsr()


def assemble_rhs(
    mesh: CurvedMesh,
    config: LiftConfig,
    problem: ProblemSpec,
    k: int,
    volume_degree: Optional[int] = None,
    boundary_degree: Optional[int] = None,
) -> np.ndarray:
    """Load vector with data pulled back through the configured lift."""
    r = mesh.order
    deg_v = 2 * k + 2 * r + 2 if volume_degree is None else volume_degree
    deg_b = 2 * k + 2 * r + 4 if boundary_degree is None else boundary_degree
    dofmap = build_dofmap(mesh.affine, k)
    dofs = dofmap.element_dofs
    b = np.zeros(dofmap.n_dofs)

    rule, vals, _ = _volume_tables(k, deg_v)
    w = rule.weights
    internal = np.nonzero(mesh.is_internal)[0]
    if len(internal):
        v0, J, _, det = _affine_geometry(mesh, internal)
        xq = v0[:, None, :] + np.einsum("tid,qd->tqi", J, rule.points)
        local = np.einsum("tq,q,qi,t->ti", problem.f(xq), w, vals, det)
        np.add.at(b, dofs[internal], local)
    for t in np.nonzero(~mesh.is_internal)[0]:
        t = int(t)
        _, _, det = _curved_geometry(mesh.element_map(t), rule.points)
        lm = LiftMap(mesh, t, config)
        lifted = lm.value_ref(rule.points)
        _, jac = lm.differential_ref(rule.points)
        np.add.at(b, dofs[t], np.einsum("q,qi->i", w * det * problem.f(lifted) * jac, vals))
    for t, le in mesh.boundary_edges:
        erule, evals, _ = _edge_tables(k, le, deg_b)
        data: EdgeLift = edge_lift(mesh, t, le, erule.points, config)
        weight = erule.weights * problem.g(data.lifted) * data.lifted_speed
        np.add.at(b, dofs[t], np.einsum("q,qi->i", weight, evals))
    return b


@dataclass
class DiscreteSystem:
    """Assembled sparse SPD system for one mesh and FE degree."""

    matrix: sparse.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    k: int


def assemble(
    mesh: CurvedMesh,
    config: LiftConfig,
    problem: ProblemSpec,
    k: int,
    volume_degree: Optional[int] = None,
    boundary_degree: Optional[int] = None,
) -> DiscreteSystem:
    """Assemble matrix and load vector of the discrete Ventcel problem."""
    if not 1 <= k <= 4:
        raise ValueError(f"FE degree must be in 1..4, got {k}")
    mat = assemble_matrix(
        mesh, k, problem.kappa, problem.alpha, problem.beta, volume_degree, boundary_degree
    )
    rhs = assemble_rhs(mesh, config, problem, k, volume_degree, boundary_degree)
    return DiscreteSystem(mat, rhs, build_dofmap(mesh.affine, k), k)


def solve(system: DiscreteSystem, rel_tol: float = 1e-12) -> np.ndarray:
    """Solve the SPD system to a relative residual below ``rel_tol``.

    Direct sparse factorization up to ``DIRECT_SOLVE_LIMIT`` unknowns
    (with iterative refinement), diagonally preconditioned conjugate
    gradients beyond.  Deterministic for a fixed system.
    """
    A = system.matrix
    b = system.rhs
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros_like(b)
    if A.shape[0] <= DIRECT_SOLVE_LIMIT:
        lu = spla.splu(A.tocsc())
        x = lu.solve(b)
        best, best_res = x, np.linalg.norm(A @ x - b)
        for _ in range(5):
            if best_res / norm_b <= rel_tol:
                break
            x = x + lu.solve(b - A @ x)
            res = np.linalg.norm(A @ x - b)
            if res >= best_res:
                break
            best, best_res = x, res
        x = best
    else:
        diag = A.diagonal()
        precond = spla.LinearOperator(A.shape, lambda v: v / diag)
        x, info = spla.cg(A, b, rtol=rel_tol * 0.1, atol=0.0, M=precond,
                          maxiter=20 * A.shape[0])
        if info != 0:
            raise SolverError(f"conjugate gradients stopped with status {info}")
    residual = np.linalg.norm(A @ x - b) / norm_b
    if residual > rel_tol:
        raise SolverError(
            f"linear solve missed tolerance: relative residual {residual:.3e} "
            f"> {rel_tol:.1e}"
        )
    return x


def dump_matrix(matrix: sparse.csr_matrix, path) -> None:
    """Debug dump in 0-based coordinate text format ``i j value``."""
    coo = matrix.tocoo()
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")


# ---------------------------------------------------------------------------
# geometric defect diagnostic
# ---------------------------------------------------------------------------

def geometric_defect(
    mesh: CurvedMesh,
    config: LiftConfig,
    k: int,
    v: np.ndarray,
    w: np.ndarray,
    *,
    kappa: float,
    alpha: float,
    beta: float,
    volume_degree: Optional[int] = None,
    boundary_degree: Optional[int] = None,
) -> float:
    """|a(lift v, lift w) - a_h(v, w)|, the geometric consistency error.

    The exact form is evaluated by pulling every integral back through
    the lift with its exact factors (inverse-transpose differential for
    gradients, volume and boundary measure ratios, arc length on the
    lifted boundary).  Quadrature degrees match assembly so that
    internal-element contributions cancel to round-off.
    """
    r = mesh.order
    deg_v = 2 * k + 2 * r + 2 if volume_degree is None else volume_degree
    deg_b = 2 * k + 2 * r + 4 if boundary_degree is None else boundary_degree
    A = assemble_matrix(mesh, k, kappa, alpha, beta, deg_v, deg_b)
    a_h = float(v @ (A @ w))

    dofs = build_dofmap(mesh.affine, k).element_dofs
    rule, vals, grads = _volume_tables(k, deg_v)
    wq = rule.weights
    a_exact = 0.0
    internal = np.nonzero(mesh.is_internal)[0]
    if len(internal):
        K = _internal_element_matrices(mesh, k, kappa, deg_v, internal)
        ve = v[dofs[internal]]
        we = w[dofs[internal]]
        a_exact += float(np.einsum("ti,tij,tj->", ve, K, we))
    for t in np.nonzero(~mesh.is_internal)[0]:
        t = int(t)
        _, inv, det = _curved_geometry(mesh.element_map(t), rule.points)
        g = np.einsum("qdx,qid->qix", inv, grads)
        lm = LiftMap(mesh, t, config)
        DG, jac = lm.differential_ref(rule.points)
        inv_dg_t = np.empty_like(DG)
        inv_dg_t[:, 0, 0] = DG[:, 1, 1]
        inv_dg_t[:, 0, 1] = -DG[:, 1, 0]
        inv_dg_t[:, 1, 0] = -DG[:, 0, 1]
        inv_dg_t[:, 1, 1] = DG[:, 0, 0]
        inv_dg_t /= jac[:, None, None]
        gv = np.einsum("i,qix->qx", v[dofs[t]], g)
        gw = np.einsum("i,qix->qx", w[dofs[t]], g)
        gv_lift = np.einsum("qxd,qd->qx", inv_dg_t, gv)
        gw_lift = np.einsum("qxd,qd->qx", inv_dg_t, gw)
        integrand = np.einsum("qx,qx->q", gv_lift, gw_lift)
        if kappa:
            vv = vals @ v[dofs[t]]
            ww = vals @ w[dofs[t]]
            integrand = integrand + kappa * vv * ww
        a_exact += float(np.sum(wq * det * jac * integrand))
    for t, le in mesh.boundary_edges:
        erule, evals, edt = _edge_tables(k, le, deg_b)
        data = edge_lift(mesh, t, le, erule.points, config)
        vv = evals @ v[dofs[t]]
        ww = evals @ w[dofs[t]]
        dv = edt @ v[dofs[t]]
        dw = edt @ w[dofs[t]]
        a_exact += float(
            np.sum(erule.weights * (beta * dv * dw / data.lifted_speed
                                    + alpha * vv * ww * data.lifted_speed))
        )
    return abs(a_exact - a_h)
