"""Lifted error norms, lifted interpolation, and convergence-order fits.

Errors between an analytic solution on the physical domain and a finite
element function on the mesh domain are measured after lifting: volume
integrals are pulled back through the per-element lift with its Jacobian
and inverse-transpose differential, boundary integrals through the edge
lift with the lifted arc length.  The four reported quantities are the
L2 norms of the error and of its (tangential) gradient, in the volume
and on the boundary; H1 entries are gradient seminorms only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .lift import LiftConfig, LiftMap, edge_lift
from .mesh import CurvedMesh
from .reference import lagrange_nodes_xy
from .ventcel import (
    ManufacturedSolution,
    _affine_geometry,
    _curved_geometry,
    _edge_tables,
    _volume_tables,
    build_dofmap,
)

ERROR_FLOOR = 1e-13


@dataclass(frozen=True)
class ErrorReport:
    """Per-mesh lifted error norms."""

    level: int
    h: float
    ndof: int
    e_l2_omega: float
    e_h1s_omega: float
    e_l2_gamma: float
    e_h1s_gamma: float

    def norm(self, key: str) -> float:
        return getattr(self, key)

    @property
    def e_l2_combined(self) -> float:
        return float(np.hypot(self.e_l2_omega, self.e_l2_gamma))

    @property
    def e_h1s_combined(self) -> float:
        return float(np.hypot(self.e_h1s_omega, self.e_h1s_gamma))


NORM_KEYS = ("e_l2_omega", "e_h1s_omega", "e_l2_gamma", "e_h1s_gamma")


def lifted_errors(
    mesh: CurvedMesh,
    config: LiftConfig,
    exact: ManufacturedSolution,
    coeffs: np.ndarray,
    k: int,
    quad_degree: Optional[int] = None,
    level: int = 0,
) -> ErrorReport:
    """Errors between the lifted FE function and the analytic solution."""
    r = mesh.order
    deg = 2 * k + 2 * r + 4 if quad_degree is None else quad_degree
    dofs = build_dofmap(mesh.affine, k).element_dofs
    rule, vals, grads = _volume_tables(k, deg)
    wq = rule.weights

    e_l2 = 0.0
    e_h1 = 0.0
    internal = np.nonzero(mesh.is_internal)[0]
    if len(internal):
        v0, J, inv, det = _affine_geometry(mesh, internal)
        xq = v0[:, None, :] + np.einsum("tid,qd->tqi", J, rule.points)
        ce = coeffs[dofs[internal]]
        uh = np.einsum("qi,ti->tq", vals, ce)
        guh = np.einsum("tdx,qid,ti->tqx", inv, grads, ce)
        e_l2 += float(np.einsum("tq,q,t->", (exact.u(xq) - uh) ** 2, wq, det))
        diff = exact.grad_u(xq) - guh
        e_h1 += float(np.einsum("tqx,tqx,q,t->", diff, diff, wq, det))
    for t in np.nonzero(~mesh.is_internal)[0]:
        t = int(t)
        _, inv, det = _curved_geometry(mesh.element_map(t), rule.points)
        ce = coeffs[dofs[t]]
        uh = vals @ ce
        guh = np.einsum("qdx,qid,i->qx", inv, grads, ce)
        lm = LiftMap(mesh, t, config)
        z = lm.value_ref(rule.points)
        DG, jac = lm.differential_ref(rule.points)
        # lifted gradient: inverse-transpose differential applied to the
        # mesh-domain gradient
        inv_t = np.empty_like(DG)
        inv_t[:, 0, 0] = DG[:, 1, 1]
        inv_t[:, 0, 1] = -DG[:, 1, 0]
        inv_t[:, 1, 0] = -DG[:, 0, 1]
        inv_t[:, 1, 1] = DG[:, 0, 0]
        inv_t /= jac[:, None, None]
        guh_lift = np.einsum("qxd,qd->qx", inv_t, guh)
        e_l2 += float(np.sum(wq * det * jac * (exact.u(z) - uh) ** 2))
        diff = exact.grad_u(z) - guh_lift
        e_h1 += float(np.sum(wq * det * jac * np.einsum("qx,qx->q", diff, diff)))

    e_l2_g = 0.0
    e_h1_g = 0.0
    for t, le in mesh.boundary_edges:
        erule, evals, edt = _edge_tables(k, le, deg)
        data = edge_lift(mesh, t, le, erule.points, config)
        ce = coeffs[dofs[t]]
        uh = evals @ ce
        duh_dt = edt @ ce
        tau = data.lifted_tangent / data.lifted_speed[:, None]
        slope_exact = np.einsum("qx,qx->q", exact.grad_u(data.lifted), tau)
        slope_h = duh_dt / data.lifted_speed
        darc = erule.weights * data.lifted_speed
        e_l2_g += float(np.sum(darc * (exact.u(data.lifted) - uh) ** 2))
        e_h1_g += float(np.sum(darc * (slope_exact - slope_h) ** 2))

    return ErrorReport(
        level=level,
        h=mesh.h,
        ndof=len(coeffs),
        e_l2_omega=float(np.sqrt(e_l2)),
        e_h1s_omega=float(np.sqrt(e_h1)),
        e_l2_gamma=float(np.sqrt(e_l2_g)),
        e_h1s_gamma=float(np.sqrt(e_h1_g)),
    )


def interpolate(
    mesh: CurvedMesh,
    k: int,
    exact: ManufacturedSolution,
    config: LiftConfig = LiftConfig(),
) -> np.ndarray:
    """Lifted nodal interpolant: coefficients are u at the lifted P^k nodes.

    Shared nodes receive identical values from every adjacent element
    because the lift is globally continuous.
    """
    dofmap = build_dofmap(mesh.affine, k)
    coeffs = np.empty(dofmap.n_dofs)
    pts = lagrange_nodes_xy(k)
    internal = np.nonzero(mesh.is_internal)[0]
    if len(internal):
        v0, J, _, _ = _affine_geometry(mesh, internal)
        xq = v0[:, None, :] + np.einsum("tid,qd->tqi", J, pts)
        coeffs[dofmap.element_dofs[internal]] = exact.u(xq)
    for t in np.nonzero(~mesh.is_internal)[0]:
        t = int(t)
        lifted = LiftMap(mesh, t, config).value_ref(pts)
        coeffs[dofmap.element_dofs[t]] = exact.u(lifted)
    return coeffs


def eoc_fit(hs: Sequence[float], errors: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log(error) against log(h).

    Requires at least three points, strictly decreasing mesh sizes and
    strictly positive errors (truncate series that hit the quadrature
    floor before calling).  Returns (slope, residual) where the residual
    is the maximum absolute deviation of the fit in log space.
    """
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(hs) < 3:
        raise ValueError("EOC fit needs at least 3 points")
    if np.any(np.diff(hs) >= 0):
        raise ValueError("mesh sizes must be strictly decreasing")
    if np.any(errors <= 0):
        raise ValueError(
            "non-positive error in series (below quadrature floor); truncate first"
        )
    lh, le = np.log(hs), np.log(errors)
    slope, intercept = np.polyfit(lh, le, 1)
    residual = float(np.max(np.abs(slope * lh + intercept - le)))
    return float(slope), residual


def eoc_tail(hs: Sequence[float], errors: Sequence[float], intervals: int = 3) -> float:
    """Least-squares EOC over the finest ``intervals`` intervals.

    Entries at or below the quadrature floor are dropped; NaN when fewer
    than three usable points remain.
    """
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > ERROR_FLOOR
    hs, errors = hs[keep], errors[keep]
    if len(hs) < 3:
        return float("nan")
    n = min(len(hs), intervals + 1)
    slope, _ = eoc_fit(hs[-n:], errors[-n:])
    return slope


def eoc_last(hs: Sequence[float], errors: Sequence[float]) -> float:
    """Pairwise EOC of the last refinement interval."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > ERROR_FLOOR
    hs, errors = hs[keep], errors[keep]
    if len(hs) < 2:
        return float("nan")
    return float(np.log(errors[-1] / errors[-2]) / np.log(hs[-1] / hs[-2]))


# ---------------------------------------------------------------------------
# convergence tables
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    """Error series of one (r, k, lift variant, exponent) study entry."""

    r: int
    k: int
    variant: str
    s: int
    reports: list = field(default_factory=list)

    @property
    def hs(self) -> np.ndarray:
        return np.array([rep.h for rep in self.reports])

    def errors(self, key: str) -> np.ndarray:
        return np.array([rep.norm(key) for rep in self.reports])

    def eoc(self, key: str) -> float:
        return eoc_tail(self.hs, self.errors(key))

    def eoc_last(self, key: str) -> float:
        return eoc_last(self.hs, self.errors(key))

    def fit_residual(self, key: str) -> float:
        hs, errs = self.hs, self.errors(key)
        keep = errs > ERROR_FLOOR
        if keep.sum() < 3:
            return float("nan")
        n = min(int(keep.sum()), 4)
        return eoc_fit(hs[keep][-n:], errs[keep][-n:])[1]


@dataclass
class ConvergenceTable:
    """Collection of study entries with markdown rendering."""

    runs: list = field(default_factory=list)

    def add(self, run: RunResult) -> None:
        self.runs.append(run)

    def find(self, r: int, k: int, variant: str = "new", s: Optional[int] = None):
        for run in self.runs:
            if run.r == r and run.k == k and run.variant == variant:
                if s is None or run.s == s:
                    return run
        return None

    def to_markdown(self) -> str:
        # runs at the default exponent r+2 share one table so mesh orders
        # stack as rows
        def group_label(run):
            return (run.variant, "r+2" if run.s == run.r + 2 else str(run.s))

        groups = sorted({group_label(run) for run in self.runs})
        blocks = []
        for variant, s_label in groups:
            runs = [run for run in self.runs if group_label(run) == (variant, s_label)]
            rs = sorted({run.r for run in runs})
            ks = sorted({run.k for run in runs})
            blocks.append(f"## Lift `{variant}`, exponent s={s_label}\n")
            for title, keys in [
                ("Interior norms (L2, gradient L2)", ("e_l2_omega", "e_h1s_omega")),
                ("Boundary norms (L2, tangential gradient L2)", ("e_l2_gamma", "e_h1s_gamma")),
            ]:
                blocks.append(f"### {title}\n")
                header = "| mesh order | " + " | ".join(
                    f"P{k} {lbl}" for lbl in ("L2", "grad") for k in ks
                )
                blocks.append(header + " |")
                blocks.append("|" + "---|" * (1 + 2 * len(ks)))
                for r in rs:
                    lookup = {(run.r, run.k): run for run in runs}
                    cells = [f"r={r}"]
                    for key in keys:
                        for k in ks:
                            run = lookup.get((r, k))
                            cells.append(f"{run.eoc(key):.2f}" if run else "-")
                    blocks.append("| " + " | ".join(cells) + " |")
                blocks.append("")
        return "\n".join(blocks) + "\n"
