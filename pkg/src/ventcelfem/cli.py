"""Experiment driver: convergence studies and certification suites.

Sweeps geometric order, FE degree, lift variant and displacement
exponent over a refinement series of disk meshes; writes per-run CSV
files, convergence figures, a markdown summary, and optional mesh and
matrix dumps.  A certification mode runs the module invariant suites
plus the lift differential slope certification and reports machine
readable pass/fail lines.

Exit codes: 0 on success, 2 on certification failure, 3 on runtime
errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import ConvergenceTable, RunResult, lifted_errors
from .geometry import unit_disk
from .lift import LiftConfig, LiftMap, certify_lift, edge_lift
from .mesh import build_curved_mesh, dump_mesh, generate_disk_mesh
from .reference import lagrange_basis, segment_rule, triangle_rule
from .reporting import errors_csv_text, render_convergence_figure, summary_markdown
from .ventcel import (
    assemble_matrix,
    assemble_rhs,
    build_dofmap,
    derive_manufactured,
    dump_matrix,
    manufactured_case,
    solve,
    DiscreteSystem,
)

DEFAULT_LEVELS = (0, 4)


@dataclass
class RunConfig:
    """Resolved experiment configuration (deterministic, seed-free)."""

    rs: tuple = (1, 2, 3)
    ks: tuple = (1, 2, 3, 4)
    levels: tuple = DEFAULT_LEVELS
    variant: str = "new"
    s: object = "auto"
    kappa: float = 0.0
    alpha: float = 1.0
    beta: float = 1.0
    solution: str = "y_exp_x"
    out: str = "out"
    dump_mesh: bool = False
    dump_matrix: bool = False
    certify: bool = False
    plots: bool = True

    def lift_config(self) -> LiftConfig:
        exponent = None if self.s == "auto" else int(self.s)
        return LiftConfig(variant=self.variant, exponent=exponent)


class MeshCache:
    """Level/order cache of disk meshes shared across a sweep."""

    def __init__(self, boundary=None):
        self.boundary = boundary if boundary is not None else unit_disk()
        self._affine = {}
        self._curved = {}

    def affine(self, level: int):
        if level not in self._affine:
            self._affine[level] = generate_disk_mesh(self.boundary, level)
        return self._affine[level]

    def curved(self, level: int, r: int):
        key = (level, r)
        if key not in self._curved:
            self._curved[key] = build_curved_mesh(self.affine(level), self.boundary, r)
        return self._curved[key]


#: solver tolerance used by the study driver; well below the smallest
#: discretization errors at desk scale, attainable in double precision
STUDY_SOLVE_TOL = 1e-10


def run_series(
    r: int,
    k: int,
    levels,
    config: LiftConfig,
    problem,
    exact,
    cache: MeshCache,
    matrix_cache: dict = None,
) -> RunResult:
    """Solve the problem over a refinement series and collect error reports.

    ``matrix_cache`` may be shared between series with equal coefficients
    (the matrix does not depend on the lift configuration).
    """
    run = RunResult(r=r, k=k, variant=config.variant, s=config.resolve_exponent(r))
    for level in levels:
        mesh = cache.curved(level, r)
        key = (r, k, level)
        if matrix_cache is not None and key in matrix_cache:
            matrix = matrix_cache[key]
        else:
            matrix = assemble_matrix(mesh, k, problem.kappa, problem.alpha, problem.beta)
            if matrix_cache is not None:
                matrix_cache[key] = matrix
        rhs = assemble_rhs(mesh, config, problem, k)
        system = DiscreteSystem(matrix, rhs, build_dofmap(mesh.affine, k), k)
        coeffs = solve(system, rel_tol=STUDY_SOLVE_TOL)
        run.reports.append(
            lifted_errors(mesh, config, exact, coeffs, k, level=level)
        )
    return run


def run_study(cfg: RunConfig) -> ConvergenceTable:
    """Full study: sweep (r, k), write CSV/figures/summary under cfg.out."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cache = MeshCache()
    exact = manufactured_case(cfg.solution)
    problem = derive_manufactured(exact, cfg.kappa, cfg.alpha, cfg.beta, cache.boundary)
    config = cfg.lift_config()
    levels = list(range(cfg.levels[0], cfg.levels[1] + 1))
    matrix_cache: dict = {}
    table = ConvergenceTable()
    for r in cfg.rs:
        for k in cfg.ks:
            t0 = time.perf_counter()
            run = run_series(r, k, levels, config, problem, exact, cache, matrix_cache)
            elapsed = time.perf_counter() - t0
            run_dir = out / f"r{r}_k{k}_{config.variant}_s{run.s}"
            run_dir.mkdir(parents=True, exist_ok=True)
            (run_dir / "errors.csv").write_text(errors_csv_text(run))
            if cfg.plots:
                render_convergence_figure(
                    run_dir / "convergence.png",
                    run,
                    f"r={r}, P{k}, lift {config.variant}, s={run.s}",
                )
            if cfg.dump_mesh:
                for level in levels:
                    dump_mesh(cache.curved(level, r), run_dir / f"mesh_level{level}.txt")
            if cfg.dump_matrix:
                mesh = cache.curved(levels[-1], r)
                dump_matrix(
                    assemble_matrix(mesh, k, cfg.kappa, cfg.alpha, cfg.beta),
                    run_dir / f"matrix_level{levels[-1]}.txt",
                )
            table.add(run)
            print(f"[study] r={r} k={k} {config.variant} s={run.s}: "
                  f"{len(levels)} levels in {elapsed:.1f}s")
    (out / "summary.md").write_text(summary_markdown(table))
    return table


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: object  # True/False, or None for ungated INFO lines
    detail: str

    def line(self) -> str:
        tag = "INFO" if self.passed is None else ("PASS" if self.passed else "FAIL")
        return f"{tag} {self.name}: {self.detail}"


def _check_reference() -> list[CheckResult]:
    import math

    out = []
    rng = np.random.default_rng(7)
    worst_pu, worst_grad = 0.0, 0.0
    for k in range(1, 5):
        pts = rng.random((50, 2))
        pts = pts[pts.sum(axis=1) <= 1.0]
        vals, grads = lagrange_basis(k).eval(pts)
        worst_pu = max(worst_pu, float(np.abs(vals.sum(axis=1) - 1).max()))
        worst_grad = max(worst_grad, float(np.abs(grads.sum(axis=1)).max()))
    out.append(CheckResult(
        "partition_of_unity", worst_pu < 1e-12 and worst_grad < 1e-11,
        f"max |sum(phi)-1|={worst_pu:.2e}, max |sum(grad phi)|={worst_grad:.2e}"))
    worst = 0.0
    for deg in (2, 5, 8, 12, 16, 20):
        rule = triangle_rule(deg)
        for a in range(deg + 1):
            b = deg - a
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            got = float(np.sum(rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b))
            worst = max(worst, abs(got - exact) / exact)
    out.append(CheckResult(
        "quadrature_exactness", worst < 1e-12,
        f"max relative deviation from factorial formula {worst:.2e}"))
    return out


def _check_lift(cache: MeshCache, levels) -> list[CheckResult]:
    out = []
    boundary = cache.boundary
    for r in (1, 2, 3):
        mesh = cache.curved(levels[-1], r)
        config = LiftConfig()
        worst = 0.0
        qpts = segment_rule(2 * r + 8).points
        for t, le in mesh.boundary_edges:
            data = edge_lift(mesh, t, le, qpts, config)
            worst = max(worst, float(np.abs(
                data.lifted - boundary.project(data.points)).max()))
        out.append(CheckResult(
            f"trace_compatibility_r{r}", worst <= 1e-10,
            f"max |lift - projection| over boundary quadrature points {worst:.2e}"))
    mesh = cache.curved(1, 2)
    t = int(np.nonzero(~mesh.is_internal)[0][0])
    lm = LiftMap(mesh, t, LiftConfig())
    pts = triangle_rule(6).points
    DG, _ = lm.differential_ref(pts)
    X = lm.curved.value(pts)
    step = 1e-6 * mesh.h
    fd = np.empty_like(DG)
    for j in range(2):
        e = np.zeros(2)
        e[j] = step
        fd[:, :, j] = (lm.eval(X + e) - lm.eval(X - e)) / (2 * step)
    dev = float(np.abs(fd - DG).max())
    out.append(CheckResult(
        "lift_differential_vs_fd", dev <= 1e-6,
        f"max |analytic - central difference| {dev:.2e}"))
    return out


def _check_system(cache: MeshCache) -> list[CheckResult]:
    out = []
    mesh = cache.curved(1, 2)
    k = 3
    dofmap = build_dofmap(mesh.affine, k)
    V, E, T = dofmap.n_vertices, dofmap.n_edges, dofmap.n_triangles
    expected = V + (k - 1) * E + (k - 1) * (k - 2) // 2 * T
    out.append(CheckResult(
        "dof_count_formula", dofmap.n_dofs == expected,
        f"N={dofmap.n_dofs}, V+(k-1)E+((k-1)(k-2)/2)T={expected}"))
    exact = manufactured_case("y_exp_x")
    problem = derive_manufactured(exact, 0.0, 1.0, 1.0, cache.boundary)
    matrix = assemble_matrix(mesh, k, problem.kappa, problem.alpha, problem.beta)
    rhs = assemble_rhs(mesh, LiftConfig(), problem, k)
    asym = abs(matrix - matrix.T).max() / abs(matrix).max()
    out.append(CheckResult(
        "matrix_symmetry", asym <= 1e-12, f"max |A - A^T| / max |A| = {asym:.2e}"))
    rng = np.random.default_rng(3)
    quad_forms = [
        float(v @ (matrix @ v)) for v in rng.standard_normal((1000, matrix.shape[0]))
    ]
    out.append(CheckResult(
        "matrix_positive", min(quad_forms) > 0.0,
        f"min v^T A v over 1000 random vectors = {min(quad_forms):.3e}"))
    system = DiscreteSystem(matrix, rhs, dofmap, k)
    coeffs = solve(system)
    resid = float(np.abs(matrix @ coeffs - rhs).max() / np.abs(rhs).max())
    out.append(CheckResult(
        "galerkin_orthogonality", resid <= 1e-10,
        f"max |l(phi_i) - a(u_h, phi_i)| / max |l| = {resid:.2e}"))
    return out


def _check_slopes(cache: MeshCache, levels, out_dir: Path) -> list[CheckResult]:
    out = []
    for r in (1, 2, 3):
        meshes = [cache.curved(lv, r) for lv in levels]
        for s in (2, r + 2):
            report = certify_lift(meshes, LiftConfig(exponent=s))
            (out_dir / f"lift_slopes_r{r}_s{s}.csv").write_text(report.to_csv())
            out.append(CheckResult(
                f"lift_slope_r{r}_s{s}", report.passed,
                f"slope(DG-Id)={report.slope_dg:.2f}, slope(J-1)={report.slope_jh:.2f}, "
                f"gate >= {r - 0.3:.1f}"))
        report = certify_lift(meshes, LiftConfig(exponent=1))
        (out_dir / f"lift_slopes_r{r}_s1.csv").write_text(report.to_csv())
        out.append(CheckResult(
            f"lift_slope_r{r}_s1", None,
            f"slope(DG-Id)={report.slope_dg:.2f} ({report.note})"))
    return out


def _check_exponent_agreement(cache: MeshCache, levels) -> list[CheckResult]:
    exact = manufactured_case("y_exp_x")
    problem = derive_manufactured(exact, 0.0, 1.0, 1.0, cache.boundary)
    matrix_cache: dict = {}
    runs = {
        s: run_series(2, 2, levels, LiftConfig(exponent=s), problem, exact,
                      cache, matrix_cache)
        for s in (4, 2)
    }
    worst = max(
        abs(runs[4].eoc(key) - runs[2].eoc(key))
        for key in ("e_l2_omega", "e_h1s_omega", "e_l2_gamma", "e_h1s_gamma")
    )
    return [CheckResult(
        "exponent_robustness_r2_k2", worst <= 0.05,
        f"max EOC difference between s=4 and s=2: {worst:.3f}")]


def run_certification(cfg: RunConfig) -> bool:
    """Run all invariant suites; write certify.txt and slope CSV files."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cache = MeshCache()
    levels = list(range(4))
    checks: list[CheckResult] = []
    checks += _check_reference()
    checks += _check_lift(cache, levels)
    checks += _check_system(cache)
    checks += _check_slopes(cache, levels, out)
    checks += _check_exponent_agreement(cache, levels)
    text = "\n".join(c.line() for c in checks) + "\n"
    (out / "certify.txt").write_text(text)
    print(text, end="")
    return all(c.passed is not False for c in checks)


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _parse_levels(text: str) -> tuple:
    try:
        lo, hi = text.split("..")
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"levels must look like 'A..B', got {text!r}") from None
    if hi < lo or lo < 0:
        raise argparse.ArgumentTypeError(f"invalid level range {text!r}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ventcelfem",
        description="Convergence studies for the Ventcel problem on curved disk meshes",
    )
    p.add_argument("--r", type=int, choices=(1, 2, 3), default=None,
                   help="geometric mesh order (default: sweep 1..3)")
    p.add_argument("--k", type=int, choices=(1, 2, 3, 4), default=None,
                   help="finite element degree (default: sweep 1..4)")
    p.add_argument("--levels", type=str, default=None,
                   help="refinement range A..B (default 0..4)")
    p.add_argument("--lift", choices=("new", "former"), default=None,
                   help="lift variant (default new)")
    p.add_argument("--s", choices=("auto", "1", "2"), default=None,
                   help="displacement exponent; auto resolves to r+2")
    p.add_argument("--kappa", type=float, default=None, help="volume reaction coefficient")
    p.add_argument("--alpha", type=float, default=None, help="boundary reaction coefficient")
    p.add_argument("--beta", type=float, default=None, help="boundary diffusion coefficient")
    p.add_argument("--solution", type=str, default=None,
                   help="named manufactured solution (default y_exp_x)")
    p.add_argument("--out", type=str, default=None, help="output directory (default out)")
    p.add_argument("--dump-mesh", action="store_true", help="write mesh text dumps")
    p.add_argument("--dump-matrix", action="store_true",
                   help="write the finest-level system matrix in coordinate format")
    p.add_argument("--certify", action="store_true",
                   help="run invariant suites and slope certification instead of the study")
    p.add_argument("--plots", action=argparse.BooleanOptionalAction, default=None,
                   help="render convergence figures (default on)")
    p.add_argument("--config", type=str, default=None,
                   help="key=value config file; command-line flags take precedence")
    return p


def _read_config_file(path: str) -> dict:
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    file_vals = _read_config_file(args.config) if args.config else {}

    def pick(name, default, convert):
        # command line beats config file beats defaults; store_true flags
        # count as provided only when set
        cli = getattr(args, name)
        if cli is not None and cli is not False:
            return convert(cli)
        if name in file_vals:
            return convert(file_vals[name])
        return default

    def to_bool(v):
        return v if isinstance(v, bool) else _BOOL[str(v).lower()]

    r = pick("r", None, int)
    k = pick("k", None, int)
    levels = pick("levels", DEFAULT_LEVELS,
                  lambda v: _parse_levels(v) if isinstance(v, str) else v)
    s = pick("s", "auto", lambda v: v if v == "auto" else int(v))
    if args.plots is not None:
        plots = args.plots
    else:
        plots = to_bool(file_vals["plots"]) if "plots" in file_vals else True
    return RunConfig(
        rs=(r,) if r else (1, 2, 3),
        ks=(k,) if k else (1, 2, 3, 4),
        levels=levels,
        variant=pick("lift", "new", str),
        s=s,
        kappa=pick("kappa", 0.0, float),
        alpha=pick("alpha", 1.0, float),
        beta=pick("beta", 1.0, float),
        solution=pick("solution", "y_exp_x", str),
        out=pick("out", "out", str),
        dump_mesh=pick("dump_mesh", False, to_bool),
        dump_matrix=pick("dump_matrix", False, to_bool),
        certify=pick("certify", False, to_bool),
        plots=plots,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if cfg.certify:
            return 0 if run_certification(cfg) else 2
        run_study(cfg)
        return 0
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
