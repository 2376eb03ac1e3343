"""
Batch command-line front end.

    space generate|inspect|convert     build, describe or normalise a space file
    solve | eigen | capacity           variational problems (solve also runs the fixed-point pipeline)
    curvature                          pointwise Bakry-Emery lower bounds
    verify <check>                     regularity harness, one EstimateReport record per line
    sweep                              cartesian parameter grid on a thread pool

Exit status: 0 success, 1 solver or verification failure (diagnostics written), 2 usage error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table
from rich.theme import Theme

from src.plaplab import __version__
from src.plaplab.calculus.curvature import CurvatureReport, curvature_lower_bound
from src.plaplab.calculus.fields import read_field, write_field
from src.plaplab.calculus.gamma import check_exponent
from src.plaplab.config import OUTPUT_DIR, ensure_output_dir
from src.plaplab.exceptions import FieldError, PlapLabError, ProblemSpecError, SpaceError, UsageError
from src.plaplab.fileio import atomic_write_text, format_manifest, write_manifest
from src.plaplab.fixedpoint.pipeline import epsilon_continuation
from src.plaplab.fixedpoint.traces import ContinuationTrace, format_trace_table
from src.plaplab.regularity.harnack import harnack_subsolution, harnack_supersolution
from src.plaplab.regularity.holder import holder_exponent_fit, lipschitz_constant
from src.plaplab.regularity.poincare import poincare_constant, sobolev_probe
from src.plaplab.regularity.reports import EstimateReport, format_reports, sort_reports
from src.plaplab.regularity.second_order import (
    bochner_energy_check, bochner_report, maximum_principle_report, second_order_check,
)
from src.plaplab.schemas import (
    FixedPointOptions, HarnackOptions, LinearSolveOptions, RunConfig, SolverConfig, VariationalOptions,
)
from src.plaplab.space.doubling import doubling_estimates
from src.plaplab.space.generators import from_generator_string
from src.plaplab.space.mms import DiscreteMMS
from src.plaplab.space.parser import read_space, serialize_space
from src.plaplab.sweep import format_sweep_table, run_sweep, sweep_jobs
from src.plaplab.variational.problems import EigenMode, ProblemKind, ProblemSpec, make_problem, parse_problem
from src.plaplab.variational.solvers import solve

logger = logging.getLogger(__name__)

# Custom Rich Theme
custom_theme = Theme({
    "info": "cyan",
    "warning": "yellow",
    "error": "bold red",
    "success": "bold green",
    "highlight": "magenta",
})
console = Console(theme=custom_theme)
err_console = Console(theme=custom_theme, stderr=True)

USAGE_ERRORS = (UsageError, ProblemSpecError, SpaceError, FieldError)

# -----------------------------------------------------------------------------
# Argument parsing
# -----------------------------------------------------------------------------

LINEAR_FLAGS = {"linear_tol": "tolerance"}
VARIATIONAL_FLAGS = {"tol": "tolerance", "max_iter": "max_iterations"}
FIXEDPOINT_FLAGS = {
    "eps0": "eps0", "rho": "rho", "eps_min": "eps_min", "final_tol": "final_tolerance",
    "outer_tol": "outer_tolerance", "max_outer": "max_outer_iterations", "max_inner": "max_inner_iterations",
    "theta_min": "theta_min",
}
SWITCH_FLAGS = {"no_develop_correction": "develop_correction", "no_inner_fallback": "inner_fallback",
                "no_outer_fallback": "outer_fallback"}
HARNACK_FLAGS = {"radius": "radius", "dilation": "dilation", "lebesgue_exponent": "lebesgue_exponent",
                 "ceiling": "ceiling"}
CONSUMED = ({"command", "action", "space", "space_file", "problem", "out", "seed", "verbose", "no_scale"}
            | set(LINEAR_FLAGS) | set(VARIATIONAL_FLAGS) | set(FIXEDPOINT_FLAGS) | set(SWITCH_FLAGS)
            | set(HARNACK_FLAGS))


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--space", help="generator string: path:n, cycle:n, grid:AxB, star:k, horn:n:e, random:n[:seed]")
    common.add_argument("--space-file", type=Path, help="space file")
    common.add_argument("--out", type=Path, default=OUTPUT_DIR, help="output directory")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def _solver_parser() -> argparse.ArgumentParser:
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--p", type=float, default=2.0, help="exponent in (1, inf)")
    solver.add_argument("--epsilon", type=float, default=0.0)
    solver.add_argument("--problem", type=Path, help="ProblemSpec file")
    solver.add_argument("--f-file", type=Path, help="right-hand side field file")
    solver.add_argument("--initial-file", type=Path, help="initial iterate field file")
    solver.add_argument("--tol", type=float, help="variational KKT tolerance")
    solver.add_argument("--linear-tol", type=float)
    solver.add_argument("--max-iter", type=int)
    solver.add_argument("--eps0", type=float)
    solver.add_argument("--rho", type=float)
    solver.add_argument("--eps-min", type=float)
    solver.add_argument("--final-tol", type=float)
    solver.add_argument("--outer-tol", type=float)
    solver.add_argument("--max-outer", type=int)
    solver.add_argument("--max-inner", type=int)
    solver.add_argument("--theta-min", type=float)
    solver.add_argument("--no-develop-correction", action="store_true")
    solver.add_argument("--no-inner-fallback", action="store_true")
    solver.add_argument("--no-outer-fallback", action="store_true")
    return solver


def build_parser() -> argparse.ArgumentParser:
    common, solver = _common_parser(), _solver_parser()
    parser = argparse.ArgumentParser(prog="plaplab", description="Graph p-Laplacian laboratory")
    parser.add_argument("--version", action="version", version=f"plaplab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    space = sub.add_parser("space", parents=[common], help="generate, inspect or convert a space")
    space.add_argument("action", choices=["generate", "inspect", "convert"])
    space.add_argument("--to", type=Path, help="target space file (default <out>/space.txt)")

    solve_p = sub.add_parser("solve", parents=[common, solver], help="p-Poisson problems")
    solve_p.add_argument("--kind", choices=[ProblemKind.POISSON_DIRICHLET.value, ProblemKind.POISSON_NEUMANN.value])
    solve_p.add_argument("--method", choices=["variational", "fixedpoint", "both"], default="variational")
    solve_p.add_argument("--boundary", help="comma-separated boundary vertices")
    solve_p.add_argument("--boundary-values", help="comma-separated boundary values")

    eigen = sub.add_parser("eigen", parents=[common, solver], help="first p-eigenpair")
    eigen.add_argument("--mode", choices=[m.value for m in EigenMode], default=EigenMode.NEUMANN.value)
    eigen.add_argument("--boundary")

    capacity = sub.add_parser("capacity", parents=[common, solver], help="p-capacity of K in omega")
    capacity.add_argument("--K", dest="K", help="comma-separated vertices of K")
    capacity.add_argument("--omega", help="comma-separated vertices of omega")

    curvature = sub.add_parser("curvature", parents=[common], help="Bakry-Emery curvature lower bounds")
    curvature.add_argument("--vertex", type=int)

    verify = sub.add_parser("verify", parents=[common, solver], help="regularity harness")
    verify.add_argument("action", choices=sorted(VERIFIERS))
    verify.add_argument("--field", type=Path, help="field file to measure")
    verify.add_argument("--vertex", type=int, default=0, help="ball center")
    verify.add_argument("--side", choices=["sub", "super"], default="sub")
    verify.add_argument("--q", type=float, default=2.0, help="Lebesgue exponent of the f term")
    verify.add_argument("--g", type=float, default=0.0, help="zeroth-order coefficient")
    verify.add_argument("--radius", type=float)
    verify.add_argument("--dilation", type=float)
    verify.add_argument("--lebesgue-exponent", type=float)
    verify.add_argument("--ceiling", type=float)
    verify.add_argument("--no-scale", action="store_true", help="fail instead of shrinking oversize balls")
    verify.add_argument("--region", help="comma-separated vertices for the Holder fit")
    verify.add_argument("--level", nargs=2, action="append", metavar=("SPACE", "FIELD"),
                        help="coarser refinement level for the Holder fit (repeatable, coarsest first)")
    verify.add_argument("--K", dest="K", default="auto", help="curvature bound or 'auto'")
    verify.add_argument("--boundary")
    verify.add_argument("--mode", choices=[m.value for m in EigenMode], default=EigenMode.NEUMANN.value)
    verify.add_argument("--s", default="auto", help="growth exponent or 'auto' (doubling fit)")
    verify.add_argument("--radius-cap", type=float)
    verify.add_argument("--radii", help="comma-separated radii for the doubling fit")
    verify.add_argument("--centers", help="comma-separated doubling centers")

    sweep = sub.add_parser("sweep", parents=[common, solver], help="parameter grid")
    sweep.add_argument("--spaces", required=True, help="comma-separated generator strings")
    sweep.add_argument("--ps", default="2", help="comma-separated exponents")
    sweep.add_argument("--eps0s", default="1", help="comma-separated starting epsilons")
    sweep.add_argument("--methods", default="variational,fixedpoint")
    sweep.add_argument("--threads", type=int)
    return parser

# -----------------------------------------------------------------------------
# Configuration
# -----------------------------------------------------------------------------

def _pick(args: argparse.Namespace, flags: Dict[str, str]) -> dict:
    return {field: getattr(args, flag) for flag, field in flags.items() if getattr(args, flag, None) is not None}


def build_run_config(args: argparse.Namespace) -> RunConfig:
    if getattr(args, "p", None) is not None:
        check_exponent(args.p)
    fixedpoint = _pick(args, FIXEDPOINT_FLAGS)
    fixedpoint.update({field: False for flag, field in SWITCH_FLAGS.items() if getattr(args, flag, False)})
    if "eps0" in fixedpoint and "eps_min" not in fixedpoint:
        fixedpoint["eps_min"] = min(FixedPointOptions().eps_min, fixedpoint["eps0"])
    harnack = _pick(args, HARNACK_FLAGS)
    if getattr(args, "no_scale", False):
        harnack["scale_to_fit"] = False
    options = {k: v for k, v in vars(args).items() if k not in CONSUMED and v is not None}
    try:
        return RunConfig(
            command=args.command,
            action=getattr(args, "action", None),
            space=args.space,
            space_file=args.space_file,
            problem_file=getattr(args, "problem", None),
            output_dir=args.out,
            seed=args.seed,
            solver=SolverConfig(linear=LinearSolveOptions(**_pick(args, LINEAR_FLAGS)),
                                variational=VariationalOptions(**_pick(args, VARIATIONAL_FLAGS)),
                                fixedpoint=FixedPointOptions(**fixedpoint), seed=args.seed),
            harnack=HarnackOptions(**harnack),
            options=options,
        )
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(x) for x in first.get("loc", ())) or "config"
        raise UsageError(f"{where}: {first.get('msg')}", {"errors": e.errors()}) from e


def _ints(config: RunConfig, key: str, flag: str) -> Optional[List[int]]:
    raw = config.options.get(key)
    if raw is None:
        return None
    try:
        return [int(tok) for tok in str(raw).split(",") if tok.strip()]
    except ValueError as e:
        raise UsageError(f"{flag}: expected comma-separated integers, got '{raw}'", {"flag": flag}) from e


def _floats(raw: str, flag: str) -> List[float]:
    try:
        return [float(tok) for tok in str(raw).split(",") if tok.strip()]
    except ValueError as e:
        raise UsageError(f"{flag}: expected comma-separated numbers, got '{raw}'", {"flag": flag}) from e


def load_space(config: RunConfig) -> DiscreteMMS:
    if config.space is not None:
        return from_generator_string(config.space)
    if not config.space_file.exists():
        raise UsageError(f"--space-file: {config.space_file} does not exist", {"flag": "--space-file"})
    return read_space(config.space_file)


def _field(config: RunConfig, key: str, flag: str, space: DiscreteMMS, required: bool = False) -> Optional[np.ndarray]:
    path = config.options.get(key)
    if path is None:
        if required:
            command = f"{config.command} {config.action}" if config.action else config.command
            raise UsageError(f"{flag} is required for '{command}'", {"flag": flag})
        return None
    if not Path(path).exists():
        raise UsageError(f"{flag}: {path} does not exist", {"flag": flag})
    return read_field(path, space.n)


def problem_from(config: RunConfig, space: DiscreteMMS, kind: ProblemKind) -> ProblemSpec:
    if config.problem_file is not None:
        if not config.problem_file.exists():
            raise UsageError(f"--problem: {config.problem_file} does not exist", {"flag": "--problem"})
        text = config.problem_file.read_text(encoding="utf-8")
        return parse_problem(text, config.problem_file.parent, space.n)
    data = {"kind": kind, "p": config.options.get("p", 2.0), "epsilon": config.options.get("epsilon", 0.0)}
    for key, flag in (("boundary", "--boundary"), ("K", "--K"), ("omega", "--omega")):
        values = _ints(config, key, flag)
        if values is not None:
            data[key] = values
    if config.options.get("boundary_values") is not None:
        data["boundary_values"] = _floats(config.options["boundary_values"], "--boundary-values")
    if kind == ProblemKind.EIGEN:
        data["mode"] = config.options.get("mode", EigenMode.NEUMANN.value)
    f = _field(config, "f_file", "--f-file", space)
    if f is not None:
        data["f"] = f.tolist()
    initial = _field(config, "initial_file", "--initial-file", space)
    if initial is not None:
        data["initial"] = initial.tolist()
    return make_problem(**data)

# -----------------------------------------------------------------------------
# Output helpers
# -----------------------------------------------------------------------------

def _summary(title: str, rows: Dict[str, object]) -> None:
    table = Table(title=title, show_header=False)
    table.add_column("Key", style="cyan")
    table.add_column("Value", style="highlight")
    for k, v in rows.items():
        table.add_row(k, format(v, ".12g") if isinstance(v, float) else str(v))
    console.print(table)


def _report_table(reports: List[EstimateReport]) -> None:
    table = Table(title="Estimate reports")
    table.add_column("Name", style="cyan")
    table.add_column("lhs", justify="right")
    table.add_column("rhs", justify="right")
    table.add_column("Constant", justify="right", style="highlight")
    table.add_column("Status", justify="center")
    for r in sort_reports(reports):
        status = "[yellow]DEGENERATE[/yellow]" if r.degenerate else ("[green]PASSED[/green]" if r.passed
                                                                     else "[red]FAILED[/red]")
        constant = "-" if r.empirical_constant is None else f"{r.empirical_constant:.6g}"
        table.add_row(r.name, f"{r.lhs:.6g}", f"{r.rhs:.6g}", constant, status)
    console.print(table)


def write_curvature(out: Path, report: CurvatureReport) -> Path:
    lines = ["vertex\tK"]
    lines.extend(f"{x}\t{format(float(k), '.17g')}" for x, k in zip(report.vertices, report.pointwise_K))
    return atomic_write_text(out / "curvature.tsv", "\n".join(lines) + "\n")


def write_diagnostics(out: Path, error: PlapLabError) -> None:
    """errors.txt with the message and scalar context; traces and best iterates beside it."""
    record = {"error": type(error).__name__, "message": str(error)}
    for k, v in error.context.items():
        if isinstance(v, (int, float, str, bool)):
            record[f"context.{k}"] = v
    atomic_write_text(out / "errors.txt", format_manifest(record))
    trace = error.context.get("continuation_trace")
    if isinstance(trace, ContinuationTrace):
        atomic_write_text(out / "trace.tsv", format_trace_table(trace))
    best = error.context.get("best_iterate")
    if isinstance(best, np.ndarray) and best.ndim == 1:
        write_field(out / "best_iterate.txt", best)

# -----------------------------------------------------------------------------
# Commands
# -----------------------------------------------------------------------------

def cmd_space(config: RunConfig) -> int:
    space = load_space(config)
    if config.action == "inspect":
        rows = {
            "vertices": space.n, "edges": space.edge_count, "components": space.component_count,
            "connected": space.is_connected, "diameter": space.diameter,
            "total measure": float(space.measure.sum()),
            "conductance range": f"[{space.conductance.min():.6g}, {space.conductance.max():.6g}]"
            if space.edge_count else "-",
            "length range": f"[{space.length.min():.6g}, {space.length.max():.6g}]" if space.edge_count else "-",
        }
        atomic_write_text(config.output_dir / "inspect.txt", format_manifest(rows))
        _summary("Space", rows)
        return 0
    target = Path(config.options.get("to") or config.output_dir / "space.txt")
    atomic_write_text(target, serialize_space(space))
    console.print(f"[success]Wrote {space.n}-vertex space to {target}[/success]")
    return 0


def cmd_solve(config: RunConfig) -> int:
    space = load_space(config)
    kind = config.options.get("kind")
    if kind is None and config.problem_file is None:
        raise UsageError("--kind is required unless --problem is given", {"flag": "--kind"})
    spec = problem_from(config, space, ProblemKind(kind) if kind else None)
    if spec.kind not in (ProblemKind.POISSON_DIRICHLET, ProblemKind.POISSON_NEUMANN):
        raise UsageError(f"solve handles p-Poisson problems; use the '{spec.kind.value}' command",
                         {"kind": spec.kind.value})
    method = config.options.get("method", "variational")
    if method != "variational" and spec.kind != ProblemKind.POISSON_NEUMANN:
        raise UsageError("--method fixedpoint solves the zero-mean Neumann problem only", {"flag": "--method"})

    out = config.output_dir
    rows: Dict[str, object] = {"kind": spec.kind.value, "p": spec.p, "method": method}
    solutions = {}
    if method in ("variational", "both"):
        result = solve(space, spec, config.solver)
        solutions["variational"] = result.solution
        rows.update({"variational iterations": result.iterations, "KKT residual": result.kkt_residual,
                     "objective": result.objective_value})
    if method in ("fixedpoint", "both"):
        u, trace = epsilon_continuation(space, spec.f_array(space.n), spec.p, config.solver,
                                        initial=None if spec.initial is None else np.asarray(spec.initial))
        solutions["fixedpoint"] = u
        atomic_write_text(out / "trace.tsv", format_trace_table(trace))
        rows.update({"eps stages": len(trace.stages), "certified residual": trace.final_plap_residual,
                     "stop reason": trace.stop_reason})
        rows.update(trace.step_counts())
    for name, u in solutions.items():
        write_field(out / ("solution.txt" if len(solutions) == 1 else f"solution-{name}.txt"), u)
    if len(solutions) == 2:
        gap = solutions["variational"] - solutions["fixedpoint"]
        distance = {"distance_max": float(np.abs(gap).max()), "distance_l2": space.l2_norm(gap)}
        distance.update(trace.step_counts())
        atomic_write_text(out / "crosscheck.txt", format_manifest(distance))
        rows.update(distance)
    _summary("Solve", rows)
    return 0


def cmd_eigen(config: RunConfig) -> int:
    space = load_space(config)
    spec = problem_from(config, space, ProblemKind.EIGEN)
    result = solve(space, spec, config.solver)
    write_field(config.output_dir / "eigenfield.txt", result.solution)
    rows = {"mode": spec.mode.value, "p": spec.p, "eigenvalue": result.eigenvalue,
            "poincare constant": 1.0 / result.eigenvalue, "residual": result.kkt_residual,
            "iterations": result.iterations}
    atomic_write_text(config.output_dir / "eigen.txt", format_manifest(rows))
    _summary("Eigenpair", rows)
    return 0


def cmd_capacity(config: RunConfig) -> int:
    space = load_space(config)
    spec = problem_from(config, space, ProblemKind.CAPACITY)
    result = solve(space, spec, config.solver)
    write_field(config.output_dir / "potential.txt", result.solution)
    rows = {"p": spec.p, "capacity": result.capacity, "comparison ok": result.comparison_ok,
            "residual": result.kkt_residual, "iterations": result.iterations}
    atomic_write_text(config.output_dir / "capacity.txt", format_manifest(rows))
    _summary("Capacity", rows)
    return 0


def cmd_curvature(config: RunConfig) -> int:
    space = load_space(config)
    report = curvature_lower_bound(space, config.options.get("vertex"))
    path = write_curvature(config.output_dir, report)
    _summary("Curvature", {"vertices": len(report.vertices), "global K": report.global_K,
                           "isolated": len(report.isolated), "table": str(path)})
    return 0

# -----------------------------------------------------------------------------
# Verification
# -----------------------------------------------------------------------------

def _verify_harnack(config: RunConfig, space: DiscreteMMS) -> List[EstimateReport]:
    u = _field(config, "field", "--field", space, required=True)
    f = _field(config, "f_file", "--f-file", space)
    estimate = harnack_supersolution if config.options.get("side") == "super" else harnack_subsolution
    return [estimate(space, u, config.options.get("vertex", 0), config.options.get("p", 2.0),
                     config.options.get("q", 2.0), 0.0 if f is None else f, config.options.get("g", 0.0),
                     config.harnack)]


def _load_level(space_ref: str, field_path: str) -> Tuple[DiscreteMMS, np.ndarray]:
    """A refinement level: generator string or space file, plus a field file."""
    space = read_space(space_ref) if Path(space_ref).exists() else from_generator_string(space_ref)
    if not Path(field_path).exists():
        raise UsageError(f"--level: {field_path} does not exist", {"flag": "--level"})
    return space, read_field(field_path, space.n)


def _verify_holder(config: RunConfig, space: DiscreteMMS) -> List[EstimateReport]:
    u = _field(config, "field", "--field", space, required=True)
    levels = [_load_level(s, f) for s, f in config.options.get("level") or []]
    spaces = [s for s, _ in levels] + [space]
    fields = [v for _, v in levels] + [u]
    regions = [None] * len(levels) + [_ints(config, "region", "--region")]
    fit = holder_exponent_fit(spaces, fields, regions)
    lip = lipschitz_constant(space, u)
    rows = {**fit.model_dump(exclude={"level_exponents"}), "lipschitz": lip.constant,
            "max_gradient_modulus": lip.max_gradient_modulus, "levels": len(spaces),
            "level_exponents": ["nan" if a is None else format(a, ".17g") for a in fit.level_exponents]}
    atomic_write_text(config.output_dir / "holder.txt", format_manifest(rows))
    _summary("Holder / Lipschitz", rows)
    return []


def _verify_bochner(config: RunConfig, space: DiscreteMMS) -> List[EstimateReport]:
    raw = str(config.options.get("K", "auto"))
    if raw == "auto":
        curvature = curvature_lower_bound(space)
        write_curvature(config.output_dir, curvature)
        K = curvature.global_K
        console.print(f"[info]global K = {K:.12g} (curvature pencil)[/info]")
    else:
        K = _floats(raw, "--K")[0]
    reports = [bochner_report(space, K)]
    u = _field(config, "field", "--field", space)
    if u is not None:
        reports.append(bochner_energy_check(space, u, K))
    return reports


def _verify_second_order(config: RunConfig, space: DiscreteMMS) -> List[EstimateReport]:
    u = _field(config, "field", "--field", space, required=True)
    f = _field(config, "f_file", "--f-file", space)
    return [second_order_check(space, u, config.options.get("p", 2.0), f,
                               config.solver.fixedpoint.final_tolerance)]


def _verify_max_principle(config: RunConfig, space: DiscreteMMS) -> List[EstimateReport]:
    u = _field(config, "field", "--field", space, required=True)
    boundary = _ints(config, "boundary", "--boundary")
    if not boundary:
        raise UsageError("--boundary is required for 'verify max-principle'", {"flag": "--boundary"})
    return [maximum_principle_report(space, u, boundary)]


def _verify_poincare(config: RunConfig, space: DiscreteMMS) -> List[EstimateReport]:
    mode = EigenMode(config.options.get("mode", EigenMode.NEUMANN.value))
    boundary = _ints(config, "boundary", "--boundary") or []
    result = poincare_constant(space, config.options.get("p", 2.0), mode, boundary, config.solver)
    rows = {"mode": mode.value, "p": result.p, "constant": result.constant, "eigenvalue": result.eigenvalue,
            "dense_eigenvalue": result.dense_eigenvalue, "cross_check_gap": result.cross_check_gap}
    if result.notes:
        rows["notes"] = "; ".join(result.notes)
    atomic_write_text(config.output_dir / "poincare.txt", format_manifest(rows))
    _summary("Poincare", rows)
    return []


def _doubling(config: RunConfig, space: DiscreteMMS):
    cap = config.options.get("radius_cap") or space.diameter / 2.0
    radii = _floats(config.options["radii"], "--radii") if config.options.get("radii") else \
        [cap / 8.0, cap / 4.0, cap / 2.0, cap]
    return doubling_estimates(space, cap, radii, _ints(config, "centers", "--centers"), config.seed)


def _verify_sobolev(config: RunConfig, space: DiscreteMMS) -> List[EstimateReport]:
    raw = str(config.options.get("s", "auto"))
    if raw == "auto":
        doubling = _doubling(config, space)
        if doubling.fitted_dimension_s is None:
            raise UsageError("--s auto: the doubling fit is degenerate on this space; pass --s", {"flag": "--s"})
        s = doubling.fitted_dimension_s
    else:
        s = _floats(raw, "--s")[0]
    return [sobolev_probe(space, config.options.get("p", 2.0), s, config.options.get("vertex", 0),
                          config.harnack.radius, config.harnack.dilation, config.seed)]


def _verify_doubling(config: RunConfig, space: DiscreteMMS) -> List[EstimateReport]:
    rows = _doubling(config, space).model_dump()
    atomic_write_text(config.output_dir / "doubling.txt", format_manifest(rows))
    _summary("Doubling", rows)
    return []


VERIFIERS: Dict[str, Callable[[RunConfig, DiscreteMMS], List[EstimateReport]]] = {
    "harnack": _verify_harnack,
    "holder": _verify_holder,
    "bochner": _verify_bochner,
    "second-order": _verify_second_order,
    "max-principle": _verify_max_principle,
    "poincare": _verify_poincare,
    "sobolev": _verify_sobolev,
    "doubling": _verify_doubling,
}


def cmd_verify(config: RunConfig) -> int:
    space = load_space(config)
    reports = VERIFIERS[config.action](config, space)
    if reports:
        atomic_write_text(config.output_dir / "reports.txt", format_reports(reports))
        _report_table(reports)
        failed = [r.name for r in reports if not r.passed and not r.degenerate]
        if failed:
            console.print(f"[warning]Estimates above their ceiling or failing their check: {', '.join(failed)}[/warning]")
    return 0


def cmd_sweep(config: RunConfig) -> int:
    spaces = [s.strip() for s in str(config.options["spaces"]).split(",") if s.strip()]
    ps = _floats(config.options.get("ps", "2"), "--ps")
    for p in ps:
        check_exponent(p)
    jobs = sweep_jobs(spaces, ps, _floats(config.options.get("eps0s", "1"), "--eps0s"),
                      [m.strip() for m in str(config.options.get("methods", "")).split(",") if m.strip()])
    result = run_sweep(jobs, config.solver, console, config.options.get("threads"))
    atomic_write_text(config.output_dir / "sweep.tsv", format_sweep_table(result.rows))
    msg = f"[bold green]Sweep complete![/bold green]\n{len(result.rows)} rows written to {config.output_dir / 'sweep.tsv'}"
    if result.failed_jobs:
        atomic_write_text(config.output_dir / "failed.txt",
                          "".join(f"{j['job']}\t{j['error']}\n" for j in result.failed_jobs))
        msg += f"\n[bold red]Failures: {len(result.failed_jobs)}[/bold red]"
    console.print(Panel(msg, title="Sweep", border_style="green" if not result.failed_jobs else "red"))
    return 1 if result.failed_jobs else 0


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "space": cmd_space,
    "solve": cmd_solve,
    "eigen": cmd_eigen,
    "capacity": cmd_capacity,
    "curvature": cmd_curvature,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}

# -----------------------------------------------------------------------------
# Entry points
# -----------------------------------------------------------------------------

def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_time=False, show_path=verbose)],
        force=True,
    )


def run(config: RunConfig) -> int:
    ensure_output_dir(config.output_dir)
    write_manifest(config.output_dir, config.manifest())
    logger.info(f"Running '{config.command}' into {config.output_dir}")
    return COMMANDS[config.command](config)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        config = build_run_config(args)
    except USAGE_ERRORS as e:
        err_console.print(f"[error]Usage error: {e}[/error]")
        return 2
    try:
        return run(config)
    except USAGE_ERRORS as e:
        err_console.print(f"[error]Usage error: {e}[/error]")
        return 2
    except PlapLabError as e:
        write_diagnostics(config.output_dir, e)
        err_console.print(f"[error]{type(e).__name__}: {e}[/error]")
        err_console.print(f"[dim]Diagnostics written to {config.output_dir / 'errors.txt'}[/dim]")
        return 1


def start() -> None:
    sys.exit(main())
