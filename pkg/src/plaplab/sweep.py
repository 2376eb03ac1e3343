"""
Cartesian parameter sweeps: spaces x p x eps0 x method, one Neumann p-Poisson
solve per job, run on a thread pool and aggregated in job-key order.
"""
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn

from src.plaplab.calculus.gamma import p_laplacian
from src.plaplab.config import sweep_threads
from src.plaplab.exceptions import PlapLabError, UsageError
from src.plaplab.fixedpoint.pipeline import epsilon_continuation, second_order_surrogate, w1p_norm
from src.plaplab.schemas import SolverConfig
from src.plaplab.space.generators import from_generator_string
from src.plaplab.space.mms import DiscreteMMS
from src.plaplab.variational.problems import ProblemKind, make_problem
from src.plaplab.variational.solvers import solve_poisson_neumann

logger = logging.getLogger(__name__)

METHODS = ("variational", "fixedpoint")
SWEEP_COLUMNS = ("space", "p", "eps0", "method", "iterations", "residual", "w1p_norm", "surrogate",
                 "inner_fallbacks", "newton_corrections")


class SweepJob(BaseModel):
    space: str
    p: float = Field(gt=1.0)
    eps0: float = Field(gt=0.0)
    method: str

    @property
    def key(self) -> Tuple[str, float, float, str]:
        return (self.space, self.p, self.eps0, self.method)

    @property
    def label(self) -> str:
        return f"{self.space} p={self.p:g} eps0={self.eps0:g} {self.method}"


class SweepResult(BaseModel):
    rows: List[Dict[str, object]] = Field(default_factory=list)
    failed_jobs: List[Dict[str, str]] = Field(default_factory=list)


def sweep_jobs(spaces: Sequence[str], ps: Sequence[float], eps0s: Sequence[float],
               methods: Sequence[str] = METHODS) -> List[SweepJob]:
    for method in methods:
        if method not in METHODS:
            raise UsageError(f"Unknown sweep method '{method}'; choose from {', '.join(METHODS)}",
                             {"method": method})
    jobs = [SweepJob(space=s, p=p, eps0=e, method=m) for s, p, e, m in itertools.product(spaces, ps, eps0s, methods)]
    return sorted(jobs, key=lambda j: j.key)


def sweep_forcing(space: DiscreteMMS, seed: int) -> np.ndarray:
    """Seeded zero-mean right-hand side shared by every job on the same space."""
    f = np.random.default_rng(seed).standard_normal(space.n)
    return f - space.mean(f)


def run_job(job: SweepJob, config: SolverConfig) -> Dict[str, object]:
    space = from_generator_string(job.space)
    f = sweep_forcing(space, config.seed)
    if job.method == "variational":
        spec = make_problem(kind=ProblemKind.POISSON_NEUMANN, p=job.p, f=f.tolist())
        result = solve_poisson_neumann(space, spec, config)
        u, iterations = result.solution, result.iterations
        counts = {"inner_fallbacks": 0, "newton_corrections": 0}
    else:
        fp = config.fixedpoint.model_copy(update={"eps0": job.eps0,
                                                  "eps_min": min(config.fixedpoint.eps_min, job.eps0)})
        u, trace = epsilon_continuation(space, f, job.p, config.model_copy(update={"fixedpoint": fp}))
        iterations = trace.outer_iterations
        counts = {"inner_fallbacks": trace.fallbacks, "newton_corrections": trace.newton_corrections}
    residual = space.l2_norm(p_laplacian(space, u, job.p, 0.0) - f)
    return {
        "space": job.space, "p": job.p, "eps0": job.eps0, "method": job.method,
        "iterations": iterations, "residual": residual,
        "w1p_norm": w1p_norm(space, u, job.p), "surrogate": second_order_surrogate(space, u, job.p),
        **counts,
    }


def run_sweep(jobs: Sequence[SweepJob], config: Optional[SolverConfig] = None, console: Optional[Console] = None,
              threads: Optional[int] = None) -> SweepResult:
    config = config or SolverConfig()
    threads = threads or sweep_threads()
    result = SweepResult()
    logger.info(f"Sweep: {len(jobs)} jobs on {threads} threads")

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        console=console,
        disable=console is None,
    ) as progress:
        task = progress.add_task("[cyan]Running sweep...", total=len(jobs))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(run_job, job, config): job for job in jobs}
            for future in as_completed(futures):
                job = futures[future]
                try:
                    result.rows.append(future.result())
                except PlapLabError as e:
                    logger.error(f"Sweep job failed: {job.label}: {e}")
                    result.failed_jobs.append({"job": job.label, "error": str(e)})
                progress.update(task, description=f"[cyan]Done: {job.label}")
                progress.advance(task)

    result.rows.sort(key=lambda r: (r["space"], r["p"], r["eps0"], r["method"]))
    result.failed_jobs.sort(key=lambda r: r["job"])
    return result


def _cell(value: object) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def format_sweep_table(rows: Sequence[Dict[str, object]]) -> str:
    lines = ["\t".join(SWEEP_COLUMNS)]
    lines.extend("\t".join(_cell(row[c]) for c in SWEEP_COLUMNS) for row in rows)
    return "\n".join(lines) + "\n"
