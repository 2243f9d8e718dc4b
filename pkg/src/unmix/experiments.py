"""Compressed-sensing experiment harness.

Generates random sparse-plus-noise problems, sweeps regularization parameter
grids for the alternating solver, filters feasible solutions, and compares
against the single-penalty baseline using the approximation-error and
support-symmetric-difference metrics.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError
from .linalg import DenseOperator, MeasurementProblem, normalize_problem
from .solver import INF, RegParams, SolutionPair, SolveConfig, mono_solve, solve

DEFAULT_FEASIBILITY_THRESHOLD = 0.1


@dataclass(frozen=True)
class ProblemSpec:
    """Recipe for one random unmixing problem (Gaussian operator, sparse
    signal with uniform amplitudes, bounded noise of fixed norm)."""

    m: int = 100
    n: int = 256
    sparsity: int = 7
    amplitude_range: tuple = (-3.0, 3.0)
    noise_norm: float = 0.7
    seed: int = 0
    min_magnitude: float = 0.0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("problem dimensions must be positive")
        if not (1 <= self.sparsity <= self.n):
            raise ValueError(f"sparsity must lie in [1, {self.n}], got {self.sparsity}")
        lo, hi = self.amplitude_range
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError("amplitude_range must be a finite nonempty interval")
        if not (np.isfinite(self.noise_norm) and self.noise_norm > 0.0):
            raise ValueError("noise_norm must be positive")
        if self.min_magnitude < 0.0:
            raise ValueError("min_magnitude must be nonnegative")
        if self.min_magnitude >= max(abs(lo), abs(hi)):
            raise ValueError("min_magnitude excludes the whole amplitude range")


@dataclass(frozen=True)
class GridSpec:
    """Geometric parameter grid: value_i = start * ratio**i for i = 0..count."""

    alpha0: float = 0.0009
    beta0: float = 0.0005
    ratio: float = 1.25
    count: int = 30

    def __post_init__(self):
        if not (self.alpha0 > 0.0 and self.beta0 > 0.0):
            raise ValueError("grid anchors must be positive")
        if not self.ratio > 1.0:
            raise ValueError("grid ratio must exceed 1")
        if self.count < 0:
            raise ValueError("count must be nonnegative")

    def alphas(self) -> np.ndarray:
        return self.alpha0 * self.ratio ** np.arange(self.count + 1, dtype=np.float64)

    def betas(self) -> np.ndarray:
        return self.beta0 * self.ratio ** np.arange(self.count + 1, dtype=np.float64)


#: Grid used throughout the reference experiments.
PAPER_GRID = GridSpec()


@dataclass(frozen=True)
class TraceSummary:
    j_final: float
    iterations: int
    converged: bool


@dataclass
class GridResult:
    p: float
    q: float
    alpha: float
    beta: float
    solution: SolutionPair | None
    ae: float
    sd: int
    feasible: bool
    residual_norm: float
    trace_summary: TraceSummary | None
    failed: bool = False


@dataclass
class ComparisonStats:
    """Mean best metrics per penalty combination plus head-to-head
    better-or-equal probabilities of the multi-penalty solver."""

    multi_mean_ae: dict = field(default_factory=dict)
    multi_mean_sd: dict = field(default_factory=dict)
    mono_mean_ae: dict = field(default_factory=dict)
    mono_mean_sd: dict = field(default_factory=dict)
    prob_ae_multi_better_or_equal: dict = field(default_factory=dict)
    prob_sd_multi_better_or_equal: dict = field(default_factory=dict)
    multi_best: dict = field(default_factory=dict)
    mono_best: dict = field(default_factory=dict)
    multi_feasible_counts: dict = field(default_factory=dict)


def generate_problem(spec: ProblemSpec, target_norm: float = 0.99) -> MeasurementProblem:
    """Draw one problem from a counter-based generator keyed by the seed.

    The operator has i.i.d. standard normal entries; the data vector is
    formed from the raw operator and then scaled jointly with it so the
    spectral norm equals `target_norm`.  Identical specs give bit-identical
    problems.
    """
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    t_raw = rng.standard_normal((spec.m, spec.n))
    support = rng.choice(spec.n, size=spec.sparsity, replace=False)
    lo, hi = spec.amplitude_range
    values = rng.uniform(lo, hi, size=spec.sparsity)
    if spec.min_magnitude > 0.0:
        while True:
            small = np.abs(values) < spec.min_magnitude
            if not np.any(small):
                break
            values[small] = rng.uniform(lo, hi, size=int(np.sum(small)))
    truth_u = np.zeros(spec.n)
    truth_u[support] = values
    truth_v = rng.uniform(-1.0, 1.0, size=spec.n)
    truth_v *= spec.noise_norm / np.linalg.norm(truth_v)
    y_raw = t_raw @ (truth_u + truth_v)
    raw = MeasurementProblem(op=DenseOperator.from_matrix(t_raw), y=y_raw,
                             truth_u=truth_u, truth_v=truth_v)
    return normalize_problem(raw, target_norm)


def support_set(u) -> frozenset:
    """Indices with magnitude above 1e-8 * max(1, peak magnitude)."""
    u = np.asarray(u, dtype=np.float64)
    eps = 1e-8 * max(1.0, float(np.max(np.abs(u))) if u.size else 1.0)
    return frozenset(int(i) for i in np.nonzero(np.abs(u) > eps)[0])


def metric_ae(u, u_true) -> float:
    """Euclidean distance to the reference vector."""
    u = np.asarray(u, dtype=np.float64)
    u_true = np.asarray(u_true, dtype=np.float64)
    if u.shape != u_true.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {u_true.shape}")
    return float(np.linalg.norm(u - u_true))


def metric_sd(u, u_true) -> int:
    """Cardinality of the symmetric difference of the two supports."""
    u = np.asarray(u, dtype=np.float64)
    u_true = np.asarray(u_true, dtype=np.float64)
    if u.shape != u_true.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {u_true.shape}")
    return len(support_set(u) ^ support_set(u_true))


def _run_cell(problem: MeasurementProblem, p: float, q: float, alpha: float,
              beta: float, epsilon: float, config: SolveConfig,
              truth_support_count: int, feasibility_threshold: float) -> GridResult:
    params = RegParams(p=p, q=q, alpha=alpha, beta=beta, epsilon=epsilon)
    try:
        pair, trace = solve(problem, params, config)
    except NumericalError:
        return GridResult(p=p, q=q, alpha=alpha, beta=beta, solution=None,
                          ae=float("nan"), sd=-1, feasible=False,
                          residual_norm=float("nan"), trace_summary=None, failed=True)
    residual = float(np.linalg.norm(
        problem.op.entries @ (pair.u + pair.v) - problem.y))
    feasible = (len(support_set(pair.u)) <= truth_support_count
                and residual < feasibility_threshold)
    return GridResult(
        p=p, q=q, alpha=alpha, beta=beta, solution=pair,
        ae=metric_ae(pair.u, problem.truth_u),
        sd=metric_sd(pair.u, problem.truth_u),
        feasible=feasible, residual_norm=residual,
        trace_summary=TraceSummary(j_final=trace.j_values[-1],
                                   iterations=trace.iterations,
                                   converged=trace.converged),
    )


_POOL_STATE: dict = {}


def _pool_init(problem, p, q, epsilon, config, truth_support_count, feasibility_threshold):
    _POOL_STATE.update(problem=problem, p=p, q=q, epsilon=epsilon, config=config,
                       truth_support_count=truth_support_count,
                       feasibility_threshold=feasibility_threshold)


def _pool_cell(cell):
    alpha, beta = cell
    s = _POOL_STATE
    return _run_cell(s["problem"], s["p"], s["q"], alpha, beta, s["epsilon"],
                     s["config"], s["truth_support_count"], s["feasibility_threshold"])


def grid_search(problem: MeasurementProblem, p: float, q: float, grid: GridSpec,
                config: SolveConfig, epsilon: float = 0.0,
                feasibility_threshold: float = DEFAULT_FEASIBILITY_THRESHOLD,
                workers: int = 1) -> list:
    """Cold-start solve for every (alpha_i, beta_j) pair, alpha-major order.

    Solver failures mark the cell failed (nan metrics) without aborting the
    sweep.  Results are returned in deterministic (i, j) order regardless of
    the degree of parallelism.
    """
    if problem.truth_u is None:
        raise ValueError("grid_search requires a problem with ground truth")
    truth_count = len(support_set(problem.truth_u))
    cells = [(float(a), float(b)) for a in grid.alphas() for b in grid.betas()]
    if workers <= 1:
        return [_run_cell(problem, p, q, a, b, epsilon, config, truth_count,
                          feasibility_threshold) for a, b in cells]
    with ProcessPoolExecutor(
            max_workers=workers, initializer=_pool_init,
            initargs=(problem, p, q, epsilon, config, truth_count,
                      feasibility_threshold)) as pool:
        return list(pool.map(_pool_cell, cells, chunksize=8))


def _best_key(result: GridResult, criterion: str):
    primary = result.ae if criterion == "ae" else result.sd
    return (primary, result.sd, result.ae, result.alpha, result.beta)


def best_result(results, criterion: str) -> GridResult:
    """Minimal-criterion cell; ties resolve by smaller SD, then smaller AE,
    then lexicographic (alpha, beta)."""
    if criterion not in ("ae", "sd"):
        raise ValueError(f"criterion must be 'ae' or 'sd', got {criterion!r}")
    usable = [r for r in results if not r.failed]
    if not usable:
        raise ValueError("no usable grid results")
    return min(usable, key=lambda r: _best_key(r, criterion))


def best_parameter_regions(results, criterion: str, top_k: int) -> list:
    """The top_k (alpha, beta) pairs under the best_result ordering."""
    if criterion not in ("ae", "sd"):
        raise ValueError(f"criterion must be 'ae' or 'sd', got {criterion!r}")
    usable = sorted((r for r in results if not r.failed),
                    key=lambda r: _best_key(r, criterion))
    if top_k > len(usable):
        raise ValueError(f"top_k={top_k} exceeds usable result count {len(usable)}")
    return [(r.alpha, r.beta) for r in usable[:top_k]]


def compare_multi_mono(problems, p_values, q_values, grid: GridSpec,
                       mono_grid: GridSpec | None = None,
                       config: SolveConfig | None = None,
                       epsilon: float = 0.0, workers: int = 1,
                       progress=None) -> ComparisonStats:
    """Best-per-grid metrics for the multi-penalty solver on each (p, q) and
    for the single-penalty baseline on each p, plus the fraction of problems
    where the multi-penalty result is at least as good."""
    if not problems:
        raise ValueError("at least one problem is required")
    config = config or SolveConfig(max_outer=50, stop_tol=1e-6)
    mono_grid = mono_grid or grid
    mono_max_iters = config.max_outer * config.inner_u_iters
    stats = ComparisonStats()

    for p in p_values:
        bests = []
        for problem in problems:
            entries = []
            for alpha in mono_grid.alphas():
                u = mono_solve(problem, float(alpha), p,
                               max_iters=mono_max_iters, stop_tol=config.stop_tol)
                entries.append((metric_ae(u, problem.truth_u),
                                metric_sd(u, problem.truth_u)))
            bests.append((min(e[0] for e in entries), min(e[1] for e in entries)))
        stats.mono_best[p] = bests
        stats.mono_mean_ae[p] = float(np.mean([b[0] for b in bests]))
        stats.mono_mean_sd[p] = float(np.mean([b[1] for b in bests]))

    for p in p_values:
        for q in q_values:
            bests = []
            feasible_counts = []
            for k, problem in enumerate(problems):
                results = grid_search(problem, p, q, grid, config, epsilon=epsilon,
                                      workers=workers)
                bests.append((best_result(results, "ae").ae,
                              best_result(results, "sd").sd))
                feasible_counts.append(sum(r.feasible for r in results))
                if progress is not None:
                    progress(p=p, q=q, problem_index=k)
            key = (p, q)
            stats.multi_best[key] = bests
            stats.multi_feasible_counts[key] = feasible_counts
            stats.multi_mean_ae[key] = float(np.mean([b[0] for b in bests]))
            stats.multi_mean_sd[key] = float(np.mean([b[1] for b in bests]))
            mono = stats.mono_best[p]
            n_prob = len(problems)
            stats.prob_ae_multi_better_or_equal[key] = float(
                sum(b[0] <= m[0] for b, m in zip(bests, mono)) / n_prob)
            stats.prob_sd_multi_better_or_equal[key] = float(
                sum(b[1] <= m[1] for b, m in zip(bests, mono)) / n_prob)
    return stats


# --- file formats -----------------------------------------------------------

RESULTS_CSV_HEADER = "problem_id,p,q,alpha,beta,ae,sd,feasible,residual,iters,J_final"


def write_results_csv(path, rows) -> None:
    """`rows` is an iterable of (problem_id, GridResult)."""
    with open(path, "w") as fh:
        fh.write(RESULTS_CSV_HEADER + "\n")
        for problem_id, r in rows:
            ts = r.trace_summary
            fh.write(",".join([
                str(problem_id), repr(r.p), repr(r.q), repr(r.alpha), repr(r.beta),
                repr(r.ae), str(r.sd), str(int(r.feasible)), repr(r.residual_norm),
                str(ts.iterations if ts else 0),
                repr(ts.j_final if ts else float("nan")),
            ]) + "\n")


def _jsonable(value):
    if isinstance(value, float) and value == INF:
        return "inf"
    return value


def write_sweep_manifest(path, spec, grid: GridSpec, config: SolveConfig,
                         seeds, extra: dict | None = None) -> None:
    doc = {
        "spec": asdict(spec) if spec is not None else None,
        "grid": asdict(grid),
        "config": asdict(config),
        "code_version": __version__,
        "seeds": list(seeds),
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, default=_jsonable, indent=2))
