"""Command-line front end.

Subcommands: ``generate`` (random problem files), ``solve`` (single run with
trace export, plus the 2-D demonstration), ``sweep`` (parameter grid search),
``compare`` (multi- vs mono-penalty statistics) and ``pca`` (projection of a
sweep's solution cloud).  Every command writes a run manifest next to its
primary output; outputs are byte-identical across re-runs at parallelism 1.

Exit codes: 0 success, 1 usage or validation error, 2 numerical failure,
3 solver hit its outer iteration cap without converging.

The environment variable ``UNMIX_OUTPUT_DIR`` sets the directory for outputs
given as bare file names.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib import format as _npy_format

from . import __version__
from .analysis import PointCloud, feasible_cloud, pca_project, write_coords_csv
from .errors import NumericalError
from .experiments import (
    GridSpec,
    ProblemSpec,
    compare_multi_mono,
    generate_problem,
    grid_search,
    write_results_csv,
)
from .linalg import DenseOperator, MeasurementProblem, load_problem, save_problem
from .solver import INF, RegParams, SolutionPair, SolveConfig, SolveTrace, solve, write_trace_jsonl

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_NO_CONVERGENCE = 3

_DEMO_Y = (0.3, 1.35)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed_list: list = field(default_factory=list)
    output_paths: list = field(default_factory=list)
    tool_version: str = __version__
    wall_clock_seconds: float = 0.0


def _jsonable(value):
    if isinstance(value, float):
        if value == INF:
            return "inf"
        if value == -INF:
            return "-inf"
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {value!r}")


def _write_manifest(primary_out: Path, manifest: RunManifest) -> Path:
    path = primary_out.with_name(primary_out.name + ".manifest.json")
    path.write_text(json.dumps(asdict(manifest), default=_jsonable, indent=2))
    return path


def _out_path(name: str) -> Path:
    p = Path(name)
    if p.is_absolute() or p.parent != Path("."):
        return p
    return Path(os.environ.get("UNMIX_OUTPUT_DIR", ".")) / p


def _parse_q(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return INF
    try:
        q = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid q: {text!r}")
    if q < 2.0:
        raise argparse.ArgumentTypeError("q must be >= 2 or 'inf'")
    return q


def _parse_p(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid p: {text!r}")
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError("p must lie in [0, 1]")
    return p


def _parse_value_list(text: str, parse_one):
    text = text.strip()
    if not text:
        return []
    return [parse_one(part) for part in text.split(",")]


def save_solution_bundle(path, results, p: float, q: float) -> None:
    """Deterministic npz-compatible archive of a sweep's solution vectors."""
    ok = [r for r in results if not r.failed and r.solution is not None]
    n = ok[0].solution.u.shape[0] if ok else 0
    arrays = {
        "p": np.float64(p),
        "q": np.float64(q),
        "alpha": np.array([r.alpha for r in ok]),
        "beta": np.array([r.beta for r in ok]),
        "feasible": np.array([r.feasible for r in ok], dtype=bool),
        "ae": np.array([r.ae for r in ok]),
        "sd": np.array([r.sd for r in ok], dtype=np.int64),
        "u": np.array([r.solution.u for r in ok]).reshape(len(ok), n),
        "v": np.array([r.solution.v for r in ok]).reshape(len(ok), n),
    }
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name, arr in arrays.items():
            buf = io.BytesIO()
            _npy_format.write_array(buf, np.asarray(arr))
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


def _solution_dict(pair: SolutionPair, trace: SolveTrace) -> dict:
    return {
        "u": pair.u.tolist(),
        "v": pair.v.tolist(),
        "support_u": sorted(pair.support_u),
        "zero_set": sorted(pair.zero_set),
        "converged": trace.converged,
        "iterations": trace.iterations,
        "j_final": trace.j_values[-1] if trace.j_values else None,
    }


def cmd_generate(args) -> int:
    t0 = time.perf_counter()
    spec = ProblemSpec(m=args.m, n=args.n, sparsity=args.sparsity,
                       amplitude_range=(args.amp_min, args.amp_max),
                       noise_norm=args.noise, seed=args.seed,
                       min_magnitude=args.min_magnitude)
    problem = generate_problem(spec, target_norm=args.target_norm)
    out = _out_path(args.out)
    save_problem(out, problem)
    manifest = RunManifest(
        command="generate",
        parameters={**asdict(spec), "target_norm": args.target_norm},
        seed_list=[args.seed], output_paths=[str(out)],
        wall_clock_seconds=time.perf_counter() - t0)
    _write_manifest(out, manifest)
    print(f"wrote {out}: m={spec.m} N={spec.n} sparsity={spec.sparsity} "
          f"noise_norm={spec.noise_norm} seed={spec.seed} "
          f"scale_factor={problem.scale_factor:.6g}")
    return EXIT_OK


def _demo_problem() -> MeasurementProblem:
    return MeasurementProblem(op=DenseOperator.from_matrix(np.eye(2)),
                              y=np.array(_DEMO_Y))


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    if args.demo_2d:
        problem = _demo_problem()
        params = RegParams(p=1.0, q=INF, alpha=0.4, beta=0.5, epsilon=0.0)
        stop_tol = args.stop_tol if args.stop_tol is not None else 1e-5
        config = SolveConfig(inner_u_iters=args.L, inner_v_iters=args.M,
                             max_outer=min(args.max_outer, 100),
                             stop_tol=stop_tol, record_trace=True)
    else:
        if args.problem is None:
            raise ValueError("--problem is required unless --demo-2d is given")
        problem = load_problem(args.problem)
        params = RegParams(p=args.p, q=args.q, alpha=args.alpha, beta=args.beta,
                           epsilon=args.epsilon)
        stop_tol = args.stop_tol if args.stop_tol is not None else 1e-10
        config = SolveConfig(inner_u_iters=args.L, inner_v_iters=args.M,
                             max_outer=args.max_outer, stop_tol=stop_tol,
                             record_trace=True)
    pair, trace = solve(problem, params, config)
    out = _out_path(args.out_solution)
    out.write_text(json.dumps(_solution_dict(pair, trace)))
    trace_out = _out_path(args.out_trace)
    write_trace_jsonl(trace_out, trace)
    manifest = RunManifest(
        command="solve",
        parameters={"problem": args.problem, "demo_2d": args.demo_2d,
                    "p": params.p, "q": params.q, "alpha": params.alpha,
                    "beta": params.beta, "epsilon": params.epsilon,
                    **asdict(config)},
        output_paths=[str(out), str(trace_out)],
        wall_clock_seconds=time.perf_counter() - t0)
    _write_manifest(out, manifest)
    status = "converged" if trace.converged else "hit max_outer"
    print(f"{status} after {trace.iterations} outer iterations, "
          f"J = {trace.j_values[-1]:.6g}; solution -> {out}, trace -> {trace_out}")
    return EXIT_OK if trace.converged else EXIT_NO_CONVERGENCE


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    problem = load_problem(args.problem)
    grid = GridSpec() if args.grid_default else GridSpec(
        alpha0=args.alpha0, beta0=args.beta0, ratio=args.ratio, count=args.count)
    config = SolveConfig(inner_u_iters=args.L, inner_v_iters=args.M,
                         max_outer=args.max_outer, stop_tol=args.stop_tol)
    results = grid_search(problem, args.p, args.q, grid, config,
                          epsilon=args.epsilon,
                          feasibility_threshold=args.feasibility_threshold,
                          workers=args.workers)
    out = _out_path(args.out)
    write_results_csv(out, ((args.problem_id, r) for r in results))
    outputs = [str(out)]
    if args.out_solutions:
        bundle = _out_path(args.out_solutions)
        save_solution_bundle(bundle, results, args.p, args.q)
        outputs.append(str(bundle))
    manifest = RunManifest(
        command="sweep",
        parameters={"problem": args.problem, "problem_id": args.problem_id,
                    "p": args.p, "q": args.q, "epsilon": args.epsilon,
                    "feasibility_threshold": args.feasibility_threshold,
                    "workers": args.workers, "grid": asdict(grid),
                    "config": asdict(config)},
        output_paths=outputs, wall_clock_seconds=time.perf_counter() - t0)
    _write_manifest(out, manifest)
    n_failed = sum(r.failed for r in results)
    n_feasible = sum(r.feasible for r in results)
    print(f"{len(results)} cells ({n_feasible} feasible, {n_failed} failed) -> {out}")
    return EXIT_OK


def _stats_to_json(stats) -> dict:
    def pq_key(k):
        return f"p={k[0]!r},q={k[1]!r}"

    return {
        "multi_mean_ae": {pq_key(k): v for k, v in stats.multi_mean_ae.items()},
        "multi_mean_sd": {pq_key(k): v for k, v in stats.multi_mean_sd.items()},
        "mono_mean_ae": {f"p={k!r}": v for k, v in stats.mono_mean_ae.items()},
        "mono_mean_sd": {f"p={k!r}": v for k, v in stats.mono_mean_sd.items()},
        "prob_ae_multi_better_or_equal":
            {pq_key(k): v for k, v in stats.prob_ae_multi_better_or_equal.items()},
        "prob_sd_multi_better_or_equal":
            {pq_key(k): v for k, v in stats.prob_sd_multi_better_or_equal.items()},
        "multi_best": {pq_key(k): v for k, v in stats.multi_best.items()},
        "mono_best": {f"p={k!r}": v for k, v in stats.mono_best.items()},
    }


def cmd_compare(args) -> int:
    t0 = time.perf_counter()
    seeds = list(range(args.seed, args.seed + args.problems))
    problems = []
    for seed in seeds:
        spec = ProblemSpec(m=args.m, n=args.n, sparsity=args.sparsity,
                           amplitude_range=(args.amp_min, args.amp_max),
                           noise_norm=args.noise, seed=seed)
        problems.append(generate_problem(spec, target_norm=args.target_norm))
    grid = GridSpec(alpha0=args.alpha0, beta0=args.beta0,
                    ratio=args.ratio, count=args.count)
    config = SolveConfig(inner_u_iters=args.L, inner_v_iters=args.M,
                         max_outer=args.max_outer, stop_tol=args.stop_tol)
    p_values = _parse_value_list(args.p_values, _parse_p)
    q_values = _parse_value_list(args.q_values, _parse_q)
    if not p_values:
        raise ValueError("at least one p value is required")

    def progress(p, q, problem_index):
        print(f"  p={p} q={q} problem {problem_index + 1}/{len(problems)}",
              file=sys.stderr, flush=True)

    stats = compare_multi_mono(problems, p_values, q_values, grid,
                               config=config, workers=args.workers,
                               progress=progress)
    out = _out_path(args.out)
    out.write_text(json.dumps(_stats_to_json(stats), default=_jsonable, indent=2))
    manifest = RunManifest(
        command="compare",
        parameters={"problems": args.problems, "m": args.m, "n": args.n,
                    "sparsity": args.sparsity, "noise": args.noise,
                    "p_values": [repr(p) for p in p_values],
                    "q_values": [repr(q) for q in q_values],
                    "workers": args.workers, "grid": asdict(grid),
                    "config": asdict(config)},
        seed_list=seeds, output_paths=[str(out)],
        wall_clock_seconds=time.perf_counter() - t0)
    _write_manifest(out, manifest)
    print(f"comparison over {args.problems} problems -> {out}")
    return EXIT_OK


def cmd_pca(args) -> int:
    t0 = time.perf_counter()
    with np.load(args.solutions) as bundle:
        vectors = bundle["u"] if args.component == "u" else bundle["v"]
        alphas = bundle["alpha"]
        betas = bundle["beta"]
        feasible = bundle["feasible"]
    keep = feasible if args.feasible_only else np.ones(len(alphas), dtype=bool)
    labels = [{"alpha": float(a), "beta": float(b), "feasible": bool(f)}
              for a, b, f in zip(alphas[keep], betas[keep], feasible[keep])]
    cloud = PointCloud(points=vectors[keep], labels=labels)
    if cloud.is_empty:
        raise ValueError("no points to project (no feasible solutions in the bundle)")
    projection = pca_project(cloud, dims=args.dims)
    truth = None
    if args.problem:
        problem = load_problem(args.problem)
        truth = problem.truth_u if args.component == "u" else problem.truth_v
    out = _out_path(args.out)
    write_coords_csv(out, cloud, projection, truth=truth)
    manifest = RunManifest(
        command="pca",
        parameters={"solutions": args.solutions, "component": args.component,
                    "feasible_only": args.feasible_only, "dims": args.dims,
                    "problem": args.problem},
        output_paths=[str(out)], wall_clock_seconds=time.perf_counter() - t0)
    _write_manifest(out, manifest)
    print(f"{cloud.points.shape[0]} points projected -> {out} "
          f"(explained variance {projection.explained_variance.tolist()})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="unmix",
                     description="sparse signal / bounded noise unmixing toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="generate a random problem file")
    g.add_argument("--m", type=int, default=100)
    g.add_argument("--n", type=int, default=256)
    g.add_argument("--sparsity", type=int, default=7)
    g.add_argument("--noise", type=float, default=0.7)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--amp-min", type=float, default=-3.0)
    g.add_argument("--amp-max", type=float, default=3.0)
    g.add_argument("--min-magnitude", type=float, default=0.0)
    g.add_argument("--target-norm", type=float, default=0.99)
    g.add_argument("--out", default="problem.json")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run the alternating solver on a problem file")
    s.add_argument("--problem")
    s.add_argument("--p", type=_parse_p, default=0.5)
    s.add_argument("--q", type=_parse_q, default=2.0)
    s.add_argument("--alpha", type=float, default=0.0009)
    s.add_argument("--beta", type=float, default=0.0005)
    s.add_argument("--epsilon", type=float, default=0.0)
    s.add_argument("--L", type=int, default=20)
    s.add_argument("--M", type=int, default=20)
    s.add_argument("--max-outer", type=int, default=5000)
    s.add_argument("--stop-tol", type=float, default=None,
                   help="default 1e-10 (1e-5 for the 2-D demo)")
    s.add_argument("--demo-2d", action="store_true",
                   help="solve the built-in 2-D example (identity operator)")
    s.add_argument("--out-solution", default="solution.json")
    s.add_argument("--out-trace", default="trace.jsonl")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="grid search over (alpha, beta)")
    w.add_argument("--problem", required=True)
    w.add_argument("--problem-id", type=int, default=0)
    w.add_argument("--p", type=_parse_p, default=0.5)
    w.add_argument("--q", type=_parse_q, default=2.0)
    w.add_argument("--epsilon", type=float, default=0.0)
    w.add_argument("--alpha0", type=float, default=0.0009)
    w.add_argument("--beta0", type=float, default=0.0005)
    w.add_argument("--ratio", type=float, default=1.25)
    w.add_argument("--count", type=int, default=30)
    w.add_argument("--grid-default", action="store_true",
                   help="force the reference grid regardless of other grid flags")
    w.add_argument("--L", type=int, default=20)
    w.add_argument("--M", type=int, default=20)
    w.add_argument("--max-outer", type=int, default=50)
    w.add_argument("--stop-tol", type=float, default=1e-6)
    w.add_argument("--feasibility-threshold", type=float, default=0.1)
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--out", default="results.csv")
    w.add_argument("--out-solutions", default="solutions.npz")
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("compare", help="multi- vs mono-penalty statistics")
    c.add_argument("--problems", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--m", type=int, default=100)
    c.add_argument("--n", type=int, default=256)
    c.add_argument("--sparsity", type=int, default=7)
    c.add_argument("--noise", type=float, default=0.7)
    c.add_argument("--amp-min", type=float, default=-3.0)
    c.add_argument("--amp-max", type=float, default=3.0)
    c.add_argument("--target-norm", type=float, default=0.99)
    c.add_argument("--p-values", default="0.3,0.5")
    c.add_argument("--q-values", default="2")
    c.add_argument("--alpha0", type=float, default=0.0009)
    c.add_argument("--beta0", type=float, default=0.0005)
    c.add_argument("--ratio", type=float, default=1.25)
    c.add_argument("--count", type=int, default=30)
    c.add_argument("--L", type=int, default=20)
    c.add_argument("--M", type=int, default=20)
    c.add_argument("--max-outer", type=int, default=50)
    c.add_argument("--stop-tol", type=float, default=1e-6)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--out", default="comparison.json")
    c.set_defaults(func=cmd_compare)

    a = sub.add_parser("pca", help="project a sweep's solutions to 2-D")
    a.add_argument("--solutions", required=True, help="npz bundle from sweep")
    a.add_argument("--component", choices=("u", "v"), default="u")
    a.add_argument("--feasible-only", action="store_true")
    a.add_argument("--dims", type=int, default=2)
    a.add_argument("--problem", help="problem file providing the ground truth")
    a.add_argument("--out", default="coords.csv")
    a.set_defaults(func=cmd_pca)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
