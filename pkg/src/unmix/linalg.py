"""Dense operator plumbing: products, adjoints, spectral norm, rescaling.

The solver requires the measurement operator to be a strict contraction.
Everything here exists to build, check and enforce that condition, and to
move problems in and out of files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import NumericalError

DEFAULT_NORM_TOL = 1e-10
DEFAULT_NORM_MAX_ITERS = 10_000
DEFAULT_TARGET_NORM = 0.99


def _as_readonly(a, shape_hint=None) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if shape_hint is not None and arr.ndim != shape_hint:
        raise ValueError(f"expected {shape_hint}-dimensional array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


def _power_iteration_norm(matrix: np.ndarray, tol: float, max_iters: int) -> float:
    """Largest singular value of `matrix` by power iteration on the Gram operator.

    Deterministic start (normalized all-ones).  Returns 0.0 for the zero
    matrix.  Raises NumericalError when the estimate has not stabilized to
    relative tolerance `tol` within `max_iters` iterations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be positive")
    if not np.any(matrix):
        return 0.0
    n = matrix.shape[1]
    x = np.full(n, 1.0 / np.sqrt(n))
    if not np.any(matrix @ x):
        # all-ones happens to sit in the nullspace; fall back to the
        # coordinate direction with the largest column norm (still deterministic)
        j = int(np.argmax(np.sum(matrix * matrix, axis=0)))
        x = np.zeros(n)
        x[j] = 1.0
    sigma_prev = np.inf
    for _ in range(max_iters):
        z = matrix @ x
        sigma = float(np.linalg.norm(z))
        x = matrix.T @ z
        x /= np.linalg.norm(x)
        if abs(sigma - sigma_prev) <= tol * max(sigma, np.finfo(float).tiny):
            return sigma
        sigma_prev = sigma
    raise NumericalError(
        f"spectral norm estimate did not stabilize within {max_iters} iterations "
        "(ill-conditioned or near-degenerate spectrum)"
    )


@dataclass(frozen=True)
class DenseOperator:
    """A dense m-by-N real matrix together with a certified spectral norm estimate."""

    m: int
    cols: int
    entries: np.ndarray
    spectral_norm_estimate: float

    def __post_init__(self):
        object.__setattr__(self, "entries", _as_readonly(self.entries, shape_hint=2))
        if self.m < 1 or self.cols < 1:
            raise ValueError("operator dimensions must be positive")
        if self.entries.shape != (self.m, self.cols):
            raise ValueError(
                f"entries shape {self.entries.shape} does not match ({self.m}, {self.cols})"
            )
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("operator entries must be finite")
        if not (np.isfinite(self.spectral_norm_estimate) and self.spectral_norm_estimate >= 0):
            raise ValueError("spectral_norm_estimate must be a nonnegative finite real")

    @classmethod
    def from_matrix(cls, matrix, tol: float = DEFAULT_NORM_TOL,
                    max_iters: int = DEFAULT_NORM_MAX_ITERS) -> "DenseOperator":
        arr = np.asarray(matrix, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("matrix must be two-dimensional")
        estimate = _power_iteration_norm(arr, tol, max_iters)
        return cls(m=arr.shape[0], cols=arr.shape[1], entries=arr,
                   spectral_norm_estimate=estimate)


@dataclass(frozen=True)
class MeasurementProblem:
    """Operator, data and (optionally) the ground truth pair that generated it.

    `scale_factor` is the cumulative factor applied to the operator and the
    data during normalization; 1 if none.  Truth vectors live in solution
    space and are never rescaled.
    """

    op: DenseOperator
    y: np.ndarray
    truth_u: np.ndarray | None = None
    truth_v: np.ndarray | None = None
    scale_factor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "y", _as_readonly(self.y, shape_hint=1))
        if self.y.shape != (self.op.m,):
            raise ValueError(f"y has length {self.y.shape[0]}, expected {self.op.m}")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("y must be finite")
        for name in ("truth_u", "truth_v"):
            t = getattr(self, name)
            if t is not None:
                t = _as_readonly(t, shape_hint=1)
                object.__setattr__(self, name, t)
                if t.shape != (self.op.cols,):
                    raise ValueError(f"{name} has length {t.shape[0]}, expected {self.op.cols}")
                if not np.all(np.isfinite(t)):
                    raise ValueError(f"{name} must be finite")
        if not (np.isfinite(self.scale_factor) and self.scale_factor > 0):
            raise ValueError("scale_factor must be a positive real")

    @property
    def n(self) -> int:
        return self.op.cols


def estimate_operator_norm(op: DenseOperator, tol: float = DEFAULT_NORM_TOL,
                           max_iters: int = DEFAULT_NORM_MAX_ITERS) -> float:
    """Re-estimate the largest singular value of `op` (power iteration, deterministic)."""
    return _power_iteration_norm(op.entries, tol, max_iters)


def normalize_problem(problem: MeasurementProblem,
                      target_norm: float = DEFAULT_TARGET_NORM) -> MeasurementProblem:
    """Rescale operator and data jointly so the operator norm equals `target_norm`.

    Returns the input unchanged when the operator norm is already at or below
    the target.  The scaling leaves the solution space untouched, so any
    stored truth vectors remain valid.
    """
    if not (0.0 < target_norm < 1.0):
        raise ValueError("target_norm must lie strictly between 0 and 1")
    sigma = problem.op.spectral_norm_estimate
    if sigma == 0.0:
        raise ValueError("cannot normalize a zero operator")
    if sigma <= target_norm:
        return problem
    s = target_norm / sigma
    op = DenseOperator(m=problem.op.m, cols=problem.op.cols,
                       entries=problem.op.entries * s,
                       spectral_norm_estimate=target_norm)
    return replace(problem, op=op, y=problem.y * s,
                   scale_factor=problem.scale_factor * s)


def apply(op: DenseOperator, x) -> np.ndarray:
    """Forward product T x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (op.cols,):
        raise ValueError(f"x has shape {x.shape}, expected ({op.cols},)")
    return op.entries @ x


def apply_adjoint(op: DenseOperator, r) -> np.ndarray:
    """Adjoint product T* r (transpose action)."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (op.m,):
        raise ValueError(f"r has shape {r.shape}, expected ({op.m},)")
    return op.entries.T @ r


# --- serialization ----------------------------------------------------------

def save_matrix_csv(path, matrix) -> None:
    """One CSV row per matrix row, decimal point '.', full float64 precision."""
    arr = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    np.savetxt(path, arr, delimiter=",", fmt="%.17g")


def load_matrix_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))


def save_vector_csv(path, vector) -> None:
    save_matrix_csv(path, np.asarray(vector, dtype=np.float64).reshape(1, -1))


def load_vector_csv(path) -> np.ndarray:
    return load_matrix_csv(path).ravel()


def problem_to_dict(problem: MeasurementProblem) -> dict:
    d = {
        "m": problem.op.m,
        "N": problem.op.cols,
        "T": problem.op.entries.tolist(),
        "y": problem.y.tolist(),
        "scale_factor": problem.scale_factor,
    }
    if problem.truth_u is not None:
        d["truth_u"] = problem.truth_u.tolist()
    if problem.truth_v is not None:
        d["truth_v"] = problem.truth_v.tolist()
    return d


def problem_from_dict(d: dict) -> MeasurementProblem:
    op = DenseOperator.from_matrix(np.asarray(d["T"], dtype=np.float64))
    if op.m != d["m"] or op.cols != d["N"]:
        raise ValueError("declared problem dimensions do not match the stored matrix")
    return MeasurementProblem(
        op=op,
        y=np.asarray(d["y"], dtype=np.float64),
        truth_u=np.asarray(d["truth_u"], dtype=np.float64) if "truth_u" in d else None,
        truth_v=np.asarray(d["truth_v"], dtype=np.float64) if "truth_v" in d else None,
        scale_factor=float(d.get("scale_factor", 1.0)),
    )


def save_problem(path, problem: MeasurementProblem) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(problem)))


def load_problem(path) -> MeasurementProblem:
    return problem_from_dict(json.loads(Path(path).read_text()))
