"""Scalar and vector thresholding operators.

Three families:

* ``threshold_lp``  - proximal map of ``alpha * |t|^p`` for ``p in [0, 1]``.
  Soft thresholding at ``p = 1``, hard thresholding at ``p = 0``, and for
  ``0 < p < 1`` the discontinuous map that is zero below the jump ``tau_alpha``
  and otherwise inverts ``F(t) = t + (alpha p / 2) sgn(t) |t|^(p-1)`` on the
  branch ``t >= gamma_alpha``.
* ``shrink_lq``     - proximal map of ``beta |t|^q + eps t^2`` for finite
  ``q >= 2``, i.e. ``(1 + eps)^(-1) F^(-1)`` with
  ``F(t) = t + coeff * sgn(t) |t|^(q-1)``.
* ``threshold_linf`` - the whole-vector proximal map of ``beta * max|v_i|``
  (sort, accumulate, clip the leading magnitudes to a common level).

All scalar maps accept floats or ndarrays and are odd: ``f(-x) = -f(x)``.
``brute_force_prox_1d`` is a slow grid/golden-section minimizer kept only as
an independent cross-check for tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_NEWTON_TOL = 1e-12
_NEWTON_MAX_ITERS = 100


@dataclass(frozen=True)
class LpThresholdParams:
    """Threshold geometry for the lp proximal map.

    For ``0 < p < 1`` the map jumps at ``tau_alpha`` and its nonzero outputs
    start at ``gamma_alpha`` (the "gap"); ``t_alpha`` locates the minimum of
    ``F`` on the positive axis, below which ``F`` is not invertible.
    The degenerate cases reuse the same fields: soft thresholding (``p = 1``)
    has ``tau_alpha = alpha / 2`` and no gap, hard thresholding (``p = 0``)
    jumps at ``sqrt(alpha)`` directly to magnitude ``sqrt(alpha)``.
    """

    p: float
    alpha: float
    gamma_alpha: float = field(init=False)
    tau_alpha: float = field(init=False)
    t_alpha: float = field(init=False)

    def __post_init__(self):
        if not (np.isfinite(self.p) and 0.0 <= self.p <= 1.0):
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ValueError(f"alpha must be a positive real, got {self.alpha}")
        p, alpha = self.p, self.alpha
        if p == 1.0:
            gamma, tau, t_min = 0.0, alpha / 2.0, 0.0
        elif p == 0.0:
            gamma = tau = np.sqrt(alpha)
            t_min = 0.0
        else:
            gamma = (alpha * (1.0 - p)) ** (1.0 / (2.0 - p))
            tau = (2.0 - p) / (2.0 - 2.0 * p) * gamma
            t_min = (alpha * p * (1.0 - p) / 2.0) ** (1.0 / (2.0 - p))
        object.__setattr__(self, "gamma_alpha", gamma)
        object.__setattr__(self, "tau_alpha", tau)
        object.__setattr__(self, "t_alpha", t_min)


@dataclass(frozen=True)
class LqShrinkParams:
    """Coefficient bundle for the lq shrinkage map, finite ``q >= 2``."""

    q: float
    beta: float
    epsilon: float = 0.0
    coeff: float = field(init=False)

    def __post_init__(self):
        if not (np.isfinite(self.q) and self.q >= 2.0):
            raise ValueError(f"q must be a finite real >= 2, got {self.q}")
        if not (np.isfinite(self.beta) and self.beta >= 0.0):
            raise ValueError(f"beta must be a nonnegative real, got {self.beta}")
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValueError(f"epsilon must be a nonnegative real, got {self.epsilon}")
        coeff = self.beta * self.q / (2.0 * (1.0 + self.epsilon) ** (self.q - 1.0))
        object.__setattr__(self, "coeff", coeff)


def _check_finite(arr):
    if not np.all(np.isfinite(arr)):
        raise ValueError("input must be finite")


def _invert_increasing(target: np.ndarray, lo, f_and_fprime) -> np.ndarray:
    """Solve f(t) = target componentwise on [lo, target], f increasing and convex.

    Newton from the upper bracket end, where f(t) >= target by convexity, so
    the iterates decrease monotonically onto the root; the safeguard clips
    every step back into the bracket.  `lo` may be a scalar or an array.
    """
    if target.size == 0:
        return target.copy()
    t = target.copy()
    tol = _NEWTON_TOL * max(1.0, float(np.max(target)))
    for _ in range(_NEWTON_MAX_ITERS):
        f, fp = f_and_fprime(t)
        f -= target
        f /= fp
        t -= f
        np.clip(t, lo, target, out=t)
        if np.max(np.abs(f)) <= tol:
            break
    return t


def _lp_array(x: np.ndarray, params: LpThresholdParams) -> np.ndarray:
    """Unvalidated array core of ``threshold_lp`` (hot path for the solver)."""
    p, alpha = params.p, params.alpha
    mag = np.abs(x)
    if p == 1.0:
        return np.sign(x) * np.maximum(mag - alpha / 2.0, 0.0)
    if p == 0.0:
        return np.where(mag >= params.tau_alpha, x, 0.0)
    out = np.zeros_like(x)
    mask = mag >= params.tau_alpha
    if np.any(mask):
        target = mag[mask]
        c = 0.5 * alpha * p

        def f_and_fprime(t):
            tp2 = t ** (p - 2.0)
            return t + c * tp2 * t, 1.0 + c * (p - 1.0) * tp2

        roots = _invert_increasing(target, params.gamma_alpha, f_and_fprime)
        out[mask] = np.sign(x[mask]) * np.maximum(roots, params.gamma_alpha)
    return out


def threshold_lp(x, params: LpThresholdParams):
    """Componentwise minimizer of ``(t - x)^2 + alpha |t|^p``.

    Ties at the jump ``|x| = tau_alpha`` resolve to the nonzero branch, so the
    output magnitude lies in ``{0} union [gamma_alpha, inf)``.
    """
    scalar = np.ndim(x) == 0
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    _check_finite(arr)
    out = _lp_array(arr, params)
    return float(out[0]) if scalar else out


def threshold_half_closed_form(x, alpha: float):
    """Closed trigonometric form of the ``p = 1/2`` thresholding map.

    Zero below ``(54)^(1/3) / 4 * alpha^(2/3)``; otherwise
    ``(2/3) x (1 + cos(2 pi / 3 - (2/3) arccos((alpha/8) (|x|/3)^(-3/2))))``.
    Agrees with the generic root-finding path of ``threshold_lp``.
    """
    if not (np.isfinite(alpha) and alpha > 0.0):
        raise ValueError(f"alpha must be a positive real, got {alpha}")
    scalar = np.ndim(x) == 0
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    _check_finite(arr)
    tau = np.cbrt(54.0) / 4.0 * alpha ** (2.0 / 3.0)
    mag = np.abs(arr)
    out = np.zeros_like(arr)
    mask = mag >= tau
    if np.any(mask):
        m = mag[mask]
        arg = np.clip(alpha / 8.0 * (m / 3.0) ** (-1.5), -1.0, 1.0)
        phi = 2.0 * np.pi / 3.0 - 2.0 / 3.0 * np.arccos(arg)
        out[mask] = np.sign(arr[mask]) * (2.0 / 3.0) * m * (1.0 + np.cos(phi))
    return float(out[0]) if scalar else out


def _lq_array(x: np.ndarray, params: LqShrinkParams) -> np.ndarray:
    """Unvalidated array core of ``shrink_lq`` (hot path for the solver)."""
    q, coeff, eps = params.q, params.coeff, params.epsilon
    if coeff == 0.0:
        return x / (1.0 + eps)
    if q == 2.0:
        return x / ((1.0 + coeff) * (1.0 + eps))
    mag = np.abs(x)

    def f_and_fprime(t):
        tq2 = t ** (q - 2.0)
        return t + coeff * tq2 * t, 1.0 + coeff * (q - 1.0) * tq2

    roots = _invert_increasing(mag, 0.0, f_and_fprime)
    return np.sign(x) * roots / (1.0 + eps)


def shrink_lq(x, params: LqShrinkParams):
    """Componentwise minimizer of ``(t - x)^2 + beta |t|^q + eps t^2``.

    Returns ``(1 + eps)^(-1) F^(-1)(x)``; odd, strictly increasing and
    non-expansive, with ``|result| <= |x| / (1 + eps)``.
    """
    scalar = np.ndim(x) == 0
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    _check_finite(arr)
    out = _lq_array(arr, params)
    return float(out[0]) if scalar else out


def threshold_linf(x, beta: float) -> np.ndarray:
    """Vector minimizer of ``||v - x||_2^2 + beta ||v||_inf``.

    Sorts by magnitude, finds the largest leading group whose entries must be
    clipped to a common level, and leaves the tail untouched.  Returns the
    zero vector whenever ``||x||_1 <= beta / 2`` (the boundary case gives an
    equal objective for both branches and is assigned to zero).
    """
    if not (np.isfinite(beta) and beta > 0.0):
        raise ValueError(f"beta must be a positive real, got {beta}")
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError("x must be a one-dimensional vector with at least one entry")
    _check_finite(arr)
    half = beta / 2.0
    mag = np.abs(arr)
    if float(np.sum(mag)) <= half:
        return np.zeros_like(arr)
    order = np.argsort(-mag, kind="stable")
    sorted_mag = mag[order]
    m = arr.size
    if m == 1 or sorted_mag[1] < sorted_mag[0] - half:
        n = 1
        lead_sum = sorted_mag[0]
    else:
        prefix = np.cumsum(sorted_mag)
        ks = np.arange(2, m + 1)
        ok = sorted_mag[1:] >= (prefix[:-1] - half) / (ks - 1)
        n = int(ks[np.nonzero(ok)[0][-1]])
        lead_sum = prefix[n - 1]
    level = (lead_sum - half) / n
    out = arr.copy()
    lead = order[:n]
    out[lead] = np.sign(arr[lead]) * level
    return out


def _penalty_value(t: np.ndarray, penalty) -> np.ndarray:
    if isinstance(penalty, LpThresholdParams):
        if penalty.p == 0.0:
            return penalty.alpha * (t != 0.0)
        return penalty.alpha * np.abs(t) ** penalty.p
    if isinstance(penalty, LqShrinkParams):
        return penalty.beta * np.abs(t) ** penalty.q + penalty.epsilon * t * t
    raise TypeError(f"unsupported penalty descriptor: {type(penalty).__name__}")


_INV_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_refine(objective, lo: float, hi: float, iters: int = 80) -> float:
    a, b = lo, hi
    c = b - _INV_GOLDEN * (b - a)
    d = a + _INV_GOLDEN * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(iters):
        if b - a < 1e-13 * max(1.0, abs(a), abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_GOLDEN * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_GOLDEN * (b - a)
            fd = objective(d)
    return c if fc < fd else d


def brute_force_prox_1d(x: float, penalty, grid_halfwidth: float = 6.0,
                        coarse_step: float = 1e-3) -> float:
    """Global minimizer of ``(t - x)^2 + penalty(t)`` by coarse scan plus
    golden-section refinement of every local basin.  Test oracle only; slow
    and deliberately independent of the closed-form/root-finding paths.
    """
    x = float(x)
    _check_finite(np.asarray(x))

    def objective(t):
        t = np.asarray(t, dtype=np.float64)
        return (t - x) ** 2 + _penalty_value(t, penalty)

    grid = np.arange(-grid_halfwidth, grid_halfwidth + coarse_step, coarse_step)
    grid = np.unique(np.concatenate([grid, [0.0, x]]))
    values = objective(grid)
    candidates = [0.0]
    interior = np.nonzero(
        (values[1:-1] <= values[:-2]) & (values[1:-1] <= values[2:])
    )[0] + 1
    edges = [i for i in (0, len(grid) - 1)
             if (i == 0 and values[0] <= values[1]) or
                (i == len(grid) - 1 and values[-1] <= values[-2])]
    for i in list(interior) + edges:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, len(grid) - 1)]
        candidates.append(_golden_refine(lambda t: float(objective(t)), lo, hi))
        candidates.append(float(grid[i]))
    best = min(candidates, key=lambda t: (float(objective(t)), abs(t)))
    return float(best)
