"""Principal-component projection of solution point clouds.

Solutions computed over a two-parameter grid are expected to concentrate on a
low-dimensional manifold; projecting the cloud onto the top covariance
eigenvectors makes the clustering inspectable in 2-D.  Eigenpairs come from
orthogonal (subspace) iteration with a deterministic start so repeated runs
produce identical plot files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_SUBSPACE_TOL = 1e-12
_SUBSPACE_MAX_SWEEPS = 10_000


@dataclass
class PointCloud:
    """Rows of `points` are vectors of a common dimension; `labels` carries
    one metadata dict per point (alpha, beta, feasible).  May be empty, in
    which case it only serves as a flagged placeholder."""

    points: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2:
            self.points = self.points.reshape(len(self.labels), -1)
        if self.labels and len(self.labels) != self.points.shape[0]:
            raise ValueError("one label per point required")

    @property
    def is_empty(self) -> bool:
        return self.points.shape[0] == 0


@dataclass
class PcaProjection:
    mean: np.ndarray
    axes: np.ndarray             # (dims, n) orthonormal rows
    coords: np.ndarray           # (points, dims)
    explained_variance: np.ndarray

    def project(self, x) -> np.ndarray:
        """Coordinates of an arbitrary vector under this projection."""
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.axes.T


def _block_start(n: int, dims: int) -> np.ndarray:
    # contiguous all-ones index blocks, one per requested axis
    start = np.zeros((n, dims))
    for i in range(n):
        start[i, min(i * dims // n, dims - 1)] = 1.0
    return start


def _fix_signs(axes: np.ndarray) -> np.ndarray:
    out = axes.copy()
    for k in range(out.shape[0]):
        j = int(np.argmax(np.abs(out[k])))
        if out[k, j] < 0:
            out[k] = -out[k]
    return out


def pca_project(cloud: PointCloud, dims: int = 2) -> PcaProjection:
    """Project the cloud onto the top `dims` eigenvectors of its sample
    covariance (divisor n-1).

    Axes follow the sign convention that their largest-magnitude entry is
    positive.  A cloud of identical points degenerates to zero variances
    with canonical basis directions as axes.
    """
    if cloud.points.shape[0] < dims + 1:
        raise ValueError(f"need at least {dims + 1} points, got {cloud.points.shape[0]}")
    pts = cloud.points
    n_points, n = pts.shape
    if dims < 1 or dims > n:
        raise ValueError(f"dims must lie in [1, {n}]")
    mean = pts.mean(axis=0)
    centered = pts - mean
    denom = n_points - 1

    def cov_apply(block):
        return centered.T @ (centered @ block) / denom

    scale = float(np.sum(centered * centered)) / denom  # trace of the covariance
    if scale == 0.0:
        axes = np.zeros((dims, n))
        for k in range(dims):
            axes[k, k] = 1.0
        return PcaProjection(mean=mean, axes=axes,
                             coords=np.zeros((n_points, dims)),
                             explained_variance=np.zeros(dims))

    q, _ = np.linalg.qr(_block_start(n, dims))
    for _ in range(_SUBSPACE_MAX_SWEEPS):
        z = cov_apply(q)
        q_new, _ = np.linalg.qr(z)
        z_new = cov_apply(q_new)
        resid = z_new - q_new @ (q_new.T @ z_new)
        q = q_new
        if np.linalg.norm(resid) <= _SUBSPACE_TOL * scale:
            break

    small = q.T @ cov_apply(q)
    small = 0.5 * (small + small.T)
    eigvals, eigvecs = np.linalg.eigh(small)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    axes = _fix_signs((q @ eigvecs[:, order]).T)
    return PcaProjection(mean=mean, axes=axes, coords=centered @ axes.T,
                         explained_variance=eigvals)


def feasible_cloud(results, which: str) -> PointCloud:
    """Collect the u (or v) vectors of feasible grid results with their
    (alpha, beta) labels.  An all-infeasible sweep yields an empty cloud."""
    if which not in ("u", "v"):
        raise ValueError(f"which must be 'u' or 'v', got {which!r}")
    points, labels = [], []
    for r in results:
        if r.failed or not r.feasible or r.solution is None:
            continue
        points.append(getattr(r.solution, which))
        labels.append({"alpha": r.alpha, "beta": r.beta, "feasible": True})
    if not points:
        return PointCloud(points=np.zeros((0, 0)), labels=[])
    return PointCloud(points=np.asarray(points), labels=labels)


def write_coords_csv(path, cloud: PointCloud, projection: PcaProjection,
                     truth: np.ndarray | None = None) -> None:
    """Plot-ready file: alpha,beta,coord1,coord2,is_truth with one optional
    trailing row for the projected ground truth."""
    with open(path, "w") as fh:
        fh.write("alpha,beta,coord1,coord2,is_truth\n")
        for label, coord in zip(cloud.labels, projection.coords):
            fh.write(f"{float(label['alpha'])!r},{float(label['beta'])!r},"
                     f"{float(coord[0])!r},{float(coord[1])!r},0\n")
        if truth is not None:
            c = projection.project(truth)
            fh.write(f"nan,nan,{float(c[0])!r},{float(c[1])!r},1\n")
