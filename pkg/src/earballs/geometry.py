"""Metric-space primitives.

Pairwise distances, the batch-normalized metric-preservation loss, distance
correlation, nearest-centroid accuracy, uniform hypersphere sampling, and the
L2-separation predicate used by the listening-test generator.

Two point-level metrics are supported everywhere:

- ``"euclidean"``: L2 distance between points treated as flat vectors.
- ``"squared-feature-frame"``: squared L2 distance between flattened feature
  frames (the psychoacoustic target metric; intentionally not a true metric).

Functions accept numpy arrays (returning floats/ndarrays) or torch tensors
(returning tensors and preserving the autograd graph where relevant).
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np
import torch
from scipy.spatial.distance import cdist, pdist, squareform

from .errors import (
    ArityError,
    DegenerateBatchError,
    ShapeError,
    UndefinedCorrelationError,
)

METRICS = ("euclidean", "squared-feature-frame")


def _check_metric(metric: str) -> None:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {METRICS}")


def _as_point_matrix(points):
    """Stack points into an (n, ...) array/tensor, validating shapes."""
    if isinstance(points, torch.Tensor):
        if points.ndim < 2:
            raise ShapeError(f"expected a batch of points, got shape {tuple(points.shape)}")
        return points
    if isinstance(points, np.ndarray):
        if points.ndim < 2:
            raise ShapeError(f"expected a batch of points, got shape {points.shape}")
        return points
    pts = list(points)
    if pts and isinstance(pts[0], torch.Tensor):
        shapes = {tuple(p.shape) for p in pts}
        if len(shapes) > 1:
            raise ShapeError(f"points have mismatched shapes: {sorted(shapes)}")
        return torch.stack(pts)
    arrs = [np.asarray(p, dtype=np.float64) for p in pts]
    shapes = {a.shape for a in arrs}
    if len(shapes) > 1:
        raise ShapeError(f"points have mismatched shapes: {sorted(shapes)}")
    return np.stack(arrs)


def _flat(points):
    return points.reshape(points.shape[0], -1)


def _condensed_torch(points: torch.Tensor, metric: str) -> torch.Tensor:
    """Vector of pairwise distances over i<j pairs, differentiable."""
    flat = _flat(points)
    n = flat.shape[0]
    iu, ju = torch.triu_indices(n, n, offset=1)
    if metric == "squared-feature-frame":
        diff = flat[iu] - flat[ju]
        return (diff * diff).sum(dim=1)
    return torch.cdist(flat, flat, compute_mode="donot_use_mm_for_euclid_dist")[iu, ju]


def _condensed_numpy(points: np.ndarray, metric: str) -> np.ndarray:
    flat = np.asarray(_flat(points), dtype=np.float64)
    if metric == "squared-feature-frame":
        return pdist(flat, "sqeuclidean")
    return pdist(flat, "euclidean")


def condensed_distances(points, metric: str = "euclidean"):
    """Pairwise distances as a condensed vector (all i<j pairs, row-major)."""
    _check_metric(metric)
    pts = _as_point_matrix(points)
    if pts.shape[0] < 2:
        raise ArityError(f"need at least 2 points, got {pts.shape[0]}")
    if isinstance(pts, torch.Tensor):
        return _condensed_torch(pts, metric)
    return _condensed_numpy(pts, metric)


def pairwise_distances(points, metric: str = "euclidean"):
    """Symmetric pairwise distance matrix with zero diagonal."""
    _check_metric(metric)
    pts = _as_point_matrix(points)
    if pts.shape[0] < 2:
        raise ArityError(f"need at least 2 points, got {pts.shape[0]}")
    if isinstance(pts, torch.Tensor):
        n = pts.shape[0]
        out = pts.new_zeros((n, n))
        iu, ju = torch.triu_indices(n, n, offset=1)
        vals = _condensed_torch(pts, metric)
        out[iu, ju] = vals
        out[ju, iu] = vals
        return out
    return squareform(_condensed_numpy(pts, metric))


def metric_batch_stats(points, metric: str = "euclidean") -> tuple[float, float]:
    """Mean and standard deviation of the batch's pairwise distances."""
    d = condensed_distances(points, metric)
    if isinstance(d, torch.Tensor):
        d = d.detach().cpu().numpy()
    return float(np.mean(d)), float(np.std(d))


def metric_loss(
    source_points,
    output_points,
    source_metric: str = "euclidean",
    target_metric: str = "euclidean",
):
    """Metric-preservation loss between a source batch and its mapped outputs.

    Each side's pairwise distances are normalized by that side's batch mean
    pairwise distance, so the loss is invariant to uniform scaling of either
    side.  The absolute normalized differences over all i<j pairs are summed
    and multiplied by 1/(N(N-1)).

    Differentiable with respect to ``output_points`` when they are a torch
    tensor; returns a plain float otherwise.  A batch whose points are all
    identical on either side raises :class:`DegenerateBatchError` (the batch
    mean would be zero).
    """
    src = _as_point_matrix(source_points)
    out = _as_point_matrix(output_points)
    n = src.shape[0]
    if out.shape[0] != n:
        raise ShapeError(f"source has {n} points but output has {out.shape[0]}")
    if n < 2:
        raise ArityError(f"need at least 2 points, got {n}")

    d_src = condensed_distances(src, source_metric)
    if isinstance(d_src, torch.Tensor):
        d_src = d_src.detach()
    d_out = condensed_distances(out, target_metric)

    src_mean = d_src.mean()
    out_mean = d_out.mean()
    out_mean_value = float(out_mean.detach()) if isinstance(out_mean, torch.Tensor) else float(out_mean)
    if float(src_mean) == 0.0:
        raise DegenerateBatchError("all source points identical: mean pairwise distance is 0")
    if out_mean_value == 0.0:
        raise DegenerateBatchError("all output points identical: mean pairwise distance is 0")

    if isinstance(d_out, torch.Tensor):
        if not isinstance(d_src, torch.Tensor):
            d_src = torch.as_tensor(d_src, dtype=d_out.dtype, device=d_out.device)
            src_mean = d_src.mean()
        total = (d_src / src_mean - d_out / out_mean).abs().sum()
        return total / (n * (n - 1))
    total = np.abs(np.asarray(d_src) / float(src_mean) - np.asarray(d_out) / float(out_mean)).sum()
    return float(total) / (n * (n - 1))


def pearson_distance_correlation(
    source_points,
    output_points,
    source_metric: str = "euclidean",
    target_metric: str = "euclidean",
) -> float:
    """Pearson correlation between source and output pairwise distances."""
    src = _as_point_matrix(source_points)
    out = _as_point_matrix(output_points)
    if out.shape[0] != src.shape[0]:
        raise ShapeError(f"source has {src.shape[0]} points but output has {out.shape[0]}")
    u = condensed_distances(src, source_metric)
    v = condensed_distances(out, target_metric)
    return pearson(u, v)


def pearson(u, v) -> float:
    """Sample Pearson correlation of two equal-length value vectors."""
    if isinstance(u, torch.Tensor):
        u = u.detach().cpu().numpy()
    if isinstance(v, torch.Tensor):
        v = v.detach().cpu().numpy()
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ShapeError(f"value vectors differ in length: {u.shape} vs {v.shape}")
    su, sv = u.std(), v.std()
    if su == 0.0 or sv == 0.0:
        raise UndefinedCorrelationError("zero variance in a pairwise distance vector")
    return float(((u - u.mean()) * (v - v.mean())).mean() / (su * sv))


def nearest_centroid_predictions(points, labels: Sequence[str], metric: str = "euclidean") -> list[str]:
    """Per-label mean centroids, then each point's nearest centroid label.

    Ties go to the lexicographically smallest label.  Centroids are arithmetic
    means in the given point representation (vectors or feature frames).
    """
    _check_metric(metric)
    pts = np.asarray(_flat(_as_point_matrix(points)), dtype=np.float64)
    labels = list(labels)
    if len(labels) != pts.shape[0]:
        raise ShapeError(f"{pts.shape[0]} points but {len(labels)} labels")
    uniq = sorted(set(labels))
    centroids = np.stack([pts[[l == u for l in labels]].mean(axis=0) for u in uniq])
    kind = "sqeuclidean" if metric == "squared-feature-frame" else "euclidean"
    d = cdist(pts, centroids, kind)
    # argmin returns the first minimum; columns are in sorted label order, so
    # exact ties resolve to the lexicographically smallest label.
    return [uniq[i] for i in d.argmin(axis=1)]


def nearest_centroid_accuracy(points, labels: Sequence[str], metric: str = "euclidean") -> float:
    """Fraction of points whose nearest per-label centroid is their own label."""
    labels = list(labels)
    if len(labels) == 0:
        raise ArityError("no records given")
    pred = nearest_centroid_predictions(points, labels, metric)
    return sum(p == t for p, t in zip(pred, labels)) / len(labels)


def sample_unit_sphere(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n points uniformly from the unit sphere in R^d.

    Samples a standard d-dimensional Gaussian and normalizes each draw; any
    origin-symmetric Gaussian gives every direction equal density.
    """
    if d < 1:
        raise ArityError(f"dimension must be >= 1, got {d}")
    if n < 1:
        raise ArityError(f"sample count must be >= 1, got {n}")
    v = rng.standard_normal((n, d))
    norms = np.linalg.norm(v, axis=1)
    while np.any(norms < 1e-12):  # astronomically rare; redraw for safety
        bad = norms < 1e-12
        v[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(v, axis=1)
    return v / norms[:, None]


def l2_separates(categories) -> bool:
    """Whether three labeled point sets are mutually separated under L2.

    True iff for every category, the largest intra-category pairwise distance
    is no greater than the smallest distance from that category to either of
    the other two.  ``categories`` is a mapping label -> points or a sequence
    of exactly three point sets.
    """
    if isinstance(categories, Mapping):
        groups = [np.asarray(v, dtype=np.float64) for _, v in sorted(categories.items())]
    else:
        groups = [np.asarray(v, dtype=np.float64) for v in categories]
    if len(groups) != 3:
        raise ArityError(f"expected exactly 3 categories, got {len(groups)}")
    for g in groups:
        if g.ndim != 2 or g.shape[0] < 1:
            raise ArityError("each category needs at least one point vector")
    for i, g in enumerate(groups):
        max_intra = pdist(g, "euclidean").max() if g.shape[0] > 1 else 0.0
        others = np.concatenate([groups[j] for j in range(3) if j != i])
        min_inter = cdist(g, others, "euclidean").min()
        if max_intra > min_inter:
            return False
    return True
