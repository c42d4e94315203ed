"""Binarize a contrast field by 1-D k-means over its roi values.

The cluster with the largest center is the "selected" set (strong evidence
for the current step's polarity). For k = 2 the global optimum of 1-D
2-means is a threshold split on sorted values, so it is found exactly by a
prefix-sum scan; quantile-initialized Lloyd iteration is kept for k = 3
where no optimality contract applies.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Rect, check_mask
from .errors import InvalidK
from .potential import ContrastField

LLOYD_MAX_ITER = 50
LLOYD_TOL = 1e-7


@dataclass
class ClusterResult:
    """Outcome of clustering the roi values of a contrast field.

    centers: cluster means, ascending
    assignment: per-pixel cluster index into ``centers`` (-1 outside roi)
    selected: pixels assigned to the largest-center cluster
    degenerate: True when the roi carried no contrast to split on
    """

    centers: list[float]
    assignment: np.ndarray
    selected: np.ndarray
    roi: Rect
    degenerate: bool = False
    k_effective: int = 0

    @property
    def bottom(self) -> np.ndarray:
        """Pixels assigned to the smallest-center cluster (empty if degenerate)."""
        if self.degenerate:
            return np.zeros_like(self.selected)
        return self.assignment == 0


def _exact_two_means(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Globally optimal 1-D 2-means: scan threshold splits on sorted values.

    Splits are only feasible between distinct values (assignment is by
    value). Ties in SSE keep the lowest threshold. Returns (centers asc,
    labels in {0, 1}).
    """
    order = np.sort(values)
    n = order.size
    csum = np.cumsum(order)
    csq = np.cumsum(order * order)
    # candidate split after sorted index s-1, for s in 1..n-1, value-feasible only
    s = np.arange(1, n)
    feasible = order[s] > order[s - 1]
    s = s[feasible]
    n1 = s.astype(np.float64)
    n2 = n - n1
    s1 = csum[s - 1]
    s2 = csum[-1] - s1
    q1 = csq[s - 1]
    q2 = csq[-1] - q1
    sse = (q1 - s1 * s1 / n1) + (q2 - s2 * s2 / n2)
    # exact ties (e.g. symmetric partitions) must not be decided by
    # prefix-sum rounding noise: take the lowest threshold among near-ties
    tol = 16.0 * n * np.finfo(np.float64).eps * max(1.0, float(csq[-1]))
    best = s[np.nonzero(sse <= sse.min() + tol)[0][0]]
    threshold = order[best - 1]
    labels = (values > threshold).astype(np.int64)
    centers = np.array([values[labels == 0].mean(), values[labels == 1].mean()])
    return centers, labels


def _lloyd(values: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Quantile-initialized 1-D Lloyd iteration; empty clusters keep their center."""
    centers = np.quantile(values, [(i + 0.5) / k for i in range(k)])
    for _ in range(LLOYD_MAX_ITER):
        labels = np.argmin(np.abs(values[:, None] - centers[None, :]), axis=1)
        new = centers.copy()
        for j in range(k):
            sel = values[labels == j]
            if sel.size:
                new[j] = sel.mean()
        moved = np.max(np.abs(new - centers))
        centers = new
        if moved < LLOYD_TOL:
            break
    labels = np.argmin(np.abs(values[:, None] - centers[None, :]), axis=1)
    order = np.argsort(centers, kind="stable")
    remap = np.empty(k, dtype=np.int64)
    remap[order] = np.arange(k)
    return centers[order], remap[labels]


def kmeans_binarize(field: ContrastField, k: int, seed: int = 0) -> ClusterResult:
    """Cluster the roi values of ``field`` into k groups, pick the top one.

    ``seed`` is accepted for interface stability; both paths are
    deterministic without it (quantile init, fixed tie-breaks).
    """
    if k not in (2, 3):
        raise InvalidK(f"k must be 2 or 3, got {k}")
    roi = field.roi
    h, w = field.values.shape
    ys, xs = roi.slices
    values = field.values[ys, xs].ravel()

    assignment = np.full((h, w), -1, dtype=np.int64)
    selected = np.zeros((h, w), dtype=bool)

    distinct = np.unique(values)
    if distinct.size == 1:
        # no contrast to split on: flag and select the whole roi
        assignment[ys, xs] = 0
        selected[ys, xs] = True
        return ClusterResult([float(distinct[0])], assignment, selected, roi,
                             degenerate=True, k_effective=1)

    # with fewer distinct values than k, cluster with what is there
    k_eff = min(k, distinct.size)
    if k_eff == 2:
        centers, labels = _exact_two_means(values)
    else:
        centers, labels = _lloyd(values, k_eff)

    assignment[ys, xs] = labels.reshape(roi.height, roi.width)
    selected[ys, xs] = (labels == k_eff - 1).reshape(roi.height, roi.width)
    return ClusterResult([float(c) for c in centers], assignment, selected, roi,
                         k_effective=k_eff)


def check_selected_within(result: ClusterResult, mask: np.ndarray) -> bool:
    """True when the selected set stays within ``mask`` (debug helper)."""
    return bool((~check_mask(mask) & result.selected).sum() == 0)
