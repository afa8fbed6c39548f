"""Numeric inner loops, numba-jitted when available.

Set the environment variable ``MAPSEG_DISABLE_JIT=1`` to force the plain
numpy implementations (also the automatic fallback when numba is missing).
``benchmarks/bench_kernels.py`` compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

USE_JIT = os.environ.get("MAPSEG_DISABLE_JIT", "0").lower() not in ("1", "true", "yes")

if USE_JIT:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_JIT = False


def _perception_increments_py(s, span_lo, span_hi, span_class, scores):
    """Unnormalized likelihood increments for sorted particle positions.

    Spans of one class must be pre-merged (disjoint) so member counts and
    increments are not double-applied.
    """
    n = s.shape[0]
    inc = np.zeros(n)
    counts = np.zeros(scores.shape[0])
    lo_idx = np.searchsorted(s, span_lo, side="left")
    hi_idx = np.searchsorted(s, span_hi, side="right")
    for k in range(span_lo.shape[0]):
        counts[span_class[k]] += hi_idx[k] - lo_idx[k]
    for k in range(span_lo.shape[0]):
        c = span_class[k]
        if scores[c] > 0.0 and counts[c] > 0.0:
            share = scores[c] / counts[c]
            for i in range(lo_idx[k], hi_idx[k]):
                inc[i] += share
    return inc


def _nms_keep_py(s_ranked, radius):
    """Greedy keep mask over rank-ordered positions; compares to kept only."""
    n = s_ranked.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    kept = np.empty(n)
    m = 0
    for i in range(n):
        ok = True
        for j in range(m):
            if abs(s_ranked[i] - kept[j]) < radius:
                ok = False
                break
        if ok:
            keep[i] = True
            kept[m] = s_ranked[i]
            m += 1
    return keep


def _rect_union_area_py(boxes):
    """Exact area of a union of axis-aligned rectangles (k, 4) via x-sweep."""
    k = boxes.shape[0]
    if k == 0:
        return 0.0
    xs = np.sort(np.concatenate((boxes[:, 0], boxes[:, 2])))
    lo = np.empty(k)
    hi = np.empty(k)
    total = 0.0
    for i in range(xs.shape[0] - 1):
        x0 = xs[i]
        x1 = xs[i + 1]
        if x1 <= x0:
            continue
        m = 0
        for b in range(k):
            if boxes[b, 0] <= x0 and boxes[b, 2] >= x1:
                lo[m] = boxes[b, 1]
                hi[m] = boxes[b, 3]
                m += 1
        if m == 0:
            continue
        order = np.argsort(lo[:m])
        cur_lo = lo[order[0]]
        cur_hi = hi[order[0]]
        length = 0.0
        for t in range(1, m):
            l = lo[order[t]]
            h = hi[order[t]]
            if l > cur_hi:
                length += cur_hi - cur_lo
                cur_lo = l
                cur_hi = h
            elif h > cur_hi:
                cur_hi = h
        length += cur_hi - cur_lo
        total += length * (x1 - x0)
    return total


PY_IMPLS = {
    "perception_increments": _perception_increments_py,
    "nms_keep": _nms_keep_py,
    "rect_union_area": _rect_union_area_py,
}

if USE_JIT:
    perception_increments = njit(cache=True)(_perception_increments_py)
    nms_keep = njit(cache=True)(_nms_keep_py)
    rect_union_area = njit(cache=True)(_rect_union_area_py)
else:
    perception_increments = _perception_increments_py
    nms_keep = _nms_keep_py
    rect_union_area = _rect_union_area_py
