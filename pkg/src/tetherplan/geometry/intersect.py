"""Batched triangle-triangle intersection.

Interval test on the line shared by the two supporting planes; pairs whose
vertices all sit within ``eps`` of the other plane are resolved in 2D.
Touching counts as intersecting.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-10

_EDGES = ((0, 1), (1, 2), (2, 0))


def _unit(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.divide(v, n, out=np.zeros_like(v), where=n > 0)


def _interval(proj, dist):
    """Extent of ``triangle ∩ other plane`` along the line, as (lo, hi) arrays."""
    cand = [np.where(dist[:, i] == 0, proj[:, i], np.nan) for i in range(3)]
    for i, j in _EDGES:
        crosses = dist[:, i] * dist[:, j] < 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = dist[:, i] / (dist[:, i] - dist[:, j])
        cand.append(np.where(crosses, proj[:, i] + (proj[:, j] - proj[:, i]) * t, np.nan))
    c = np.stack(cand, axis=1)
    return np.nanmin(c, axis=1), np.nanmax(c, axis=1)


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def _segments_touch(p1, p2, q1, q2):
    o1, o2 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    o3, o4 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    collinear = (o1 == 0) & (o2 == 0)
    general = (o1 * o2 <= 0) & (o3 * o4 <= 0) & ~collinear
    boxes = np.ones(len(p1), dtype=bool)
    for k in range(2):
        boxes &= (np.maximum(p1[:, k], p2[:, k]) >= np.minimum(q1[:, k], q2[:, k])) & (
            np.maximum(q1[:, k], q2[:, k]) >= np.minimum(p1[:, k], p2[:, k])
        )
    return general | (collinear & boxes)


def _point_in_tri2(p, t):
    o0 = _orient(t[:, 0], t[:, 1], p)
    o1 = _orient(t[:, 1], t[:, 2], p)
    o2 = _orient(t[:, 2], t[:, 0], p)
    return ((o0 >= 0) & (o1 >= 0) & (o2 >= 0)) | ((o0 <= 0) & (o1 <= 0) & (o2 <= 0))


def _coplanar_overlap(A, B, normal):
    drop = np.argmax(np.abs(normal), axis=1)
    keep = np.array([[1, 2], [0, 2], [0, 1]])[drop]
    rows = np.arange(len(A))[:, None, None]
    a2 = A[rows, np.arange(3)[None, :, None], keep[:, None, :]]
    b2 = B[rows, np.arange(3)[None, :, None], keep[:, None, :]]
    hit = _point_in_tri2(a2[:, 0], b2) | _point_in_tri2(b2[:, 0], a2)
    for i, j in _EDGES:
        for k, m in _EDGES:
            hit |= _segments_touch(a2[:, i], a2[:, j], b2[:, k], b2[:, m])
    return hit


def tri_tri_intersect(A, B, eps: float = EPS) -> np.ndarray:
    """Pairwise test of triangles ``A[k]`` and ``B[k]``; both ``(k, 3, 3)``."""
    A = np.asarray(A, dtype=float).reshape(-1, 3, 3)
    B = np.asarray(B, dtype=float).reshape(-1, 3, 3)
    out = np.zeros(len(A), dtype=bool)
    if not len(A):
        return out

    n1 = _unit(np.cross(A[:, 1] - A[:, 0], A[:, 2] - A[:, 0]))
    n2 = _unit(np.cross(B[:, 1] - B[:, 0], B[:, 2] - B[:, 0]))
    dB = np.einsum("kij,kj->ki", B - A[:, :1], n1)
    dA = np.einsum("kij,kj->ki", A - B[:, :1], n2)
    dB[np.abs(dB) < eps] = 0.0
    dA[np.abs(dA) < eps] = 0.0

    separated = np.all(dB > 0, 1) | np.all(dB < 0, 1) | np.all(dA > 0, 1) | np.all(dA < 0, 1)
    coplanar = np.all(dA == 0, 1) | np.all(dB == 0, 1)

    gen = ~separated & ~coplanar
    if gen.any():
        Ag, Bg = A[gen], B[gen]
        D = _unit(np.cross(n1[gen], n2[gen]))
        lo_a, hi_a = _interval(np.einsum("kij,kj->ki", Ag, D), dA[gen])
        lo_b, hi_b = _interval(np.einsum("kij,kj->ki", Bg, D), dB[gen])
        out[gen] = np.maximum(lo_a, lo_b) <= np.minimum(hi_a, hi_b) + eps

    cop = ~separated & coplanar
    if cop.any():
        out[cop] = _coplanar_overlap(A[cop], B[cop], n1[cop])
    return out


def any_tri_tri(A, B, chunk: int = 65536) -> bool:
    """True if any pair ``(A[k], B[k])`` intersects; evaluated in chunks with early exit."""
    for s in range(0, len(A), chunk):
        if tri_tri_intersect(A[s : s + chunk], B[s : s + chunk]).any():
            return True
    return False
