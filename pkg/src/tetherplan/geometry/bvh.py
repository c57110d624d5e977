"""Axis-aligned bounding volume hierarchy and mesh-mesh intersection queries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyMesh
from .intersect import any_tri_tri, tri_tri_intersect
from .mesh import TriMesh

# boxes are padded so that exact face contact still reaches the triangle test
_BOX_PAD = 1e-9


@dataclass
class BvhTree:
    """Flat binary tree. Node ``i`` covers ``order[start[i]:start[i] + count[i]]``.

    Leaves have ``left[i] == right[i] == -1``.
    """

    mesh: TriMesh
    lo: np.ndarray
    hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray
    max_leaf: int
    leaf_slots: np.ndarray  # (n_nodes, max_leaf) triangle ids for leaves, -1 padded

    @property
    def n_nodes(self) -> int:
        return len(self.lo)

    @property
    def is_leaf(self) -> np.ndarray:
        return self.left < 0

    def depth(self) -> int:
        best, stack = 0, [(0, 1)]
        while stack:
            i, d = stack.pop()
            best = max(best, d)
            if self.left[i] >= 0:
                stack += [(self.left[i], d + 1), (self.right[i], d + 1)]
        return best


def build_bvh(mesh: TriMesh, max_leaf: int = 4) -> BvhTree:
    """Median split on the longest axis of the centroid bounds."""
    if not len(mesh.triangles):
        raise EmptyMesh("cannot build a BVH over an empty mesh")
    if max_leaf < 1:
        raise ValueError("max_leaf must be >= 1")
    corners = mesh.corners
    tri_lo, tri_hi = corners.min(axis=1), corners.max(axis=1)
    cent = 0.5 * (tri_lo + tri_hi)
    order = np.arange(len(corners))

    lo, hi, left, right, start, count = [], [], [], [], [], []

    def new_node(s, e):
        ids = order[s:e]
        lo.append(tri_lo[ids].min(axis=0))
        hi.append(tri_hi[ids].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(s)
        count.append(e - s)
        return len(lo) - 1

    root = new_node(0, len(order))
    stack = [(root, 0, len(order))]
    while stack:
        node, s, e = stack.pop()
        if e - s <= max_leaf:
            continue
        ids = order[s:e]
        c = cent[ids]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        mid = (e - s) // 2
        part = np.argpartition(c[:, axis], mid, kind="introselect")
        order[s:e] = ids[part]
        li = new_node(s, s + mid)
        ri = new_node(s + mid, e)
        left[node], right[node] = li, ri
        stack += [(li, s, s + mid), (ri, s + mid, e)]

    left_a = np.array(left)
    count_a = np.array(count)
    start_a = np.array(start)
    slots = np.full((len(lo), max_leaf), -1, dtype=np.int64)
    for i in np.flatnonzero(left_a < 0):
        slots[i, : count_a[i]] = order[start_a[i] : start_a[i] + count_a[i]]
    return BvhTree(mesh, np.array(lo), np.array(hi), left_a, np.array(right), start_a, count_a,
                   order, max_leaf, slots)


def _transform_boxes(lo, hi, T):
    R, t = T[:3, :3], T[:3, 3]
    c, e = 0.5 * (lo + hi), 0.5 * (hi - lo)
    c2 = c @ R.T + t
    e2 = e @ np.abs(R).T
    return c2 - e2, c2 + e2


def candidate_pairs(a: BvhTree, b: BvhTree, transform_b=None) -> tuple[np.ndarray, np.ndarray]:
    """Triangle index pairs whose leaf boxes overlap, after placing ``b`` by ``transform_b``."""
    if transform_b is None:
        blo, bhi = b.lo, b.hi
    else:
        blo, bhi = _transform_boxes(b.lo, b.hi, np.asarray(transform_b, dtype=float))
    vol_a = np.prod(a.hi - a.lo, axis=1)
    vol_b = np.prod(bhi - blo, axis=1)

    ia, ib = np.array([0]), np.array([0])
    leaf_a, leaf_b = [], []
    while len(ia):
        overlap = np.all((a.lo[ia] <= bhi[ib] + _BOX_PAD) & (blo[ib] <= a.hi[ia] + _BOX_PAD), axis=1)
        ia, ib = ia[overlap], ib[overlap]
        a_leaf, b_leaf = a.left[ia] < 0, b.left[ib] < 0
        both = a_leaf & b_leaf
        leaf_a.append(ia[both])
        leaf_b.append(ib[both])
        split_a = ~both & (b_leaf | (~a_leaf & (vol_a[ia] >= vol_b[ib])))
        split_b = ~both & ~split_a
        ia = np.concatenate([a.left[ia[split_a]], a.right[ia[split_a]], ia[split_b], ia[split_b]])
        ib = np.concatenate([ib[split_a], ib[split_a], b.left[ib[split_b]], b.right[ib[split_b]]])

    la, lb = np.concatenate(leaf_a), np.concatenate(leaf_b)
    ta = np.repeat(a.leaf_slots[la][:, :, None], b.max_leaf, axis=2).reshape(-1)
    tb = np.repeat(b.leaf_slots[lb][:, None, :], a.max_leaf, axis=1).reshape(-1)
    keep = (ta >= 0) & (tb >= 0)
    return ta[keep], tb[keep]


def _placed_corners(mesh: TriMesh, transform):
    if transform is None:
        return mesh.corners
    T = np.asarray(transform, dtype=float)
    return mesh.corners @ T[:3, :3].T + T[:3, 3]


def meshes_intersect(a: BvhTree, b: BvhTree, transform_b=None) -> bool:
    """True iff some triangle of ``a`` touches some triangle of ``b`` placed by ``transform_b``."""
    ta, tb = candidate_pairs(a, b, transform_b)
    if not len(ta):
        return False
    cb = _placed_corners(b.mesh, transform_b)
    return any_tri_tri(a.mesh.corners[ta], cb[tb])


def meshes_intersect_brute(a: TriMesh, b: TriMesh, transform_b=None) -> bool:
    """All-pairs reference used to check the hierarchy."""
    cb = _placed_corners(b, transform_b)
    ia, ib = np.meshgrid(np.arange(len(a.corners)), np.arange(len(cb)), indexing="ij")
    return bool(tri_tri_intersect(a.corners[ia.ravel()], cb[ib.ravel()]).any())
