from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEGENERATE_AREA = 1e-12


@dataclass
class TriMesh:
    """Indexed triangle mesh. ``dropped`` counts facets removed as degenerate at load time."""

    vertices: np.ndarray
    triangles: np.ndarray
    dropped: int = 0
    name: str = ""
    _corners: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles) and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise IndexError("triangle index out of range")

    @classmethod
    def from_soup(cls, soup, name: str = "", drop_degenerate: bool = True) -> "TriMesh":
        """Build from an ``(m, 3, 3)`` triangle soup, merging bit-identical vertices."""
        soup = np.asarray(soup, dtype=float).reshape(-1, 3, 3)
        dropped = 0
        if drop_degenerate and len(soup):
            keep = triangle_areas(soup) >= DEGENERATE_AREA
            dropped = int((~keep).sum())
            soup = soup[keep]
        if not len(soup):
            return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), dropped, name)
        verts, inv = np.unique(soup.reshape(-1, 3), axis=0, return_inverse=True)
        return cls(verts, inv.reshape(-1, 3), dropped, name)

    @property
    def corners(self) -> np.ndarray:
        """``(m, 3, 3)`` array of triangle corner coordinates (cached)."""
        if self._corners is None:
            self._corners = self.vertices[self.triangles]
        return self._corners

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        used = self.vertices[np.unique(self.triangles)] if len(self.triangles) else self.vertices
        return used.min(axis=0), used.max(axis=0)

    def transformed(self, transform) -> "TriMesh":
        T = np.asarray(transform, dtype=float)
        verts = self.vertices @ T[:3, :3].T + T[:3, 3]
        return TriMesh(verts, self.triangles.copy(), self.dropped, self.name)

    def to_obj(self) -> str:
        lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in self.vertices.tolist()]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in self.triangles.tolist()]
        return "\n".join(lines) + "\n"


def triangle_areas(corners) -> np.ndarray:
    c = np.asarray(corners, dtype=float)
    return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)


def signed_volume(mesh: TriMesh) -> float:
    """Divergence-theorem volume; positive for outward-oriented closed meshes."""
    c = mesh.corners
    return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)


def is_closed_oriented(mesh: TriMesh) -> bool:
    """Every directed edge appears once and its reverse appears once."""
    t = mesh.triangles
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    directed, counts = np.unique(edges, axis=0, return_counts=True)
    if np.any(counts != 1):
        return False
    fwd = {tuple(e) for e in directed.tolist()}
    return all((b, a) in fwd for a, b in fwd)


# Fixed, deliberately irrational-looking direction so rays rarely graze edges.
_RAY_DIR = np.array([0.5773502691896258, 0.5884716038470861, 0.5659289345321654])
_RAY_DIR = _RAY_DIR / np.linalg.norm(_RAY_DIR)


def point_triangle_distance(points, corners) -> np.ndarray:
    """Distance from every point to every triangle, shape ``(n_points, n_tris)``."""
    p = np.asarray(points, dtype=float)[:, None, :]
    a, b, c = (np.asarray(corners, dtype=float)[None, :, i, :] for i in range(3))
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("...k,...k->...", ab, ap)
    d2 = np.einsum("...k,...k->...", ac, ap)
    bp = p - b
    d3 = np.einsum("...k,...k->...", ab, bp)
    d4 = np.einsum("...k,...k->...", ac, bp)
    cp = p - c
    d5 = np.einsum("...k,...k->...", ab, cp)
    d6 = np.einsum("...k,...k->...", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = np.where(denom != 0, vb / denom, 0.0)
        w = np.where(denom != 0, vc / denom, 0.0)
        closest = a + ab * v[..., None] + ac * w[..., None]
        # Voronoi regions of the closest-point algorithm, most specific last
        t_bc = np.clip((d4 - d3) / ((d4 - d3) + (d5 - d6)), 0, 1)
        closest = np.where(((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0))[..., None], b + (c - b) * t_bc[..., None], closest)
        t_ac = np.clip(d2 / (d2 - d6), 0, 1)
        closest = np.where(((vb <= 0) & (d2 >= 0) & (d6 <= 0))[..., None], a + ac * t_ac[..., None], closest)
        t_ab = np.clip(d1 / (d1 - d3), 0, 1)
        closest = np.where(((vc <= 0) & (d1 >= 0) & (d3 <= 0))[..., None], a + ab * t_ab[..., None], closest)
    closest = np.where(((d6 >= 0) & (d5 <= d6))[..., None], c, closest)
    closest = np.where(((d3 >= 0) & (d4 <= d3))[..., None], b, closest)
    closest = np.where(((d1 <= 0) & (d2 <= 0))[..., None], a, closest)
    return np.linalg.norm(p - closest, axis=-1)


def ray_crossings(points, corners, direction=_RAY_DIR) -> np.ndarray:
    """Number of triangles hit by the ray from each point (Moller-Trumbore)."""
    p = np.asarray(points, dtype=float)[:, None, :]
    c = np.asarray(corners, dtype=float)
    e1 = (c[:, 1] - c[:, 0])[None]
    e2 = (c[:, 2] - c[:, 0])[None]
    h = np.cross(direction, e2)
    det = np.einsum("...k,...k->...", e1, h)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        s = p - c[None, :, 0]
        u = inv * np.einsum("...k,...k->...", s, h)
        q = np.cross(s, e1)
        v = inv * (q @ direction)
        t = inv * np.einsum("...k,...k->...", e2, q)
    hit = (np.abs(det) > 1e-15) & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)
    return hit.sum(axis=1)


def points_inside(mesh: TriMesh, points, on_tol: float = 1e-9) -> np.ndarray:
    """Inside-or-on test for a closed mesh: surface distance first, then ray parity."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if not len(pts):
        return np.zeros(0, dtype=bool)
    on = point_triangle_distance(pts, mesh.corners).min(axis=1) <= on_tol
    odd = ray_crossings(pts, mesh.corners) % 2 == 1
    return on | odd


def box_mesh(lo, hi, name: str = "box") -> TriMesh:
    """Axis-aligned box with outward-facing triangles."""
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    v = np.array([[lo[0] if i & 1 == 0 else hi[0], lo[1] if i & 2 == 0 else hi[1], lo[2] if i & 4 == 0 else hi[2]] for i in range(8)])
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriMesh(v, np.array(tris), name=name)
