"""Catenary fitting between two rope mounting points.

The rope hangs in the vertical plane through both vehicles. Inside that plane
the curve is ``f(x) = a*cosh((x - b)/a) + c``; the three parameters are
recovered from the two endpoints and the rope length by solving
``sinh(A)/A = r`` for ``A = dx/(2a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleGeometry, NonConvergence

# Relative slack below which the rope counts as taut.
EPS_SLACK = 1e-6


@dataclass(frozen=True)
class PlaneFrame:
    """Vertical plane through ``origin`` whose horizontal axis has heading ``yaw``.

    Local coordinates are ``(u, n, h)``: ``u`` along the plane's horizontal
    axis, ``n`` along the plane normal and ``h`` along world Z. The 2D
    plane coordinates are ``(u, h)``.
    """

    origin: tuple[float, float, float]
    yaw: float

    @property
    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    @property
    def matrix(self) -> np.ndarray:
        """Homogeneous local-to-world transform."""
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.origin
        return m

    @property
    def normal(self) -> np.ndarray:
        return self.rotation[:, 1]

    def to_local(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return (pts - np.asarray(self.origin)) @ self.rotation

    def to_world(self, local) -> np.ndarray:
        loc = np.asarray(local, dtype=float)
        return loc @ self.rotation.T + np.asarray(self.origin)

    def to_plane(self, points) -> np.ndarray:
        """Project world points to 2D plane coordinates (drops the normal offset)."""
        loc = self.to_local(points)
        return loc[..., [0, 2]]

    def from_plane(self, points2d, offset: float = 0.0) -> np.ndarray:
        p = np.asarray(points2d, dtype=float)
        loc = np.stack([p[..., 0], np.full(p.shape[:-1], float(offset)), p[..., 1]], axis=-1)
        return self.to_world(loc)


@dataclass(frozen=True)
class CatenaryParams:
    a: float
    b: float
    c: float
    x1: float
    y1: float
    x2: float
    y2: float
    length: float

    def __call__(self, x):
        return self.a * np.cosh((np.asarray(x) - self.b) / self.a) + self.c

    def slope(self, x):
        return np.sinh((np.asarray(x) - self.b) / self.a)

    def lowest_point(self) -> tuple[float, float]:
        """Lowest point of the curve restricted to the rope span."""
        xb = min(max(self.b, self.x1), self.x2)
        return xb, float(self(xb))

    def arc_length(self, lo: float | None = None, hi: float | None = None) -> float:
        """Closed-form arc length between ``lo`` and ``hi`` (defaults to the span)."""
        lo = self.x1 if lo is None else lo
        hi = self.x2 if hi is None else hi
        return self.a * (math.sinh((hi - self.b) / self.a) - math.sinh((lo - self.b) / self.a))


def _ratio_residual(A: float, r: float) -> float:
    return math.sinh(A) / A - r


def solve_catenary_ratio(r: float, tol: float = 1e-12, max_iter: int = 100) -> float:
    """Solve ``sinh(A)/A = r`` for ``A > 0`` with Newton's method.

    Starts from ``sqrt(6(r-1))``, which always lies right of the root since
    ``sinh(A)/A > 1 + A**2/6``; the iteration is then monotone. Falls back to
    bisection if an iterate leaves the positive axis.
    """
    if not r > 1.0 + EPS_SLACK:
        raise InfeasibleGeometry(f"slack ratio r={r!r} must exceed 1 (rope taut or too short)")
    if tol <= 0:
        raise ValueError("tol must be positive")

    # float spacing near r caps the attainable residual for very slack ropes
    floor = max(tol, 8.0 * math.ulp(r))
    A = math.sqrt(6.0 * (r - 1.0))
    for _ in range(max_iter):
        if abs(_ratio_residual(A, r)) <= tol:
            return A
        step = (math.sinh(A) - r * A) / (math.cosh(A) - r)
        A_next = A - step
        if not (A_next > 0.0 and math.isfinite(A_next)):
            return _bisect_ratio(r, floor, max_iter)
        if abs(A_next - A) <= 4.0 * math.ulp(A):
            A = A_next
            break
        A = A_next
    if abs(_ratio_residual(A, r)) <= floor:
        return A
    raise NonConvergence(f"Newton iteration for r={r!r} did not converge in {max_iter} steps")


def _bisect_ratio(r: float, tol: float, max_iter: int) -> float:
    lo, hi = 1e-6, 100.0
    if _ratio_residual(lo, r) > 0 or _ratio_residual(hi, r) < 0:
        raise NonConvergence(f"r={r!r} not bracketed by [{lo}, {hi}]")
    for _ in range(max(max_iter, 200)):
        mid = 0.5 * (lo + hi)
        res = _ratio_residual(mid, r)
        if abs(res) <= tol or hi - lo < 1e-15:
            return mid
        if res > 0:
            hi = mid
        else:
            lo = mid
    raise NonConvergence(f"bisection for r={r!r} did not converge")


def fit_catenary(p1, p2, length: float) -> CatenaryParams:
    """Fit the catenary through ``p1`` and ``p2`` (2D plane points) with rope ``length``.

    Endpoints are reordered so that ``x1 < x2`` in the returned params.
    """
    (x1, y1), (x2, y2) = (float(p1[0]), float(p1[1])), (float(p2[0]), float(p2[1]))
    if x2 < x1:
        x1, y1, x2, y2 = x2, y2, x1, y1
    dx, dy = x2 - x1, y2 - y1
    if dx <= 0.0:
        raise InfeasibleGeometry("vertical chord: endpoints share the same horizontal coordinate")
    if not length > math.hypot(dx, dy):
        raise InfeasibleGeometry(f"rope length {length} does not exceed chord {math.hypot(dx, dy)}")

    r = math.sqrt(length * length - dy * dy) / dx
    A = solve_catenary_ratio(r)
    a = dx / (2.0 * A)
    b = 0.5 * (x1 + x2) - a * math.atanh(dy / length)
    c = y1 - a * math.cosh((x1 - b) / a)
    # the second endpoint must agree; large mismatch means the closed form broke down
    c2 = y2 - a * math.cosh((x2 - b) / a)
    if abs(c - c2) > 1e-6 * max(1.0, abs(c)):
        raise NonConvergence(f"vertical offset mismatch between endpoints: {c} vs {c2}")
    return CatenaryParams(a, b, c, x1, y1, x2, y2, float(length))


def sample_curve(params: CatenaryParams, n: int) -> np.ndarray:
    """``n`` points evenly spaced in x over the span; endpoints are exact."""
    if n < 2:
        raise ValueError("need at least two samples")
    xs = np.linspace(params.x1, params.x2, n)
    ys = params(xs)
    ys[0], ys[-1] = params.y1, params.y2
    return np.column_stack([xs, ys])


def lift_to_3d(params: CatenaryParams, frame: PlaneFrame, n: int) -> np.ndarray:
    return frame.from_plane(sample_curve(params, n))
