"""Dynamic "V" rigid body enclosing both vehicles and the hanging rope.

The body is built in the vertical plane of the formation: the catenary is
bounded from below by two lines, each passing through a mounting point pushed
outward by ``safety_dx`` and touching the curve from underneath. The
resulting five-sided profile is extruded along the plane normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .catenary import CatenaryParams, PlaneFrame, fit_catenary, sample_curve
from .errors import TangentDegenerate
from .formation import FormationState
from .geometry.mesh import TriMesh

PROFILE_LABELS = ("lower", "inner_r", "right", "intersect", "left", "inner_l")
# boundary loop over PROFILE_LABELS indices: inner_l -> inner_r -> right -> intersect -> left
BOUNDARY = (5, 1, 2, 3, 4)


@dataclass(frozen=True)
class VBodyConfig:
    """Body dimensions.

    ``safety_dx`` must be at least the vehicle bounding radius since it is the
    only thing that puts material around the vehicles. ``margin`` grows the
    whole profile outward and pads the thickness on both sides; the planner
    uses it to leave room for tracking error.
    """

    safety_dx: float = 0.15
    thickness: float = 0.2
    mount_offset: float = 0.0
    curve_samples: int = 128
    margin: float = 0.0

    def __post_init__(self):
        if not (self.safety_dx > 0 and self.thickness > 0):
            raise ValueError("safety_dx and thickness must be positive")
        if self.curve_samples < 16:
            raise ValueError("curve_samples must be >= 16")
        if self.margin < 0 or self.mount_offset < 0:
            raise ValueError("margin and mount_offset must be non-negative")

    def inflated(self, margin: float) -> "VBodyConfig":
        return replace(self, margin=margin)


@dataclass(frozen=True)
class VProfile:
    """Six labelled 2D points (plane coordinates about the formation midpoint)."""

    points: np.ndarray  # (6, 2) in PROFILE_LABELS order
    curve: CatenaryParams
    samples: np.ndarray
    mounts: np.ndarray  # (2, 2): right mount (vehicle 1), left mount (vehicle 2)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.points[PROFILE_LABELS.index(label)]

    @property
    def polygon(self) -> np.ndarray:
        return self.points[list(BOUNDARY)]


@dataclass(frozen=True)
class VBodyMesh:
    mesh: TriMesh
    profile: VProfile
    frame: PlaneFrame

    @property
    def vertices(self) -> np.ndarray:
        return self.mesh.vertices


def _tangent_height(anchor: np.ndarray, samples: np.ndarray, x_at: float) -> float:
    """Highest y at ``x_at`` of a line through ``anchor`` that keeps every sample on or above it."""
    dx = samples[:, 0] - anchor[0]
    vals = anchor[1] + (samples[:, 1] - anchor[1]) * (x_at - anchor[0]) / dx
    return float(vals.min())


def _offset_polygon(poly: np.ndarray, dist: float) -> np.ndarray:
    """Outward offset of a clockwise polygon by ``dist`` (mitred corners)."""
    pts = poly.tolist()
    n = len(pts)
    normals = []
    for i in range(n):
        (x0, y0), (x1, y1) = pts[i], pts[(i + 1) % n]
        ex, ey = x1 - x0, y1 - y0
        norm = math.hypot(ex, ey)
        normals.append((-ey / norm, ex / norm))
    out = np.empty_like(poly)
    for i in range(n):
        (ax, ay), (bx, by) = normals[i - 1], normals[i]
        denom = 1.0 + ax * bx + ay * by
        # mitre vector m satisfies m.n0 = m.n1 = dist
        if denom > 1e-9:
            out[i] = (pts[i][0] + dist * (ax + bx) / denom, pts[i][1] + dist * (ay + by) / denom)
        else:
            out[i] = (pts[i][0] + dist * bx, pts[i][1] + dist * by)
    return out


def build_profile(state: FormationState, rope_length: float, cfg: VBodyConfig) -> VProfile:
    R = 0.5 * state.d
    ct, st = math.cos(state.theta_form), math.sin(state.theta_form)
    inner_r = np.array([R * ct, R * st - cfg.mount_offset])
    inner_l = np.array([-R * ct, -R * st - cfg.mount_offset])

    curve = fit_catenary(inner_l, inner_r, rope_length)
    lower = np.array(curve.lowest_point())
    right = inner_r + (cfg.safety_dx, 0.0)
    left = inner_l - (cfg.safety_dx, 0.0)
    samples = sample_curve(curve, cfg.curve_samples)

    xl = lower[0]
    # the depth floor keeps a proper V when the lowest point sits at a mount (near-taut, steep rope)
    floor = lower[1] - cfg.safety_dx
    t_right = min(_tangent_height(right, samples, xl), floor)
    t_left = min(_tangent_height(left, samples, xl), floor)
    s_right = (right[1] - t_right) / (right[0] - xl)
    s_left = (left[1] - t_left) / (left[0] - xl)
    if s_right - s_left <= 1e-12:
        raise TangentDegenerate("bounding lines are parallel")
    x_int = xl + (t_left - t_right) / (s_right - s_left)
    intersect = np.array([x_int, t_right + s_right * (x_int - xl)])

    pts = np.array([lower, inner_r, right, intersect, left, inner_l])
    if cfg.margin > 0:
        pts[list(BOUNDARY)] = _offset_polygon(pts[list(BOUNDARY)], cfg.margin)
    return VProfile(pts, curve, samples, np.array([inner_r, inner_l]))


def _ear_clip(poly: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a counter-clockwise simple polygon, skipping zero-area ears."""
    idx = list(range(len(poly)))
    tris: list[tuple[int, int, int]] = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    scale = float(np.ptp(poly, axis=0).max()) or 1.0
    eps = 1e-12 * scale * scale
    poly = [tuple(p) for p in poly.tolist()]
    while len(idx) > 3:
        m = len(idx)
        for k in range(m):
            i, j, l = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = poly[i], poly[j], poly[l]
            if cross(a, b, c) <= eps:
                continue
            blocked = False
            for q in idx:
                p = poly[q]
                if q in (i, j, l) or p == a or p == b or p == c:
                    continue
                if cross(a, b, p) >= -eps and cross(b, c, p) >= -eps and cross(c, a, p) >= -eps:
                    blocked = True
                    break
            if not blocked:
                tris.append((i, j, l))
                del idx[k]
                break
        else:
            # only collinear vertices remain to be clipped
            k = min(range(m), key=lambda k: abs(cross(poly[idx[k - 1]], poly[idx[k]], poly[idx[(k + 1) % m]])))
            del idx[k]
    a, b, c = (poly[q] for q in idx)
    if cross(a, b, c) > eps:
        tris.append(tuple(idx))
    return tris


def extrude(profile: VProfile, frame: PlaneFrame, cfg: VBodyConfig) -> VBodyMesh:
    """Duplicate the profile at +-thickness/2 along the plane normal and close it into a mesh."""
    half = 0.5 * cfg.thickness + cfg.margin
    front = frame.from_plane(profile.points, -half)
    back = frame.from_plane(profile.points, +half)
    verts = np.vstack([front, back])

    loop = list(BOUNDARY)  # clockwise in plane coordinates
    ccw = loop[::-1]
    cap = _ear_clip(profile.points[ccw])
    tris = []
    # the plane's (u, h) axes are left-handed w.r.t. the normal, so clockwise faces +normal
    for a, b, c in cap:
        tris.append((ccw[a], ccw[b], ccw[c]))  # front cap, faces -normal
        tris.append((ccw[a] + 6, ccw[c] + 6, ccw[b] + 6))  # back cap, faces +normal
    for k in range(len(loop)):
        i, j = loop[k], loop[(k + 1) % len(loop)]
        tris.append((i, j, j + 6))
        tris.append((i, j + 6, i + 6))
    return VBodyMesh(TriMesh(verts, np.array(tris)), profile, frame)


def body_for_state(state: FormationState, rope_length: float, cfg: VBodyConfig) -> VBodyMesh:
    return extrude(build_profile(state, rope_length, cfg), state.frame, cfg)


def rope_points(body: VBodyMesh) -> np.ndarray:
    """World coordinates of the sampled rope."""
    return body.frame.from_plane(body.profile.samples)


def mount_points(body: VBodyMesh) -> np.ndarray:
    return body.frame.from_plane(body.profile.mounts)
