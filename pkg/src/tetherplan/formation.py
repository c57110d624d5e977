"""Two-vehicle <-> formation-state transform.

A formation state is ``[x, y, z, phi_yaw, d, theta_form]``: the midpoint of
the pair, the heading of the vertical plane through both vehicles, the full
3D separation and the elevation of the line joining them. Vehicle ordering is
fixed by ``delta = p1 - p2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .catenary import PlaneFrame
from .errors import AngleOutOfRange, DegenerateVertical

THETA_MAX = math.pi / 3.0
EPS_H = 1e-9
# rounding slack on the +-60 deg bound so decompose/compose round trips at the bound survive
_THETA_TOL = 1e-12


def wrap_angle(a):
    """Wrap to ``[-pi, pi)``."""
    return (np.asarray(a) + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class FormationState:
    x: float
    y: float
    z: float
    phi_yaw: float
    d: float
    theta_form: float

    @property
    def p(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def frame(self) -> PlaneFrame:
        return PlaneFrame((self.x, self.y, self.z), self.phi_yaw)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.phi_yaw, self.d, self.theta_form])

    @classmethod
    def from_array(cls, arr) -> "FormationState":
        return cls(*(float(v) for v in arr))

    def is_well_formed(self) -> bool:
        vals = self.as_array()
        return bool(np.all(np.isfinite(vals))) and self.d > 0 and abs(self.theta_form) <= THETA_MAX + _THETA_TOL


@dataclass(frozen=True)
class VehiclePair:
    p1: tuple[float, float, float]
    p2: tuple[float, float, float]

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.p1, dtype=float), np.asarray(self.p2, dtype=float)


def compose(pair: VehiclePair) -> FormationState:
    p1, p2 = pair.as_arrays()
    dx, dy, dz = p1 - p2
    horiz = math.hypot(dx, dy)
    if horiz <= EPS_H:
        raise DegenerateVertical(f"horizontal separation {horiz:.3g} m too small to define a plane")
    theta = math.atan2(dz, horiz)
    if abs(theta) > THETA_MAX + _THETA_TOL:
        raise AngleOutOfRange(f"theta_form {math.degrees(theta):.2f} deg outside [-60, 60]")
    mid = 0.5 * (p1 + p2)
    return FormationState(
        float(mid[0]), float(mid[1]), float(mid[2]),
        math.atan2(dy, dx), math.sqrt(dx * dx + dy * dy + dz * dz), theta,
    )


def decompose(state: FormationState) -> VehiclePair:
    p1, p2 = decompose_array(state.as_array())
    return VehiclePair(tuple(p1.tolist()), tuple(p2.tolist()))


def decompose_array(s) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised decompose over ``(..., 6)`` state arrays."""
    s = np.asarray(s, dtype=float)
    R = 0.5 * s[..., 4]
    ct, st = np.cos(s[..., 5]), np.sin(s[..., 5])
    cy, sy = np.cos(s[..., 3]), np.sin(s[..., 3])
    off = np.stack([R * ct * cy, R * ct * sy, R * st], axis=-1)
    mid = s[..., :3]
    return mid + off, mid - off


def compose_array(p1, p2) -> np.ndarray:
    """Vectorised compose without range checks."""
    p1, p2 = np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)
    delta = p1 - p2
    horiz = np.hypot(delta[..., 0], delta[..., 1])
    return np.concatenate([
        0.5 * (p1 + p2),
        np.stack([
            np.arctan2(delta[..., 1], delta[..., 0]),
            np.linalg.norm(delta, axis=-1),
            np.arctan2(delta[..., 2], horiz),
        ], axis=-1),
    ], axis=-1)


def interpolate(a: FormationState, b: FormationState, t: float) -> FormationState:
    if t == 0:
        return a
    if t == 1:
        return b
    return FormationState.from_array(interpolate_array(a.as_array(), b.as_array(), t))


def interpolate_array(a, b, t):
    """Interpolate state arrays; ``t`` may be an array for batch interpolation."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    t = np.asarray(t, dtype=float)[..., None]
    delta = b - a
    delta[..., 3] = wrap_angle(delta[..., 3])
    return a + t * delta
