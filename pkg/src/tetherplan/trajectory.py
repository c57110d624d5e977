"""Piecewise 7th-degree trajectories and leader/follower time synchronisation.

Each segment is a degree-7 polynomial per axis in local time ``tau = t - t_k``.
Fitting interpolates the waypoints, keeps derivatives 1-6 continuous at
interior joints and starts/ends at rest (zero velocity, acceleration, jerk).
Those are exactly ``8K`` conditions for ``K`` segments.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWaypoints, NoMatchingTime, OutOfRange

DEG = 7
NC = DEG + 1
D_MIN = 0.25
SCAN_SUBDIVISIONS = 64
ROOT_TOL = 1e-9
MATCH_TOL = 1e-6
# an axis moving less than this over a segment matches any time (wildcard)
STATIONARY_TOL = 1e-9
# closest-point fallback accepts a waypoint reproduced to this distance
POS_TOL = 1e-9

_FALLING = np.array([[math.factorial(i) / math.factorial(i - r) if i >= r else 0.0 for i in range(NC)] for r in range(NC)])


@dataclass(frozen=True)
class PiecewiseTrajectory:
    starts: np.ndarray  # (K,)
    durations: np.ndarray  # (K,)
    coeffs: np.ndarray  # (K, 3, 8), ascending powers of local time

    @property
    def n_segments(self) -> int:
        return len(self.durations)

    @property
    def total_duration(self) -> float:
        return float(self.starts[-1] + self.durations[-1])

    def segment_index(self, t: float) -> int:
        k = bisect.bisect_right(self.starts.tolist(), t) - 1
        return min(max(k, 0), self.n_segments - 1)

    def to_dict(self) -> dict:
        return {
            "starts": self.starts.tolist(),
            "durations": self.durations.tolist(),
            "coeffs": self.coeffs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseTrajectory":
        return cls(np.array(d["starts"], dtype=float), np.array(d["durations"], dtype=float),
                   np.array(d["coeffs"], dtype=float).reshape(-1, 3, NC))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


def segment_durations(waypoints, speed: float, d_min: float = D_MIN) -> np.ndarray:
    wp = np.asarray(waypoints, dtype=float)
    return np.maximum(np.linalg.norm(np.diff(wp, axis=0), axis=1) / speed, d_min)


def shared_durations(wp1, wp2, speed: float, d_min: float = D_MIN) -> np.ndarray:
    """Common segment timing for two index-aligned waypoint lists (slowest vehicle wins)."""
    return np.maximum(segment_durations(wp1, speed, d_min), segment_durations(wp2, speed, d_min))


def fit_trajectory(waypoints, speed: float | None = None, durations=None, d_min: float = D_MIN) -> PiecewiseTrajectory:
    """Interpolating rest-to-rest spline through ``waypoints``.

    Segment times are ``|wp[k+1] - wp[k]| / speed`` floored at ``d_min`` unless
    ``durations`` is given explicitly.
    """
    wp = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    if len(wp) < 2:
        raise ValueError("need at least two waypoints")
    gaps = np.linalg.norm(np.diff(wp, axis=0), axis=1)
    if np.any(gaps <= 1e-9):
        k = int(np.argmax(gaps <= 1e-9))
        raise DegenerateWaypoints(f"waypoints {k} and {k + 1} coincide")
    if durations is None:
        if speed is None or speed <= 0:
            raise ValueError("speed must be positive")
        durations = segment_durations(wp, speed, d_min)
    dur = np.asarray(durations, dtype=float)
    if dur.shape != (len(wp) - 1,) or np.any(dur <= 0):
        raise ValueError("durations must be positive, one per segment")

    K = len(dur)
    M = np.zeros((NC * K, NC * K))
    rhs = np.zeros((NC * K, 3))
    row = 0
    # unknowns are coefficients in normalised time s = tau/d; derivative r scales by d**-r
    for k in range(K):
        base = NC * k
        M[row, base] = 1.0
        rhs[row] = wp[k]
        row += 1
        M[row, base : base + NC] = 1.0
        rhs[row] = wp[k + 1]
        row += 1
    for k in range(K - 1):
        for r in range(1, 7):
            M[row, NC * k : NC * k + NC] = _FALLING[r] / dur[k] ** r
            M[row, NC * (k + 1) + r] = -math.factorial(r) / dur[k + 1] ** r
            row += 1
    for r in range(1, 4):
        M[row, r] = math.factorial(r)
        row += 1
        M[row, NC * (K - 1) : NC * K] = _FALLING[r]
        row += 1
    assert row == NC * K
    sol = np.linalg.solve(M, rhs).reshape(K, NC, 3).transpose(0, 2, 1)
    powers = dur[:, None, None] ** np.arange(NC)[None, None, :]
    coeffs = sol / powers
    # pin the waypoint coefficient exactly
    coeffs[:, :, 0] = wp[:-1]
    starts = np.concatenate([[0.0], np.cumsum(dur)[:-1]])
    return PiecewiseTrajectory(starts, dur, coeffs)


def _horner(c, tau):
    """Evaluate ascending-power coefficients ``c[..., NC]`` at ``tau``."""
    out = c[..., -1] * 1.0
    for i in range(c.shape[-1] - 2, -1, -1):
        out = out * tau + c[..., i]
    return out


def _deriv_coeffs(c: np.ndarray, r: int) -> np.ndarray:
    if r == 0:
        return c
    return c[..., r:] * _FALLING[r, r:]


def evaluate(traj: PiecewiseTrajectory, t: float, derivative: int = 0) -> np.ndarray:
    """Position (or ``derivative``-th derivative) at time ``t`` in ``[0, T]``."""
    T = traj.total_duration
    if not (0.0 <= t <= T):
        raise OutOfRange(f"t={t} outside [0, {T}]")
    k = traj.segment_index(t)
    tau = traj.durations[k] if t == T else min(t - traj.starts[k], traj.durations[k])
    return _horner(_deriv_coeffs(traj.coeffs[k], derivative), tau)


def evaluate_clamped(traj: PiecewiseTrajectory, t: float, derivative: int = 0) -> np.ndarray:
    """Like :func:`evaluate` but holds the final state after ``T`` (and the first before 0)."""
    T = traj.total_duration
    if t >= T:
        return evaluate(traj, T, derivative) if derivative == 0 else np.zeros(3)
    return evaluate(traj, max(t, 0.0), derivative)


def sample(traj: PiecewiseTrajectory, times, derivative: int = 0) -> np.ndarray:
    return np.array([evaluate(traj, float(t), derivative) for t in times])


@dataclass
class SyncFollowerState:
    """Follower-side cache for resolving the leader's trajectory time."""

    tr1: PiecewiseTrajectory
    tr2: PiecewiseTrajectory
    segment: int = 0
    match_tol: float = MATCH_TOL
    from_scratch_count: int = field(default=0)
    # publishing period of the leader; lets the follower break ties in the rest tails
    clock_step: float | None = None

    def reset(self):
        self.segment = 0


def _segment_roots(coeffs: np.ndarray, dur: float, target: np.ndarray):
    """Per-axis real roots of ``p(tau) - target`` on ``[0, dur]``.

    Returns a list with one entry per axis: ``None`` for a stationary axis
    sitting on the target (wildcard), otherwise a sorted array of roots.
    """
    q = coeffs.copy()
    q[:, 0] -= target
    grid = np.linspace(0.0, dur, SCAN_SUBDIVISIONS + 1)
    vals = _horner(q[:, None, :], grid[None, :])  # (3, G)
    dq = _deriv_coeffs(q, 1)
    dvals = _horner(dq[:, None, :], grid[None, :])
    out = []
    for ax in range(3):
        v = vals[ax]
        if np.ptp(v) <= STATIONARY_TOL:
            out.append(None if abs(v[0]) <= STATIONARY_TOL else np.empty(0))
            continue
        c, dc = q[ax].tolist(), dq[ax].tolist()
        roots = grid[v == 0].tolist()
        brackets = [(grid[i], grid[i + 1]) for i in np.flatnonzero(v[:-1] * v[1:] < 0)]
        # a pair of roots inside one cell shows up as a sign change of the derivative instead
        dv = dvals[ax]
        for i in np.flatnonzero((v[:-1] * v[1:] > 0) & (dv[:-1] * dv[1:] < 0)):
            te = _refine_root(dc, _deriv_coeffs(q[ax], 2).tolist(), float(grid[i]), float(grid[i + 1]))
            ve = _poly(c, te)
            if abs(ve) <= 1e-14:
                roots.append(te)
            elif ve * v[i] < 0:
                brackets += [(grid[i], te), (te, grid[i + 1])]
        roots += [_refine_root(c, dc, float(lo), float(hi)) for lo, hi in brackets]
        out.append(np.sort(np.array(roots, dtype=float)))
    return out


def _poly(c: list, t: float) -> float:
    out = c[-1]
    for a in reversed(c[:-1]):
        out = out * t + a
    return out


def _refine_root(c: list, dc: list, lo: float, hi: float, tol: float = ROOT_TOL * 1e-3) -> float:
    """Root of ``c`` bracketed by a sign change on ``[lo, hi]``: Newton steps, bisection when they leave the bracket."""
    flo = _poly(c, lo)
    t = 0.5 * (lo + hi)
    for _ in range(200):
        f = _poly(c, t)
        if f == 0.0:
            return t
        if (f < 0) == (flo < 0):
            lo, flo = t, f
        else:
            hi = t
        if hi - lo <= tol:
            break
        d = _poly(dc, t)
        nt = t - f / d if d != 0.0 else lo - 1.0
        if not lo < nt < hi:
            nt = 0.5 * (lo + hi)
        elif abs(nt - t) <= 1e-3 * tol:
            return nt
        t = nt
    return 0.5 * (lo + hi)


def _match(roots, tol: float):
    """Smallest time on which all non-wildcard axes agree within ``tol``."""
    active = [r for r in roots if r is not None]
    if not active:
        return 0.0
    if any(len(r) == 0 for r in active):
        return None
    pivot = min(active, key=len)
    for cand in pivot:
        picks = []
        for r in active:
            j = int(np.argmin(np.abs(r - cand)))
            if abs(r[j] - cand) > tol:
                break
            picks.append(r[j])
        else:
            if max(picks) - min(picks) <= tol:
                return float(np.mean(picks))
    return None


def _resolve_in_segment(tr: PiecewiseTrajectory, k: int, wp1, tol: float):
    dur = float(tr.durations[k])
    last = k == tr.n_segments - 1
    # the rest end is a high-multiplicity root; an exact hit means the leader is holding there
    if last and np.array_equal(_horner(tr.coeffs[k], dur), wp1):
        return tr.total_duration
    roots = _segment_roots(tr.coeffs[k], dur, wp1)
    trimmed = [r if r is None else r[(r >= 0) & ((r <= dur) if last else (r < dur))] for r in roots]
    tau = _match(trimmed, tol)
    if tau is not None:
        # the per-axis mean ignores how fast each axis moves; weight them by polishing on distance
        polished = _refine_closest(tr.coeffs[k], dur, wp1, tau)
        if (last or polished < dur) and _distance(tr.coeffs[k], polished, wp1) <= _distance(tr.coeffs[k], tau, wp1):
            tau = polished
        return tr.starts[k] + tau
    # near a rest end the curve is flat to 4th order, so per-axis roots are only
    # known to roundoff and may disagree; take the closest point on the curve instead
    cands = [0.0, dur] + [float(x) for r in trimmed if r is not None for x in r]
    best, best_res = None, math.inf
    for c in cands:
        tau = _refine_closest(tr.coeffs[k], dur, wp1, c)
        res = _distance(tr.coeffs[k], tau, wp1)
        if res < best_res and (last or tau < dur):
            best, best_res = tau, res
    if best is not None and best_res <= POS_TOL:
        return tr.starts[k] + best
    return None


def _refine_closest(coeffs, dur: float, target, tau: float, iterations: int = 20) -> float:
    """Newton steps on the squared distance to ``target``, clamped to the segment."""
    c = [row.tolist() for row in coeffs]
    d1 = [row.tolist() for row in _deriv_coeffs(coeffs, 1)]
    d2 = [row.tolist() for row in _deriv_coeffs(coeffs, 2)]
    w = [float(x) for x in target]
    for _ in range(iterations):
        g = h = 0.0
        for ax in range(3):
            e = _poly(c[ax], tau) - w[ax]
            v = _poly(d1[ax], tau)
            g += e * v
            h += v * v + e * _poly(d2[ax], tau)
        if h <= 0 or g == 0:
            break
        new = min(max(tau - g / h, 0.0), dur)
        if new == tau:
            break
        tau = new
    return tau


def _distance(coeffs, tau: float, target) -> float:
    return math.sqrt(sum((_poly(coeffs[ax].tolist(), tau) - float(target[ax])) ** 2 for ax in range(3)))


def _snap_to_clock(tr: PiecewiseTrajectory, t: float, wp1, step: float) -> float:
    """Nearest publishing instant (a tick or the clamped end) if it explains ``wp1`` at least as well as ``t``.

    Near a rest end the position changes by less than one ulp over many
    microseconds, so several times reproduce ``wp1``; the clock picks the one
    the leader actually used. Elsewhere the residual test rejects the tick.
    """
    T = tr.total_duration
    res = float(np.linalg.norm(evaluate(tr, t) - wp1))
    best = t
    for c in (min(round(t / step) * step, T), T):
        if abs(c - t) <= step / 2:
            r = float(np.linalg.norm(evaluate(tr, c) - wp1))
            if r <= res:
                best, res = c, r
    return best


def resolve_follower_time(sync: SyncFollowerState, wp1) -> tuple[float, np.ndarray]:
    """Recover the leader time that produced ``wp1`` and evaluate the follower there."""
    wp1 = np.asarray(wp1, dtype=float)
    tr1 = sync.tr1
    order = list(range(sync.segment, tr1.n_segments))
    for attempt, segments in enumerate((order, range(tr1.n_segments))):
        for k in segments:
            t = _resolve_in_segment(tr1, k, wp1, sync.match_tol)
            if t is not None:
                if attempt:
                    sync.from_scratch_count += 1
                sync.segment = k
                t = min(max(t, 0.0), tr1.total_duration)
                if sync.clock_step:
                    t = _snap_to_clock(tr1, t, wp1, sync.clock_step)
                return t, evaluate(sync.tr2, t)
    raise NoMatchingTime(f"no time on the leader trajectory reproduces waypoint {wp1.tolist()}")
