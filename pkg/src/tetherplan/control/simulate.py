"""Closed-loop leader/follower execution of a decomposed formation plan."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import CollisionDuringExecution, DivergenceDetected
from ..formation import VehiclePair, compose
from ..planner import StateValidator
from ..trajectory import SyncFollowerState, evaluate_clamped, fit_trajectory, resolve_follower_time, shared_durations
from ..vbody import VBodyConfig
from .mpc import MpcConfig, QuadState, shift_sequence, solve_mpc

LOG_COLUMNS = (
    ["tick", "t", "t2"]
    + [f"v{i}_{n}" for i in (1, 2) for n in ("px", "py", "pz", "vx", "vy", "vz", "phi", "theta")]
    + [f"v{i}_{n}" for i in (1, 2) for n in ("T", "phi_ref", "theta_ref")]
    + [f"{w}_{n}" for w in ("des", "meas") for n in ("x", "y", "z", "yaw", "d", "theta")]
    + ["err1", "err2", "collision"]
)


@dataclass
class MissionLog:
    rows: list = field(default_factory=list)
    trajectory_duration: float = 0.0
    stalls: int = 0
    resyncs: int = 0

    def column(self, name: str) -> np.ndarray:
        i = LOG_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in self.rows:
            w.writerow([r[0]] + [f"{v:.17g}" for v in r[1:-1]] + [int(r[-1])])
        return buf.getvalue()

    def final_positions(self) -> tuple[np.ndarray, np.ndarray]:
        r = self.rows[-1]
        return np.array(r[3:6], dtype=float), np.array(r[11:14], dtype=float)

    def summary(self, wp1=None, wp2=None) -> dict:
        if not self.rows:
            return {"ticks": 0}
        d_err = np.abs(self.column("des_d") - self.column("meas_d"))
        out = {
            "ticks": len(self.rows),
            "duration": float(self.rows[-1][1]),
            "trajectory_duration": self.trajectory_duration,
            "max_tracking_error_1": float(self.column("err1").max()),
            "max_tracking_error_2": float(self.column("err2").max()),
            "max_d_error": float(d_err.max()),
            "collision_count": int(self.column("collision").sum()),
            "solver_stalls": self.stalls,
            "resyncs": self.resyncs,
        }
        if wp1 is not None and wp2 is not None:
            p1, p2 = self.final_positions()
            out["final_error_1"] = float(np.linalg.norm(p1 - np.asarray(wp1)[-1]))
            out["final_error_2"] = float(np.linalg.norm(p2 - np.asarray(wp2)[-1]))
        return out


def _horizon_reference(tr, t: float, cfg: MpcConfig) -> np.ndarray:
    ref = np.zeros((cfg.horizon, 8))
    for j in range(cfg.horizon):
        tj = t + (j + 1) * cfg.dt
        ref[j, :3] = evaluate_clamped(tr, tj)
        ref[j, 3:6] = evaluate_clamped(tr, tj, 1)
    return ref


def _formation_row(p1, p2) -> list:
    s = compose(VehiclePair(np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)))
    return [s.x, s.y, s.z, s.phi_yaw, s.d, s.theta_form]


def simulate_mission(wp1, wp2, environment, mpc: MpcConfig, vbody: VBodyConfig, rope_length: float, *,
                     speed: float = 0.3, settle_time: float = 4.0, abort_error: float = 1.0,
                     stop_on_collision: bool = True, disturbance_std: float = 0.0,
                     seed: int = 0) -> MissionLog:
    """Fly both vehicles along their waypoint lists with one MPC each.

    The leader steps its trajectory on the shared clock (period ``mpc.dt``) and
    publishes its reference position. The follower recovers the leader time
    from that position alone and evaluates its own trajectory there. Every
    tick the measured formation's V-body (no margin) is checked against
    ``environment``. ``disturbance_std`` adds seeded Gaussian noise (m/s) to
    both vehicles' velocities after every step.
    """
    wp1, wp2 = np.asarray(wp1, dtype=float), np.asarray(wp2, dtype=float)
    durations = shared_durations(wp1, wp2, speed)
    tr1 = fit_trajectory(wp1, durations=durations)
    tr2 = fit_trajectory(wp2, durations=durations)
    sync = SyncFollowerState(tr1, tr2, clock_step=mpc.dt)
    checker = StateValidator(environment, vbody, rope_length)
    T = tr1.total_duration
    dt = mpc.dt
    n_ticks = int(math.ceil((T + settle_time) / dt - 1e-9))

    x1, x2 = QuadState.hover_at(wp1[0]).as_array(), QuadState.hover_at(wp2[0]).as_array()
    u1 = u2 = mpc.hover_input
    warm1 = warm2 = None
    rng = np.random.default_rng(seed)
    log = MissionLog(trajectory_duration=T)
    for k in range(n_ticks + 1):
        t = k * dt
        t1 = min(t, T)
        ref1 = evaluate_clamped(tr1, t1)
        t2, ref2 = resolve_follower_time(sync, ref1)
        des = _formation_row(ref1, ref2)
        meas = _formation_row(x1[:3], x2[:3])
        collided = not checker(np.array(meas))
        e1 = float(np.linalg.norm(x1[:3] - ref1))
        e2 = float(np.linalg.norm(x2[:3] - ref2))
        log.rows.append([k, t, t2, *x1.tolist(), *x2.tolist(), *u1.tolist(), *u2.tolist(), *des, *meas, e1, e2, collided])
        if collided and stop_on_collision:
            raise CollisionDuringExecution(k, log)
        if max(e1, e2) > abort_error:
            raise DivergenceDetected(k, max(e1, e2), log)
        if k == n_ticks:
            break
        s1 = solve_mpc(x1, _horizon_reference(tr1, t1, mpc), u1, mpc, warm1)
        s2 = solve_mpc(x2, _horizon_reference(tr2, t2, mpc), u2, mpc, warm2)
        log.stalls += int(s1.stalled) + int(s2.stalled)
        u1, u2 = s1.sequence[0], s2.sequence[0]
        warm1, warm2 = shift_sequence(s1.sequence), shift_sequence(s2.sequence)
        x1 = np.array(s1.states[1])
        x2 = np.array(s2.states[1])
        if disturbance_std > 0:
            x1[3:6] += rng.normal(0.0, disturbance_std, 3)
            x2[3:6] += rng.normal(0.0, disturbance_std, 3)
    log.resyncs = sync.from_scratch_count
    return log
