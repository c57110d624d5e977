"""Quadrotor point-mass model with first-order attitude lag, and an MPC built on it.

State vector ``x = [px, py, pz, vx, vy, vz, phi, theta]``, input
``u = [T, phi_ref, theta_ref]`` with ``T`` the mass-normalised thrust.
The inner loops work on plain Python floats: with 8 states and a 20-step
horizon that is several times faster than small numpy operations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import SolverStall

NX, NU = 8, 3


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 20
    dt: float = 0.05
    g: float = 9.81
    k_phi: float = 1.0
    k_theta: float = 1.0
    tau_phi: float = 0.2
    tau_theta: float = 0.2
    damping: tuple = (0.1, 0.1, 0.1)
    q_x: tuple = (10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    q_u: tuple = (0.1, 0.1, 0.1)
    q_du: tuple = (1.0, 1.0, 1.0)
    t_max_factor: float = 2.0
    attitude_max_deg: float = 30.0
    max_iterations: int = 150
    rel_tol: float = 1e-6
    stall_threshold: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "damping", tuple(float(a) for a in self.damping))
        object.__setattr__(self, "q_x", tuple(float(q) for q in self.q_x))
        object.__setattr__(self, "q_u", tuple(float(q) for q in self.q_u))
        object.__setattr__(self, "q_du", tuple(float(q) for q in self.q_du))
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        if self.dt <= 0 or self.tau_phi <= 0 or self.tau_theta <= 0:
            raise ValueError("dt and attitude time constants must be positive")
        if len(self.damping) != 3 or len(self.q_x) != NX or len(self.q_u) != NU or len(self.q_du) != NU:
            raise ValueError("weight vectors have the wrong length")
        if min(self.q_x + self.q_u + self.q_du) < 0:
            raise ValueError("weights must be non-negative")

    @property
    def t_max(self) -> float:
        return self.t_max_factor * self.g

    @property
    def attitude_max(self) -> float:
        return math.radians(self.attitude_max_deg)

    @property
    def lower(self) -> np.ndarray:
        return np.array([0.0, -self.attitude_max, -self.attitude_max])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.t_max, self.attitude_max, self.attitude_max])

    @property
    def hover_input(self) -> np.ndarray:
        return np.array([self.g, 0.0, 0.0])


@dataclass(frozen=True)
class QuadState:
    p: tuple
    v: tuple = (0.0, 0.0, 0.0)
    phi: float = 0.0
    theta: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([*self.p, *self.v, self.phi, self.theta], dtype=float)

    @classmethod
    def from_array(cls, x) -> "QuadState":
        x = [float(a) for a in x]
        return cls(tuple(x[0:3]), tuple(x[3:6]), x[6], x[7])

    @classmethod
    def hover_at(cls, p) -> "QuadState":
        return cls(tuple(float(a) for a in p))

    def is_valid(self, cfg: MpcConfig) -> bool:
        a = self.as_array()
        return bool(np.all(np.isfinite(a)) and max(abs(self.phi), abs(self.theta)) <= cfg.attitude_max + 1e-12)


@dataclass(frozen=True)
class ControlInput:
    T: float
    phi_ref: float = 0.0
    theta_ref: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.T, self.phi_ref, self.theta_ref], dtype=float)

    @classmethod
    def from_array(cls, u) -> "ControlInput":
        return cls(float(u[0]), float(u[1]), float(u[2]))

    @classmethod
    def hover(cls, cfg: MpcConfig) -> "ControlInput":
        return cls(cfg.g)


def _step(x, u, dt, cfg: MpcConfig):
    px, py, pz, vx, vy, vz, ph, th = x
    T, phr, thr = u
    ax, ay, az = cfg.damping
    cph, sph, cth, sth = math.cos(ph), math.sin(ph), math.cos(th), math.sin(th)
    return (
        px + dt * vx,
        py + dt * vy,
        pz + dt * vz,
        vx + dt * (T * cph * sth - ax * vx),
        vy + dt * (-T * sph - ay * vy),
        vz + dt * (T * cph * cth - cfg.g - az * vz),
        ph + dt * (cfg.k_phi * phr - ph) / cfg.tau_phi,
        th + dt * (cfg.k_theta * thr - th) / cfg.tau_theta,
    )


def step_dynamics(x, u, dt: float, cfg: MpcConfig):
    """One forward-Euler step. Accepts and returns the same kind (QuadState or array)."""
    if isinstance(x, QuadState):
        uu = u.as_array() if isinstance(u, ControlInput) else u
        return QuadState.from_array(_step(tuple(x.as_array()), tuple(float(a) for a in uu), dt, cfg))
    uu = u.as_array() if isinstance(u, ControlInput) else u
    return np.array(_step(tuple(float(a) for a in x), tuple(float(a) for a in uu), dt, cfg))


def rollout(x0, useq, cfg: MpcConfig) -> np.ndarray:
    """States ``x_0 .. x_N`` under the input sequence ``useq`` of shape (N, 3)."""
    xs = [tuple(float(a) for a in x0)]
    for u in np.asarray(useq, dtype=float).tolist():
        xs.append(_step(xs[-1], u, cfg.dt, cfg))
    return np.array(xs)


class MpcProblem:
    """Cost and gradient of the tracking objective for fixed ``x0``, reference and previous input.

    ``J = sum_{j=1..N} |x_j - r_j|^2_Qx + sum_{j=0..N-1} |u_j - u_hover|^2_Qu + |u_j - u_{j-1}|^2_Qdu``
    with ``u_{-1} = u_prev``.
    """

    def __init__(self, x0, x_ref, u_prev, cfg: MpcConfig):
        self.cfg = cfg
        self.N = cfg.horizon
        self.x0 = tuple(float(a) for a in np.asarray(x0, dtype=float))
        ref = np.asarray(x_ref, dtype=float)
        if ref.ndim == 1:
            ref = np.broadcast_to(ref, (self.N, NX))
        if ref.shape != (self.N, NX):
            raise ValueError(f"reference must have shape (8,) or ({self.N}, 8)")
        self.ref = ref.tolist()  # ref[j] pairs with x_{j+1}
        self.u_prev = np.asarray(u_prev, dtype=float)
        self.u_hover = cfg.hover_input
        self.qu = np.array(cfg.q_u)
        self.qdu = np.array(cfg.q_du)

    def _input_terms(self, U: np.ndarray):
        dev = U - self.u_hover
        du = np.diff(np.vstack([self.u_prev, U]), axis=0)
        cost = float(np.sum(dev * dev * self.qu) + np.sum(du * du * self.qdu))
        grad = 2.0 * dev * self.qu + 2.0 * du * self.qdu
        grad[:-1] -= 2.0 * du[1:] * self.qdu
        return cost, grad

    def _state_cost(self, xs) -> float:
        q = self.cfg.q_x
        c = 0.0
        for x, r in zip(xs[1:], self.ref):
            for i in range(NX):
                e = x[i] - r[i]
                c += q[i] * e * e
        return c

    def cost(self, U) -> float:
        U = np.asarray(U, dtype=float)
        xs = self._rollout(U.tolist())
        return self._state_cost(xs) + self._input_terms(U)[0]

    def _rollout(self, ulist):
        cfg, dt = self.cfg, self.cfg.dt
        xs = [self.x0]
        for u in ulist:
            xs.append(_step(xs[-1], u, dt, cfg))
        return xs

    def cost_and_grad(self, U):
        """Cost and its gradient w.r.t. the (N, 3) input sequence, by the adjoint recursion."""
        cfg, dt = self.cfg, self.cfg.dt
        U = np.asarray(U, dtype=float)
        ulist = U.tolist()
        xs = self._rollout(ulist)
        icost, grad = self._input_terms(U)
        q = cfg.q_x
        ax, ay, az = cfg.damping
        lph = 1.0 - dt / cfg.tau_phi
        lth = 1.0 - dt / cfg.tau_theta
        bph = dt * cfg.k_phi / cfg.tau_phi
        bth = dt * cfg.k_theta / cfg.tau_theta
        scost = 0.0
        mu = [0.0] * NX  # adjoint of x_{j+1}
        gu = np.empty((self.N, NU))
        for j in range(self.N - 1, -1, -1):
            x1, r = xs[j + 1], self.ref[j]
            # add the stage cost gradient at x_{j+1}
            for i in range(NX):
                e = x1[i] - r[i]
                scost += q[i] * e * e
                mu[i] += 2.0 * q[i] * e
            x = xs[j]
            T = ulist[j][0]
            ph, th = x[6], x[7]
            cph, sph, cth, sth = math.cos(ph), math.sin(ph), math.cos(th), math.sin(th)
            mpx, mpy, mpz, mvx, mvy, mvz, mph, mth = mu
            gu[j, 0] = dt * (mvx * cph * sth - mvy * sph + mvz * cph * cth)
            gu[j, 1] = mph * bph
            gu[j, 2] = mth * bth
            mu = [
                mpx,
                mpy,
                mpz,
                dt * mpx + (1.0 - dt * ax) * mvx,
                dt * mpy + (1.0 - dt * ay) * mvy,
                dt * mpz + (1.0 - dt * az) * mvz,
                dt * T * (-mvx * sph * sth - mvy * cph - mvz * sph * cth) + lph * mph,
                dt * T * (mvx * cph * cth - mvz * cph * sth) + lth * mth,
            ]
        return scost + icost, grad + gu


@dataclass
class MpcSolution:
    u: ControlInput
    sequence: np.ndarray  # (N, 3)
    states: np.ndarray  # (N + 1, 8) predicted
    cost: float
    initial_cost: float
    iterations: int
    stalled: bool
    history: list = field(default_factory=list)


def _project(U, lo, hi):
    return np.clip(U, lo, hi)


def shift_sequence(U: np.ndarray) -> np.ndarray:
    """Warm start for the next tick: drop the applied input, repeat the last one."""
    return np.vstack([U[1:], U[-1:]])


def solve_mpc(x0, x_ref, u_prev, cfg: MpcConfig, warm_start=None, raise_on_stall: bool = False) -> MpcSolution:
    """Projected gradient descent on the input sequence.

    Steps start from a Barzilai-Borwein estimate and are backtracked until an
    Armijo decrease holds, so the cost never increases across iterations.
    """
    if isinstance(x0, QuadState):
        x0 = x0.as_array()
    if isinstance(x_ref, QuadState):
        x_ref = x_ref.as_array()
    if isinstance(u_prev, ControlInput):
        u_prev = u_prev.as_array()
    prob = MpcProblem(x0, x_ref, u_prev, cfg)
    lo, hi = cfg.lower, cfg.upper
    if warm_start is None:
        U = np.tile(_project(np.asarray(u_prev, dtype=float), lo, hi), (cfg.horizon, 1))
    else:
        U = _project(np.array(warm_start, dtype=float).reshape(cfg.horizon, NU), lo, hi)

    J, G = prob.cost_and_grad(U)
    J0 = J
    history = [J]
    alpha = 1e-3
    U_old = G_old = None
    stalled = False
    it = 0
    rel_dec = math.inf
    for it in range(1, cfg.max_iterations + 1):
        if U_old is not None:
            s, y = (U - U_old).ravel(), (G - G_old).ravel()
            sy = float(s @ y)
            if sy > 1e-300:
                alpha = float(s @ s) / sy
        accepted = False
        for _ in range(40):
            U_new = _project(U - alpha * G, lo, hi)
            step = U_new - U
            if not np.any(step):
                break
            J_new, G_new = prob.cost_and_grad(U_new)
            if J_new <= J + 1e-4 * float(np.sum(G * step)):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            rel_dec = 0.0
            break
        U_old, G_old = U, G
        rel_dec = (J - J_new) / max(J, 1e-300)
        U, J, G = U_new, J_new, G_new
        history.append(J)
        if rel_dec <= cfg.rel_tol:
            break
    else:
        stalled = rel_dec > cfg.stall_threshold
    if stalled and raise_on_stall:
        raise SolverStall(f"MPC stopped after {it} iterations with relative decrease {rel_dec:.3g}")
    xs = np.array(prob._rollout(U.tolist()))
    return MpcSolution(ControlInput.from_array(U[0]), U, xs, J, J0, it, stalled, history)
