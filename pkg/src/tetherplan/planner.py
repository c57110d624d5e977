"""RRT over formation states with V-body collision checking."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleGeometry, NoPathFound, NonConvergence, TangentDegenerate
from .formation import THETA_MAX, FormationState, compose_array, decompose_array, interpolate_array, wrap_angle
from .geometry.bvh import BvhTree, build_bvh, meshes_intersect
from .geometry.mesh import TriMesh, ray_crossings
from .vbody import VBodyConfig, body_for_state

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricWeights:
    w_yaw: float = 0.5
    w_d: float = 1.0
    w_theta: float = 0.5

    def distance(self, a, b) -> np.ndarray:
        """Weighted distance between state arrays (broadcasts over leading axes)."""
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        diff = b - a
        dp = diff[..., 0] ** 2 + diff[..., 1] ** 2 + diff[..., 2] ** 2
        dyaw = wrap_angle(diff[..., 3])
        return np.sqrt(dp + self.w_yaw * dyaw**2 + self.w_d * diff[..., 4] ** 2 + self.w_theta * diff[..., 5] ** 2)


@dataclass(frozen=True)
class StateSpaceBounds:
    pos_lo: tuple[float, float, float]
    pos_hi: tuple[float, float, float]
    d_min: float
    d_max: float
    yaw_lo: float = -math.pi
    yaw_hi: float = math.pi
    theta_lo: float = -THETA_MAX
    theta_hi: float = THETA_MAX

    def __post_init__(self):
        if any(lo > hi for lo, hi in zip(self.pos_lo, self.pos_hi)):
            raise ValueError("empty position box")
        if not 0 < self.d_min <= self.d_max:
            raise ValueError("need 0 < d_min <= d_max")
        if self.theta_lo < -THETA_MAX - 1e-12 or self.theta_hi > THETA_MAX + 1e-12:
            raise ValueError("theta_form range must lie within +-60 deg")

    @property
    def full_yaw(self) -> bool:
        return self.yaw_hi - self.yaw_lo >= 2 * math.pi - 1e-12

    def check_rope(self, rope_length: float):
        if not self.d_max < rope_length:
            raise ValueError(f"d_max={self.d_max} must be below rope length {rope_length}")

    def contains(self, s) -> bool:
        s = np.asarray(s)
        if np.any(s[:3] < self.pos_lo) or np.any(s[:3] > self.pos_hi):
            return False
        if not (self.d_min <= s[4] <= self.d_max and self.theta_lo <= s[5] <= self.theta_hi):
            return False
        if self.full_yaw:
            return True
        # yaw range measured counter-clockwise from yaw_lo
        return (s[3] - self.yaw_lo) % (2 * math.pi) <= self.yaw_hi - self.yaw_lo + 1e-12

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        lo = np.array([*self.pos_lo, self.yaw_lo, self.d_min, self.theta_lo])
        hi = np.array([*self.pos_hi, self.yaw_hi, self.d_max, self.theta_hi])
        return lo + rng.random(6) * (hi - lo)


@dataclass
class Obstacle:
    mesh: TriMesh
    tree: BvhTree
    lo: np.ndarray = field(init=False)
    hi: np.ndarray = field(init=False)

    def __post_init__(self):
        self.lo, self.hi = self.mesh.bounds

    @classmethod
    def from_mesh(cls, mesh: TriMesh, max_leaf: int = 4) -> "Obstacle":
        return cls(mesh, build_bvh(mesh, max_leaf))


class StateValidator:
    """Callable validity check for state arrays; counts how often it ran."""

    def __init__(self, environment, cfg: VBodyConfig, rope_length: float, bounds: StateSpaceBounds | None = None):
        self.obstacles = [o if isinstance(o, Obstacle) else Obstacle.from_mesh(o) for o in environment]
        self.cfg = cfg
        self.rope_length = float(rope_length)
        self.bounds = bounds
        self.checks = 0

    def __call__(self, s) -> bool:
        self.checks += 1
        s = np.asarray(s, dtype=float)
        if not np.all(np.isfinite(s)) or s[4] <= 0 or abs(s[5]) > THETA_MAX + 1e-12 or s[4] >= self.rope_length:
            return False
        if self.bounds is not None and not self.bounds.contains(s):
            return False
        if not self.obstacles:
            return True
        try:
            body = body_for_state(FormationState.from_array(s), self.rope_length, self.cfg)
        except (InfeasibleGeometry, NonConvergence, TangentDegenerate):
            return False
        return not self._collides(body.mesh)

    def _collides(self, mesh: TriMesh) -> bool:
        blo, bhi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
        tree = None
        for ob in self.obstacles:
            if np.any(blo > ob.hi) or np.any(ob.lo > bhi):
                continue
            if tree is None:
                tree = build_bvh(mesh, max_leaf=max(1, len(mesh.triangles)))
            if meshes_intersect(ob.tree, tree):
                return True
            # no surface contact: the body is either fully inside, fully outside, or swallows the obstacle
            if ray_crossings(mesh.vertices[1:2], ob.mesh.corners)[0] % 2 == 1:
                return True
            if ray_crossings(ob.mesh.vertices[ob.mesh.triangles[0, :1]], mesh.corners)[0] % 2 == 1:
                return True
        return False

    def edge_valid(self, a, b, resolution: float, metric: MetricWeights, check_start: bool = False) -> bool:
        """Check interpolated states along ``a -> b`` spaced at most ``resolution`` apart."""
        if check_start and not self(a):
            return False
        dist = float(metric.distance(a, b))
        n = max(1, math.ceil(dist / resolution))
        for k in range(1, n + 1):
            if not self(interpolate_array(a, b, k / n)):
                return False
        return True


def is_state_valid(state: FormationState, env, cfg: VBodyConfig, rope_length: float,
                   bounds: StateSpaceBounds | None = None) -> bool:
    return StateValidator(env, cfg, rope_length, bounds)(state.as_array())


@dataclass
class PlanRequest:
    start: FormationState
    goal: FormationState
    bounds: StateSpaceBounds
    environment: list
    vbody_cfg: VBodyConfig
    rope_length: float
    rng_seed: int = 0
    max_time: float = 30.0
    goal_bias: float = 0.05
    step_size: float = 0.3
    edge_resolution: float = 0.05
    metric: MetricWeights = field(default_factory=MetricWeights)
    max_iterations: int | None = None
    # solution edges are re-checked at this finer spacing before they are returned
    verify_resolution: float | None = None


@dataclass
class FormationPath:
    states: np.ndarray  # (n, 6)
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)

    def length(self, metric: MetricWeights = MetricWeights()) -> float:
        if len(self.states) < 2:
            return 0.0
        return float(metric.distance(self.states[:-1], self.states[1:]).sum())

    def as_states(self) -> list[FormationState]:
        return [FormationState.from_array(s) for s in self.states]


def plan(request: PlanRequest, validator: StateValidator | None = None) -> FormationPath:
    """Grow an RRT from ``start`` until ``goal`` is connected. Deterministic for a fixed seed."""
    t0 = time.perf_counter()
    request.bounds.check_rope(request.rope_length)
    if validator is None:
        validator = StateValidator(request.environment, request.vbody_cfg, request.rope_length, request.bounds)
    start, goal = request.start.as_array(), request.goal.as_array()
    metric = request.metric
    for name, s in (("start", start), ("goal", goal)):
        if not validator(s):
            raise ValueError(f"{name} state is invalid")
    if float(metric.distance(start, goal)) < 1e-12:
        return FormationPath(start[None].copy(), {"nodes": 1, "iterations": 0})

    rng = np.random.default_rng(request.rng_seed)
    cap = 1024
    nodes = np.empty((cap, 6))
    parents = np.empty(cap, dtype=np.int64)
    nodes[0], parents[0], n = start, -1, 1
    alive = np.ones(cap, dtype=bool)
    verified = np.zeros(cap, dtype=bool)
    it = rejected = 0

    def add(q, parent):
        nonlocal nodes, parents, alive, verified, n, cap
        if n == cap:
            cap *= 2
            nodes = np.resize(nodes, (cap, 6))
            parents = np.resize(parents, cap)
            alive = np.resize(alive, cap)
            verified = np.resize(verified, cap)
        nodes[n], parents[n], alive[n], verified[n] = q, parent, True, False
        n += 1
        return n - 1

    def chain_to(i):
        out = []
        while i >= 0:
            out.append(i)
            i = parents[i]
        return out[::-1]

    def prune(i):
        # parents always precede children, so one forward pass kills the subtree
        alive[i] = False
        for j in range(i + 1, n):
            if not alive[parents[j]]:
                alive[j] = False

    goal_idx = -1
    while goal_idx < 0:
        if time.perf_counter() - t0 > request.max_time or (request.max_iterations and it >= request.max_iterations):
            raise NoPathFound("planner exhausted its budget", nodes=n, iterations=it)
        it += 1
        q_rand = goal if rng.random() < request.goal_bias else request.bounds.sample(rng)
        dists = np.where(alive[:n], metric.distance(nodes[:n], q_rand), np.inf)
        near = int(np.argmin(dists))
        dd = float(dists[near])
        if dd < 1e-12:
            continue
        q_new = q_rand.copy() if dd <= request.step_size else interpolate_array(nodes[near], q_rand, request.step_size / dd)
        if not validator.edge_valid(nodes[near], q_new, request.edge_resolution, metric):
            continue
        new = add(q_new, near)
        to_goal = float(metric.distance(q_new, goal))
        if to_goal < 1e-12:
            goal_idx = new
        elif to_goal <= request.step_size and validator.edge_valid(q_new, goal, request.edge_resolution, metric):
            goal_idx = add(goal.copy(), new)
        if goal_idx >= 0 and request.verify_resolution:
            for i in chain_to(goal_idx)[1:]:
                if verified[i]:
                    continue
                if not validator.edge_valid(nodes[parents[i]], nodes[i], request.verify_resolution, metric):
                    prune(i)
                    rejected += 1
                    goal_idx = -1
                    break
                verified[i] = True

    states = nodes[chain_to(goal_idx)].copy()
    states[-1] = goal
    stats = {"nodes": n, "iterations": it, "validity_checks": validator.checks, "rejected_edges": rejected}
    log.debug("rrt: %s in %.2fs", stats, time.perf_counter() - t0)
    return FormationPath(states, stats)


def simplify(path: FormationPath, validator: StateValidator, rng_seed: int = 0, *,
             resolution: float = 0.05, metric: MetricWeights = MetricWeights(),
             shortcut_iterations: int = 100, collapse_distance: float = 0.05,
             verify_resolution: float | None = None) -> FormationPath:
    """Shortcutting, then vertex reduction, then collapsing of close vertices.

    With ``verify_resolution`` set, each surviving edge is re-checked at that spacing and a failing
    edge is replaced by the stretch of the input path it cut across.
    """
    idx = list(range(len(path.states)))
    rng = np.random.default_rng(rng_seed)

    def ok(i, j):
        return validator.edge_valid(path.states[i], path.states[j], resolution, metric)

    for _ in range(shortcut_iterations):
        if len(idx) <= 2:
            break
        i, j = sorted(rng.choice(len(idx), size=2, replace=False).tolist())
        if j - i >= 2 and ok(idx[i], idx[j]):
            idx = idx[: i + 1] + idx[j:]

    i = 0
    while i < len(idx) - 2:
        if ok(idx[i], idx[i + 2]):
            del idx[i + 1]
        else:
            i += 1

    k = 1
    while k < len(idx) - 1:
        close = float(metric.distance(path.states[idx[k - 1]], path.states[idx[k]])) < collapse_distance
        if close and ok(idx[k - 1], idx[k + 1]):
            del idx[k]
        else:
            k += 1

    if verify_resolution:
        kept = idx[:1]
        for i, j in zip(idx[:-1], idx[1:]):
            if j == i + 1 or validator.edge_valid(path.states[i], path.states[j], verify_resolution, metric):
                kept.append(j)
            else:
                kept.extend(range(i + 1, j + 1))
        idx = kept
    return FormationPath(path.states[idx].copy(), dict(path.stats))


def path_violations(path: FormationPath, validator: StateValidator, resolution: float,
                    metric: MetricWeights = MetricWeights()) -> list[np.ndarray]:
    """Interpolated states along the path that fail validation at ``resolution``."""
    bad = []
    if not validator(path.states[0]):
        bad.append(path.states[0])
    for a, b in zip(path.states[:-1], path.states[1:]):
        n = max(1, math.ceil(float(metric.distance(a, b)) / resolution))
        for k in range(1, n + 1):
            s = interpolate_array(a, b, k / n)
            if not validator(s):
                bad.append(s)
    return bad


def densify(path: FormationPath, spacing: float, metric: MetricWeights = MetricWeights()) -> FormationPath:
    """Insert interpolated states so consecutive states are at most ``spacing`` apart."""
    out = [path.states[0]]
    for a, b in zip(path.states[:-1], path.states[1:]):
        n = max(1, math.ceil(float(metric.distance(a, b)) / spacing))
        out += [interpolate_array(a, b, k / n) for k in range(1, n)]
        out.append(b)
    return FormationPath(np.array(out), dict(path.stats))


def decompose_path(path: FormationPath) -> tuple[np.ndarray, np.ndarray]:
    """Index-aligned waypoint lists for vehicle 1 and vehicle 2."""
    return decompose_array(path.states)


def recompose_waypoints(wp1, wp2) -> np.ndarray:
    return compose_array(wp1, wp2)
