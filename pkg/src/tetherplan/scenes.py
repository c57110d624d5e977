"""Scene configuration and the bundled obstacle geometry.

Bundled scenes live in ``tetherplan/scenes/``: a JSON config per scene plus
the STL meshes it references. ``python -m tetherplan.scenes`` regenerates
the STL files from the generators below.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .control.mpc import MpcConfig
from .errors import ConfigError, MalformedFile
from .formation import FormationState
from .geometry.mesh import TriMesh
from .geometry.stl import dump_stl_binary, read_stl
from .planner import MetricWeights, StateSpaceBounds
from .vbody import VBodyConfig

SCENE_DIR = Path(str(resources.files("tetherplan") / "scenes"))
BUNDLED = ("empty", "tunnel", "inclined_hole")


def slab_with_hole(x0: float, x1: float, outer, hole) -> TriMesh:
    """Closed wall between ``x0 < x1`` whose (y, z) face is the ``outer`` rectangle
    ``((ylo, zlo), (yhi, zhi))`` pierced by the convex quadrilateral ``hole``.

    ``hole`` lists four (y, z) corners counter-clockwise starting nearest the
    (ylo, zlo) outer corner.
    """
    (ylo, zlo), (yhi, zhi) = outer
    ring_out = [(ylo, zlo), (yhi, zlo), (yhi, zhi), (ylo, zhi)]
    ring_in = [tuple(map(float, h)) for h in hole]
    verts = []
    for x in (x0, x1):
        verts += [(x, y, z) for y, z in ring_out] + [(x, y, z) for y, z in ring_in]
    # indices: front outer 0-3, front hole 4-7, back outer 8-11, back hole 12-15
    tris = []
    for i in range(4):
        j = (i + 1) % 4
        o_i, o_j, h_i, h_j = i, j, 4 + i, 4 + j
        # back face (+x): ring quad is counter-clockwise in (y, z)
        tris += [(8 + o_i, 8 + o_j, 8 + h_j), (8 + o_i, 8 + h_j, 8 + h_i)]
        tris += [(o_i, h_j, o_j), (o_i, h_i, h_j)]
        # outer rim faces outward, hole wall faces into the opening
        tris += [(o_i, o_j, 8 + o_j), (o_i, 8 + o_j, 8 + o_i)]
        tris += [(h_i, 8 + h_j, h_j), (h_i, 8 + h_i, 8 + h_j)]
    return TriMesh(np.array(verts, dtype=float), np.array(tris))


def tunnel_mesh() -> TriMesh:
    """0.6 m long rectangular duct, 1.0 m wide, through a large wall."""
    return slab_with_hole(-0.3, 0.3, ((-4.0, -1.0), (4.0, 5.0)),
                          [(-0.5, 0.5), (0.5, 0.5), (0.5, 4.5), (-0.5, 4.5)])


def inclined_hole_mesh() -> TriMesh:
    """Thin wall with a parallelogram hole 2.4 m wide and 1.2 m tall whose edges rise 20 deg.

    The opening is too short for the deep rope sag of a close formation, so
    the vehicles have to spread apart to get through.
    """
    rise = 2.4 * math.tan(math.radians(20.0))
    z0, h = 1.6, 1.2
    return slab_with_hole(-0.1, 0.1, ((-4.0, -1.0), (4.0, 6.0)),
                          [(-1.2, z0), (1.2, z0 + rise), (1.2, z0 + rise + h), (-1.2, z0 + h)])


GENERATORS = {"tunnel.stl": tunnel_mesh, "inclined_hole.stl": inclined_hole_mesh}


def write_bundled_meshes(directory: Path = SCENE_DIR) -> None:
    for fname, gen in GENERATORS.items():
        (directory / fname).write_bytes(dump_stl_binary(gen(), header=fname.encode()))


def rigid_transform(translation=(0.0, 0.0, 0.0), rpy_deg=(0.0, 0.0, 0.0)) -> np.ndarray:
    """4x4 transform from roll/pitch/yaw in degrees (applied roll, then pitch, then yaw)."""
    r, p, y = (math.radians(a) for a in rpy_deg)
    cr, sr, cp, sp, cy, sy = math.cos(r), math.sin(r), math.cos(p), math.sin(p), math.cos(y), math.sin(y)
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    T = np.eye(4)
    T[:3, :3] = Rz @ Ry @ Rx
    T[:3, 3] = translation
    return T


@dataclass
class ObstacleEntry:
    mesh: str
    translation: tuple = (0.0, 0.0, 0.0)
    rpy_deg: tuple = (0.0, 0.0, 0.0)


@dataclass
class PlannerParams:
    max_time: float = 30.0
    goal_bias: float = 0.05
    step_size: float = 0.3
    edge_resolution: float = 0.05
    verify_resolution: float = 0.0025
    margin: float = 0.05
    w_yaw: float = 0.5
    w_d: float = 1.0
    w_theta: float = 0.5
    shortcut_iterations: int = 100
    collapse_distance: float = 0.05

    @property
    def metric(self) -> MetricWeights:
        return MetricWeights(self.w_yaw, self.w_d, self.w_theta)


@dataclass
class TrajectoryParams:
    speed: float = 0.3
    waypoint_spacing: float = 0.15


@dataclass
class SimulationParams:
    settle_time: float = 4.0
    abort_error: float = 1.0
    stop_on_collision: bool = True
    disturbance_std: float = 0.0


@dataclass
class SceneConfig:
    name: str
    rope_length: float
    bounds: StateSpaceBounds
    start: FormationState
    goal: FormationState
    obstacles: list = field(default_factory=list)
    vbody: VBodyConfig = field(default_factory=VBodyConfig)
    planner: PlannerParams = field(default_factory=PlannerParams)
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    simulation: SimulationParams = field(default_factory=SimulationParams)
    seed: int = 0
    output_dir: str = "out"
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path = Path(".")) -> "SceneConfig":
        try:
            b = raw["bounds"]
            bounds = StateSpaceBounds(
                tuple(b["pos_lo"]), tuple(b["pos_hi"]), b["d_min"], b["d_max"],
                math.radians(b.get("yaw_lo_deg", -180.0)), math.radians(b.get("yaw_hi_deg", 180.0)),
                math.radians(b.get("theta_lo_deg", -60.0)), math.radians(b.get("theta_hi_deg", 60.0)),
            )
            cfg = cls(
                name=raw["name"],
                rope_length=float(raw["rope_length"]),
                bounds=bounds,
                start=_state_from_dict(raw["start"]),
                goal=_state_from_dict(raw["goal"]),
                obstacles=[ObstacleEntry(o["mesh"], tuple(o.get("translation", (0, 0, 0))), tuple(o.get("rpy_deg", (0, 0, 0))))
                           for o in raw.get("obstacles", [])],
                vbody=VBodyConfig(**raw.get("vbody", {})),
                planner=PlannerParams(**raw.get("planner", {})),
                trajectory=TrajectoryParams(**raw.get("trajectory", {})),
                mpc=MpcConfig(**raw.get("mpc", {})),
                simulation=SimulationParams(**raw.get("simulation", {})),
                seed=int(raw.get("seed", 0)),
                output_dir=raw.get("output_dir", "out"),
                base_dir=Path(base_dir),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid scene config: {exc!r}") from exc
        if not bounds.d_max < cfg.rope_length:
            raise ConfigError(f"d_max {bounds.d_max} must be below rope length {cfg.rope_length}")
        for label, s in (("start", cfg.start), ("goal", cfg.goal)):
            if not bounds.contains(s.as_array()):
                raise ConfigError(f"{label} state lies outside the state-space bounds")
        return cfg

    def to_dict(self) -> dict:
        b = self.bounds
        return {
            "name": self.name,
            "rope_length": self.rope_length,
            "bounds": {
                "pos_lo": list(b.pos_lo), "pos_hi": list(b.pos_hi), "d_min": b.d_min, "d_max": b.d_max,
                "yaw_lo_deg": math.degrees(b.yaw_lo), "yaw_hi_deg": math.degrees(b.yaw_hi),
                "theta_lo_deg": math.degrees(b.theta_lo), "theta_hi_deg": math.degrees(b.theta_hi),
            },
            "start": _state_to_dict(self.start),
            "goal": _state_to_dict(self.goal),
            "obstacles": [dataclasses.asdict(o) for o in self.obstacles],
            "vbody": dataclasses.asdict(self.vbody),
            "planner": dataclasses.asdict(self.planner),
            "trajectory": dataclasses.asdict(self.trajectory),
            "mpc": dataclasses.asdict(self.mpc),
            "simulation": dataclasses.asdict(self.simulation),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    def mesh_paths(self) -> list[Path]:
        return [(self.base_dir / o.mesh) for o in self.obstacles]

    def load_environment(self) -> list[TriMesh]:
        meshes = []
        for entry, path in zip(self.obstacles, self.mesh_paths()):
            if not path.is_file():
                raise ConfigError(f"obstacle mesh not found: {path}")
            try:
                mesh = read_stl(path, name=entry.mesh)
            except MalformedFile as exc:
                raise ConfigError(f"{path}: {exc}") from exc
            meshes.append(mesh.transformed(rigid_transform(entry.translation, entry.rpy_deg)))
        return meshes

    def config_hash(self) -> str:
        """Digest of the resolved config and the bytes of every referenced mesh.

        The output directory is left out so a plan can be reproduced elsewhere.
        """
        d = self.to_dict()
        del d["output_dir"]
        h = hashlib.sha256(json.dumps(d, sort_keys=True).encode())
        for path in self.mesh_paths():
            if path.is_file():
                h.update(hashlib.sha256(path.read_bytes()).digest())
        return h.hexdigest()

    @property
    def planning_vbody(self) -> VBodyConfig:
        return self.vbody.inflated(self.planner.margin)


def _state_from_dict(d: dict) -> FormationState:
    return FormationState(float(d["p"][0]), float(d["p"][1]), float(d["p"][2]),
                          math.radians(d["yaw_deg"]), float(d["d"]), math.radians(d["theta_deg"]))


def _state_to_dict(s: FormationState) -> dict:
    return {"p": [s.x, s.y, s.z], "yaw_deg": math.degrees(s.phi_yaw), "d": s.d, "theta_deg": math.degrees(s.theta_form)}


def load_scene(path) -> SceneConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    return SceneConfig.from_dict(raw, base_dir=path.parent)


def bundled_scene(name: str) -> SceneConfig:
    if name not in BUNDLED:
        raise ConfigError(f"unknown bundled scene {name!r}; choose from {BUNDLED}")
    return load_scene(SCENE_DIR / f"{name}.json")


if __name__ == "__main__":
    write_bundled_meshes()
