"""Exception hierarchy shared by all tetherplan modules."""


class TetherPlanError(Exception):
    """Base class for every error raised by this package."""


class InfeasibleGeometry(TetherPlanError, ValueError):
    """Rope is taut, too short, or the chord is vertical."""


class NonConvergence(TetherPlanError, RuntimeError):
    """An iterative solver ran out of iterations."""


class DegenerateVertical(TetherPlanError, ValueError):
    """The two vehicles are stacked vertically so the plane yaw is undefined."""


class AngleOutOfRange(TetherPlanError, ValueError):
    """Formation elevation angle exceeds the allowed band."""


class MalformedFile(TetherPlanError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class EmptyMesh(TetherPlanError, ValueError):
    pass


class TangentDegenerate(TetherPlanError, ArithmeticError):
    pass


class NoPathFound(TetherPlanError, RuntimeError):
    def __init__(self, message: str, nodes: int, iterations: int):
        super().__init__(f"{message} (nodes={nodes}, iterations={iterations})")
        self.nodes = nodes
        self.iterations = iterations


class DegenerateWaypoints(TetherPlanError, ValueError):
    pass


class OutOfRange(TetherPlanError, ValueError):
    pass


class NoMatchingTime(TetherPlanError, LookupError):
    """No trajectory time reproduces the published leader waypoint."""


class SolverStall(TetherPlanError, RuntimeWarning):
    pass


class CollisionDuringExecution(TetherPlanError, RuntimeError):
    def __init__(self, tick: int, log=None):
        super().__init__(f"V-body collision during execution at tick {tick}")
        self.tick = tick
        self.log = log


class DivergenceDetected(TetherPlanError, RuntimeError):
    def __init__(self, tick: int, error: float, log=None):
        super().__init__(f"tracking error {error:.3f} m exceeded abort bound at tick {tick}")
        self.tick = tick
        self.error = error
        self.log = log


class ConfigError(TetherPlanError, ValueError):
    pass
