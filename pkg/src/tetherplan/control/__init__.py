from .mpc import ControlInput, MpcConfig, MpcProblem, MpcSolution, QuadState, rollout, shift_sequence, solve_mpc, step_dynamics
from .simulate import LOG_COLUMNS, MissionLog, simulate_mission

__all__ = [
    "ControlInput", "MpcConfig", "MpcProblem", "MpcSolution", "QuadState", "rollout", "shift_sequence",
    "solve_mpc", "step_dynamics", "LOG_COLUMNS", "MissionLog", "simulate_mission",
]
