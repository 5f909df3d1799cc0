"""Target-attacker-defender pursuit games with limited-visibility players.

The package simulates planar many-defender engagements in two interaction
modes (a non-zero-sum game among three parties and a zero-sum target-defender
team game), synthesizes visibility-constrained feedback gains by matching the
players' quadratic objectives to their unconstrained form, and ships a small
CLI plus a scenario regression suite.
"""

from .consistency import (
    IterationLimit,
    NodeGains,
    OptimizerSettings,
    grad_theta,
    solve_gains,
    solve_node_gains,
    theta1,
    theta2,
)
from .model import (
    ConfigError,
    GameMatrices,
    PlayerId,
    ScenarioConfig,
    build_matrices,
    from_reduced,
    player_order,
    to_reduced,
)
from .riccati import (
    FiniteEscape,
    RiccatiSolution,
    SuicidalReducedSolution,
    TimeGrid,
    solve_nzs,
    solve_suicidal_reduced,
    solve_zs,
    value_at,
)
from .simulator import (
    DelayReport,
    SuicidalReport,
    TerminationRecord,
    TrajectoryLog,
    config_from_dict,
    config_to_dict,
    run,
    run_paired_delay,
    run_suicidal_check,
    write_csv,
    write_sidecar,
)
from .strategies import (
    GainSchedule,
    PerfIndexMatrices,
    adapted_control,
    fne_control,
    objective_eval,
    perf_index_matrices,
)
from .visibility import VisibilitySnapshot, edge_active, snapshot, transitions

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DelayReport",
    "FiniteEscape",
    "GainSchedule",
    "GameMatrices",
    "IterationLimit",
    "NodeGains",
    "OptimizerSettings",
    "PerfIndexMatrices",
    "PlayerId",
    "RiccatiSolution",
    "ScenarioConfig",
    "SuicidalReducedSolution",
    "SuicidalReport",
    "TerminationRecord",
    "TimeGrid",
    "TrajectoryLog",
    "VisibilitySnapshot",
    "adapted_control",
    "build_matrices",
    "config_from_dict",
    "config_to_dict",
    "edge_active",
    "fne_control",
    "from_reduced",
    "grad_theta",
    "objective_eval",
    "perf_index_matrices",
    "player_order",
    "run",
    "run_paired_delay",
    "run_suicidal_check",
    "snapshot",
    "solve_gains",
    "solve_node_gains",
    "solve_nzs",
    "solve_suicidal_reduced",
    "solve_zs",
    "theta1",
    "theta2",
    "to_reduced",
    "transitions",
    "value_at",
    "write_csv",
    "write_sidecar",
]
