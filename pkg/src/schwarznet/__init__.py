"""Meshless PDE solving on decomposed domains.

One small network per subdomain, Robin-type interface conditions with a
learnable weight per side, adaptive augmented Lagrangian training, and
Schwarz-style outer iterations that exchange interface traces.
"""

from .alm import Adam, DualState, Sgd, SubdomainTrainer, TrainerSettings, dual_update
from .config import RunConfig, apply_overrides, default_config, load_config, materialize
from .errors import (
    ConfigError,
    DivergenceError,
    FormatError,
    GeometryError,
    ProtocolError,
)
from .geometry import (
    Partition,
    PointCounts,
    make_cartesian_partition,
    make_polar_partition,
    sample_points,
    subdomain_grid,
)
from .metrics import ErrorReport, compute_errors
from .nets import JetBatch, JetEval, Mlp, ParamGrad, forward_jet, loss_backward
from .orchestrator import (
    RunResult,
    ScheduleSettings,
    build_trainers,
    interface_mismatch,
    run_schwarz,
)
from .problems import helmholtz_manufactured, make_inverse_case, poisson_manufactured
from .reporting import compare_reports, run_experiment

__all__ = [
    "Adam",
    "ConfigError",
    "DivergenceError",
    "DualState",
    "ErrorReport",
    "FormatError",
    "GeometryError",
    "JetBatch",
    "JetEval",
    "Mlp",
    "ParamGrad",
    "Partition",
    "PointCounts",
    "ProtocolError",
    "RunConfig",
    "RunResult",
    "ScheduleSettings",
    "Sgd",
    "SubdomainTrainer",
    "TrainerSettings",
    "apply_overrides",
    "build_trainers",
    "compare_reports",
    "compute_errors",
    "default_config",
    "dual_update",
    "forward_jet",
    "helmholtz_manufactured",
    "interface_mismatch",
    "load_config",
    "loss_backward",
    "make_cartesian_partition",
    "make_inverse_case",
    "make_polar_partition",
    "materialize",
    "poisson_manufactured",
    "run_experiment",
    "run_schwarz",
    "sample_points",
    "subdomain_grid",
]

__version__ = "0.1.0"
