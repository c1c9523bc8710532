"""Privacy-budget scheduling toolkit.

Renyi-DP accounting over a fixed alpha-order grid, consumable privacy
blocks with filters and online unlocking, packing-aware schedulers, a
deterministic online simulator, workload generators, and an experiment
runner with a CLI.
"""

__version__ = "0.1.0"

from .blocks import Block, filter_grant, unlocked_capacity
from .knapsack import (
    IntractableInstanceError,
    exact_privacy_knapsack,
    scalar_knapsack_fptas,
)
from .rdp import (
    DEFAULT_ALPHA_GRID,
    DpGuarantee,
    RdpCurve,
    block_capacity_curve,
    compose,
    gaussian_curve,
    laplace_curve,
    rdp_to_dp,
    subsampled_gaussian_curve,
    subsampled_laplace_curve,
)
from .schedulers import Task, make_scheduler
from .simulator import BlockStreamSpec, run_offline, run_online
from .workload import (
    MicrobenchKnobs,
    TaskSpec,
    generate_microbenchmark,
    load_workload,
    save_workload,
)

__all__ = [
    "__version__",
    "Block", "filter_grant", "unlocked_capacity",
    "IntractableInstanceError", "exact_privacy_knapsack",
    "scalar_knapsack_fptas",
    "DEFAULT_ALPHA_GRID", "DpGuarantee", "RdpCurve", "block_capacity_curve",
    "compose", "gaussian_curve", "laplace_curve", "rdp_to_dp",
    "subsampled_gaussian_curve", "subsampled_laplace_curve",
    "Task", "make_scheduler",
    "BlockStreamSpec", "run_offline", "run_online",
    "MicrobenchKnobs", "TaskSpec", "generate_microbenchmark",
    "load_workload", "save_workload",
]
