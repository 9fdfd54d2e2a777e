"""Max-reward search over program candidates with execution feedback."""
from .core import (
    KERNELBENCH_L1_BINS,
    KERNELBENCH_L2_BINS,
    PIE_BINS,
    ExecFeedback,
    IOPair,
    ProblemSpec,
    RewardBins,
    SearchState,
    SearchTree,
    bin_speedup,
    compute_value_target,
    max_reward_return,
    select_best_node,
    update_best_so_far,
)

__version__ = "0.1.0"

__all__ = [
    "KERNELBENCH_L1_BINS",
    "KERNELBENCH_L2_BINS",
    "PIE_BINS",
    "ExecFeedback",
    "IOPair",
    "ProblemSpec",
    "RewardBins",
    "SearchState",
    "SearchTree",
    "__version__",
    "bin_speedup",
    "compute_value_target",
    "max_reward_return",
    "select_best_node",
    "update_best_so_far",
]
