from .executor import (
    BaselineError,
    ExecConfig,
    InfrastructureError,
    SubprocessExecutor,
    evaluate_candidate,
    measure_baseline,
    normalize_output,
)
from .problems import ProblemSetError, load_problem, load_problem_set
from .simulator import (
    GrammarError,
    Landscape,
    SimulatedExecutor,
    format_params,
    oracle_optimum,
    parse_params,
    reachable_best,
    simulate_evaluate,
)

__all__ = [
    "BaselineError",
    "ExecConfig",
    "GrammarError",
    "InfrastructureError",
    "Landscape",
    "ProblemSetError",
    "SimulatedExecutor",
    "SubprocessExecutor",
    "evaluate_candidate",
    "format_params",
    "load_problem",
    "load_problem_set",
    "measure_baseline",
    "normalize_output",
    "oracle_optimum",
    "parse_params",
    "reachable_best",
    "simulate_evaluate",
]
