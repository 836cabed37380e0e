"""Robust federated aggregation via the smoothed Weiszfeld geometric median."""

from .corruption import (
    CorruptionSpec,
    omniscient_updates,
    poison_adaptive,
    poison_static,
    realize,
    select_corrupted,
)
from .fl_core import (
    AggregatorSpec,
    DeviceState,
    LocalSGD,
    LrSchedule,
    RoundConfig,
    RoundTrace,
    TailAveragedSGD,
    aggregate,
    local_update_sgd,
    local_update_tail_avg_sgd,
    run_federated,
    run_rfa_doubling,
    sample_devices,
    trace_diverged,
)
from .geomed import (
    GMResult,
    WeightedPointSet,
    brute_force_gm,
    displacement_bound,
    eta_update,
    gm_objective,
    hull_distance,
    lipschitz_constant,
    robustness_bound,
    smoothed_norm,
    smoothed_objective,
    smoothed_weiszfeld,
    surrogate_objective,
    weiszfeld_step,
)
from .secure_avg import SecureAverageOracle
from .tasks import (
    FederatedPartition,
    MultinomialLogisticTask,
    SyntheticLSTask,
    exact_optimum,
    generate_logistic_task,
    generate_ls_task,
    least_squares_gradient,
    least_squares_loss,
    partition_data,
    task_from_json,
    task_to_json,
)

__version__ = "0.1.0"

__all__ = [
    "AggregatorSpec",
    "CorruptionSpec",
    "DeviceState",
    "FederatedPartition",
    "GMResult",
    "LocalSGD",
    "LrSchedule",
    "MultinomialLogisticTask",
    "RoundConfig",
    "RoundTrace",
    "SecureAverageOracle",
    "SyntheticLSTask",
    "TailAveragedSGD",
    "WeightedPointSet",
    "aggregate",
    "brute_force_gm",
    "displacement_bound",
    "eta_update",
    "exact_optimum",
    "generate_logistic_task",
    "generate_ls_task",
    "gm_objective",
    "hull_distance",
    "least_squares_gradient",
    "least_squares_loss",
    "lipschitz_constant",
    "local_update_sgd",
    "local_update_tail_avg_sgd",
    "omniscient_updates",
    "partition_data",
    "poison_adaptive",
    "poison_static",
    "realize",
    "robustness_bound",
    "run_federated",
    "run_rfa_doubling",
    "sample_devices",
    "select_corrupted",
    "smoothed_norm",
    "smoothed_objective",
    "smoothed_weiszfeld",
    "surrogate_objective",
    "task_from_json",
    "task_to_json",
    "trace_diverged",
    "weiszfeld_step",
]
