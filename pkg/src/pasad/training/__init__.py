from .loop import (
    Adam,
    SearchSpace,
    TrainConfig,
    TrainResult,
    cross_validate,
    evaluate,
    partition_windows,
    random_search,
    run_fold,
    subject_labels_of,
    train,
    write_log_csv,
)
from .metrics import Metrics, label_to_index
from .splits import CohortSplit, person_disjoint_split

__all__ = [
    "Adam", "CohortSplit", "Metrics", "SearchSpace", "TrainConfig",
    "TrainResult", "cross_validate", "evaluate", "label_to_index",
    "partition_windows", "person_disjoint_split", "random_search",
    "run_fold", "subject_labels_of", "train", "write_log_csv",
]
