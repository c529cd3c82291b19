from .datasets import (
    Dataset,
    audit_dataset,
    generate_matching,
    generate_synthetic,
    load_dataset,
    save_dataset,
    synthetic_space,
)
from .experiment import ExperimentResult, results_to_csv, run_experiment

__all__ = [
    "Dataset",
    "ExperimentResult",
    "audit_dataset",
    "generate_matching",
    "generate_synthetic",
    "load_dataset",
    "results_to_csv",
    "run_experiment",
    "save_dataset",
    "synthetic_space",
]
