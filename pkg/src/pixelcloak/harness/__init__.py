"""Dataset ingestion, metrics, experiment orchestration, and the CLI."""

from .dataset import (
    DatasetError,
    DatasetRecord,
    generate_synthetic,
    load_cifar_binary,
    split_records,
)
from .experiment import (
    RunConfig,
    check_adversarial,
    config_from_dict,
    full_defense_breakdown,
    run_experiment,
)
from .metrics import misleading_rate, psnr, top_k_classes
from .report import CSV_HEADER, EvalReport, ReportRow, read_rows, write_report

__all__ = [
    "CSV_HEADER",
    "DatasetError",
    "DatasetRecord",
    "EvalReport",
    "ReportRow",
    "RunConfig",
    "check_adversarial",
    "config_from_dict",
    "full_defense_breakdown",
    "generate_synthetic",
    "load_cifar_binary",
    "misleading_rate",
    "psnr",
    "read_rows",
    "run_experiment",
    "split_records",
    "top_k_classes",
    "write_report",
]
