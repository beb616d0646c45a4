"""Report emission: a flat CSV of metric rows plus a JSON companion.

The CSV carries one row per (attack, evaluation classifier, defense) cell
with rates at one decimal and PSNR at two; the JSON carries everything
that is not tabular: calibrated detector thresholds, the config echo, the
seed, and any per-image attack failures.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

CSV_HEADER = (
    "attack,variant_mode,seen_set,eval_model,defense,"
    "top1_misleading,top5_misleading,detectability,psnr_mean,psnr_std"
)


@dataclass(frozen=True)
class ReportRow:
    attack: str
    variant_mode: str
    seen_set: str
    eval_model: str
    defense: str
    top1_misleading: float
    top5_misleading: float
    detectability: float
    psnr_mean: float
    psnr_std: float

    def __post_init__(self):
        for name in ("top1_misleading", "top5_misleading", "detectability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 100.0:
                raise ValueError(f"{name} must be in [0, 100], got {value}")

    def formatted(self):
        return (
            f"{self.attack},{self.variant_mode},{self.seen_set},"
            f"{self.eval_model},{self.defense},"
            f"{self.top1_misleading:.1f},{self.top5_misleading:.1f},"
            f"{self.detectability:.1f},{self.psnr_mean:.2f},{self.psnr_std:.2f}"
        )


@dataclass(frozen=True)
class EvalReport:
    rows: tuple
    thresholds: dict
    config: dict
    seed: int
    failures: tuple = field(default=())


def write_report(report, csv_path):
    """Write the CSV (UTF-8, LF) and its JSON companion next to it."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER] + [row.formatted() for row in report.rows]
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    companion = {
        "seed": report.seed,
        "thresholds": dict(report.thresholds),
        "config": report.config,
        "failures": list(report.failures),
    }
    json_path = csv_path.with_suffix(".json")
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(companion, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def read_rows(csv_path):
    """Parse an emitted CSV back into ReportRow objects."""
    with open(csv_path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"'{csv_path}' does not start with the report header")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != 10:
            raise ValueError(f"bad report line: {line!r}")
        rows.append(
            ReportRow(
                attack=parts[0],
                variant_mode=parts[1],
                seen_set=parts[2],
                eval_model=parts[3],
                defense=parts[4],
                top1_misleading=float(parts[5]),
                top5_misleading=float(parts[6]),
                detectability=float(parts[7]),
                psnr_mean=float(parts[8]),
                psnr_std=float(parts[9]),
            )
        )
    return rows
