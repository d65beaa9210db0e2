"""Metrics log records, exact-round-trip CSV persistence, and reports."""

from __future__ import annotations

import csv
from dataclasses import dataclass

CSV_COLUMNS = (
    "virtual_time",
    "round",
    "test_accuracy",
    "test_loss",
    "mean_staleness",
    "max_staleness",
    "corrections_applied",
)


@dataclass(frozen=True)
class MetricsRecord:
    """One evaluation snapshot of a running simulation.

    Staleness statistics cover the arrivals since the previous record;
    corrections_applied counts cumulatively over the whole run.
    """

    virtual_time: float
    round: int
    test_accuracy: float
    test_loss: float
    mean_staleness: float
    max_staleness: int
    corrections_applied: int


def write_metrics_csv(records: list[MetricsRecord], path: str) -> None:
    """Write records with full-precision floats (repr round-trips exactly)."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    repr(r.virtual_time),
                    r.round,
                    repr(r.test_accuracy),
                    repr(r.test_loss),
                    repr(r.mean_staleness),
                    r.max_staleness,
                    r.corrections_applied,
                ]
            )


def read_metrics_csv(path: str) -> list[MetricsRecord]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ValueError(f"{path}: header {header} does not match {CSV_COLUMNS}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
            try:
                records.append(
                    MetricsRecord(
                        virtual_time=float(row[0]),
                        round=int(row[1]),
                        test_accuracy=float(row[2]),
                        test_loss=float(row[3]),
                        mean_staleness=float(row[4]),
                        max_staleness=int(row[5]),
                        corrections_applied=int(row[6]),
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return records


def time_to_target(records: list[MetricsRecord], target_acc: float) -> float | None:
    """Earliest virtual time at which accuracy reaches the target, else None."""
    for r in records:
        if r.test_accuracy >= target_acc:
            return r.virtual_time
    return None


def accuracy_at_round(records: list[MetricsRecord], round_no: int) -> float:
    """Accuracy at a round, last observation carried forward.

    Rounds before the first record report the initial evaluation value.
    """
    if not records:
        raise ValueError("empty metrics log")
    best = records[0]
    for r in records:
        if r.round <= round_no:
            best = r
        else:
            break
    return best.test_accuracy


@dataclass(frozen=True)
class ReportRow:
    label: str
    final_accuracy: float
    time_to_target: float | None
    accuracy_at_tg: float
    accuracy_at_10tg: float


def build_report(
    runs: list[tuple[str, list[MetricsRecord]]],
    target_acc: float,
    warmup_rounds: int,
) -> list[ReportRow]:
    rows = []
    for label, records in runs:
        if not records:
            raise ValueError(f"{label}: empty metrics log")
        rows.append(
            ReportRow(
                label=label,
                final_accuracy=records[-1].test_accuracy,
                time_to_target=time_to_target(records, target_acc),
                accuracy_at_tg=accuracy_at_round(records, warmup_rounds),
                accuracy_at_10tg=accuracy_at_round(records, 10 * warmup_rounds),
            )
        )
    return rows


def format_report(rows: list[ReportRow], target_acc: float, warmup_rounds: int) -> str:
    def fmt_time(t: float | None) -> str:
        return "Fail" if t is None else f"{t:.0f}"

    header = (
        f"{'run':<24} {'final_acc':>9} {'t_to_' + format(target_acc, '.2f'):>12} "
        f"{'acc@' + str(warmup_rounds):>10} {'acc@' + str(10 * warmup_rounds):>10}"
    )
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.label:<24} {r.final_accuracy:>9.4f} {fmt_time(r.time_to_target):>12} "
            f"{r.accuracy_at_tg:>10.4f} {r.accuracy_at_10tg:>10.4f}"
        )
    return "\n".join(lines)


def report_csv(rows: list[ReportRow], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["run", "final_accuracy", "time_to_target", "accuracy_at_tg", "accuracy_at_10tg"])
        for r in rows:
            writer.writerow(
                [
                    r.label,
                    repr(r.final_accuracy),
                    "Fail" if r.time_to_target is None else repr(r.time_to_target),
                    repr(r.accuracy_at_tg),
                    repr(r.accuracy_at_10tg),
                ]
            )
