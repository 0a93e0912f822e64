"""Stratified evaluation report with explicit abstention accounting."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..data.types import LIGHTING_TAGS
from ..model.branches import CrossingPrediction
from .dataset import WindowRecord
from .metrics import compute_metrics

__all__ = [
    "ABSTENTION_MODES",
    "StratumRow",
    "EvalReport",
    "stratified_report",
    "write_report_csv",
    "read_report_csv",
    "long_format_rows",
]

ABSTENTION_MODES = ("as_not_crossing", "excluded")
DISTANCE_STRATA = ("close", "medium", "far")
REPORT_ROWS = DISTANCE_STRATA + LIGHTING_TAGS + ("overall",)
_METRICS = ("accuracy", "auc", "f1", "precision", "recall")


@dataclass(frozen=True)
class StratumRow:
    stratum: str
    n: int
    accuracy: float | None
    auc: float | None
    f1: float | None
    precision: float | None
    recall: float | None
    abstained: int

    @property
    def valid(self) -> bool:
        return self.accuracy is not None


@dataclass(frozen=True)
class EvalReport:
    abstention_mode: str
    rows: tuple[StratumRow, ...]

    def row(self, stratum: str) -> StratumRow:
        for r in self.rows:
            if r.stratum == stratum:
                return r
        raise KeyError(f"no report row for stratum {stratum!r}")


def _row_for(stratum: str, records, predictions, abstention_mode) -> StratumRow:
    abstained = sum(p.abstained for p in predictions)
    if abstention_mode == "excluded":
        pairs = [(p, r) for p, r in zip(predictions, records) if not p.abstained]
    else:
        # An abstaining predictor scores 0.0, which the threshold reads as
        # not_crossing; that is exactly the pitfall this mode reproduces.
        pairs = list(zip(predictions, records))
    if not pairs:
        return StratumRow(stratum, 0, None, None, None, None, None, abstained)
    scores = [p.probability for p, _ in pairs]
    labels = [r.label for _, r in pairs]
    threshold = pairs[0][0].threshold
    m = compute_metrics(scores, labels, threshold)
    return StratumRow(stratum, len(pairs), m["accuracy"], m["auc"], m["f1"],
                      m["precision"], m["recall"], abstained)


def stratified_report(records: Sequence[WindowRecord],
                      predictions: Sequence[CrossingPrediction],
                      abstention_mode: str = "as_not_crossing") -> EvalReport:
    """Metrics per distance stratum, per lighting stratum, plus an overall row.

    ``as_not_crossing`` keeps abstained windows in the metrics as not_crossing
    predictions with score 0; ``excluded`` drops them and reports the count.
    """
    if abstention_mode not in ABSTENTION_MODES:
        raise ValueError(f"unknown abstention mode {abstention_mode!r}")
    if len(records) != len(predictions):
        raise ValueError(f"{len(records)} records vs {len(predictions)} predictions")
    for r in records:
        if r.lighting not in LIGHTING_TAGS:
            raise ValueError(f"unknown lighting stratum tag {r.lighting!r}")
    rows = []
    for stratum in DISTANCE_STRATA:
        idx = [i for i, r in enumerate(records) if r.stratum == stratum]
        rows.append(_row_for(stratum, [records[i] for i in idx],
                             [predictions[i] for i in idx], abstention_mode))
    for lighting in LIGHTING_TAGS:
        idx = [i for i, r in enumerate(records) if r.lighting == lighting]
        rows.append(_row_for(lighting, [records[i] for i in idx],
                             [predictions[i] for i in idx], abstention_mode))
    rows.append(_row_for("overall", list(records), list(predictions), abstention_mode))
    return EvalReport(abstention_mode, tuple(rows))


def _fmt(value: float | None) -> str:
    return "NA" if value is None else f"{value:.6f}"


def write_report_csv(report: EvalReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stratum", "n", "accuracy", "auc", "f1",
                         "precision", "recall", "abstained"])
        for r in report.rows:
            writer.writerow([r.stratum, r.n, _fmt(r.accuracy), _fmt(r.auc),
                             _fmt(r.f1), _fmt(r.precision), _fmt(r.recall), r.abstained])


def read_report_csv(path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return list(reader)


def long_format_rows(report_rows: list[dict[str, str]]) -> list[tuple[str, str, str]]:
    """Plot-ready long format: one (stratum, metric, value) per row."""
    out = []
    for row in report_rows:
        for metric in _METRICS:
            out.append((row["stratum"], metric, row[metric]))
    return out
