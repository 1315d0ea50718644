"""Classification metrics computed from first principles.

Per-class precision, recall, and F1 come straight off the confusion matrix;
macro scores are unweighted means over classes (the macro F1 is the mean of
per-class F1 values, not the F1 of macro precision and recall). Zero-support
and zero-denominator cells score 0 and are flagged rather than hidden.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SchemaError, TooFewFolds, UnknownLabel

METRICS_SCHEMA = "rigorbench_metrics_v1"

PREDICTIONS_BASE_HEADER = ("image_id", "true_label", "predicted_label", "split")

PROB_TOLERANCE = 1e-6


@dataclass(frozen=True)
class PredictionRecord:
    """One model prediction with its full probability vector."""

    image_id: str
    true_label: str
    predicted_label: str
    probabilities: dict[str, float]
    split_origin: str = "test"

    def validation_flags(self) -> list[str]:
        """Non-fatal consistency notes: probability mass and argmax ties."""
        flags = []
        total = sum(self.probabilities.values())
        if abs(total - 1.0) > PROB_TOLERANCE:
            flags.append(f"prob_sum={total:.8f}")
        if self.probabilities:
            best = max(self.probabilities.values())
            arg = sorted(l for l, p in self.probabilities.items() if p == best)
            if len(arg) > 1:
                flags.append("argmax_tie")
            if self.predicted_label not in arg:
                flags.append("predicted_not_argmax")
        return flags


def from_probabilities(
    image_id: str,
    true_label: str,
    probabilities: dict[str, float],
    split_origin: str = "test",
) -> PredictionRecord:
    """Build a record whose predicted label is the argmax.

    Ties resolve to the lexicographically first label among the tied set;
    callers can see the tie through validation_flags().
    """
    if not probabilities:
        raise SchemaError(f"{image_id}: empty probability vector")
    best = max(probabilities.values())
    predicted = min(l for l, p in probabilities.items() if p == best)
    return PredictionRecord(
        image_id=image_id,
        true_label=true_label,
        predicted_label=predicted,
        probabilities=dict(probabilities),
        split_origin=split_origin,
    )


def predictions_to_csv_text(records: list[PredictionRecord], labels: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(PREDICTIONS_BASE_HEADER) + [f"p_{label}" for label in labels])
    for rec in records:
        row = [rec.image_id, rec.true_label, rec.predicted_label, rec.split_origin]
        for label in labels:
            row.append(repr(float(rec.probabilities.get(label, 0.0))))
        writer.writerow(row)
    return buf.getvalue()


def write_predictions(path: str | Path, records: list[PredictionRecord], labels: list[str]):
    Path(path).write_text(predictions_to_csv_text(records, labels), encoding="utf-8")


def predictions_from_csv_text(text: str) -> tuple[list[PredictionRecord], list[str]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise SchemaError("empty predictions file")
    header = rows[0]
    if tuple(header[:4]) != PREDICTIONS_BASE_HEADER:
        raise SchemaError(
            f"predictions header must start with {','.join(PREDICTIONS_BASE_HEADER)}"
        )
    labels = []
    for col in header[4:]:
        if not col.startswith("p_") or len(col) < 3:
            raise SchemaError(f"probability column {col!r} must be named p_<label>")
        labels.append(col[2:])
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise SchemaError(f"line {lineno}: expected {len(header)} fields")
        try:
            probs = {label: float(v) for label, v in zip(labels, row[4:])}
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from exc
        records.append(
            PredictionRecord(
                image_id=row[0],
                true_label=row[1],
                predicted_label=row[2],
                probabilities=probs,
                split_origin=row[3],
            )
        )
    return records, labels


def read_predictions(path: str | Path) -> tuple[list[PredictionRecord], list[str]]:
    return predictions_from_csv_text(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts[i][j] = images whose true label is labels[i], predicted labels[j]."""

    labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)

    def support(self, label: str) -> int:
        i = self.labels.index(label)
        return int(sum(self.counts[i]))

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["true\\predicted"] + list(self.labels))
        for label, row in zip(self.labels, self.counts):
            writer.writerow([label] + list(row))
        return buf.getvalue()

    def to_text_table(self) -> str:
        names = ["true\\pred"] + list(self.labels)
        rows = [[label] + [str(c) for c in row] for label, row in zip(self.labels, self.counts)]
        widths = [max(len(str(cell)) for cell in col) for col in zip(names, *rows)]
        lines = ["  ".join(str(c).rjust(w) for c, w in zip(names, widths))]
        for row in rows:
            lines.append("  ".join(str(c).rjust(w) for c, w in zip(row, widths)))
        return "\n".join(lines) + "\n"


def build_confusion(records: list[PredictionRecord], labels: list[str]) -> ConfusionMatrix:
    """Tally records into a matrix over an explicit label order."""
    index = {label: i for i, label in enumerate(labels)}
    if len(index) != len(labels):
        raise SchemaError("label order contains duplicates")
    counts = [[0] * len(labels) for _ in labels]
    for rec in records:
        if rec.true_label not in index:
            raise UnknownLabel(f"{rec.image_id}: true label {rec.true_label!r} not in label set")
        if rec.predicted_label not in index:
            raise UnknownLabel(
                f"{rec.image_id}: predicted label {rec.predicted_label!r} not in label set"
            )
        counts[index[rec.true_label]][index[rec.predicted_label]] += 1
    return ConfusionMatrix(labels=tuple(labels), counts=tuple(tuple(r) for r in counts))


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricReport:
    """Full evaluation of one prediction set."""

    labels: tuple[str, ...]
    confusion: ConfusionMatrix
    per_class: dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    total: int
    zero_division_flags: tuple[str, ...] = field(default=())

    def to_json_obj(self) -> dict:
        return {
            "schema": METRICS_SCHEMA,
            "labels": list(self.labels),
            "confusion": [list(r) for r in self.confusion.counts],
            "per_class": {
                label: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for label, m in sorted(self.per_class.items())
            },
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "accuracy": self.accuracy,
            "total": self.total,
            "zero_division_flags": list(self.zero_division_flags),
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=2) + "\n"

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json_text(), encoding="utf-8")


def report_from_json_obj(obj: dict) -> MetricReport:
    if not isinstance(obj, dict) or obj.get("schema") != METRICS_SCHEMA:
        raise SchemaError(f"metric report must declare schema {METRICS_SCHEMA}", "schema")
    try:
        labels = tuple(str(l) for l in obj["labels"])
        confusion = ConfusionMatrix(
            labels=labels, counts=tuple(tuple(int(c) for c in row) for row in obj["confusion"])
        )
        per_class = {
            label: ClassMetrics(
                label=label,
                precision=float(m["precision"]),
                recall=float(m["recall"]),
                f1=float(m["f1"]),
                support=int(m["support"]),
            )
            for label, m in obj["per_class"].items()
        }
        return MetricReport(
            labels=labels,
            confusion=confusion,
            per_class=per_class,
            macro_precision=float(obj["macro"]["precision"]),
            macro_recall=float(obj["macro"]["recall"]),
            macro_f1=float(obj["macro"]["f1"]),
            accuracy=float(obj["accuracy"]),
            total=int(obj["total"]),
            zero_division_flags=tuple(obj.get("zero_division_flags", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad metric report: {exc}") from exc


def read_report(path: str | Path) -> MetricReport:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"metric report is not valid JSON: {exc}") from exc
    return report_from_json_obj(obj)


def evaluate(records: list[PredictionRecord], labels: list[str]) -> MetricReport:
    """Confusion matrix, per-class scores, macro averages, and accuracy."""
    cm = build_confusion(records, labels)
    return evaluate_confusion(cm)


def evaluate_confusion(cm: ConfusionMatrix) -> MetricReport:
    arr = cm.as_array()
    per_class: dict[str, ClassMetrics] = {}
    flags: list[str] = []
    for i, label in enumerate(cm.labels):
        tp = int(arr[i, i])
        predicted = int(arr[:, i].sum())
        actual = int(arr[i, :].sum())
        if predicted == 0:
            precision = 0.0
            flags.append(f"precision:{label}")
        else:
            precision = tp / predicted
        if actual == 0:
            recall = 0.0
            flags.append(f"recall:{label}")
        else:
            recall = tp / actual
        if precision + recall == 0.0:
            f1 = 0.0
            flags.append(f"f1:{label}")
        else:
            f1 = 2 * precision * recall / (precision + recall)
        per_class[label] = ClassMetrics(
            label=label, precision=precision, recall=recall, f1=f1, support=actual
        )
    n_labels = len(cm.labels)
    total = int(arr.sum())
    return MetricReport(
        labels=cm.labels,
        confusion=cm,
        per_class=per_class,
        macro_precision=sum(m.precision for m in per_class.values()) / n_labels,
        macro_recall=sum(m.recall for m in per_class.values()) / n_labels,
        macro_f1=sum(m.f1 for m in per_class.values()) / n_labels,
        accuracy=(int(np.trace(arr)) / total) if total else 0.0,
        total=total,
        zero_division_flags=tuple(flags),
    )


AGGREGATE_METRICS = ("macro_precision", "macro_recall", "macro_f1", "accuracy")


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    minimum: float
    maximum: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class FoldAggregate:
    """Across-fold mean, sample std, range, and t-interval per metric."""

    n_folds: int
    per_metric: dict[str, MetricSummary]
    values: dict[str, tuple[float, ...]]

    def to_json_obj(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "per_metric": {
                name: {
                    "mean": s.mean,
                    "std": s.std,
                    "min": s.minimum,
                    "max": s.maximum,
                    "ci95": [s.ci_low, s.ci_high],
                }
                for name, s in sorted(self.per_metric.items())
            },
            "values": {name: list(v) for name, v in sorted(self.values.items())},
        }


def aggregate_folds(reports: list[MetricReport], confidence: float = 0.95) -> FoldAggregate:
    """Summarize per-fold reports. Needs at least two folds for a std."""
    if len(reports) < 2:
        raise TooFewFolds(f"need >= 2 fold reports, got {len(reports)}")
    n = len(reports)
    per_metric = {}
    values = {}
    tcrit = t_critical(n - 1, confidence)
    for name in AGGREGATE_METRICS:
        vals = tuple(float(getattr(r, name)) for r in reports)
        mean = sum(vals) / n
        variance = sum((v - mean) ** 2 for v in vals) / (n - 1)
        std = math.sqrt(variance)
        half = tcrit * std / math.sqrt(n)
        per_metric[name] = MetricSummary(
            mean=mean, std=std, minimum=min(vals), maximum=max(vals),
            ci_low=mean - half, ci_high=mean + half,
        )
        values[name] = vals
    return FoldAggregate(n_folds=n, per_metric=per_metric, values=values)


def t_critical(df: int, confidence: float = 0.95) -> float:
    """Two-sided critical value of Student's t, found by bisection.

    Uses the same regularized-beta tail probability as the correlation
    tests, so interval construction and p-values always agree.
    """
    from .stats import t_two_tailed_p

    alpha = 1.0 - confidence
    lo, hi = 0.0, 1e6
    for _ in range(200):
        mid = (lo + hi) / 2
        if t_two_tailed_p(mid, df) > alpha:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def bootstrap_ci(
    records: list[PredictionRecord],
    labels: list[str],
    metric: str = "macro_f1",
    replicates: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap 95 percent interval for one metric.

    Records are resampled with replacement per replicate; each replicate
    seeds its own generator from (seed, replicate index), so any prefix of
    the replicate sequence is reproducible independently of the rest.
    """
    if metric not in AGGREGATE_METRICS:
        raise SchemaError(f"unknown metric {metric!r}, pick one of {AGGREGATE_METRICS}")
    if not records:
        raise SchemaError("cannot bootstrap an empty prediction set")
    n = len(records)
    stats = np.empty(replicates, dtype=np.float64)
    for b in range(replicates):
        rng = np.random.default_rng([seed, b])
        idx = rng.integers(0, n, size=n)
        resampled = [records[i] for i in idx]
        stats[b] = getattr(evaluate(resampled, labels), metric)
    low, high = np.quantile(stats, [0.025, 0.975], method="linear")
    return float(low), float(high)
