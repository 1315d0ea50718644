"""Assemble per-fold metrics and optional audits into one study report.

The report is plain text: a per-fold table, mean +/- std lines with
confidence intervals for every aggregate metric, the held-out test block,
and, only when supplied, protocol findings, lint findings, and correlation
results. Sections that were not requested do not appear at all, so the
document never suggests an analysis that was not run.
"""

from __future__ import annotations

from pathlib import Path

from .errors import MissingArtifact
from .lint import LintFinding
from .metrics import (
    AGGREGATE_METRICS,
    FoldAggregate,
    MetricReport,
    aggregate_folds,
    read_report,
)
from .protocol import ProtocolFinding
from .stats import CorrelationResult


def load_fold_reports(paths: list[str | Path]) -> list[MetricReport]:
    """Read fold report JSON files, failing loudly on any missing one."""
    reports = []
    for path in paths:
        path = Path(path)
        if not path.exists():
            raise MissingArtifact(f"fold report not found: {path}")
        reports.append(read_report(path))
    return reports


def _fold_table(reports: list[MetricReport]) -> list[str]:
    header = ["fold"] + list(AGGREGATE_METRICS)
    rows = [header]
    for i, rep in enumerate(reports, start=1):
        rows.append(
            [str(i)]
            + [f"{getattr(rep, name):.4f}" for name in AGGREGATE_METRICS]
        )
    widths = [max(len(row[c]) for row in rows) for c in range(len(header))]
    lines = []
    for r, row in enumerate(rows):
        cells = [cell.rjust(widths[c]) for c, cell in enumerate(row)]
        lines.append("  ".join(cells))
        if r == 0:
            lines.append("  ".join("-" * w for w in widths))
    return lines


def _aggregate_lines(agg: FoldAggregate) -> list[str]:
    lines = []
    for name in AGGREGATE_METRICS:
        s = agg.per_metric[name]
        lines.append(
            f"{name}: {s.mean:.4f} +/- {s.std:.4f}"
            f"  (95% CI {s.ci_low:.4f} .. {s.ci_high:.4f},"
            f" range {s.minimum:.4f} .. {s.maximum:.4f})"
        )
    return lines


def _test_block(report: MetricReport) -> list[str]:
    lines = [
        f"accuracy: {report.accuracy:.4f}  (n={report.total})",
        f"macro_precision: {report.macro_precision:.4f}",
        f"macro_recall: {report.macro_recall:.4f}",
        f"macro_f1: {report.macro_f1:.4f}",
        "",
        "per-class f1:",
    ]
    for label in report.labels:
        m = report.per_class[label]
        lines.append(f"  {label}: {m.f1:.4f}  (support {m.support})")
    if report.zero_division_flags:
        lines.append("zero-division flags: " + ", ".join(report.zero_division_flags))
    return lines


def _section(title: str) -> list[str]:
    return ["", title, "-" * len(title)]


def render_study_report(
    fold_reports: list[MetricReport],
    test_report: MetricReport | None = None,
    protocol_findings: list[ProtocolFinding] | None = None,
    lint_findings: list[LintFinding] | None = None,
    correlations: dict[str, CorrelationResult] | None = None,
    title: str = "Evaluation summary",
) -> str:
    """Render the whole study document. Optional sections appear only if given.

    Passing an empty findings list renders the section with an explicit
    "no findings" line; passing None omits the section entirely.
    """
    if not fold_reports:
        raise MissingArtifact("no fold reports to summarize")
    lines = [title, "=" * len(title)]

    lines += _section(f"Cross-validation ({len(fold_reports)} folds)")
    lines += _fold_table(fold_reports)
    if len(fold_reports) >= 2:
        lines.append("")
        lines += _aggregate_lines(aggregate_folds(fold_reports))
    else:
        lines.append("")
        lines.append("single fold: no spread to report")

    if test_report is not None:
        lines += _section("Held-out test")
        lines += _test_block(test_report)

    if protocol_findings is not None:
        lines += _section("Training protocol audit")
        if protocol_findings:
            for f in protocol_findings:
                where = f" (fold {f.fold})" if f.fold is not None else ""
                lines.append(f"  {f.code}{where}: {f.message}")
        else:
            lines.append("  no findings")

    if lint_findings is not None:
        lines += _section("Methodology lint")
        if lint_findings:
            for f in lint_findings:
                lines.append(f"  [{f.severity}] {f.rule_id} {f.study_id}: {f.summary}")
        else:
            lines.append("  no findings")

    if correlations is not None:
        lines += _section("Correlations")
        for name in sorted(correlations):
            r = correlations[name]
            lines.append(
                f"  {name}: coefficient={r.coefficient:.4f}"
                f" p={r.p_value:.4f} n={r.n} ({r.method})"
            )

    return "\n".join(lines) + "\n"
