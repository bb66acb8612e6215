"""Fixed-width report tables over aggregated evaluation results."""
from __future__ import annotations

from enum import Enum
from typing import Mapping

from .errors import AlpgenError
from .metrics import AggregateScore

BASELINE_LABEL = "few-shot"
DNR_LABELS = ("dnr-emh", "dnr-eee", "dnr-mmm", "dnr-hhh")

# Relative-change convention for the ordering table: value / baseline - 1,
# as a percentage with one decimal place and an explicit sign.
DELTA_CONVENTION = "strategy/few-shot - 1, percent, one decimal"


class ReportError(AlpgenError):
    pass


class ReportStyle(str, Enum):
    MAIN = "main"
    ORDERING = "ordering"
    DNR = "dnr"


def format_delta(value: float, baseline: float) -> str:
    """Relative change against the baseline, e.g. ``(+11.3%)``."""
    if baseline == 0:
        return "(n/a)"
    return f"({(value / baseline - 1.0) * 100.0:+.1f}%)"


def _header_lines(metadata: Mapping[str, object]) -> list[str]:
    lines = []
    protocol = metadata.get("protocol")
    if protocol:
        lines.append(f"protocol: {protocol}")
    for key in ("model", "gateway", "k", "seed"):
        if key in metadata:
            lines.append(f"{key}: {metadata[key]}")
    return lines


def _table(
    rows: list[tuple[str, str, str, str]], title: str, metadata: Mapping[str, object]
) -> str:
    headers = ("strategy", "EM", "BLEU", "Leven")
    widths = [
        max(len(headers[col]), *(len(r[col]) for r in rows)) for col in range(4)
    ]
    out = [title]
    out.extend(_header_lines(metadata))
    out.append("")
    header = "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))
    out.append(header)
    out.append("-" * len(header))
    for row in rows:
        out.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(out)


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def render_report(
    aggregates: Mapping[str, AggregateScore],
    metadata: Mapping[str, object],
    style: ReportStyle = ReportStyle.MAIN,
) -> str:
    """Render aggregate metrics as a fixed-width table.

    ``ordering`` annotates every non-baseline row with its relative change
    against the few-shot row; ``dnr`` requires all four band
    configurations to be present.
    """
    if not aggregates:
        raise ReportError("no aggregate results to render")
    if style is ReportStyle.MAIN:
        rows = [
            (label, _fmt(agg.em), _fmt(agg.bleu), _fmt(agg.leven))
            for label, agg in aggregates.items()
        ]
        return _table(rows, "Strategy comparison", metadata)

    if style is ReportStyle.ORDERING:
        baseline = aggregates.get(BASELINE_LABEL)
        if baseline is None:
            raise ReportError(
                f"ordering table needs a {BASELINE_LABEL!r} row; "
                f"have {sorted(aggregates)}"
            )
        rows = []
        for label, agg in aggregates.items():
            if label == BASELINE_LABEL:
                rows.append((label, _fmt(agg.em), _fmt(agg.bleu), _fmt(agg.leven)))
            else:
                rows.append(
                    (
                        label,
                        f"{_fmt(agg.em)} {format_delta(agg.em, baseline.em)}",
                        f"{_fmt(agg.bleu)} {format_delta(agg.bleu, baseline.bleu)}",
                        f"{_fmt(agg.leven)} {format_delta(agg.leven, baseline.leven)}",
                    )
                )
        return _table(rows, "Example-ordering comparison (delta vs few-shot)", metadata)

    missing = [label for label in DNR_LABELS if label not in aggregates]
    if missing:
        raise ReportError(f"dnr table missing strategy rows: {missing}")
    ordered_labels = [
        label
        for label in list(aggregates)
        if label not in DNR_LABELS
    ] + list(DNR_LABELS)
    rows = [
        (
            label,
            _fmt(aggregates[label].em),
            _fmt(aggregates[label].bleu),
            _fmt(aggregates[label].leven),
        )
        for label in ordered_labels
    ]
    return _table(rows, "Difficulty-and-retrieval configurations", metadata)
