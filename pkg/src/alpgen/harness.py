"""Experiment runner: strategies x queries, leave-one-out, CSV/JSON output.

Every example in the corpus takes a turn as the query while the remaining
examples form the retrieval pool.  Failures are isolated per (query,
strategy) cell: the row records the error and the run continues.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .corpus import CorpusManifest, leave_one_out
from .errors import AlpgenError
from .gateway import Gateway
from .metrics import BLEU_CONFIG, AggregateScore, PairScore, aggregate, score_pair
from .pipeline import DEFAULT_LANG, Strategy, StrategyKind, execute_strategy
from .report import DELTA_CONVENTION

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("query_id", "strategy", "em", "bleu", "leven", "calls", "error")

BANDING_RULE = "rank tertiles by mean score, ascending; ceilings to easy then medium"
ORDERING_RULE = (
    "pke: difficulty ascending (ties by similarity rank); "
    "sim: similarity ascending; few-shot blocks: most similar last"
)
PROTOCOL = "leave-one-out (query removed from retrieval pool)"


class HarnessError(AlpgenError):
    pass


@dataclass(frozen=True)
class ExampleRow:
    query_id: str
    strategy: str
    code: str
    score: PairScore | None
    calls: int
    error: str | None = None


@dataclass
class EvalReport:
    rows: list[ExampleRow]
    aggregates: dict[str, AggregateScore]
    metadata: dict = field(default_factory=dict)

    @property
    def all_failed(self) -> bool:
        return bool(self.rows) and all(r.error is not None for r in self.rows)


def _needs_scores(strategies: list[Strategy]) -> bool:
    return any(
        s.kind in (StrategyKind.PKE, StrategyKind.SIM_PKE, StrategyKind.DNR)
        for s in strategies
    )


def _needs_bands(strategies: list[Strategy]) -> bool:
    return any(s.kind is StrategyKind.DNR for s in strategies)


def run_experiment(
    manifest: CorpusManifest,
    strategies: list[Strategy],
    gateway: Gateway,
    lang: str = DEFAULT_LANG,
    seed: int = 0,
) -> EvalReport:
    if len(manifest) < 2:
        raise HarnessError("need at least two examples for leave-one-out runs")
    if not strategies:
        raise HarnessError("no strategies selected")
    if _needs_scores(strategies) and not manifest.all_scored:
        raise HarnessError(
            "selected strategies need difficulty scores; annotate the corpus first"
        )
    if _needs_bands(strategies) and not manifest.all_banded:
        raise HarnessError(
            "DnR strategies need difficulty bands; annotate the corpus first"
        )

    def run_cell(query_ex, strategy: Strategy) -> ExampleRow:
        pool = leave_one_out(manifest, query_ex.id)
        try:
            outcome = execute_strategy(strategy, query_ex.pair, pool, gateway, lang)
        except Exception as exc:
            # Record-and-continue: one bad cell must not void a long run.
            message = (
                str(exc)
                if isinstance(exc, AlpgenError)
                else f"unexpected {type(exc).__name__}: {exc}"
            )
            logger.warning("cell failed: %s", message)
            return ExampleRow(
                query_id=query_ex.id,
                strategy=strategy.label,
                code="",
                score=None,
                calls=0,
                error=message,
            )
        return ExampleRow(
            query_id=query_ex.id,
            strategy=strategy.label,
            code=outcome.code,
            score=score_pair(outcome.code, query_ex.pair.code),
            calls=outcome.calls,
        )

    cells = [
        (qi, si, query_ex, strategy)
        for qi, query_ex in enumerate(manifest)
        for si, strategy in enumerate(strategies)
    ]
    results: dict[tuple[int, int], ExampleRow] = {}
    with ThreadPoolExecutor(max_workers=gateway.parallelism) as pool:
        futures = {
            pool.submit(run_cell, query_ex, strategy): (qi, si)
            for qi, si, query_ex, strategy in cells
        }
        for future, key in futures.items():
            results[key] = future.result()
    rows = [results[key] for key in sorted(results)]

    aggregates: dict[str, AggregateScore] = {}
    for strategy in strategies:
        scored = [r.score for r in rows if r.strategy == strategy.label and r.score]
        if scored:
            aggregates[strategy.label] = aggregate(scored)
        else:
            logger.warning("strategy %s produced no successful rows", strategy.label)

    metadata = {
        "tool_version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "protocol": PROTOCOL,
        "model": gateway.model,
        "gateway": gateway.backend.name,
        "seed": seed,
        "k": strategies[0].k
        if len({s.k for s in strategies}) == 1
        else {s.label: s.k for s in strategies},
        "strategies": [s.label for s in strategies],
        "corpus_size": len(manifest),
        "banding": BANDING_RULE,
        "ordering": ORDERING_RULE,
        "bleu": BLEU_CONFIG,
        "delta": DELTA_CONVENTION,
        "annotation_model": manifest.annotation_model,
    }
    return EvalReport(rows=rows, aggregates=aggregates, metadata=metadata)


def write_csv(report: EvalReport, path: str | Path) -> Path:
    """Per-cell rows as CSV.  Deterministic: no timestamps, fixed formats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in report.rows:
            if row.score is None:
                metrics = ("", "", "")
            else:
                metrics = (
                    str(row.score.em),
                    f"{row.score.bleu:.6f}",
                    f"{row.score.leven:.6f}",
                )
            writer.writerow(
                (row.query_id, row.strategy, *metrics, row.calls, row.error or "")
            )
    return path


def report_to_dict(report: EvalReport) -> dict:
    return {
        "rows": [asdict(row) for row in report.rows],
        "aggregates": {k: asdict(v) for k, v in report.aggregates.items()},
        "metadata": report.metadata,
    }


def write_report_json(report: EvalReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(report_to_dict(report), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return path


def load_report_json(path: str | Path) -> EvalReport:
    path = Path(path)
    if not path.exists():
        raise HarnessError(f"report file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        rows = [
            ExampleRow(
                query_id=r["query_id"],
                strategy=r["strategy"],
                code=r["code"],
                score=PairScore(**r["score"]) if r["score"] else None,
                calls=r["calls"],
                error=r["error"],
            )
            for r in data["rows"]
        ]
        aggregates = {
            k: AggregateScore(**v) for k, v in data["aggregates"].items()
        }
        return EvalReport(
            rows=rows, aggregates=aggregates, metadata=data.get("metadata", {})
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise HarnessError(f"bad report file {path}: {exc}") from exc
