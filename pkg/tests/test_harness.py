from __future__ import annotations

import csv

import pytest

from alpgen.corpus import CorpusManifest
from alpgen.difficulty import annotate_corpus, categorize
from alpgen.gateway import Gateway
from alpgen.harness import (
    CSV_COLUMNS,
    HarnessError,
    load_report_json,
    run_experiment,
    write_csv,
    write_report_json,
)
from alpgen.minialpg import SynthSpec, synthesize_corpus
from alpgen.mocks import echo_mock_backend
from alpgen.pipeline import Strategy

from conftest import make_pair


def banded_corpus(seed: int = 2, count: int = 12) -> CorpusManifest:
    manifest = synthesize_corpus(SynthSpec(seed=seed, count=count, complexity_range=(1, 6)))
    gw = Gateway(echo_mock_backend(), model="mock-model")
    return categorize(annotate_corpus(manifest, gw))


def test_run_experiment_covers_every_cell() -> None:
    banded = banded_corpus()
    gw = Gateway(echo_mock_backend(), model="mock-model")
    strategies = [Strategy.parse(s) for s in ("zero-shot", "few-shot", "pke")]
    report = run_experiment(banded, strategies, gw)
    assert len(report.rows) == len(banded) * 3
    seen = {(r.query_id, r.strategy) for r in report.rows}
    assert len(seen) == len(report.rows)
    # Rows are grouped by corpus order, strategies in configured order.
    first_three = report.rows[:3]
    assert [r.strategy for r in first_three] == ["zero-shot", "few-shot", "pke"]
    assert all(r.query_id == banded.examples[0].id for r in first_three)


def test_run_experiment_aggregates_and_metadata() -> None:
    banded = banded_corpus()
    gw = Gateway(echo_mock_backend(), model="mock-model")
    strategies = [Strategy.parse(s) for s in ("zero-shot", "few-shot")]
    report = run_experiment(banded, strategies, gw, seed=99)
    assert set(report.aggregates) == {"zero-shot", "few-shot"}
    assert report.aggregates["zero-shot"].em == 0.0
    assert report.aggregates["few-shot"].em == 1.0
    md = report.metadata
    assert "leave-one-out" in md["protocol"]
    assert md["seed"] == 99
    assert md["model"] == "mock-model"
    assert md["k"] == 3
    assert "tertiles" in md["banding"]
    assert "BLEU-4" in md["bleu"]
    assert md["created_at"]
    assert "ascending" in md["ordering"]


def test_call_counts_recorded_per_row() -> None:
    banded = banded_corpus(count=9)
    gw = Gateway(echo_mock_backend(), model="mock-model")
    report = run_experiment(banded, [Strategy.parse("pke")], gw)
    assert all(r.calls == 4 for r in report.rows)
    report2 = run_experiment(banded, [Strategy.parse("few-shot")], gw)
    assert all(r.calls == 1 for r in report2.rows)


def test_failures_are_isolated_per_cell() -> None:
    banded = banded_corpus(count=9)

    # A backend that breaks for one specific query's generation prompt.
    poison = banded.examples[4].pair.nl
    inner = echo_mock_backend()

    class Picky:
        name = "picky"

        def complete(self, request):
            if poison in request.user and "### Corresponding Code" in request.user:
                raise RuntimeError("synthetic failure")
            return inner.complete(request)

    gw = Gateway(Picky(), model="mock-model")
    strategies = [Strategy.parse("few-shot")]
    report = run_experiment(banded, strategies, gw)
    failed = [r for r in report.rows if r.error]
    assert len(failed) >= 1
    assert all("few-shot" == r.strategy for r in failed)
    assert not report.all_failed
    ok = [r for r in report.rows if not r.error]
    assert len(ok) + len(failed) == len(banded)
    # Aggregates cover only the successful rows.
    assert report.aggregates["few-shot"].n == len(ok)


def test_run_experiment_requires_scores_for_pke() -> None:
    raw = synthesize_corpus(SynthSpec(seed=1, count=6, complexity_range=(1, 4)))
    gw = Gateway(echo_mock_backend(), model="mock-model")
    with pytest.raises(HarnessError, match="difficulty"):
        run_experiment(raw, [Strategy.parse("pke")], gw)
    # Baselines run fine without scores.
    report = run_experiment(raw, [Strategy.parse("few-shot")], gw)
    assert len(report.rows) == 6


def test_run_experiment_requires_bands_for_dnr() -> None:
    manifest = synthesize_corpus(SynthSpec(seed=1, count=6, complexity_range=(1, 4)))
    gw = Gateway(echo_mock_backend(), model="mock-model")
    scored_only = annotate_corpus(manifest, gw)
    with pytest.raises(HarnessError, match="band"):
        run_experiment(scored_only, [Strategy.parse("dnr-emh")], gw)


def test_run_experiment_needs_two_examples() -> None:
    manifest = CorpusManifest(examples=(make_pair(1, "only", "NOP"),))
    gw = Gateway(echo_mock_backend(), model="mock-model")
    with pytest.raises(HarnessError, match="two examples"):
        run_experiment(manifest, [Strategy.parse("zero-shot")], gw)


def test_csv_shape_and_formats(tmp_path) -> None:
    banded = banded_corpus(count=9)
    gw = Gateway(echo_mock_backend(), model="mock-model")
    report = run_experiment(banded, [Strategy.parse("few-shot")], gw)
    path = write_csv(report, tmp_path / "report.csv")
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + len(banded)
    em, bleu, leven = rows[1][2:5]
    assert em in ("0", "1")
    assert len(bleu.split(".")[1]) == 6  # fixed six-decimal formatting
    assert rows[1][6] == ""  # no error


def test_report_json_round_trip(tmp_path) -> None:
    banded = banded_corpus(count=9)
    gw = Gateway(echo_mock_backend(), model="mock-model")
    report = run_experiment(banded, [Strategy.parse("few-shot")], gw)
    path = write_report_json(report, tmp_path / "report.json")
    loaded = load_report_json(path)
    assert loaded.rows == report.rows
    assert loaded.aggregates == report.aggregates
    assert loaded.metadata == report.metadata


def test_all_failed_flag() -> None:
    banded = banded_corpus(count=6)

    class Broken:
        name = "broken"

        def complete(self, request):
            raise RuntimeError("always down")

    gw = Gateway(Broken(), model="mock-model")
    report = run_experiment(banded, [Strategy.parse("zero-shot")], gw)
    assert report.all_failed
    assert report.aggregates == {}
    assert all(r.error for r in report.rows)
