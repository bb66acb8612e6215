from __future__ import annotations

import logging
import math
import random
from collections import Counter

import pytest

from alpgen.corpus import Band, CorpusManifest, ExamplePair, ScoredExample
from alpgen.retrieval import (
    Bm25Index,
    BandSelectionError,
    DnrConfig,
    RetrievalError,
    build_band_indexes,
    build_index,
    idf,
    order_by_similarity,
    order_for_pke,
    retrieve_top_k,
    score,
    select_dnr,
    tokenize_text,
)

from conftest import make_pair, make_scored


def test_tokenizer_lowercases_and_keeps_hash_angle() -> None:
    text = "Write ALPG code: the 85h Command - Address 5cycle, TP<#85!"
    tokens = tokenize_text(text)
    assert "85h" in tokens
    assert "tp<#85" in tokens
    assert "-" not in tokens
    assert all(t == t.lower() for t in tokens)
    assert tokenize_text("") == []


def manifest_of(nls: list[str]) -> CorpusManifest:
    return CorpusManifest(
        examples=tuple(make_pair(i, nl, "NOP") for i, nl in enumerate(nls))
    )


def brute_force_scores(nls: list[str], query: str, k1=1.2, b=0.75) -> list[float]:
    """Direct-formula reference, independent of the index structure."""
    docs = [tokenize_text(nl) for nl in nls]
    n_docs = len(docs)
    avg_len = sum(len(d) for d in docs) / n_docs
    out = []
    for doc in docs:
        tf = Counter(doc)
        total = 0.0
        for term in tokenize_text(query):
            df = sum(1 for d in docs if term in d)
            if df == 0 or tf[term] == 0:
                continue
            term_idf = math.log(1 + (n_docs - df + 0.5) / (df + 0.5))
            numer = tf[term] * (k1 + 1)
            denom = tf[term] + k1 * (1 - b + b * len(doc) / avg_len)
            total += term_idf * numer / denom
        out.append(total)
    return out


def test_index_statistics() -> None:
    index = build_index(manifest_of(["alpha beta beta", "beta gamma"]))
    assert index.doc_count == 2
    assert index.avg_doc_len == 2.5
    assert index.df == {"alpha": 1, "beta": 2, "gamma": 1}
    assert index.doc_tfs[0]["beta"] == 2


def test_index_rejects_empty_corpus() -> None:
    with pytest.raises(RetrievalError):
        build_index(CorpusManifest(examples=()))


def test_idf_is_nonnegative_even_for_common_terms() -> None:
    index = build_index(manifest_of(["x", "x", "x"]))
    assert idf(index, "x") > 0.0


def test_score_matches_direct_formula() -> None:
    nls = [
        "stop the pattern with timing one",
        "stop and wait",
        "jump to the command subroutine with the chip enable pin",
    ]
    index = build_index(manifest_of(nls))
    query = "stop the pattern"
    expected = brute_force_scores(nls, query)
    for i, nl in enumerate(nls):
        assert score(index, query, f"ex-{i:03d}") == pytest.approx(
            expected[i], abs=1e-12
        )


def test_score_zero_for_foreign_query() -> None:
    index = build_index(manifest_of(["alpha beta", "gamma delta"]))
    assert score(index, "zeta eta", "ex-000") == 0.0


def test_score_unknown_doc_rejected() -> None:
    index = build_index(manifest_of(["alpha"]))
    with pytest.raises(RetrievalError, match="unknown"):
        score(index, "alpha", "nope")


def test_random_corpora_match_oracle() -> None:
    rng = random.Random(55)
    vocab = [f"w{i}" for i in range(20)]
    for _ in range(60):
        n_docs = rng.randrange(1, 13)
        nls = [
            " ".join(rng.choice(vocab) for _ in range(rng.randrange(1, 9)))
            for _ in range(n_docs)
        ]
        query = " ".join(rng.choice(vocab) for _ in range(rng.randrange(1, 6)))
        index = build_index(manifest_of(nls))
        expected = brute_force_scores(nls, query)
        for i in range(n_docs):
            assert score(index, query, f"ex-{i:03d}") == pytest.approx(
                expected[i], abs=1e-9
            )


def test_top_k_is_prefix_of_full_ranking() -> None:
    rng = random.Random(17)
    vocab = [f"w{i}" for i in range(12)]
    for _ in range(40):
        n_docs = rng.randrange(2, 10)
        nls = [
            " ".join(rng.choice(vocab) for _ in range(rng.randrange(1, 8)))
            for _ in range(n_docs)
        ]
        query = " ".join(rng.choice(vocab) for _ in range(rng.randrange(1, 5)))
        index = build_index(manifest_of(nls))
        expected = brute_force_scores(nls, query)
        full_order = sorted(range(n_docs), key=lambda i: (-expected[i], i))
        k = rng.randrange(1, n_docs + 1)
        got = retrieve_top_k(index, query, k)
        assert [r.id for r in got] == [f"ex-{i:03d}" for i in full_order[:k]]
        assert [r.rank for r in got] == list(range(1, len(got) + 1))
        scores = [r.score for r in got]
        assert scores == sorted(scores, reverse=True)


def test_top_k_ties_break_by_corpus_order() -> None:
    index = build_index(manifest_of(["same text", "same text", "same text"]))
    got = retrieve_top_k(index, "same", 2)
    assert [r.id for r in got] == ["ex-000", "ex-001"]


def test_k_larger_than_corpus_returns_all() -> None:
    index = build_index(manifest_of(["a", "b"]))
    assert len(retrieve_top_k(index, "a", 10)) == 2
    with pytest.raises(RetrievalError):
        retrieve_top_k(index, "a", 0)


def scored_manifest() -> CorpusManifest:
    return CorpusManifest(
        examples=(
            make_scored(0, "pattern stop easy", "STPS TS1", (80.0,) * 5),
            make_scored(1, "pattern stop timing", "STPS TS2", (20.0,) * 5),
            make_scored(2, "pattern stop again", "NOP", (50.0,) * 5),
        )
    )


def test_order_for_pke_sorts_by_difficulty() -> None:
    manifest = scored_manifest()
    index = build_index(manifest)
    results = retrieve_top_k(index, "pattern stop", 3)
    ordered = order_for_pke(results, manifest)
    assert [ex.mean_score for ex in ordered] == [20.0, 50.0, 80.0]


def test_order_for_pke_ties_by_similarity_rank() -> None:
    manifest = CorpusManifest(
        examples=(
            make_scored(0, "alpha beta", "NOP", (50.0,) * 5),
            make_scored(1, "alpha alpha beta", "NOP", (50.0,) * 5),
        )
    )
    index = build_index(manifest)
    results = retrieve_top_k(index, "alpha", 2)
    ordered = order_for_pke(results, manifest)
    # Equal difficulty: the better-ranked document comes first.
    assert [ex.id for ex in ordered] == [results[0].id, results[1].id]


def test_order_for_pke_requires_scores() -> None:
    manifest = manifest_of(["alpha", "beta"])
    index = build_index(manifest)
    results = retrieve_top_k(index, "alpha", 2)
    with pytest.raises(RetrievalError, match="difficulty score"):
        order_for_pke(results, manifest)


def test_order_by_similarity_reverses_rank() -> None:
    manifest = scored_manifest()
    index = build_index(manifest)
    results = retrieve_top_k(index, "pattern stop easy", 3)
    ordered = order_by_similarity(results, manifest)
    # Ranks (1, 2, 3) come back as (3, 2, 1): most similar last.
    assert [ex.id for ex in ordered] == [r.id for r in reversed(results)]


def banded_manifest() -> CorpusManifest:
    def ex(i: int, nl: str, mean: float, band: Band) -> ScoredExample:
        return ScoredExample(
            pair=ExamplePair(id=f"ex-{i:03d}", nl=nl, code="NOP"),
            scores=(mean,) * 5,
            mean_score=mean,
            band=band,
        )

    return CorpusManifest(
        examples=(
            ex(0, "easy stop pattern", 10.0, Band.EASY),
            ex(1, "easy wait pattern", 15.0, Band.EASY),
            ex(2, "medium stop pattern", 40.0, Band.MEDIUM),
            ex(3, "medium wait pattern", 45.0, Band.MEDIUM),
            ex(4, "hard stop pattern", 80.0, Band.HARD),
            ex(5, "hard wait pattern", 85.0, Band.HARD),
        )
    )


def test_band_indexes_partition_the_corpus() -> None:
    manifest = banded_manifest()
    indexes = build_band_indexes(manifest)
    assert set(indexes) == {Band.EASY, Band.MEDIUM, Band.HARD}
    assert indexes[Band.EASY].doc_ids == ("ex-000", "ex-001")
    assert indexes[Band.HARD].doc_count == 2


def test_band_indexes_require_bands() -> None:
    with pytest.raises(RetrievalError, match="unbanded"):
        build_band_indexes(scored_manifest())


def test_select_dnr_emh_takes_one_per_band_in_order() -> None:
    manifest = banded_manifest()
    indexes = build_band_indexes(manifest)
    picks = select_dnr(indexes, manifest, "stop pattern", DnrConfig.EMH)
    assert [ex.band for ex in picks] == [Band.EASY, Band.MEDIUM, Band.HARD]
    assert [ex.id for ex in picks] == ["ex-000", "ex-002", "ex-004"]


def test_select_dnr_single_band_orders_by_difficulty() -> None:
    manifest = banded_manifest()
    indexes = build_band_indexes(manifest)
    picks = select_dnr(indexes, manifest, "wait pattern", DnrConfig.HHH)
    assert all(ex.band is Band.HARD for ex in picks)
    assert [ex.mean_score for ex in picks] == [80.0, 85.0]


def test_select_dnr_short_band_warns(caplog) -> None:
    manifest = banded_manifest()
    indexes = build_band_indexes(manifest)
    with caplog.at_level(logging.WARNING, logger="alpgen.retrieval"):
        picks = select_dnr(indexes, manifest, "stop", DnrConfig.EEE)
    assert len(picks) == 2  # only two easy examples exist
    assert any("easy" in rec.message for rec in caplog.records)


def test_select_dnr_missing_band_is_error() -> None:
    manifest = banded_manifest()
    indexes = build_band_indexes(manifest)
    del indexes[Band.HARD]
    with pytest.raises(BandSelectionError, match="hard"):
        select_dnr(indexes, manifest, "stop", DnrConfig.EMH)
    with pytest.raises(BandSelectionError, match="hard"):
        select_dnr(indexes, manifest, "stop", DnrConfig.HHH)


def test_bm25_parameters_are_carried() -> None:
    index = build_index(manifest_of(["a b", "b c"]), k1=1.5, b=0.6)
    assert isinstance(index, Bm25Index)
    assert index.k1 == 1.5
    assert index.b == 0.6
