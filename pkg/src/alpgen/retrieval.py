"""Okapi BM25 retrieval over example descriptions, plus prompt orderings.

The index is built over the NL side of a corpus.  Besides plain top-k
retrieval there are three ordering policies used by the prompting
strategies:

* ``order_for_pke``: ascending difficulty, ties by similarity rank, so the
  knowledge chain walks easy to hard;
* ``order_by_similarity``: ascending similarity (most similar last), so
  the most relevant example sits closest to the query;
* ``select_dnr``: difficulty-and-retrieval selection from per-band indexes.
"""
from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .corpus import Band, CorpusManifest, ScoredExample
from .errors import AlpgenError

logger = logging.getLogger(__name__)

K1 = 1.2
B = 0.75
DEFAULT_TOP_K = 3

# Punctuation is a separator, except '#' and '<' which carry meaning in
# ALPG pattern literals like TP<#85.
_STRIP_RE = re.compile(r"[^\w\s#<]")


class RetrievalError(AlpgenError):
    pass


class BandSelectionError(RetrievalError):
    pass


def tokenize_text(text: str) -> list[str]:
    """Lowercased whitespace tokens with punctuation stripped."""
    return _STRIP_RE.sub(" ", text.lower()).split()


@dataclass(frozen=True)
class Bm25Index:
    doc_ids: tuple[str, ...]
    doc_tfs: tuple[Mapping[str, int], ...]
    doc_lens: tuple[int, ...]
    df: Mapping[str, int]
    avg_doc_len: float
    k1: float = K1
    b: float = B

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    def index_of(self, doc_id: str) -> int:
        try:
            return self.doc_ids.index(doc_id)
        except ValueError:
            raise RetrievalError(f"unknown document id {doc_id!r}") from None


def build_index(manifest: CorpusManifest, k1: float = K1, b: float = B) -> Bm25Index:
    if len(manifest) == 0:
        raise RetrievalError("cannot index an empty corpus")
    doc_ids = []
    doc_tfs = []
    doc_lens = []
    df: Counter = Counter()
    for ex in manifest:
        tokens = tokenize_text(ex.pair.nl)
        tf = Counter(tokens)
        doc_ids.append(ex.id)
        doc_tfs.append(dict(tf))
        doc_lens.append(len(tokens))
        df.update(tf.keys())
    return Bm25Index(
        doc_ids=tuple(doc_ids),
        doc_tfs=tuple(doc_tfs),
        doc_lens=tuple(doc_lens),
        df=dict(df),
        avg_doc_len=sum(doc_lens) / len(doc_lens),
        k1=k1,
        b=b,
    )


def idf(index: Bm25Index, term: str) -> float:
    n = index.df.get(term, 0)
    return math.log(1.0 + (index.doc_count - n + 0.5) / (n + 0.5))


def score(index: Bm25Index, query: str, doc_id: str) -> float:
    """Okapi BM25 score of one document against the query."""
    i = index.index_of(doc_id)
    tf = index.doc_tfs[i]
    length_norm = 1.0 - index.b + index.b * index.doc_lens[i] / index.avg_doc_len
    total = 0.0
    for term in tokenize_text(query):
        if term not in index.df:
            continue
        freq = tf.get(term, 0)
        if freq == 0:
            continue
        total += (
            idf(index, term)
            * freq
            * (index.k1 + 1.0)
            / (freq + index.k1 * length_norm)
        )
    return total


@dataclass(frozen=True)
class RetrievalResult:
    id: str
    score: float
    rank: int


def retrieve_top_k(
    index: Bm25Index, query: str, k: int = DEFAULT_TOP_K
) -> list[RetrievalResult]:
    """Top-k documents by score, ties broken by corpus order."""
    if k < 1:
        raise RetrievalError("k must be >= 1")
    scores = [score(index, query, doc_id) for doc_id in index.doc_ids]
    order = sorted(range(index.doc_count), key=lambda i: (-scores[i], i))
    return [
        RetrievalResult(id=index.doc_ids[i], score=scores[i], rank=rank)
        for rank, i in enumerate(order[:k], start=1)
    ]


def _resolve_scored(
    results: Sequence[RetrievalResult], manifest: CorpusManifest
) -> list[tuple[RetrievalResult, ScoredExample]]:
    lookup = manifest.by_id()
    resolved = []
    for result in results:
        ex = lookup.get(result.id)
        if ex is None:
            raise RetrievalError(f"retrieved id {result.id!r} not in manifest")
        if not ex.is_scored:
            raise RetrievalError(f"example {result.id!r} has no difficulty score")
        resolved.append((result, ex))
    return resolved


def order_for_pke(
    results: Sequence[RetrievalResult], manifest: CorpusManifest
) -> list[ScoredExample]:
    """Retrieved examples reordered easiest-first (ties by similarity rank)."""
    resolved = _resolve_scored(results, manifest)
    resolved.sort(key=lambda pair: (pair[1].mean_score, pair[0].rank))
    return [ex for _, ex in resolved]


def order_by_similarity(
    results: Sequence[RetrievalResult], manifest: CorpusManifest
) -> list[ScoredExample]:
    """Retrieved examples in ascending similarity (most similar last)."""
    resolved = _resolve_scored(results, manifest)
    resolved.sort(key=lambda pair: -pair[0].rank)
    return [ex for _, ex in resolved]


class DnrConfig(str, Enum):
    EMH = "emh"
    EEE = "eee"
    MMM = "mmm"
    HHH = "hhh"


_BAND_FOR_LETTER = {"e": Band.EASY, "m": Band.MEDIUM, "h": Band.HARD}


def build_band_indexes(
    manifest: CorpusManifest, k1: float = K1, b: float = B
) -> dict[Band, Bm25Index]:
    """One BM25 index per difficulty band (bands with members only)."""
    unbanded = [ex.id for ex in manifest if ex.band is None]
    if unbanded:
        raise RetrievalError(f"cannot band-index unbanded example(s): {unbanded}")
    groups: dict[Band, list[ScoredExample]] = {}
    for ex in manifest:
        groups.setdefault(ex.band, []).append(ex)
    return {
        band: build_index(CorpusManifest(examples=tuple(members)), k1=k1, b=b)
        for band, members in groups.items()
    }


def select_dnr(
    band_indexes: Mapping[Band, Bm25Index],
    manifest: CorpusManifest,
    query: str,
    config: DnrConfig,
) -> list[ScoredExample]:
    """Difficulty-and-retrieval example selection.

    ``EMH`` takes the best match from each band, ordered Easy, Medium,
    Hard.  ``EEE``/``MMM``/``HHH`` take the top three matches from the one
    named band, ordered by difficulty ascending.  A band with too few
    members yields what it has (with a warning); an absent band is an
    error.
    """
    letters = config.value
    if letters == "emh":
        picks: list[ScoredExample] = []
        for letter in letters:
            band = _BAND_FOR_LETTER[letter]
            index = band_indexes.get(band)
            if index is None:
                raise BandSelectionError(f"band {band.value!r} has no members")
            top = retrieve_top_k(index, query, 1)
            picks.extend(ex for _, ex in _resolve_scored(top, manifest))
        return picks
    band = _BAND_FOR_LETTER[letters[0]]
    index = band_indexes.get(band)
    if index is None:
        raise BandSelectionError(f"band {band.value!r} has no members")
    want = len(letters)
    top = retrieve_top_k(index, query, min(want, index.doc_count))
    if len(top) < want:
        logger.warning(
            "band %s has only %d example(s); wanted %d", band.value, len(top), want
        )
    return order_for_pke(top, manifest)
