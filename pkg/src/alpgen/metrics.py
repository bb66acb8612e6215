"""Code-similarity metrics: exact match, BLEU-4, Levenshtein similarity.

All three consume the same normalized view of a program: lines stripped,
internal runs of whitespace collapsed to one space, blank lines and ``;``
comment lines dropped, case and line order preserved.  That guarantees
exact match implies a 1.0 on both soft metrics.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import AlpgenError

BLEU_MAX_ORDER = 4

# Floor applied to a zero unigram precision so fully disjoint texts score a
# tiny positive BLEU instead of collapsing the geometric mean to exactly 0.
_UNIGRAM_FLOOR = 1e-9

BLEU_CONFIG = (
    "sentence BLEU-4, uniform weights, add-one smoothing for n>=2, "
    "epsilon floor on zero unigram precision, standard brevity penalty"
)


class MetricsError(AlpgenError):
    pass


def normalize_code(code: str) -> str:
    """Canonical whitespace/comment-insensitive form of a program."""
    lines = []
    for raw in code.splitlines():
        line = " ".join(raw.split())
        if not line or line.startswith(";"):
            continue
        lines.append(line)
    return "\n".join(lines)


def code_tokens(code: str) -> list[str]:
    """Whitespace-separated tokens of the normalized program text."""
    return normalize_code(code).split()


def exact_match(candidate: str, reference: str) -> int:
    return int(normalize_code(candidate) == normalize_code(reference))


def levenshtein_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Word-level edit distance (insert/delete/substitute, unit cost)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, tok_a in enumerate(a, start=1):
        current = [i]
        for j, tok_b in enumerate(b, start=1):
            cost = 0 if tok_a == tok_b else 1
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost)
            )
        previous = current
    return previous[len(b)]


def levenshtein_similarity(candidate: str, reference: str) -> float:
    cand = code_tokens(candidate)
    ref = code_tokens(reference)
    if not cand and not ref:
        return 1.0
    dist = levenshtein_distance(cand, ref)
    return 1.0 - dist / max(len(cand), len(ref))


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(
        tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1)
    )


def bleu(candidate: str, reference: str) -> float:
    """Sentence-level BLEU against a single reference.

    Uniform weights over orders 1..4; candidates shorter than four tokens
    use the highest feasible order.  Orders >= 2 get add-one smoothing.
    """
    cand = code_tokens(candidate)
    ref = code_tokens(reference)
    if not cand and not ref:
        return 1.0
    if not cand:
        return 0.0
    max_order = min(BLEU_MAX_ORDER, len(cand))
    log_sum = 0.0
    for order in range(1, max_order + 1):
        cand_counts = _ngram_counts(cand, order)
        ref_counts = _ngram_counts(ref, order)
        matched = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        total = sum(cand_counts.values())
        if order == 1:
            precision = matched / total if matched > 0 else _UNIGRAM_FLOOR
        else:
            precision = (matched + 1) / (total + 1)
        log_sum += math.log(precision)
    geo_mean = math.exp(log_sum / max_order)
    if len(cand) > len(ref):
        brevity = 1.0
    else:
        brevity = math.exp(1.0 - len(ref) / len(cand))
    return brevity * geo_mean


@dataclass(frozen=True)
class PairScore:
    em: int
    bleu: float
    leven: float


@dataclass(frozen=True)
class AggregateScore:
    em: float
    bleu: float
    leven: float
    n: int


def score_pair(candidate: str, reference: str) -> PairScore:
    return PairScore(
        em=exact_match(candidate, reference),
        bleu=bleu(candidate, reference),
        leven=levenshtein_similarity(candidate, reference),
    )


def aggregate(scores: Iterable[PairScore]) -> AggregateScore:
    items = list(scores)
    if not items:
        raise MetricsError("cannot aggregate zero pair scores")
    n = len(items)
    return AggregateScore(
        em=sum(s.em for s in items) / n,
        bleu=sum(s.bleu for s in items) / n,
        leven=sum(s.leven for s in items) / n,
        n=n,
    )
