"""Difficulty annotation: ensemble scoring and tertile banding.

Each example is scored by the model five times at a fixed ascending
temperature ladder; the arithmetic mean of the five samples is its
difficulty.  Categorization then splits the corpus into Easy / Medium /
Hard tertiles by rank.
"""
from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone

from .corpus import Band, CorpusManifest, ExamplePair, ScoredExample
from .errors import AlpgenError
from .gateway import Gateway

logger = logging.getLogger(__name__)

TEMPERATURE_LADDER = (0.0, 0.2, 0.4, 0.6, 0.8)
SCORING_MAX_TOKENS = 64

PROMPT_TEMPLATE = """\
Judge the difficulty (0-100) to generate the following ALPG code from the given natural language description:

Natural Language: {nl_description}
ALPG Code: {alpg_code}

Rate the difficulty from 0 (very easy) to 100 (very hard) based on:
- Syntax complexity
- Hardware interaction requirements
- Timing constraints
- Overall implementation challenge

Difficulty Score:"""

_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?")


class DifficultyError(AlpgenError):
    pass


class UnparseableScoreError(DifficultyError):
    pass


class AnnotationError(DifficultyError):
    pass


def build_difficulty_prompt(pair: ExamplePair) -> str:
    """Fill the scoring prompt; substitution is literal, not format()."""
    return PROMPT_TEMPLATE.replace("{nl_description}", pair.nl).replace(
        "{alpg_code}", pair.code
    )


def parse_score(completion: str) -> float:
    """First number in the completion, clamped to [0, 100]."""
    match = _NUMBER_RE.search(completion)
    if match is None:
        raise UnparseableScoreError(f"no numeric score in completion: {completion!r}")
    return min(100.0, max(0.0, float(match.group(0))))


def annotate_example(pair: ExamplePair, gateway: Gateway) -> ScoredExample:
    """Score one example with the five-temperature ensemble.

    An unparseable completion is re-asked once at the same temperature;
    a second failure aborts with :class:`AnnotationError`.
    """
    prompt = build_difficulty_prompt(pair)
    samples: list[float] = []
    for temperature in TEMPERATURE_LADDER:
        request = gateway.request(
            prompt, temperature=temperature, max_tokens=SCORING_MAX_TOKENS
        )
        response = gateway.complete(request)
        try:
            samples.append(parse_score(response.text))
        except UnparseableScoreError:
            logger.warning(
                "unparseable score for %s at t=%.1f; re-asking", pair.id, temperature
            )
            retry = gateway.complete(request)
            try:
                samples.append(parse_score(retry.text))
            except UnparseableScoreError as exc:
                raise AnnotationError(
                    f"example {pair.id!r}: unparseable difficulty score at "
                    f"temperature {temperature}"
                ) from exc
    mean = sum(samples) / len(samples)
    return ScoredExample(pair=pair, scores=tuple(samples), mean_score=mean)


def annotate_corpus(
    manifest: CorpusManifest, gateway: Gateway, rescore: bool = False
) -> CorpusManifest:
    """Annotate every unscored example (all of them with ``rescore``).

    Examples are scored concurrently up to the gateway's parallelism bound;
    corpus order is preserved.  Any per-example failure aborts the run,
    naming each failed example.
    """

    def work(ex: ScoredExample) -> ScoredExample:
        if ex.is_scored and not rescore:
            return ex
        return annotate_example(ex.pair, gateway)

    results: list[ScoredExample | None] = [None] * len(manifest)
    failures: list[str] = []
    with ThreadPoolExecutor(max_workers=gateway.parallelism) as pool:
        futures = {pool.submit(work, ex): i for i, ex in enumerate(manifest)}
        for future, i in futures.items():
            try:
                results[i] = future.result()
            except AlpgenError as exc:
                failures.append(str(exc))
    if failures:
        raise AnnotationError(
            "annotation failed for {} example(s): {}".format(
                len(failures), "; ".join(failures)
            )
        )
    return replace(
        manifest,
        examples=tuple(results),  # type: ignore[arg-type]
        annotation_model=gateway.model,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def band_sizes(n: int) -> tuple[int, int, int]:
    """Tertile sizes for ``n`` examples: ceilings go to Easy, then Medium."""
    easy = -(-n // 3)
    medium = -(-(n - easy) // 2)
    return easy, medium, n - easy - medium


def categorize(manifest: CorpusManifest) -> CorpusManifest:
    """Assign Easy/Medium/Hard bands by mean-score rank.

    Ranking is ascending with ties broken by corpus order; band sizes never
    differ by more than one.  The returned manifest keeps the original
    example order.
    """
    unscored = [ex.id for ex in manifest if not ex.is_scored]
    if unscored:
        raise DifficultyError(f"cannot band unscored example(s): {unscored}")
    n = len(manifest)
    if n == 0:
        raise DifficultyError("cannot band an empty corpus")
    order = sorted(range(n), key=lambda i: (manifest.examples[i].mean_score, i))
    easy, medium, _ = band_sizes(n)
    bands: dict[int, Band] = {}
    for rank, idx in enumerate(order):
        if rank < easy:
            bands[idx] = Band.EASY
        elif rank < easy + medium:
            bands[idx] = Band.MEDIUM
        else:
            bands[idx] = Band.HARD
    rebanded = tuple(
        replace(ex, band=bands[i]) for i, ex in enumerate(manifest.examples)
    )
    return replace(manifest, examples=rebanded)
