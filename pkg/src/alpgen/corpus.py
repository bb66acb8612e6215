"""Example corpora: NL/code pairs with optional difficulty annotations.

A corpus is stored as JSONL, one example per line with fields ``id``,
``nl`` and ``code``, plus ``scores``, ``mean_score`` and ``band`` once the
example has been difficulty-annotated.  An optional first line of the form
``{"meta": {...}}`` carries manifest-level metadata (annotation model,
creation timestamp) so that a save/load round trip preserves the manifest
field for field.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .errors import AlpgenError

ENSEMBLE_SIZE = 5

_MEAN_TOL = 1e-9


class CorpusError(AlpgenError):
    pass


class Band(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


@dataclass(frozen=True)
class ExamplePair:
    """One NL utterance and the ALPG program it describes."""

    id: str
    nl: str
    code: str

    def __post_init__(self) -> None:
        if not self.id.strip():
            raise CorpusError("example id must be non-empty")
        if not self.nl.strip():
            raise CorpusError(f"example {self.id!r}: nl text must be non-empty")
        if not self.code.strip():
            raise CorpusError(f"example {self.id!r}: code must be non-empty")


@dataclass(frozen=True)
class ScoredExample:
    """An example pair plus its difficulty annotation, if any.

    ``scores`` holds the raw ensemble samples (empty until annotated,
    exactly ``ENSEMBLE_SIZE`` afterwards), ``mean_score`` their arithmetic
    mean, and ``band`` the tertile label assigned by categorization.
    """

    pair: ExamplePair
    scores: tuple[float, ...] = ()
    mean_score: float | None = None
    band: Band | None = None

    def __post_init__(self) -> None:
        eid = self.pair.id
        if self.scores:
            if len(self.scores) != ENSEMBLE_SIZE:
                raise CorpusError(
                    f"example {eid!r}: expected {ENSEMBLE_SIZE} difficulty "
                    f"samples, got {len(self.scores)}"
                )
            for s in self.scores:
                if not (0.0 <= s <= 100.0) or math.isnan(s):
                    raise CorpusError(f"example {eid!r}: sample {s!r} outside [0, 100]")
            if self.mean_score is None:
                raise CorpusError(f"example {eid!r}: scored but mean_score missing")
            expected = sum(self.scores) / len(self.scores)
            if abs(self.mean_score - expected) > _MEAN_TOL:
                raise CorpusError(
                    f"example {eid!r}: mean_score {self.mean_score} does not match "
                    f"samples (expected {expected})"
                )
        else:
            if self.mean_score is not None:
                raise CorpusError(f"example {eid!r}: mean_score present without samples")
            if self.band is not None:
                raise CorpusError(f"example {eid!r}: band present without samples")

    @property
    def id(self) -> str:
        return self.pair.id

    @property
    def is_scored(self) -> bool:
        return self.mean_score is not None


@dataclass(frozen=True)
class CorpusManifest:
    """Ordered collection of examples.  Order is canonical and stable."""

    examples: tuple[ScoredExample, ...]
    annotation_model: str = ""
    created_at: str = ""

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for ex in self.examples:
            if ex.id in seen:
                raise CorpusError(f"duplicate example id {ex.id!r}")
            seen.add(ex.id)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def get(self, example_id: str) -> ScoredExample:
        for ex in self.examples:
            if ex.id == example_id:
                return ex
        raise CorpusError(f"unknown example id {example_id!r}")

    def by_id(self) -> dict[str, ScoredExample]:
        return {ex.id: ex for ex in self.examples}

    @property
    def all_scored(self) -> bool:
        return all(ex.is_scored for ex in self.examples)

    @property
    def all_banded(self) -> bool:
        return all(ex.band is not None for ex in self.examples)


def _example_to_record(ex: ScoredExample) -> dict:
    record: dict = {"id": ex.pair.id, "nl": ex.pair.nl, "code": ex.pair.code}
    if ex.scores:
        record["scores"] = list(ex.scores)
        record["mean_score"] = ex.mean_score
    if ex.band is not None:
        record["band"] = ex.band.value
    return record


def _record_to_example(record: dict, lineno: int) -> ScoredExample:
    try:
        pair = ExamplePair(
            id=str(record["id"]), nl=str(record["nl"]), code=str(record["code"])
        )
    except KeyError as exc:
        raise CorpusError(f"line {lineno}: missing field {exc}") from exc
    scores = tuple(float(s) for s in record.get("scores", ()))
    mean = record.get("mean_score")
    band_raw = record.get("band")
    try:
        band = Band(band_raw) if band_raw is not None else None
    except ValueError:
        raise CorpusError(f"line {lineno}: unknown band {band_raw!r}") from None
    try:
        return ScoredExample(
            pair=pair,
            scores=scores,
            mean_score=float(mean) if mean is not None else None,
            band=band,
        )
    except CorpusError as exc:
        raise CorpusError(f"line {lineno}: {exc}") from None


def load_corpus(path: str | Path) -> CorpusManifest:
    """Read a JSONL corpus.  Raises CorpusError naming the offending line."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    examples: list[ScoredExample] = []
    annotation_model = ""
    created_at = ""
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON: {exc}") from None
            if not isinstance(record, dict):
                raise CorpusError(f"line {lineno}: expected a JSON object")
            if lineno == 1 and "meta" in record and "id" not in record:
                meta = record["meta"]
                annotation_model = str(meta.get("annotation_model", ""))
                created_at = str(meta.get("created_at", ""))
                continue
            examples.append(_record_to_example(record, lineno))
    try:
        return CorpusManifest(
            examples=tuple(examples),
            annotation_model=annotation_model,
            created_at=created_at,
        )
    except CorpusError:
        raise


def save_corpus(manifest: CorpusManifest, path: str | Path) -> None:
    """Write a manifest as JSONL (meta line first when metadata is set)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines: list[str] = []
    if manifest.annotation_model or manifest.created_at:
        meta = {
            "annotation_model": manifest.annotation_model,
            "created_at": manifest.created_at,
        }
        lines.append(json.dumps({"meta": meta}, ensure_ascii=False))
    for ex in manifest.examples:
        lines.append(json.dumps(_example_to_record(ex), ensure_ascii=False))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def leave_one_out(manifest: CorpusManifest, held_out_id: str) -> CorpusManifest:
    """Return the manifest minus one example, preserving order and metadata."""
    if not any(ex.id == held_out_id for ex in manifest.examples):
        raise CorpusError(f"unknown example id {held_out_id!r}")
    kept = tuple(ex for ex in manifest.examples if ex.id != held_out_id)
    return replace(manifest, examples=kept)
