"""Prompt assembly and generation strategies.

The progressive pipeline (PKE) works in three steps: retrieve k similar
examples, walk them easiest-to-hardest accumulating background knowledge
(one completion per example, each prompt carrying the knowledge produced
so far), then generate with a final prompt laid out as knowledge section,
few-shot examples, query.  The baselines reuse the same final-prompt
builder with sections omitted.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .corpus import CorpusManifest, ExamplePair, ScoredExample
from .errors import AlpgenError
from .gateway import Gateway, GatewayError
from .minialpg import OPCODE_NAMES
from .retrieval import (
    DEFAULT_TOP_K,
    DnrConfig,
    RetrievalError,
    build_band_indexes,
    build_index,
    order_by_similarity,
    order_for_pke,
    retrieve_top_k,
    select_dnr,
)

DEFAULT_LANG = "ALPG"
KNOWLEDGE_MAX_TOKENS = 1024
GENERATION_MAX_TOKENS = 1024

PREVIOUS_KNOWLEDGE_HEADER = "### Previously accumulated knowledge:"
KNOWLEDGE_INSTRUCTION = (
    "Please write necessary domain knowledge to help generate the "
    "corresponding ALPG code based on the code description. The goal is to "
    "help a language model better understand and generate the corresponding "
    "ALPG code."
)

KNOWLEDGE_SECTION_HEADER = (
    "Enhanced Background Knowledge (generated from progressive difficulty examples):"
)
FEWSHOT_SECTION_HEADER = "Relevant Few-shot Examples:"
QUERY_DESCRIPTION_HEADER = "### Code description"
QUERY_CODE_HEADER = "### Corresponding Code"


class PipelineError(AlpgenError):
    pass


class ChainError(PipelineError):
    pass


class StrategyError(PipelineError):
    pass


def build_knowledge_prompt(
    example: ScoredExample | ExamplePair, previous_knowledge: str | None = None
) -> str:
    """Prompt asking the model to write domain knowledge for one example.

    ``previous_knowledge`` is the accumulated text from earlier, easier
    examples; it appears between the code block and the instruction, or not
    at all on the first step.
    """
    pair = example.pair if isinstance(example, ScoredExample) else example
    sections = [
        f"### Code description:\n{pair.nl}",
        f"### Corresponding Code:\n{pair.code}",
    ]
    if previous_knowledge:
        sections.append(f"{PREVIOUS_KNOWLEDGE_HEADER}\n{previous_knowledge}")
    sections.append(KNOWLEDGE_INSTRUCTION)
    return "\n\n".join(sections)


@dataclass(frozen=True)
class KnowledgeChain:
    """Knowledge texts produced per chain step, in easy-to-hard order."""

    steps: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise ChainError("knowledge chain must have at least one step")
        for i, text in enumerate(self.steps):
            if not text.strip():
                raise ChainError(f"knowledge step {i + 1} is empty")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def final(self) -> str:
        """The last step's knowledge: what the final prompt carries."""
        return self.steps[-1]

    @property
    def accumulated(self) -> str:
        return "\n\n".join(self.steps)


def build_knowledge_chain(
    ordered: list[ScoredExample], gateway: Gateway
) -> KnowledgeChain:
    """Run the sequential knowledge pass over difficulty-ordered examples.

    Step i's prompt carries the concatenated knowledge from steps 1..i-1,
    so later (harder) examples build on what the easier ones taught.
    """
    if not ordered:
        raise ChainError("no examples to build a knowledge chain from")
    steps: list[str] = []
    for i, example in enumerate(ordered):
        previous = "\n\n".join(steps) if steps else None
        prompt = build_knowledge_prompt(example, previous)
        request = gateway.request(
            prompt, temperature=0.0, max_tokens=KNOWLEDGE_MAX_TOKENS
        )
        try:
            response = gateway.complete(request)
        except GatewayError as exc:
            raise ChainError(
                f"knowledge step {i + 1}/{len(ordered)} "
                f"(example {example.id!r}) failed: {exc}"
            ) from exc
        text = response.text.strip()
        if not text:
            raise ChainError(
                f"knowledge step {i + 1}/{len(ordered)} "
                f"(example {example.id!r}) produced empty knowledge"
            )
        steps.append(text)
    return KnowledgeChain(steps=tuple(steps))


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.0
    max_tokens: int = GENERATION_MAX_TOKENS


@dataclass(frozen=True)
class PromptBundle:
    user: str
    system: str | None = None
    params: GenerationParams = field(default_factory=GenerationParams)


def render_example_block(example: ScoredExample | ExamplePair) -> str:
    pair = example.pair if isinstance(example, ScoredExample) else example
    return (
        f"{QUERY_DESCRIPTION_HEADER}\n{pair.nl}\n{QUERY_CODE_HEADER}\n{pair.code}"
    )


def build_final_prompt(
    query_nl: str,
    fewshot: list[ScoredExample],
    chain: KnowledgeChain | None,
    lang: str = DEFAULT_LANG,
) -> PromptBundle:
    """Final generation prompt: knowledge, then examples, then the query.

    Either section may be omitted (few-shot drops the knowledge block,
    zero-shot drops both); the query always comes last, ending with an open
    code header for the model to complete.
    """
    if not query_nl.strip():
        raise PipelineError("query description must be non-empty")
    parts = [f"You are an expert in {lang} programming."]
    if chain is not None:
        parts.append(f"{KNOWLEDGE_SECTION_HEADER}\n{chain.final}")
    if fewshot:
        blocks = "\n\n".join(render_example_block(ex) for ex in fewshot)
        parts.append(f"{FEWSHOT_SECTION_HEADER}\n{blocks}")
    if chain is not None and fewshot:
        bridge = "Using the above knowledge and examples as guidance, generate"
    elif fewshot:
        bridge = "Using the above examples as guidance, generate"
    elif chain is not None:
        bridge = "Using the above knowledge as guidance, generate"
    else:
        bridge = "Generate"
    parts.append(f"{bridge} accurate {lang} code for:")
    parts.append(f"{QUERY_DESCRIPTION_HEADER}\n{query_nl}\n{QUERY_CODE_HEADER}")
    return PromptBundle(user="\n\n".join(parts))


def extract_code(completion: str) -> str:
    """Post-process a completion into bare code.

    Drops markdown fence lines everywhere and any leading prose before the
    first line starting with a known opcode.  Returns empty text when no
    code line is found.
    """
    lines = [
        line
        for line in completion.splitlines()
        if not line.strip().startswith("```")
    ]
    start = None
    for i, line in enumerate(lines):
        tokens = line.split()
        if tokens and tokens[0] in OPCODE_NAMES:
            start = i
            break
    if start is None:
        return ""
    return "\n".join(lines[start:]).rstrip()


class StrategyKind(str, Enum):
    ZERO_SHOT = "zero-shot"
    FEW_SHOT = "few-shot"
    PKE = "pke"
    SIM_PKE = "sim"
    DNR = "dnr"


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    k: int = DEFAULT_TOP_K
    dnr: DnrConfig | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise StrategyError("k must be >= 1")
        if self.kind is StrategyKind.DNR and self.dnr is None:
            raise StrategyError("DnR strategy needs a band configuration")
        if self.kind is not StrategyKind.DNR and self.dnr is not None:
            raise StrategyError(f"{self.kind.value} takes no band configuration")

    @property
    def label(self) -> str:
        if self.kind is StrategyKind.DNR:
            return f"dnr-{self.dnr.value}"
        return self.kind.value

    @staticmethod
    def parse(text: str, k: int = DEFAULT_TOP_K) -> "Strategy":
        name = text.strip().lower()
        if name.startswith("dnr-"):
            try:
                return Strategy(kind=StrategyKind.DNR, k=k, dnr=DnrConfig(name[4:]))
            except ValueError:
                raise StrategyError(f"unknown DnR configuration {name!r}") from None
        for kind in StrategyKind:
            if kind is not StrategyKind.DNR and name == kind.value:
                return Strategy(kind=kind, k=k)
        raise StrategyError(f"unknown strategy {text!r}")


@dataclass(frozen=True)
class StrategyOutcome:
    code: str
    raw: str
    calls: int
    example_ids: tuple[str, ...]
    prompt: PromptBundle
    chain: KnowledgeChain | None


def _select_examples(
    strategy: Strategy, query_nl: str, manifest: CorpusManifest
) -> list[ScoredExample]:
    if strategy.kind is StrategyKind.ZERO_SHOT:
        return []
    if len(manifest) == 0:
        raise StrategyError("retrieval pool is empty")
    if strategy.kind is StrategyKind.DNR:
        band_indexes = build_band_indexes(manifest)
        return select_dnr(band_indexes, manifest, query_nl, strategy.dnr)
    index = build_index(manifest)
    results = retrieve_top_k(index, query_nl, strategy.k)
    if strategy.kind is StrategyKind.PKE:
        return order_for_pke(results, manifest)
    if strategy.kind is StrategyKind.SIM_PKE:
        return order_by_similarity(results, manifest)
    # Plain few-shot: ascending similarity so the best match is adjacent
    # to the query.  No difficulty scores required.
    lookup = manifest.by_id()
    return [lookup[r.id] for r in reversed(results)]


def execute_strategy(
    strategy: Strategy,
    query: ExamplePair,
    manifest: CorpusManifest,
    gateway: Gateway,
    lang: str = DEFAULT_LANG,
) -> StrategyOutcome:
    """Run one strategy for one query and return the full outcome.

    The query must not be present in ``manifest`` (leave-one-out is the
    caller's job).  Chain-based strategies issue one completion per
    selected example plus the final generation call.
    """
    if any(ex.id == query.id for ex in manifest):
        raise StrategyError(f"query {query.id!r} must be excluded from the pool")
    try:
        ordered = _select_examples(strategy, query.nl, manifest)
        chain = None
        if strategy.kind in (StrategyKind.PKE, StrategyKind.SIM_PKE, StrategyKind.DNR):
            chain = build_knowledge_chain(ordered, gateway)
        prompt = build_final_prompt(query.nl, ordered, chain, lang=lang)
        request = gateway.request(
            prompt.user,
            system=prompt.system,
            temperature=prompt.params.temperature,
            max_tokens=prompt.params.max_tokens,
        )
        response = gateway.complete(request)
    except (GatewayError, RetrievalError, PipelineError) as exc:
        raise StrategyError(
            f"strategy {strategy.label} failed for query {query.id!r}: {exc}"
        ) from exc
    calls = (len(chain) if chain is not None else 0) + 1
    return StrategyOutcome(
        code=extract_code(response.text),
        raw=response.text,
        calls=calls,
        example_ids=tuple(ex.id for ex in ordered),
        prompt=prompt,
        chain=chain,
    )


def run_strategy(
    strategy: Strategy,
    query: ExamplePair,
    manifest: CorpusManifest,
    gateway: Gateway,
    lang: str = DEFAULT_LANG,
) -> str:
    """Generated (post-processed) code for one query under one strategy."""
    return execute_strategy(strategy, query, manifest, gateway, lang=lang).code
