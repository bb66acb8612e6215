"""alpgen: progressive knowledge-enhanced prompting for ALPG code generation."""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    Band,
    CorpusManifest,
    ExamplePair,
    ScoredExample,
    leave_one_out,
    load_corpus,
    save_corpus,
)
from .errors import AlpgenError  # noqa: F401
from .gateway import ChatRequest, ChatResponse, Gateway  # noqa: F401
from .metrics import bleu, exact_match, levenshtein_similarity, score_pair  # noqa: F401
from .pipeline import Strategy, StrategyKind, run_strategy  # noqa: F401
