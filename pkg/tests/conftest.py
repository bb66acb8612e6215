from __future__ import annotations

import pytest

from alpgen.corpus import CorpusManifest, ExamplePair, ScoredExample
from alpgen.gateway import Gateway
from alpgen.mocks import echo_mock_backend

# The motivating NAND-flash example: program-in command, five address
# cycles, data-in phase.  The raw code keeps the aligned spacing it is
# usually written with, which normalization must collapse.
MOTIVATING_NL = (
    "Write an ALPG pattern program code that performs the 85h Command"
    " - Address 5cycle - Data in."
)
MOTIVATING_CODE = (
    "JSR G_LF001_CMDI               CE0  TP<#85       TS2\n"
    "JSR G_LF001_ADD5_D1_D2         CE0               TS1\n"
    "STPS  TS1"
)


@pytest.fixture
def motivating_pair() -> ExamplePair:
    return ExamplePair(id="seed-001", nl=MOTIVATING_NL, code=MOTIVATING_CODE)


def make_pair(idx: int, nl: str, code: str) -> ScoredExample:
    return ScoredExample(pair=ExamplePair(id=f"ex-{idx:03d}", nl=nl, code=code))


def make_scored(
    idx: int, nl: str, code: str, scores: tuple[float, ...]
) -> ScoredExample:
    return ScoredExample(
        pair=ExamplePair(id=f"ex-{idx:03d}", nl=nl, code=code),
        scores=scores,
        mean_score=sum(scores) / len(scores),
    )


@pytest.fixture
def tiny_manifest() -> CorpusManifest:
    return CorpusManifest(
        examples=(
            make_pair(1, "stop the pattern with timing set one", "STPS TS1"),
            make_pair(2, "do nothing for a cycle", "NOP"),
            make_pair(3, "jump to the command subroutine", "JSR G_CMD CE0 TS2"),
        )
    )


@pytest.fixture
def echo_gateway() -> Gateway:
    return Gateway(echo_mock_backend(), model="mock-model")
