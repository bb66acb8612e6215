"""Canned scripted-mock rules for offline runs.

The echo mock recognizes the three prompt families the pipeline emits and
answers each deterministically:

* difficulty prompts -> a score derived from the structure of the embedded
  program (instruction count dominated, opcode diversity as tie-break);
* knowledge prompts -> a short sentence summarizing the embedded program;
* generation prompts -> the last non-empty example code block in the
  prompt, which for a few-shot prompt is the most relevant example.
"""
from __future__ import annotations

import re

from . import minialpg
from .gateway import ChatRequest, ScriptedMockBackend

DIFFICULTY_MARKER = "Judge the difficulty"
KNOWLEDGE_MARKER = "Please write necessary domain knowledge"
GENERATION_MARKER = "### Corresponding Code"

_CODE_HEADER_RE = re.compile(r"^### Corresponding Code:?\s*$")


def extract_code_blocks(text: str) -> list[str]:
    """Code blocks following each ``### Corresponding Code`` header.

    A block runs until the next blank line, the next ``###`` header, or end
    of text.  Markdown fence lines are dropped.
    """
    blocks: list[str] = []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        if _CODE_HEADER_RE.match(lines[i].strip()):
            body: list[str] = []
            i += 1
            while i < len(lines):
                line = lines[i]
                stripped = line.strip()
                if not stripped or stripped.startswith("###"):
                    break
                if not stripped.startswith("```"):
                    body.append(line)
                i += 1
            blocks.append("\n".join(body).strip())
        else:
            i += 1
    return blocks


def last_code_block(text: str) -> str:
    """The last non-empty code block, or empty text when there is none."""
    for block in reversed(extract_code_blocks(text)):
        if block:
            return block
    return ""


def _embedded_program(prompt: str) -> str | None:
    """The program a difficulty or knowledge prompt asks about."""
    match = re.search(r"ALPG Code:\s*\n?(.*?)\n\s*\nRate the difficulty", prompt, re.DOTALL)
    if match is None:
        match = re.search(
            r"### Corresponding Code:?\s*\n(.*?)(?:\n\s*\n|\Z)", prompt, re.DOTALL
        )
    if match is None:
        return None
    body = match.group(1).strip()
    return body or None


def structural_difficulty(prompt: str) -> float:
    """Difficulty of the program embedded in a prompt, clamped to [0, 100]."""
    code = _embedded_program(prompt)
    if code is None:
        return 50.0
    try:
        raw = minialpg.structural_complexity(code)
    except minialpg.ParseError:
        raw = 10 * sum(1 for line in code.splitlines() if line.strip())
    return float(min(100, max(0, raw)))


def _difficulty_responder(request: ChatRequest, match: "re.Match[str]") -> str:
    return f"Difficulty Score: {structural_difficulty(request.user):g}"


def _knowledge_responder(request: ChatRequest, match: "re.Match[str]") -> str:
    code = _embedded_program(request.user)
    if code is None:
        return "General pattern-program conventions apply."
    try:
        program = minialpg.parse(code)
        ops = ", ".join(sorted(op.value for op in program.opcodes))
        return (
            f"This shape uses {len(program)} instruction(s) drawn from "
            f"{ops}; timing sets and pin strobes follow the usual order."
        )
    except minialpg.ParseError:
        return "This shape does not parse cleanly; treat it as free-form."


def _generation_responder(request: ChatRequest, match: "re.Match[str]") -> str:
    return last_code_block(request.user)


def echo_mock_backend(name: str = "echo-mock") -> ScriptedMockBackend:
    """The standard offline backend used by the CLI's mock mode."""
    return ScriptedMockBackend(
        rules=[
            (re.escape(DIFFICULTY_MARKER), _difficulty_responder),
            (re.escape(KNOWLEDGE_MARKER), _knowledge_responder),
            (re.escape(GENERATION_MARKER), _generation_responder),
            (r"(?s).*", ""),
        ],
        name=name,
    )
