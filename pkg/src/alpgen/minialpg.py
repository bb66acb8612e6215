"""A small ALPG dialect: tokenizer, parser, renderer, corpus synthesizer.

ALPG (algorithmic pattern generator) programs drive semiconductor test
equipment.  The dialect here covers the instruction shapes that show up in
real NAND-flash pattern programs:

    MODULE <name>                      optional header, first line only
    JSR <label> [pins...] [TP<#HH] [TSn]   jump to subroutine with pin,
                                           pattern and timing operands
    STPS <TSn>                         stop pattern with timing set
    NOP                                no operation
    RET                                return from subroutine

A line is one instruction; tokens are whitespace-separated.  Pin mnemonics
are the familiar strobe/enable pins (``CE0``, ``WE1``, ...), pattern
literals take the form ``TP<#85`` (two uppercase hex digits) and timing
mnemonics are ``TS1``/``TS2``.  ``render`` emits a canonical single-space
form; ``parse(render(p)) == p`` for every valid program.
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass
from enum import Enum

from .corpus import CorpusManifest, ExamplePair, ScoredExample
from .errors import AlpgenError


class ParseError(AlpgenError):
    pass


class SynthesisError(AlpgenError):
    pass


class Opcode(str, Enum):
    JSR = "JSR"
    STPS = "STPS"
    NOP = "NOP"
    MODULE = "MODULE"
    RET = "RET"


OPCODE_NAMES = frozenset(op.value for op in Opcode)

_PIN_RE = re.compile(r"^(CE|WE|RE|CLE|ALE|WP)\d+$")
_TIMING_RE = re.compile(r"^TS[12]$")
_PATTERN_RE = re.compile(r"^TP<#([0-9A-F]{2})$")
_LABEL_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

COMMENT_PREFIX = ";"


@dataclass(frozen=True)
class AlpgInstruction:
    opcode: Opcode
    label: str | None = None
    pins: tuple[str, ...] = ()
    pattern: str | None = None
    timing: str | None = None

    def __post_init__(self) -> None:
        op = self.opcode
        if op is Opcode.JSR:
            if not self.label:
                raise ParseError("JSR requires a subroutine label")
        elif op is Opcode.STPS:
            if self.timing is None:
                raise ParseError("STPS requires a timing mnemonic")
            if self.label is not None:
                raise ParseError("STPS takes no label")
            if self.pins or self.pattern is not None:
                raise ParseError("STPS takes only a timing operand")
        elif op is Opcode.MODULE:
            if self.pins or self.pattern is not None or self.timing is not None:
                raise ParseError("MODULE takes only a module name")
        else:  # NOP / RET
            if self.label or self.pins or self.pattern or self.timing:
                raise ParseError(f"{op.value} takes no operands")
        if self.label is not None and not _LABEL_RE.match(self.label):
            raise ParseError(f"invalid label {self.label!r}")
        seen: set[str] = set()
        for pin in self.pins:
            if not _PIN_RE.match(pin):
                raise ParseError(f"invalid pin mnemonic {pin!r}")
            if pin in seen:
                raise ParseError(f"duplicate pin {pin!r}")
            seen.add(pin)
        if self.pattern is not None and not _PATTERN_RE.match(self.pattern):
            raise ParseError(f"malformed pattern literal {self.pattern!r}")
        if self.timing is not None and not _TIMING_RE.match(self.timing):
            raise ParseError(f"invalid timing mnemonic {self.timing!r}")

    @property
    def pattern_byte(self) -> int | None:
        """The pattern literal's hex byte, e.g. 0x85 for ``TP<#85``."""
        if self.pattern is None:
            return None
        match = _PATTERN_RE.match(self.pattern)
        assert match is not None  # guaranteed by __post_init__
        return int(match.group(1), 16)


@dataclass(frozen=True)
class AlpgProgram:
    instructions: tuple[AlpgInstruction, ...]

    def __post_init__(self) -> None:
        if not self.instructions:
            raise ParseError("program must contain at least one instruction")
        for i, instr in enumerate(self.instructions):
            if instr.opcode is Opcode.MODULE and i != 0:
                raise ParseError("MODULE is only valid as the first instruction")

    def __len__(self) -> int:
        return len(self.instructions)

    @property
    def opcodes(self) -> set[Opcode]:
        return {instr.opcode for instr in self.instructions}


def tokenize(code: str) -> list[str]:
    """Split program text into whitespace-separated tokens."""
    return code.split()


def _parse_line(line: str, lineno: int) -> AlpgInstruction:
    tokens = line.split()
    mnemonic = tokens[0]
    if mnemonic not in OPCODE_NAMES:
        raise ParseError(f"line {lineno}: unknown opcode {mnemonic!r}")
    opcode = Opcode(mnemonic)
    operands = tokens[1:]

    def fail(message: str) -> ParseError:
        return ParseError(f"line {lineno}: {message}")

    if opcode in (Opcode.NOP, Opcode.RET):
        if operands:
            raise fail(f"{opcode.value} takes no operands")
        return AlpgInstruction(opcode=opcode)

    if opcode is Opcode.STPS:
        if len(operands) != 1:
            raise fail("STPS requires exactly one timing operand")
        if not _TIMING_RE.match(operands[0]):
            raise fail(f"invalid timing mnemonic {operands[0]!r}")
        return AlpgInstruction(opcode=opcode, timing=operands[0])

    if opcode is Opcode.MODULE:
        if len(operands) > 1:
            raise fail("MODULE takes at most one name")
        label = operands[0] if operands else None
        if label is not None and not _LABEL_RE.match(label):
            raise fail(f"invalid module name {label!r}")
        return AlpgInstruction(opcode=opcode, label=label)

    # JSR: label first, then pins / pattern / timing in any order.
    if not operands:
        raise fail("JSR requires a subroutine label")
    label = operands[0]
    if _PIN_RE.match(label) or _TIMING_RE.match(label) or label.upper().startswith("TP<#"):
        raise fail(f"JSR requires a label before operands, got {label!r}")
    if not _LABEL_RE.match(label):
        raise fail(f"invalid label {label!r}")
    pins: list[str] = []
    pattern: str | None = None
    timing: str | None = None
    for tok in operands[1:]:
        if _PIN_RE.match(tok):
            if tok in pins:
                raise fail(f"duplicate pin {tok!r}")
            pins.append(tok)
        elif tok.upper().startswith("TP<#"):
            if not _PATTERN_RE.match(tok):
                raise fail(f"malformed pattern literal {tok!r}")
            if pattern is not None:
                raise fail("duplicate pattern literal")
            pattern = tok
        elif _TIMING_RE.match(tok):
            if timing is not None:
                raise fail("duplicate timing mnemonic")
            timing = tok
        else:
            raise fail(f"unexpected operand {tok!r}")
    return AlpgInstruction(
        opcode=opcode, label=label, pins=tuple(pins), pattern=pattern, timing=timing
    )


def parse(code: str) -> AlpgProgram:
    """Parse program text.  Blank lines and ``;`` comment lines are skipped."""
    instructions: list[AlpgInstruction] = []
    for lineno, raw in enumerate(code.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(COMMENT_PREFIX):
            continue
        instr = _parse_line(line, lineno)
        if instr.opcode is Opcode.MODULE and instructions:
            raise ParseError(f"line {lineno}: MODULE is only valid as the first instruction")
        instructions.append(instr)
    if not instructions:
        raise ParseError("empty program")
    return AlpgProgram(instructions=tuple(instructions))


def render_instruction(instr: AlpgInstruction) -> str:
    parts = [instr.opcode.value]
    if instr.label is not None:
        parts.append(instr.label)
    parts.extend(instr.pins)
    if instr.pattern is not None:
        parts.append(instr.pattern)
    if instr.timing is not None:
        parts.append(instr.timing)
    return " ".join(parts)


def render(program: AlpgProgram) -> str:
    """Canonical text form: one instruction per line, single spaces."""
    return "\n".join(render_instruction(instr) for instr in program.instructions)


def structural_complexity(program: AlpgProgram | str) -> int:
    """Hidden ground-truth difficulty of a program.

    Dominated by instruction count (10 points each) with opcode diversity
    as a tie-break, so longer programs always rank harder and equal-length
    programs rank by how many distinct instruction kinds they mix.
    """
    if isinstance(program, str):
        program = parse(program)
    return 10 * len(program) + (len(program.opcodes) - 1)


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for deterministic corpus synthesis."""

    seed: int
    count: int
    complexity_range: tuple[int, int] = (1, 6)

    def __post_init__(self) -> None:
        if self.count < 1:
            raise SynthesisError("count must be positive")
        lo, hi = self.complexity_range
        if lo < 1 or hi < lo:
            raise SynthesisError(f"bad complexity range ({lo}, {hi})")


VARIANTS_PER_SHAPE = 3

# The three surface forms deliberately share most of their vocabulary (one
# distinct word each), so BM25 clusters shape-mates by command byte and
# cycle count rather than by which template produced the sentence.
_NL_TEMPLATES = (
    "Write an ALPG pattern program code that performs the {byte}h Command"
    " - Address {cycles}cycle - Data in.",
    "Write an ALPG pattern program code that runs the {byte}h Command"
    " - Address {cycles}cycle - Data in.",
    "Write an ALPG pattern program code that performs the {byte}h Command"
    " - Address {cycles}cycle - Data input.",
)


def _build_shape_program(
    rng: random.Random, shape_idx: int, n_instr: int, byte: int, cycles: int
) -> AlpgProgram:
    """One deterministic program of exactly ``n_instr`` instructions."""
    base = f"G_LF{shape_idx:03d}"
    lines: list[AlpgInstruction] = []
    remaining = n_instr
    if remaining >= 3 and rng.random() < 0.25:
        lines.append(AlpgInstruction(opcode=Opcode.MODULE, label=f"M_LF{shape_idx:03d}"))
        remaining -= 1
    if remaining == 1 and not lines:
        choice = rng.randrange(3)
        if choice == 0:
            return AlpgProgram((AlpgInstruction(opcode=Opcode.STPS, timing="TS1"),))
        if choice == 1:
            return AlpgProgram((AlpgInstruction(opcode=Opcode.NOP),))
        return AlpgProgram(
            (
                AlpgInstruction(
                    opcode=Opcode.JSR,
                    label=f"{base}_CMDI",
                    pins=("CE0",),
                    pattern=f"TP<#{byte:02X}",
                    timing="TS2",
                ),
            )
        )
    # Command phase, then address/data subroutines, then a closing stop.
    lines.append(
        AlpgInstruction(
            opcode=Opcode.JSR,
            label=f"{base}_CMDI",
            pins=("CE0",),
            pattern=f"TP<#{byte:02X}",
            timing="TS2",
        )
    )
    remaining -= 1
    closing = remaining >= 1
    middle = remaining - 1 if closing else 0
    for j in range(middle):
        if rng.random() < 0.2:
            lines.append(AlpgInstruction(opcode=Opcode.NOP))
        else:
            lines.append(
                AlpgInstruction(
                    opcode=Opcode.JSR,
                    label=f"{base}_ADD{cycles}_D{j + 1}",
                    pins=("CE0",),
                    timing="TS1",
                )
            )
    if closing:
        tail = rng.randrange(3)
        if tail == 0:
            lines.append(AlpgInstruction(opcode=Opcode.RET))
        else:
            lines.append(AlpgInstruction(opcode=Opcode.STPS, timing=f"TS{tail}"))
    return AlpgProgram(tuple(lines))


def synthesize_corpus(spec: SynthSpec) -> CorpusManifest:
    """Generate ``spec.count`` NL/code pairs, deterministically from the seed.

    Programs are built per "shape" (a command byte plus address-cycle count
    drawn at random); each shape is emitted up to three times with different
    NL paraphrases, so retrieval over the corpus is clustered rather than
    trivial.  Instruction counts are drawn uniformly from
    ``spec.complexity_range``.
    """
    rng = random.Random(spec.seed)
    lo, hi = spec.complexity_range
    n_shapes = (spec.count + VARIANTS_PER_SHAPE - 1) // VARIANTS_PER_SHAPE
    command_bytes = rng.sample(range(256), min(n_shapes, 256))
    examples: list[ScoredExample] = []
    idx = 0
    for shape_idx in range(n_shapes):
        byte = command_bytes[shape_idx % len(command_bytes)]
        cycles = rng.randint(1, 5)
        n_instr = rng.randint(lo, hi)
        program = _build_shape_program(rng, shape_idx, n_instr, byte, cycles)
        code = render(program)
        for variant in range(VARIANTS_PER_SHAPE):
            if idx >= spec.count:
                break
            nl = _NL_TEMPLATES[variant].format(byte=f"{byte:02X}", cycles=cycles)
            pair = ExamplePair(id=f"synth-{idx:04d}", nl=nl, code=code)
            examples.append(ScoredExample(pair=pair))
            idx += 1
    return CorpusManifest(examples=tuple(examples))
