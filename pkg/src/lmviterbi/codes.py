"""Convolutional codes: generator parsing, trellis construction, encoding.

Rate-1/n codes only.  Tap masks are ``constraint_length`` bits wide and the
most significant bit weights the newest input, so octal 7 at constraint
length 3 taps the current input and both memory bits.  States pack the
memory bits with the newest bit in the high position.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "GeneratorSet",
    "Trellis",
    "FreeDistanceSearchError",
    "parse_generator_spec",
    "build_trellis",
    "encode",
    "free_distance",
]


class FreeDistanceSearchError(RuntimeError):
    """Detour search exceeded its depth bound; the code may be catastrophic."""


def _parity(x: int) -> int:
    return x.bit_count() & 1


@dataclass(frozen=True)
class GeneratorSet:
    """Definition of a rate-1/n convolutional code.

    ``output_taps`` holds one mask per output stream.  In recursive-systematic
    mode ``feedback_taps`` is the denominator polynomial and the first output
    stream must equal it: with the register fed by a = u xor (memory feedback),
    applying the feedback mask to (a, memory) reproduces u exactly, which is
    what makes stream 0 systematic.
    """

    constraint_length: int
    output_taps: tuple[int, ...]
    feedback_taps: int | None = None

    def __post_init__(self) -> None:
        nu = self.constraint_length
        if nu < 1:
            raise ValueError("constraint_length must be >= 1")
        if len(self.output_taps) < 2:
            raise ValueError("rate-1/n code needs at least 2 output streams")
        limit = 1 << nu
        for mask in self.output_taps:
            if not 0 < mask < limit:
                raise ValueError(
                    f"tap mask {mask:#o} invalid for constraint length {nu}"
                )
        if self.feedback_taps is not None:
            if not 0 < self.feedback_taps < limit:
                raise ValueError("feedback mask invalid for constraint length")
            if not (self.feedback_taps >> (nu - 1)) & 1:
                raise ValueError("feedback mask must tap the current register input")
            if self.output_taps[0] != self.feedback_taps:
                raise ValueError(
                    "recursive mode requires a systematic first stream "
                    "(first output mask equal to the feedback mask)"
                )

    @property
    def n(self) -> int:
        return len(self.output_taps)

    @property
    def rate(self) -> Fraction:
        return Fraction(1, self.n)

    @property
    def memory(self) -> int:
        return self.constraint_length - 1

    @property
    def num_states(self) -> int:
        return 1 << self.memory

    def step(self, state: int, bit: int) -> tuple[int, tuple[int, ...]]:
        """One shift-register step: returns (next_state, output bits)."""
        nu = self.constraint_length
        if self.feedback_taps is None:
            newest = bit
        else:
            # state occupies the low nu-1 bits, so the mask's top bit never
            # touches it; only the memory taps feed back here.
            newest = bit ^ _parity(self.feedback_taps & state)
        register = (newest << (nu - 1)) | state
        out = tuple(_parity(register & mask) for mask in self.output_taps)
        return register >> 1, out

    def termination_bit(self, state: int) -> int:
        """Input bit that shifts a zero into the register from ``state``."""
        if self.feedback_taps is None:
            return 0
        return _parity(self.feedback_taps & state)


def parse_generator_spec(
    octal_strings: list[str] | tuple[str, ...],
    constraint_length: int,
    recursive: bool = False,
) -> GeneratorSet:
    """Decode octal generator strings into a GeneratorSet.

    Non-recursive: one string per output stream, in stream order.
    Recursive: the last string is the feedback (denominator) polynomial, the
    rest are numerators; the systematic stream is added automatically.
    """
    masks = []
    for text in octal_strings:
        try:
            masks.append(int(text, 8))
        except (ValueError, TypeError) as exc:
            raise ValueError(f"invalid octal generator {text!r}") from exc
    if recursive:
        if len(masks) < 2:
            raise ValueError("recursive mode needs numerator and feedback masks")
        feedback = masks[-1]
        return GeneratorSet(
            constraint_length=constraint_length,
            output_taps=(feedback, *masks[:-1]),
            feedback_taps=feedback,
        )
    return GeneratorSet(
        constraint_length=constraint_length,
        output_taps=tuple(masks),
        feedback_taps=None,
    )


@dataclass(frozen=True)
class Trellis:
    """Complete state-transition table for a GeneratorSet.

    ``step_table[state][bit]`` is (next_state, output_pattern) with the
    output bits packed MSB-first into an int; ``outputs`` keeps them as bit
    tuples for callers that want them unpacked.
    """

    generator: GeneratorSet
    next_state: tuple[tuple[int, int], ...]
    outputs: tuple[tuple[tuple[int, ...], ...], ...]
    step_table: tuple[tuple[tuple[int, int], ...], ...]

    @property
    def num_states(self) -> int:
        return self.generator.num_states

    @property
    def n(self) -> int:
        return self.generator.n

    @property
    def memory(self) -> int:
        return self.generator.memory

    @property
    def start_state(self) -> int:
        return 0

    def transition(self, state: int, bit: int) -> tuple[int, tuple[int, ...]]:
        return self.next_state[state][bit], self.outputs[state][bit]

    def termination_bit(self, state: int) -> int:
        return self.generator.termination_bit(state)


def build_trellis(gs: GeneratorSet) -> Trellis:
    """Tabulate every (state, input) transition of the encoder."""
    next_state = []
    outputs = []
    step_table = []
    n = gs.n
    for state in range(gs.num_states):
        row_ns = []
        row_out = []
        row_step = []
        for bit in (0, 1):
            ns, out = gs.step(state, bit)
            pattern = 0
            for b in out:
                pattern = (pattern << 1) | b
            row_ns.append(ns)
            row_out.append(out)
            row_step.append((ns, pattern))
        next_state.append(tuple(row_ns))
        outputs.append(tuple(row_out))
        step_table.append(tuple(row_step))
    return Trellis(
        generator=gs,
        next_state=tuple(next_state),
        outputs=tuple(outputs),
        step_table=tuple(step_table),
    )


def encode(
    trellis: Trellis,
    info_bits,
    terminate: bool = True,
) -> np.ndarray:
    """Encode information bits, optionally driving the state back to zero.

    With ``terminate`` the encoder appends memory-many tail inputs (zeros for
    feedforward codes, feedback-dependent for recursive ones); the output
    then has n * (len(info_bits) + memory) coded bits.
    """
    bits = np.asarray(info_bits, dtype=np.uint8).ravel()
    if bits.size == 0:
        raise ValueError("info_bits must be nonempty")
    if np.any(bits > 1):
        raise ValueError("info_bits must be 0/1")
    out = np.empty(trellis.n * (bits.size + (trellis.memory if terminate else 0)),
                   dtype=np.uint8)
    n = trellis.n
    state = trellis.start_state
    pos = 0
    for b in bits:
        state, symbols = trellis.transition(state, int(b))
        out[pos:pos + n] = symbols
        pos += n
    if terminate:
        for _ in range(trellis.memory):
            tail_bit = trellis.termination_bit(state)
            state, symbols = trellis.transition(state, tail_bit)
            out[pos:pos + n] = symbols
            pos += n
        assert state == 0
    return out


def free_distance(trellis: Trellis, max_depth: int | None = None) -> int:
    """Minimum Hamming weight over detours leaving and re-merging with state 0.

    Layered best-first search; weights only accumulate, so the search stops
    as soon as no open path can undercut the best merge found.  A depth bound
    guards against zero-weight loops (catastrophic codes).
    """
    if max_depth is None:
        max_depth = 16 * trellis.num_states + 64
    start_state, start_out = trellis.transition(0, 1)
    start_weight = sum(start_out)
    if start_state == 0:
        # memoryless degenerate case: the detour is a single branch
        return start_weight
    best = float("inf")
    dist: dict[int, float] = {start_state: start_weight}
    frontier = {start_state: float(start_weight)}
    depth = 1
    while frontier:
        if min(frontier.values()) >= best:
            return int(best)
        if depth > max_depth:
            raise FreeDistanceSearchError(
                "detour search exceeded depth bound; code may be catastrophic"
            )
        fresh: dict[int, float] = {}
        for state, weight in frontier.items():
            for bit in (0, 1):
                ns, out = trellis.transition(state, bit)
                w = weight + sum(out)
                if ns == 0:
                    if w < best:
                        best = w
                    continue
                # equal-weight revisits stay live: a cycle that never grows
                # in weight is exactly the catastrophic case, and it must
                # keep the frontier open until the depth bound trips
                if w <= dist.get(ns, float("inf")):
                    dist[ns] = w
                    fresh[ns] = w
        frontier = fresh
        depth += 1
    return int(best)
