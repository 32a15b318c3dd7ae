"""Language-model-guided list decoding of byte-mapped convolutional frames.

The decoder runs K-best Viterbi bit by bit, assembles a byte every 8
information bits, and every N characters prunes the surviving paths at the
prefix level: paths sharing the same first j-1 bytes followed the identical
trellis trajectory up to bit (j-1)*8, so one channel metric and one LM call
score the whole group.  The group maximizing

    -M / (2 sigma^2) + log P(bytes)

survives with all its members (their j-th characters stay unjudged until
later checkpoints).  After the frame ends, every remaining path's complete
byte sequence is scored the same way and the argmax is returned.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .codes import Trellis
from .priors import LmPrior
from .viterbi import DecodePath, extend_tail, kbest_step, _flatten, _frame_geometry

__all__ = [
    "SemanticDecoderConfig",
    "PrefixGroup",
    "DecodeDiagnostics",
    "DecodeResult",
    "bits_to_byte",
    "bytes_to_bits",
    "bits_to_bytes",
    "path_joint_score",
    "group_by_prefix",
    "prune_to_best_prefix",
    "final_select",
    "llm_viterbi_decode",
]

CHAR_BITS = 8


@dataclass(frozen=True)
class SemanticDecoderConfig:
    """Knobs of the LM-guided decoder.

    sigma2 is the channel noise variance used in the joint score (genie
    value from the channel configuration, or an explicit override for
    sensitivity studies).
    """

    sigma2: float
    K: int = 8
    N: int = 5
    char_bits: int = CHAR_BITS
    terminated: bool = True

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be > 0")
        if self.char_bits != CHAR_BITS:
            raise ValueError("byte mapping is fixed at 8 bits per character")


@dataclass
class PrefixGroup:
    """Surviving paths that share the byte prefix t_{1:j-1}.

    All members carry the same cumulative channel metric at bit (j-1)*8 —
    identical byte prefix means identical bit history and trajectory — so
    ``m_prefix`` is a group property.  ``logprob`` is filled when the group
    is scored.
    """

    prefix: bytes
    members: list[DecodePath]
    m_prefix: float
    logprob: float | None = None


@dataclass
class DecodeDiagnostics:
    """Observability for the pruning trade-off studies."""

    lm_calls: int = 0
    prune_events: list[tuple[int, int, int]] = field(default_factory=list)
    # (char position j, groups formed, paths surviving)
    peak_paths: int = 0
    final_candidates: int = 0
    wall_ms: float = 0.0


class DecodeResult(NamedTuple):
    text: bytes
    bits: np.ndarray
    diagnostics: DecodeDiagnostics


def bits_to_byte(bits) -> int:
    """Assemble exactly 8 bits into a byte, first-transmitted bit = MSB."""
    seq = list(bits)
    if len(seq) != CHAR_BITS:
        raise ValueError("bits_to_byte needs exactly 8 bits")
    value = 0
    for b in seq:
        value = (value << 1) | int(b)
    return value


def bytes_to_bits(data: bytes) -> np.ndarray:
    """Byte string to bit array, MSB of each byte first."""
    if len(data) == 0:
        return np.zeros(0, dtype=np.uint8)
    arr = np.frombuffer(bytes(data), dtype=np.uint8)
    return np.unpackbits(arr)


def bits_to_bytes(bits) -> bytes:
    """Bit array (length divisible by 8) back to a byte string."""
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size % CHAR_BITS:
        raise ValueError("bit count not divisible by 8")
    if arr.size == 0:
        return b""
    return np.packbits(arr).tobytes()


def path_joint_score(M: float, lm_logprob: float, sigma2: float) -> float:
    """Joint channel + language score: -M/(2 sigma^2) + log P(text)."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be > 0")
    return -M / (2.0 * sigma2) + lm_logprob


def group_by_prefix(paths: list[DecodePath], j: int) -> list[PrefixGroup]:
    """Partition paths by their first j-1 completed characters.

    The shared metric anchor m_prefix is each member's cached metric at the
    previous byte boundary, which is bit (j-1)*8 when paths sit exactly at
    the j-character boundary (the only point the decoder calls this).
    """
    if j < 1:
        raise ValueError("character position j must be >= 1")
    groups: dict[bytes, PrefixGroup] = {}
    for p in paths:
        if len(p.chars) < j:
            raise ValueError(
                f"path has {len(p.chars)} chars, need >= {j} (sequencing bug)"
            )
        prefix = p.chars[:j - 1]
        group = groups.get(prefix)
        if group is None:
            groups[prefix] = PrefixGroup(prefix=prefix, members=[p],
                                         m_prefix=p.m_prev_byte)
        else:
            group.members.append(p)
    return [groups[k] for k in sorted(groups)]


def prune_to_best_prefix(
    groups: list[PrefixGroup],
    lm: LmPrior,
    sigma2: float,
) -> list[DecodePath]:
    """Keep every member of the best-scoring prefix group, prune the rest.

    One LM call per group, incremental from the members' shared cache; the
    survivors' caches advance to cover the winning prefix.  Ties break on
    the lexicographically smaller prefix.
    """
    if not groups:
        raise ValueError("need at least one prefix group")
    best: PrefixGroup | None = None
    best_score = -float("inf")
    for group in groups:
        rep = group.members[0]
        scored, logprob = rep.lm_scored, rep.lm_logprob
        logprob += lm.score(group.prefix[:scored], group.prefix[scored:])
        group.logprob = logprob
        score = path_joint_score(group.m_prefix, logprob, sigma2)
        if best is None or score > best_score or (
            score == best_score and group.prefix < best.prefix
        ):
            best = group
            best_score = score
    assert best is not None
    new_scored = len(best.prefix)
    for p in best.members:
        p.lm_scored = new_scored
        p.lm_logprob = best.logprob
    return best.members


def final_select(paths: list[DecodePath], lm: LmPrior, sigma2: float) -> DecodePath:
    """Score each complete path's full byte sequence and return the argmax.

    Scoring is incremental from each path's cache (identical to rescoring
    from scratch by the chain rule).  Ties break on the lexicographically
    smaller bit history.
    """
    if not paths:
        raise ValueError("need at least one surviving path")
    best = None
    best_key: tuple[float, int] | None = None
    for p in paths:
        delta = lm.score(p.chars[:p.lm_scored], p.chars[p.lm_scored:])
        p.lm_logprob += delta
        p.lm_scored = len(p.chars)
        score = path_joint_score(p.metric, p.lm_logprob, sigma2)
        key = (-score, p.bits)
        if best_key is None or key < best_key:
            best = p
            best_key = key
    assert best is not None
    return best


def llm_viterbi_decode(
    trellis: Trellis,
    received,
    lm: LmPrior,
    cfg: SemanticDecoderConfig,
    checkpoint_hook: Callable[[int, list[PrefixGroup], list[DecodePath]], None] | None = None,
) -> DecodeResult:
    """Decode one frame with LM-guided prefix pruning.

    Runs K-best extension per bit, assembles a byte every 8 information
    bits, prunes by prefix whenever the character count j is a positive
    multiple of N, forces the termination tail, and applies the final joint
    selection over all survivors.  ``checkpoint_hook`` (tests/diagnostics)
    observes each checkpoint's groups and survivors.
    """
    t0 = time.perf_counter()
    y, total_steps, tail = _frame_geometry(trellis, received, cfg.terminated)
    info_steps = total_steps - tail
    if info_steps % CHAR_BITS:
        raise ValueError("information length must be a whole number of bytes")
    n = trellis.n
    diag = DecodeDiagnostics()
    paths = [DecodePath(state=trellis.start_state)]
    j = 0
    for t in range(info_steps):
        by_state = kbest_step(paths, trellis, y[t * n:(t + 1) * n], cfg.K)
        paths = _flatten(by_state)
        if len(paths) > diag.peak_paths:
            diag.peak_paths = len(paths)
        if (t + 1) % CHAR_BITS == 0:
            for p in paths:
                p.complete_byte()
            j += 1
            if j % cfg.N == 0:
                groups = group_by_prefix(paths, j)
                paths = prune_to_best_prefix(groups, lm, cfg.sigma2)
                diag.lm_calls += len(groups)
                diag.prune_events.append((j, len(groups), len(paths)))
                if checkpoint_hook is not None:
                    checkpoint_hook(j, groups, paths)
    extend_tail(paths, trellis, y, info_steps, total_steps)
    if cfg.terminated:
        paths = [p for p in paths if p.state == 0]
    diag.final_candidates = len(paths)
    diag.lm_calls += len(paths)
    best = final_select(paths, lm, cfg.sigma2)
    diag.wall_ms = (time.perf_counter() - t0) * 1e3
    return DecodeResult(text=best.chars, bits=best.info_bit_array(tail),
                        diagnostics=diag)
