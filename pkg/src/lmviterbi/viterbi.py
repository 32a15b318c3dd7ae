"""Soft-decision Viterbi decoding: single-survivor and K-best list variants.

Branch metrics are squared Euclidean distances between received symbols and
the branch's BPSK image, accumulated along each path.  Terminated frames
carry memory-many tail steps whose input bits are forced (the decoder knows
the zero-tail convention), so tail extension never multiplies paths.
"""

from __future__ import annotations

import numpy as np

from .codes import Trellis

__all__ = [
    "DecodePath",
    "branch_metric",
    "viterbi_decode",
    "kbest_step",
    "kbest_decode",
]


class DecodePath:
    """One surviving trellis path.

    The bit history is packed into an int with the earliest bit in the
    highest position, so equal-length histories order lexicographically as
    integers (the tie-break everywhere).  ``m_last_byte`` / ``m_prev_byte``
    cache the cumulative metric at the two most recent byte boundaries;
    prefix-level pruning reads the older one.  ``lm_scored`` and
    ``lm_logprob`` cache how much of ``chars`` a language model has already
    scored and the log-probability of that prefix.
    """

    __slots__ = (
        "state", "metric", "bits", "nbits", "chars",
        "m_last_byte", "m_prev_byte", "lm_scored", "lm_logprob",
    )

    def __init__(
        self,
        state: int = 0,
        metric: float = 0.0,
        bits: int = 0,
        nbits: int = 0,
        chars: bytes = b"",
        m_last_byte: float = 0.0,
        m_prev_byte: float = 0.0,
        lm_scored: int = 0,
        lm_logprob: float = 0.0,
    ) -> None:
        self.state = state
        self.metric = metric
        self.bits = bits
        self.nbits = nbits
        self.chars = chars
        self.m_last_byte = m_last_byte
        self.m_prev_byte = m_prev_byte
        self.lm_scored = lm_scored
        self.lm_logprob = lm_logprob

    @property
    def lm_cache(self) -> tuple[int, float]:
        return self.lm_scored, self.lm_logprob

    def sort_key(self) -> tuple[float, int]:
        return self.metric, self.bits

    def bit_array(self) -> np.ndarray:
        """Full bit history, first-transmitted bit first."""
        out = np.empty(self.nbits, dtype=np.uint8)
        for i in range(self.nbits):
            out[i] = (self.bits >> (self.nbits - 1 - i)) & 1
        return out

    def info_bit_array(self, tail: int) -> np.ndarray:
        """Bit history with the last ``tail`` bits stripped."""
        if tail < 0 or tail > self.nbits:
            raise ValueError("tail out of range")
        n_info = self.nbits - tail
        val = self.bits >> tail
        out = np.empty(n_info, dtype=np.uint8)
        for i in range(n_info):
            out[i] = (val >> (n_info - 1 - i)) & 1
        return out

    def complete_byte(self) -> None:
        """Fold the newest 8 bits into ``chars`` (first-transmitted bit = MSB)."""
        self.chars += bytes([self.bits & 0xFF])
        self.m_prev_byte = self.m_last_byte
        self.m_last_byte = self.metric

    def __repr__(self) -> str:  # debugging aid
        return (f"DecodePath(state={self.state}, metric={self.metric:.4f}, "
                f"nbits={self.nbits}, chars={self.chars!r})")


def branch_metric(received, expected_bits) -> float:
    """Squared Euclidean distance between symbols and a branch's BPSK image."""
    y = np.asarray(received, dtype=np.float64).ravel()
    b = np.asarray(expected_bits, dtype=np.float64).ravel()
    if y.size != b.size:
        raise ValueError("received symbols and expected bits differ in length")
    x = 1.0 - 2.0 * b
    return float(np.sum((y - x) ** 2))


_PATTERN_BITS: dict[int, np.ndarray] = {}


def _pattern_bit_table(n: int) -> np.ndarray:
    """(2^n, n) array of output-bit patterns, MSB-first."""
    table = _PATTERN_BITS.get(n)
    if table is None:
        table = np.array(
            [[(p >> (n - 1 - i)) & 1 for i in range(n)] for p in range(1 << n)],
            dtype=np.float64,
        )
        _PATTERN_BITS[n] = table
    return table


def _pattern_metrics(symbols: np.ndarray, n: int) -> list[float]:
    """Branch metric for every possible n-bit output pattern at this step."""
    bits = _pattern_bit_table(n)
    return ((symbols[None, :] - (1.0 - 2.0 * bits)) ** 2).sum(axis=1).tolist()


def _frame_geometry(trellis: Trellis, received, terminated: bool):
    y = np.asarray(received, dtype=np.float64).ravel()
    n = trellis.n
    if y.size % n:
        raise ValueError("frame length not divisible by coded bits per branch")
    total_steps = y.size // n
    tail = trellis.memory if terminated else 0
    if total_steps <= tail:
        raise ValueError("frame shorter than the termination tail")
    return y, total_steps, tail


def viterbi_decode(trellis: Trellis, received, terminated: bool = True) -> np.ndarray:
    """Maximum-likelihood information bits of one frame.

    Terminated frames trace back from the zero state and force the tail
    branches to the zero-tail inputs; otherwise traceback starts from the
    best final state.  Tail bits are stripped from the output.
    """
    y, total_steps, tail = _frame_geometry(trellis, received, terminated)
    n = trellis.n
    num_states = trellis.num_states
    info_steps = total_steps - tail

    pattern_idx = np.array(
        [[trellis.step_table[s][u][1] for u in (0, 1)] for s in range(num_states)],
        dtype=np.int64,
    )
    # incoming transitions: every state has exactly two
    inc_state = np.zeros((num_states, 2), dtype=np.int64)
    inc_input = np.zeros((num_states, 2), dtype=np.int64)
    fill = [0] * num_states
    for s in range(num_states):
        for u in (0, 1):
            ns = trellis.next_state[s][u]
            inc_state[ns, fill[ns]] = s
            inc_input[ns, fill[ns]] = u
            fill[ns] += 1
    assert all(c == 2 for c in fill)
    term_u = np.array([trellis.termination_bit(s) for s in range(num_states)],
                      dtype=np.int64)

    bit_table = _pattern_bit_table(n)
    metrics = np.full(num_states, np.inf)
    metrics[trellis.start_state] = 0.0
    back = np.zeros((total_steps, num_states), dtype=np.uint8)
    for t in range(total_steps):
        yt = y[t * n:(t + 1) * n]
        pat_m = ((yt[None, :] - (1.0 - 2.0 * bit_table)) ** 2).sum(axis=1)
        bm = pat_m[pattern_idx]                       # (S, 2)
        cand = metrics[inc_state] + bm[inc_state, inc_input]
        if t >= info_steps:
            allowed = inc_input == term_u[inc_state]
            cand = np.where(allowed, cand, np.inf)
        back[t] = np.argmin(cand, axis=1)
        metrics = np.min(cand, axis=1)

    state = 0 if terminated else int(np.argmin(metrics))
    bits = np.empty(total_steps, dtype=np.uint8)
    for t in range(total_steps - 1, -1, -1):
        slot = back[t, state]
        bits[t] = inc_input[state, slot]
        state = int(inc_state[state, slot])
    return bits[:info_steps]


def kbest_step(
    paths: list[DecodePath],
    trellis: Trellis,
    received_step,
    K: int,
) -> dict[int, list[DecodePath]]:
    """Extend every path along both branches, keep K best per successor state.

    Ties break on the lexicographically smaller bit history.  The returned
    lists are sorted ascending by (metric, bit history).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    symbols = np.asarray(received_step, dtype=np.float64).ravel()
    if symbols.size != trellis.n:
        raise ValueError("step must carry exactly n symbols")
    pm = _pattern_metrics(symbols, trellis.n)
    table = trellis.step_table
    arrivals: dict[int, list[DecodePath]] = {}
    for p in paths:
        row = table[p.state]
        shifted = p.bits << 1
        nb = p.nbits + 1
        for u in (0, 1):
            ns, pattern = row[u]
            q = DecodePath(
                ns, p.metric + pm[pattern], shifted | u, nb, p.chars,
                p.m_last_byte, p.m_prev_byte, p.lm_scored, p.lm_logprob,
            )
            bucket = arrivals.get(ns)
            if bucket is None:
                arrivals[ns] = [q]
            else:
                bucket.append(q)
    for bucket in arrivals.values():
        bucket.sort(key=DecodePath.sort_key)
        del bucket[K:]
    return arrivals


def _flatten(by_state: dict[int, list[DecodePath]]) -> list[DecodePath]:
    return [p for s in sorted(by_state) for p in by_state[s]]


def extend_tail(paths: list[DecodePath], trellis: Trellis, y: np.ndarray,
                first_step: int, total_steps: int) -> None:
    """Follow the forced termination branches; mutates paths in place.

    Tail inputs are determined by each path's state, so no branching occurs
    and no pruning is needed.
    """
    n = trellis.n
    table = trellis.step_table
    for t in range(first_step, total_steps):
        pm = _pattern_metrics(y[t * n:(t + 1) * n], n)
        for p in paths:
            u = trellis.termination_bit(p.state)
            ns, pattern = table[p.state][u]
            p.state = ns
            p.metric += pm[pattern]
            p.bits = (p.bits << 1) | u
            p.nbits += 1


def kbest_decode(
    trellis: Trellis,
    received,
    K: int,
    terminated: bool = True,
) -> list[DecodePath]:
    """Up to K globally best complete paths, sorted ascending by metric.

    Per-state K-best retention preserves the global top K, so rank 1 agrees
    with ``viterbi_decode``.  Completed bytes accumulate in each path's
    ``chars`` as decoding proceeds (information bits only).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    y, total_steps, tail = _frame_geometry(trellis, received, terminated)
    info_steps = total_steps - tail
    n = trellis.n
    paths = [DecodePath(state=trellis.start_state)]
    for t in range(info_steps):
        by_state = kbest_step(paths, trellis, y[t * n:(t + 1) * n], K)
        paths = _flatten(by_state)
        if (t + 1) % 8 == 0:
            for p in paths:
                p.complete_byte()
    extend_tail(paths, trellis, y, info_steps, total_steps)
    if terminated:
        paths = [p for p in paths if p.state == 0]
    paths.sort(key=DecodePath.sort_key)
    return paths[:K]
