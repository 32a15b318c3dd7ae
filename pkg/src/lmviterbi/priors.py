"""Autoregressive priors over byte sequences.

Every prior scores score(context, continuation) -> natural-log probability
of the continuation given the context, and must satisfy two contracts:
chain-rule additivity and per-context normalization over all 256 byte
values.  ``check_conformance`` verifies both for any implementation,
including a remote model reached over the newline-delimited JSON bridge
protocol.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import socket
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LmPrior",
    "UniformPrior",
    "ByteNGramModel",
    "train_ngram",
    "ngram_score",
    "uniform_score",
    "BridgeClient",
    "RemotePrior",
    "remote_score",
    "BridgeError",
    "BridgeConnectionError",
    "BridgeTimeoutError",
    "BridgeProtocolError",
    "BridgeRequestError",
    "ConformanceReport",
    "check_conformance",
]

ALPHABET = 256
LOG_UNIFORM = -math.log(ALPHABET)
_BOUNDARY = 256  # out-of-band context symbol; never a data byte


class LmPrior(ABC):
    """Autoregressive byte-sequence scorer."""

    @abstractmethod
    def score(self, context: bytes, continuation: bytes) -> float:
        """Natural-log probability of ``continuation`` given ``context``."""


class UniformPrior(LmPrior):
    """The conventional-decoding null prior: every byte equally likely."""

    def score(self, context: bytes, continuation: bytes) -> float:
        return uniform_score(context, continuation)


def uniform_score(context: bytes, continuation: bytes) -> float:
    return len(continuation) * LOG_UNIFORM


class ByteNGramModel(LmPrior):
    """Order-k byte n-gram with add-alpha smoothing.

    Contexts are the k-1 preceding symbols; positions before the start of a
    sentence are padded with an out-of-band boundary symbol, so training
    sentences reset context and scores of short contexts stay well defined.
    alpha > 0 keeps every byte's probability strictly positive.
    """

    def __init__(self, order: int, alpha: float, corpus_sha256: str = "") -> None:
        if order < 1:
            raise ValueError("order must be >= 1")
        if alpha <= 0:
            raise ValueError("alpha must be > 0")
        self.order = order
        self.alpha = alpha
        self.corpus_sha256 = corpus_sha256
        self._counts: dict[tuple[int, ...], np.ndarray] = {}
        self._totals: dict[tuple[int, ...], int] = {}

    # -- training ---------------------------------------------------------

    def observe(self, sentence: bytes) -> None:
        k = self.order
        symbols = [_BOUNDARY] * (k - 1) + list(sentence)
        for i, byte in enumerate(sentence):
            ctx = tuple(symbols[i:i + k - 1])
            counts = self._counts.get(ctx)
            if counts is None:
                counts = np.zeros(ALPHABET, dtype=np.int64)
                self._counts[ctx] = counts
                self._totals[ctx] = 0
            counts[byte] += 1
            self._totals[ctx] += 1

    # -- scoring ----------------------------------------------------------

    def _context_window(self, preceding: list[int]) -> tuple[int, ...]:
        k = self.order
        if k == 1:
            return ()
        if len(preceding) >= k - 1:
            return tuple(preceding[-(k - 1):])
        pad = [_BOUNDARY] * (k - 1 - len(preceding))
        return tuple(pad + preceding)

    def score(self, context: bytes, continuation: bytes) -> float:
        preceding = list(context)
        alpha = self.alpha
        denom_add = ALPHABET * alpha
        total_log = 0.0
        for byte in continuation:
            ctx = self._context_window(preceding)
            counts = self._counts.get(ctx)
            if counts is None:
                total_log += LOG_UNIFORM  # alpha / (256 alpha)
            else:
                total = self._totals[ctx]
                total_log += math.log((float(counts[byte]) + alpha)
                                      / (total + denom_add))
            preceding.append(byte)
        return total_log

    # -- persistence ------------------------------------------------------

    FILE_FORMAT = "byte-ngram-counts"
    FILE_VERSION = 1

    def save(self, path) -> None:
        """Versioned JSON count-table file with (order, alpha, corpus hash)."""
        contexts = []
        for ctx in sorted(self._counts):
            counts = self._counts[ctx]
            nz = np.nonzero(counts)[0]
            contexts.append([list(ctx), [[int(b), int(counts[b])] for b in nz]])
        doc = {
            "format": self.FILE_FORMAT,
            "version": self.FILE_VERSION,
            "order": self.order,
            "alpha": self.alpha,
            "corpus_sha256": self.corpus_sha256,
            "contexts": contexts,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ByteNGramModel":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != cls.FILE_FORMAT:
            raise ValueError(f"not a {cls.FILE_FORMAT} file")
        if doc.get("version") != cls.FILE_VERSION:
            raise ValueError(f"unsupported model file version {doc.get('version')!r}")
        model = cls(order=doc["order"], alpha=doc["alpha"],
                    corpus_sha256=doc.get("corpus_sha256", ""))
        for ctx, pairs in doc["contexts"]:
            counts = np.zeros(ALPHABET, dtype=np.int64)
            for byte, count in pairs:
                counts[byte] = count
            key = tuple(ctx)
            model._counts[key] = counts
            model._totals[key] = int(counts.sum())
        return model


def train_ngram(corpus, order: int, alpha: float) -> ByteNGramModel:
    """Count-based training over an iterable of sentence byte strings."""
    sentences = [bytes(s) for s in corpus]
    if not sentences:
        raise ValueError("training corpus is empty")
    digest = hashlib.sha256(b"\n".join(sentences)).hexdigest()
    model = ByteNGramModel(order=order, alpha=alpha, corpus_sha256=digest)
    for sentence in sentences:
        model.observe(sentence)
    return model


def ngram_score(model: ByteNGramModel, context: bytes, continuation: bytes) -> float:
    return model.score(context, continuation)


# ---------------------------------------------------------------------------
# Remote prior over the bridge wire protocol
# ---------------------------------------------------------------------------


class BridgeError(Exception):
    """Base class for bridge failures; all are retriable at the frame level."""


class BridgeConnectionError(BridgeError):
    pass


class BridgeTimeoutError(BridgeError):
    pass


class BridgeProtocolError(BridgeError):
    pass


class BridgeRequestError(BridgeError):
    """The bridge answered the request with an error field."""


class BridgeClient:
    """Client for the newline-delimited JSON bridge protocol over TCP.

    One request in flight at a time.  Requests carry a monotonically
    increasing id; a reply whose id does not match is a protocol error.
    Arbitrary byte values travel base64-encoded.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0) -> None:
        host, sep, port = endpoint.rpartition(":")
        if not sep:
            raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
        self.endpoint = endpoint
        self._next_id = 0
        try:
            self._sock = socket.create_connection((host, int(port)), timeout=timeout)
        except (OSError, ValueError) as exc:
            raise BridgeConnectionError(f"cannot connect to {endpoint}: {exc}") from exc
        self._reader = self._sock.makefile("rb")
        self.server_info = self.hello()

    def close(self) -> None:
        try:
            self._reader.close()
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "BridgeClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _send(self, obj: dict) -> None:
        line = json.dumps(obj, separators=(",", ":")) + "\n"
        try:
            self._sock.sendall(line.encode("utf-8"))
        except socket.timeout as exc:
            raise BridgeTimeoutError(f"send timed out: {exc}") from exc
        except OSError as exc:
            raise BridgeConnectionError(f"send failed: {exc}") from exc

    def _recv(self) -> dict:
        try:
            line = self._reader.readline()
        except socket.timeout as exc:
            raise BridgeTimeoutError(f"reply timed out: {exc}") from exc
        except OSError as exc:
            raise BridgeConnectionError(f"receive failed: {exc}") from exc
        if not line:
            raise BridgeConnectionError("bridge closed the connection")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeProtocolError(f"malformed reply: {line!r}") from exc
        if not isinstance(obj, dict):
            raise BridgeProtocolError(f"reply is not an object: {obj!r}")
        return obj

    def hello(self) -> dict:
        self._send({"op": "hello"})
        reply = self._recv()
        if reply.get("ok") is not True:
            raise BridgeProtocolError(f"handshake rejected: {reply!r}")
        if reply.get("alphabet") != ALPHABET:
            raise BridgeProtocolError(
                f"bridge alphabet {reply.get('alphabet')!r} != {ALPHABET}"
            )
        return reply

    def request(self, op: str, **fields) -> dict:
        self._next_id += 1
        req_id = self._next_id
        self._send({"id": req_id, "op": op, **fields})
        reply = self._recv()
        if "error" in reply:
            raise BridgeRequestError(str(reply["error"]))
        if reply.get("id") != req_id:
            raise BridgeProtocolError(
                f"reply id {reply.get('id')!r} does not match request {req_id}"
            )
        return reply

    def score(self, context: bytes, continuation: bytes) -> float:
        reply = self.request(
            "score",
            context_b64=base64.b64encode(context).decode("ascii"),
            continuation_b64=base64.b64encode(continuation).decode("ascii"),
        )
        value = reply.get("logprob")
        if not isinstance(value, (int, float)):
            raise BridgeProtocolError(f"missing or non-numeric logprob: {reply!r}")
        return float(value)

    def correct(self, text: bytes) -> bytes:
        reply = self.request("correct", text_b64=base64.b64encode(text).decode("ascii"))
        payload = reply.get("text_b64")
        if not isinstance(payload, str):
            raise BridgeProtocolError(f"missing corrected text: {reply!r}")
        try:
            return base64.b64decode(payload, validate=True)
        except (ValueError, TypeError) as exc:
            raise BridgeProtocolError(f"invalid base64 in reply: {reply!r}") from exc

    def similarity(self, a: bytes, b: bytes) -> float:
        reply = self.request(
            "similarity",
            a_b64=base64.b64encode(a).decode("ascii"),
            b_b64=base64.b64encode(b).decode("ascii"),
        )
        value = reply.get("similarity")
        if not isinstance(value, (int, float)):
            raise BridgeProtocolError(f"missing similarity value: {reply!r}")
        return float(value)


class RemotePrior(LmPrior):
    """LmPrior backed by a bridge connection; failures abort the frame."""

    def __init__(self, client: BridgeClient) -> None:
        self.client = client

    def score(self, context: bytes, continuation: bytes) -> float:
        return self.client.score(context, continuation)


def remote_score(client: BridgeClient, context: bytes, continuation: bytes) -> float:
    return client.score(context, continuation)


# ---------------------------------------------------------------------------
# Conformance suite
# ---------------------------------------------------------------------------


@dataclass
class ConformanceReport:
    passed: bool
    checks: list[tuple[str, bool, str]] = field(default_factory=list)

    def summary(self) -> str:
        lines = []
        for name, ok, detail in self.checks:
            status = "ok" if ok else "FAIL"
            lines.append(f"{status:4s} {name}: {detail}")
        return "\n".join(lines)


def _random_context(rng: np.random.Generator, max_len: int) -> bytes:
    length = int(rng.integers(0, max_len + 1))
    return bytes(rng.integers(0, ALPHABET, size=length, dtype=np.uint8))


def check_conformance(
    prior: LmPrior,
    num_contexts: int = 100,
    chain_tol: float = 1e-6,
    norm_tol: float = 1e-4,
    seed: int = 0,
    max_context_len: int = 12,
) -> ConformanceReport:
    """Verify the LmPrior contract on randomly sampled contexts.

    Checks: scores are log-probabilities (<= 0), deterministic, additive
    under the chain rule, and normalized over the 256-byte alphabet.
    """
    rng = np.random.default_rng(seed)
    contexts = [b""] + [_random_context(rng, max_context_len)
                        for _ in range(max(0, num_contexts - 1))]

    worst_chain = 0.0
    worst_norm = 0.0
    nonpositive = True
    deterministic = True
    for ctx in contexts:
        cont = _random_context(rng, 6) + bytes([int(rng.integers(0, ALPHABET))])
        split = int(rng.integers(0, len(cont) + 1))
        a, b = cont[:split], cont[split:]
        whole = prior.score(ctx, cont)
        parts = prior.score(ctx, a) + prior.score(ctx + a, b)
        worst_chain = max(worst_chain, abs(whole - parts))
        if whole > 1e-12:
            nonpositive = False
        if prior.score(ctx, cont) != whole:
            deterministic = False
        total = math.fsum(
            math.exp(prior.score(ctx, bytes([byte]))) for byte in range(ALPHABET)
        )
        worst_norm = max(worst_norm, abs(total - 1.0))

    empty_ok = prior.score(b"", b"") == 0.0 and prior.score(b"abc", b"") == 0.0

    checks = [
        ("chain rule", worst_chain <= chain_tol,
         f"worst |score(a++b) - score(a) - score(b)| = {worst_chain:.3g} "
         f"(tol {chain_tol:g})"),
        ("normalization", worst_norm <= norm_tol,
         f"worst |sum_b P(b|ctx) - 1| = {worst_norm:.3g} (tol {norm_tol:g})"),
        ("log-probability", nonpositive, "all scores <= 0"),
        ("determinism", deterministic, "repeated calls identical"),
        ("empty continuation", empty_ok, "score(ctx, b'') == 0"),
    ]
    return ConformanceReport(passed=all(ok for _, ok, _ in checks), checks=checks)
