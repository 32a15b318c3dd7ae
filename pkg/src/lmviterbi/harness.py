"""Monte Carlo evaluation harness: corpus in, per-SNR CSV rows out.

Each (Eb/N0, decoder) cell transmits sentences drawn cyclically from the
corpus until the block-error target or the frame cap is reached.  Noise for
frame i at grid index e derives from (seed, e, i) only, so every decoder
sees identical noisy frames and adding decoders never perturbs the noise.
All results are deterministic given the config and seed; wall-clock timing
is the one exception and can be disabled (output.measure_time = false) when
byte-identical reruns matter.
"""

from __future__ import annotations

import base64
import json
import os
import time
from dataclasses import dataclass, field, fields as dc_fields
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .channel import NoiseSpec, awgn_apply, bpsk_modulate, derive_frame_seed, ebn0_to_sigma
from .codes import build_trellis, encode, parse_generator_spec
from .priors import BridgeClient, BridgeError, ByteNGramModel, LmPrior, RemotePrior, \
    UniformPrior, train_ngram
from .semantic import SemanticDecoderConfig, bits_to_bytes, bytes_to_bits, \
    llm_viterbi_decode
from .viterbi import kbest_decode, viterbi_decode

__all__ = [
    "CodeSpec",
    "ChannelSpec",
    "CorpusSpec",
    "PriorSpec",
    "DecoderSpec",
    "StopRule",
    "OutputSpec",
    "ExperimentConfig",
    "TrialResult",
    "SweepRow",
    "SweepResult",
    "SweepError",
    "load_corpus",
    "levenshtein",
    "error_metrics",
    "run_sweep",
    "measure_latency",
    "CSV_COLUMNS",
    "ENDPOINT_ENV_VAR",
]

SCHEMA_VERSION = 1
ENDPOINT_ENV_VAR = "LMVITERBI_ENDPOINT"
DECODER_KINDS = ("standard", "kbest", "llm-viterbi", "oneshot-baseline")
PRIOR_KINDS = ("uniform", "ngram", "remote")

CSV_COLUMNS = [
    "decoder", "ebn0_db", "frames", "block_errors", "bler", "ber", "cer",
    "mean_edit_distance", "mean_decode_ms", "mean_lm_calls", "K", "N",
    "seed", "failures",
]


class SweepError(RuntimeError):
    """Sweep-level failure (bad config or excessive per-frame failures)."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CodeSpec:
    generators: tuple[str, ...]
    constraint_length: int
    recursive: bool = False
    terminate: bool = True


@dataclass(frozen=True)
class ChannelSpec:
    ebn0_db: tuple[float, ...]
    seed: int


@dataclass(frozen=True)
class CorpusSpec:
    path: str
    min_chars: int = 1
    max_chars: int | None = None
    strict_ascii: bool = True


@dataclass(frozen=True)
class PriorSpec:
    kind: str = "uniform"
    order: int = 3
    alpha: float = 0.1
    corpus_path: str | None = None
    model_path: str | None = None
    endpoint: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in PRIOR_KINDS:
            raise SweepError(f"unknown prior kind {self.kind!r}")


@dataclass(frozen=True)
class DecoderSpec:
    kind: str
    K: int = 8
    N: int = 5
    sigma2_override: float | None = None
    endpoint: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in DECODER_KINDS:
            raise SweepError(f"unknown decoder kind {self.kind!r}")

    @property
    def decoder_id(self) -> str:
        return self.kind

    def csv_K(self) -> int:
        return self.K if self.kind in ("kbest", "llm-viterbi") else 1

    def csv_N(self) -> int:
        return self.N if self.kind == "llm-viterbi" else 0


@dataclass(frozen=True)
class StopRule:
    target_block_errors: int = 1000
    max_frames: int = 10_000

    def __post_init__(self) -> None:
        if self.target_block_errors < 1:
            raise SweepError("target_block_errors must be >= 1")
        if self.max_frames < 1:
            raise SweepError("max_frames must be >= 1")


@dataclass(frozen=True)
class OutputSpec:
    csv_path: str
    trial_log_path: str | None = None
    failure_threshold: float = 0.1
    measure_time: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    code: CodeSpec
    channel: ChannelSpec
    corpus: CorpusSpec
    prior: PriorSpec
    decoders: tuple[DecoderSpec, ...]
    stop: StopRule
    output: OutputSpec

    def __post_init__(self) -> None:
        if not self.decoders:
            raise SweepError("at least one decoder is required")
        if not self.channel.ebn0_db:
            raise SweepError("ebn0_db grid must be nonempty")

    @classmethod
    def from_dict(cls, doc: dict[str, Any], base_dir: str = ".") -> "ExperimentConfig":
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SweepError(
                f"config schema_version {version!r} unsupported (want {SCHEMA_VERSION})"
            )

        def build(section: str, klass, **overrides):
            data = dict(doc.get(section, {}))
            data.update(overrides)
            allowed = {f.name for f in dc_fields(klass)}
            unknown = set(data) - allowed
            if unknown:
                raise SweepError(f"unknown keys in [{section}]: {sorted(unknown)}")
            try:
                return klass(**data)
            except TypeError as exc:
                raise SweepError(f"bad [{section}] section: {exc}") from exc

        def resolve(path: str | None) -> str | None:
            if path is None:
                return None
            return path if os.path.isabs(path) else os.path.join(base_dir, path)

        code_data = dict(doc.get("code", {}))
        if "generators" in code_data:
            code_data["generators"] = tuple(code_data["generators"])
        doc = dict(doc)
        doc["code"] = code_data
        channel_data = dict(doc.get("channel", {}))
        if "ebn0_db" in channel_data:
            channel_data["ebn0_db"] = tuple(float(v) for v in channel_data["ebn0_db"])
        doc["channel"] = channel_data

        code = build("code", CodeSpec)
        channel = build("channel", ChannelSpec)
        corpus = build("corpus", CorpusSpec)
        corpus = CorpusSpec(path=resolve(corpus.path), min_chars=corpus.min_chars,
                            max_chars=corpus.max_chars, strict_ascii=corpus.strict_ascii)
        prior = build("prior", PriorSpec)
        prior = PriorSpec(kind=prior.kind, order=prior.order, alpha=prior.alpha,
                          corpus_path=resolve(prior.corpus_path),
                          model_path=resolve(prior.model_path),
                          endpoint=prior.endpoint)
        decoder_docs = doc.get("decoders", [])
        if not isinstance(decoder_docs, list):
            raise SweepError("decoders must be an array of tables")
        decoders = []
        for entry in decoder_docs:
            allowed = {f.name for f in dc_fields(DecoderSpec)}
            unknown = set(entry) - allowed
            if unknown:
                raise SweepError(f"unknown keys in [[decoders]]: {sorted(unknown)}")
            decoders.append(DecoderSpec(**entry))
        stop = build("stop", StopRule)
        output = build("output", OutputSpec)
        output = OutputSpec(csv_path=resolve(output.csv_path),
                            trial_log_path=resolve(output.trial_log_path),
                            failure_threshold=output.failure_threshold,
                            measure_time=output.measure_time)
        return cls(code=code, channel=channel, corpus=corpus, prior=prior,
                   decoders=tuple(decoders), stop=stop, output=output)

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        return cls.from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# Corpus and metrics
# ---------------------------------------------------------------------------


def load_corpus(
    path,
    min_chars: int = 1,
    max_chars: int | None = None,
    strict_ascii: bool = True,
) -> list[bytes]:
    """Load one sentence per line, filtered to [min_chars, max_chars] bytes.

    With strict_ascii every character must be 7-bit; otherwise any
    single-byte (latin-1) character is accepted.  Order follows the file.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    sentences: list[bytes] = []
    for lineno, line in enumerate(lines, start=1):
        if not line:
            continue
        if strict_ascii and any(ord(ch) > 0x7F for ch in line):
            raise ValueError(f"line {lineno}: non-ASCII character with strict-ASCII set")
        try:
            data = line.encode("latin-1")
        except UnicodeEncodeError as exc:
            raise ValueError(f"line {lineno}: not single-byte encodable") from exc
        if len(data) < min_chars:
            continue
        if max_chars is not None and len(data) > max_chars:
            continue
        sentences.append(data)
    if not sentences:
        raise ValueError(f"no usable sentences in {path}")
    return sentences


def levenshtein(a: bytes, b: bytes) -> int:
    """Byte-level edit distance (insert/delete/substitute, unit costs)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1,
                               previous[j - 1] + cost))
        previous = current
    return previous[-1]


def error_metrics(ref_bits, hyp_bits, ref_bytes: bytes, hyp_bytes: bytes):
    """(ber, block_error, cer, edit_distance) for one frame.

    Aligned metrics require equal lengths; edit distance never does.
    """
    r = np.asarray(ref_bits, dtype=np.uint8).ravel()
    h = np.asarray(hyp_bits, dtype=np.uint8).ravel()
    if r.size != h.size:
        raise ValueError("bit sequences differ in length (aligned metrics)")
    if len(ref_bytes) != len(hyp_bytes):
        raise ValueError("byte sequences differ in length (aligned metrics)")
    bit_errors = int(np.sum(r != h))
    ber = bit_errors / r.size if r.size else 0.0
    block_error = 1 if bit_errors else 0
    char_errors = sum(1 for x, y in zip(ref_bytes, hyp_bytes) if x != y)
    cer = char_errors / len(ref_bytes) if ref_bytes else 0.0
    return ber, block_error, cer, levenshtein(ref_bytes, hyp_bytes)


def _frame_error_counts(ref_bits: np.ndarray, hyp_bits: np.ndarray,
                        ref_bytes: bytes, hyp_bytes: bytes):
    """Error counts tolerant of length changes (one-shot correction output).

    Positions beyond the common length count as errors, capped at the
    reference length, so bit_errors <= info length and
    block_error <=> bit_errors > 0 both keep holding.
    """
    L = ref_bits.size
    common = min(L, hyp_bits.size)
    bit_errors = int(np.sum(ref_bits[:common] != hyp_bits[:common]))
    bit_errors = min(L, bit_errors + abs(hyp_bits.size - L))
    c_common = min(len(ref_bytes), len(hyp_bytes))
    char_errors = sum(1 for x, y in zip(ref_bytes[:c_common], hyp_bytes[:c_common])
                      if x != y)
    char_errors = min(len(ref_bytes), char_errors + abs(len(hyp_bytes) - len(ref_bytes)))
    return bit_errors, char_errors, levenshtein(ref_bytes, hyp_bytes)


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------


@dataclass
class TrialResult:
    frame_index: int
    ebn0_db: float
    decoder_id: str
    bit_errors: int = 0
    block_error: int = 0
    char_errors: int = 0
    edit_distance: int = 0
    decode_ms: float = 0.0
    lm_calls: int = 0
    failed: bool = False
    error: str | None = None
    ref_text: bytes = b""
    hyp_text: bytes = b""

    def to_json(self) -> str:
        doc = {
            "frame": self.frame_index,
            "ebn0_db": self.ebn0_db,
            "decoder": self.decoder_id,
            "bit_errors": self.bit_errors,
            "block_error": self.block_error,
            "char_errors": self.char_errors,
            "edit_distance": self.edit_distance,
            "decode_ms": self.decode_ms,
            "lm_calls": self.lm_calls,
            "failed": self.failed,
            "error": self.error,
            "ref_b64": base64.b64encode(self.ref_text).decode("ascii"),
            "hyp_b64": base64.b64encode(self.hyp_text).decode("ascii"),
        }
        return json.dumps(doc, separators=(",", ":"))


@dataclass
class SweepRow:
    decoder: str
    ebn0_db: float
    frames: int
    block_errors: int
    bler: float
    ber: float
    cer: float
    mean_edit_distance: float
    mean_decode_ms: float
    mean_lm_calls: float
    K: int
    N: int
    seed: int
    failures: int

    def to_csv_fields(self) -> list[str]:
        return [
            self.decoder, _fmt(self.ebn0_db), str(self.frames),
            str(self.block_errors), _fmt(self.bler), _fmt(self.ber),
            _fmt(self.cer), _fmt(self.mean_edit_distance),
            _fmt(self.mean_decode_ms), _fmt(self.mean_lm_calls),
            str(self.K), str(self.N), str(self.seed), str(self.failures),
        ]


def _fmt(value: float) -> str:
    return f"{float(value):.12g}"


@dataclass
class SweepResult:
    rows: list[SweepRow]
    trials: list[TrialResult]
    csv_text: str


def _make_prior(spec: PriorSpec):
    """Returns (prior, bridge_client_or_None)."""
    if spec.kind == "uniform":
        return UniformPrior(), None
    if spec.kind == "ngram":
        if spec.model_path:
            return ByteNGramModel.load(spec.model_path), None
        if not spec.corpus_path:
            raise SweepError("ngram prior needs model_path or corpus_path")
        sentences = load_corpus(spec.corpus_path)
        return train_ngram(sentences, order=spec.order, alpha=spec.alpha), None
    endpoint = spec.endpoint or os.environ.get(ENDPOINT_ENV_VAR)
    if not endpoint:
        raise SweepError("remote prior needs an endpoint")
    client = BridgeClient(endpoint)
    return RemotePrior(client), client


def _resolve_oneshot_client(dec: DecoderSpec, prior_spec: PriorSpec,
                            cache: dict[str, BridgeClient]) -> BridgeClient:
    endpoint = dec.endpoint or prior_spec.endpoint or os.environ.get(ENDPOINT_ENV_VAR)
    if not endpoint:
        raise SweepError("oneshot-baseline needs a bridge endpoint")
    if endpoint not in cache:
        cache[endpoint] = BridgeClient(endpoint)
    return cache[endpoint]


def run_sweep(config: ExperimentConfig) -> SweepResult:
    """Run every (Eb/N0, decoder) cell and emit CSV plus optional trial log."""
    sentences = load_corpus(config.corpus.path, config.corpus.min_chars,
                            config.corpus.max_chars, config.corpus.strict_ascii)
    gs = parse_generator_spec(list(config.code.generators),
                              config.code.constraint_length, config.code.recursive)
    trellis = build_trellis(gs)
    terminated = config.code.terminate
    prior, _prior_client = _make_prior(config.prior)
    client_cache: dict[str, BridgeClient] = {}

    rows: list[SweepRow] = []
    trials: list[TrialResult] = []
    master_seed = config.channel.seed
    for e_idx, ebn0 in enumerate(config.channel.ebn0_db):
        sigma = ebn0_to_sigma(ebn0, gs.rate)
        for dec in config.decoders:
            frames = 0
            block_errors = 0
            failures = 0
            total_bits = 0
            total_bit_errors = 0
            total_chars = 0
            total_char_errors = 0
            total_edit = 0
            total_ms = 0.0
            total_lm_calls = 0
            while (block_errors < config.stop.target_block_errors
                   and frames < config.stop.max_frames):
                ref_text = sentences[frames % len(sentences)]
                trial = _run_trial(
                    trellis, terminated, ref_text, ebn0, sigma,
                    master_seed, e_idx, frames, dec, prior, config,
                    client_cache,
                )
                trials.append(trial)
                frames += 1
                if trial.failed:
                    failures += 1
                    if (frames >= 20
                            and failures > config.output.failure_threshold * frames):
                        raise SweepError(
                            f"failure rate {failures}/{frames} exceeds threshold "
                            f"{config.output.failure_threshold}"
                        )
                    continue
                block_errors += trial.block_error
                total_bits += len(ref_text) * 8
                total_bit_errors += trial.bit_errors
                total_chars += len(ref_text)
                total_char_errors += trial.char_errors
                total_edit += trial.edit_distance
                total_ms += trial.decode_ms
                total_lm_calls += trial.lm_calls
            ok_frames = frames - failures
            rows.append(SweepRow(
                decoder=dec.decoder_id,
                ebn0_db=ebn0,
                frames=frames,
                block_errors=block_errors,
                bler=block_errors / ok_frames if ok_frames else 0.0,
                ber=total_bit_errors / total_bits if total_bits else 0.0,
                cer=total_char_errors / total_chars if total_chars else 0.0,
                mean_edit_distance=total_edit / ok_frames if ok_frames else 0.0,
                mean_decode_ms=total_ms / ok_frames if ok_frames else 0.0,
                mean_lm_calls=total_lm_calls / ok_frames if ok_frames else 0.0,
                K=dec.csv_K(),
                N=dec.csv_N(),
                seed=master_seed,
                failures=failures,
            ))

    csv_lines = [",".join(CSV_COLUMNS)]
    csv_lines.extend(",".join(row.to_csv_fields()) for row in rows)
    csv_text = "\n".join(csv_lines) + "\n"
    if config.output.csv_path:
        with open(config.output.csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    if config.output.trial_log_path:
        with open(config.output.trial_log_path, "w", encoding="utf-8") as fh:
            for trial in trials:
                fh.write(trial.to_json() + "\n")
    for client in client_cache.values():
        client.close()
    return SweepResult(rows=rows, trials=trials, csv_text=csv_text)


def _run_trial(trellis, terminated, ref_text, ebn0, sigma, master_seed,
               e_idx, frame_index, dec: DecoderSpec, prior: LmPrior,
               config: ExperimentConfig,
               client_cache: dict[str, BridgeClient]) -> TrialResult:
    ref_bits = bytes_to_bits(ref_text)
    coded = encode(trellis, ref_bits, terminate=terminated)
    clean = bpsk_modulate(coded)
    frame_seed = derive_frame_seed(master_seed, e_idx, frame_index)
    received = awgn_apply(clean, NoiseSpec(sigma=sigma, ebn0_db=ebn0,
                                           seed=frame_seed))
    trial = TrialResult(frame_index=frame_index, ebn0_db=ebn0,
                        decoder_id=dec.decoder_id, ref_text=ref_text)
    t0 = time.perf_counter()
    try:
        if dec.kind == "standard":
            hyp_bits = viterbi_decode(trellis, received, terminated)
            hyp_text = bits_to_bytes(hyp_bits)
            lm_calls = 0
        elif dec.kind == "kbest":
            top = kbest_decode(trellis, received, dec.K, terminated)[0]
            hyp_bits = top.info_bit_array(trellis.memory if terminated else 0)
            hyp_text = top.chars
            lm_calls = 0
        elif dec.kind == "llm-viterbi":
            cfg = SemanticDecoderConfig(
                sigma2=dec.sigma2_override if dec.sigma2_override is not None
                else sigma * sigma,
                K=dec.K, N=dec.N, terminated=terminated,
            )
            result = llm_viterbi_decode(trellis, received, prior, cfg)
            hyp_bits, hyp_text = result.bits, result.text
            lm_calls = result.diagnostics.lm_calls
        else:  # oneshot-baseline
            raw_bits = viterbi_decode(trellis, received, terminated)
            raw_text = bits_to_bytes(raw_bits)
            client = _resolve_oneshot_client(dec, config.prior, client_cache)
            hyp_text = client.correct(raw_text)
            hyp_bits = bytes_to_bits(hyp_text)
            lm_calls = 1
    except BridgeError as exc:
        trial.failed = True
        trial.error = f"{type(exc).__name__}: {exc}"
        return trial
    elapsed_ms = (time.perf_counter() - t0) * 1e3

    bit_errors, char_errors, edit = _frame_error_counts(
        ref_bits, np.asarray(hyp_bits, dtype=np.uint8), ref_text, hyp_text)
    trial.bit_errors = bit_errors
    trial.block_error = 1 if bit_errors else 0
    trial.char_errors = char_errors
    trial.edit_distance = edit
    trial.decode_ms = elapsed_ms if config.output.measure_time else 0.0
    trial.lm_calls = lm_calls
    trial.hyp_text = hyp_text
    return trial


def measure_latency(trials: list[TrialResult]) -> dict[tuple[str, float], float]:
    """Mean decode milliseconds per (decoder, ebn0) cell, failures excluded."""
    sums: dict[tuple[str, float], list[float]] = {}
    for t in trials:
        if t.failed:
            continue
        sums.setdefault((t.decoder_id, t.ebn0_db), []).append(t.decode_ms)
    return {key: float(np.mean(vals)) for key, vals in sums.items()}
