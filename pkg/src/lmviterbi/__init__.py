"""Convolutional coding toolkit with language-model-guided list decoding.

Pipeline: text -> bytes -> bits -> convolutional code -> BPSK -> AWGN ->
K-best Viterbi with periodic prefix-level pruning driven by an
autoregressive byte prior -> joint channel+language selection.
"""

from .channel import (
    NoiseSpec,
    awgn_apply,
    bpsk_modulate,
    derive_frame_seed,
    ebn0_to_sigma,
    theoretical_uncoded_ber,
)
from .codes import (
    FreeDistanceSearchError,
    GeneratorSet,
    Trellis,
    build_trellis,
    encode,
    free_distance,
    parse_generator_spec,
)
from .harness import (
    ExperimentConfig,
    SweepError,
    SweepResult,
    TrialResult,
    error_metrics,
    levenshtein,
    load_corpus,
    measure_latency,
    run_sweep,
)
from .priors import (
    BridgeClient,
    BridgeConnectionError,
    BridgeError,
    BridgeProtocolError,
    BridgeRequestError,
    BridgeTimeoutError,
    ByteNGramModel,
    ConformanceReport,
    LmPrior,
    RemotePrior,
    UniformPrior,
    check_conformance,
    ngram_score,
    remote_score,
    train_ngram,
    uniform_score,
)
from .semantic import (
    DecodeDiagnostics,
    DecodeResult,
    PrefixGroup,
    SemanticDecoderConfig,
    bits_to_byte,
    bits_to_bytes,
    bytes_to_bits,
    final_select,
    group_by_prefix,
    llm_viterbi_decode,
    path_joint_score,
    prune_to_best_prefix,
)
from .viterbi import (
    DecodePath,
    branch_metric,
    kbest_decode,
    kbest_step,
    viterbi_decode,
)

__version__ = "0.1.0"
