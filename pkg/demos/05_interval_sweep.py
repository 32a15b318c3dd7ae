"""Evaluation-interval study: BLER for N in {1, 3, 5, 35} via the harness.

Writes demos_interval.csv next to the working directory and prints the rows.
Deliberately small frame counts; raise max_frames for smoother curves.

Run: python demos/05_interval_sweep.py
"""

import numpy as np

from lmviterbi import run_sweep
from lmviterbi.harness import ChannelSpec, CodeSpec, CorpusSpec, DecoderSpec, \
    ExperimentConfig, OutputSpec, PriorSpec, StopRule

VOCAB = ("the and for are but not you all any can had her was one our out "
         "day get has him his how man new now old see two way who").split()


def sentence(rng, min_len=40):
    words = []
    while sum(map(len, words)) + len(words) - 1 < min_len:
        words.append(VOCAB[rng.integers(0, len(VOCAB))])
    return (" ".join(words) + ".").encode()


rng = np.random.default_rng(3)
with open("demos_train.txt", "w") as fh:
    fh.writelines(sentence(rng).decode() + "\n" for _ in range(400))
with open("demos_test.txt", "w") as fh:
    fh.writelines(sentence(rng).decode() + "\n" for _ in range(60))

config = ExperimentConfig(
    code=CodeSpec(generators=("7", "5"), constraint_length=3),
    channel=ChannelSpec(ebn0_db=(1.5, 2.5), seed=77),
    corpus=CorpusSpec(path="demos_test.txt"),
    prior=PriorSpec(kind="ngram", corpus_path="demos_train.txt", order=3, alpha=0.1),
    decoders=tuple(DecoderSpec(kind="llm-viterbi", K=8, N=n) for n in (1, 3, 5, 35)),
    stop=StopRule(target_block_errors=10**9, max_frames=80),
    output=OutputSpec(csv_path="demos_interval.csv", measure_time=True),
)

result = run_sweep(config)
print(f"{'Eb/N0':>6} {'N':>4} {'BLER':>8} {'mean LM calls':>14} {'ms/frame':>9}")
for row in result.rows:
    print(f"{row.ebn0_db:>6.1f} {row.N:>4d} {row.bler:>8.3f} "
          f"{row.mean_lm_calls:>14.1f} {row.mean_decode_ms:>9.1f}")
print("\nfull rows in demos_interval.csv")
