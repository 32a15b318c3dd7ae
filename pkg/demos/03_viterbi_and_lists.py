"""Soft Viterbi and the K-best list on one noisy frame.

Run: python demos/03_viterbi_and_lists.py
"""

import numpy as np

from lmviterbi import bpsk_modulate, build_trellis, bytes_to_bits, ebn0_to_sigma, \
    encode, kbest_decode, parse_generator_spec, viterbi_decode

trellis = build_trellis(parse_generator_spec(["7", "5"], 3))
rng = np.random.default_rng(5)

message = b"list decoding"
bits = bytes_to_bits(message)
sigma = ebn0_to_sigma(2.0, 0.5)
clean = bpsk_modulate(encode(trellis, bits, terminate=True))
received = clean + rng.normal(0.0, sigma, clean.size)

decoded = viterbi_decode(trellis, received, terminated=True)
errors = int(np.sum(decoded != bits))
print(f"sent     : {message!r} ({bits.size} bits at Eb/N0 = 2 dB)")
print(f"viterbi  : {bytes(np.packbits(decoded))!r} ({errors} bit errors)")

print("\nK-best list (K = 6): metric ascending, rank 1 = the ML path")
for rank, path in enumerate(kbest_decode(trellis, received, K=6), start=1):
    marker = " <- matches sent text" if path.chars == message else ""
    print(f"  #{rank}: metric {path.metric:8.3f}  {path.chars!r}{marker}")
