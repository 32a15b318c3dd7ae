"""Tour of code definition, trellis construction, and encoding.

Run: python demos/01_codes_and_trellis.py
"""

import numpy as np

from lmviterbi import build_trellis, encode, free_distance, parse_generator_spec

# The workhorse rate-1/2 code: octal generators (7, 5), constraint length 3.
gs = parse_generator_spec(["7", "5"], constraint_length=3)
trellis = build_trellis(gs)
print(f"code: taps {[oct(m) for m in gs.output_taps]}, rate {gs.rate}, "
      f"{gs.num_states} states, free distance {free_distance(trellis)}")

print("\ntransition table (state, input -> next state, output bits):")
for state in range(trellis.num_states):
    for bit in (0, 1):
        ns, out = trellis.transition(state, bit)
        print(f"  {state:02b} --{bit}/{out[0]}{out[1]}--> {ns:02b}")

print("\nimpulse response (input 1 0 0):", encode(trellis, [1, 0, 0], terminate=False))

bits = np.random.default_rng(0).integers(0, 2, 12)
coded = encode(trellis, bits, terminate=True)
print(f"\nencode {bits.tolist()} with zero-tail termination:")
print(f"  {coded.tolist()}  ({coded.size} coded bits = 2 * (12 info + 2 tail))")

# The recursive-systematic form of the same polynomials, as in (1, 7/5):
rsc = build_trellis(parse_generator_spec(["7", "5"], 3, recursive=True))
out = encode(rsc, bits, terminate=False)
print(f"\nrecursive-systematic variant: first output stream equals the input: "
      f"{np.array_equal(out[0::2], bits)}")
