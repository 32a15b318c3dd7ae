"""AWGN calibration: measured uncoded BER against the closed form.

Run: python demos/02_channel_calibration.py
"""

import numpy as np

from lmviterbi import NoiseSpec, awgn_apply, bpsk_modulate, ebn0_to_sigma, \
    theoretical_uncoded_ber

rng = np.random.default_rng(42)
n = 200_000
bits = rng.integers(0, 2, n, dtype=np.uint8)

print(f"{'Eb/N0 (dB)':>10} {'measured':>10} {'Q(sqrt(2g))':>12} {'sigma':>8}")
for ebn0 in (0.0, 2.0, 4.0, 6.0, 8.0):
    sigma = ebn0_to_sigma(ebn0, rate=1.0)
    received = awgn_apply(bpsk_modulate(bits),
                          NoiseSpec(sigma=sigma, ebn0_db=ebn0, seed=int(ebn0 * 10)))
    ber = np.mean((received < 0).astype(np.uint8) != bits)
    print(f"{ebn0:>10.1f} {ber:>10.2e} {theoretical_uncoded_ber(ebn0):>12.2e} "
          f"{sigma:>8.4f}")
