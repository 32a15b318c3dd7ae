import numpy as np
import pytest

from lmviterbi import (
    DecodePath,
    bpsk_modulate,
    branch_metric,
    ebn0_to_sigma,
    encode,
    kbest_decode,
    kbest_step,
    viterbi_decode,
)


def _transmit(trellis, bits, sigma, rng):
    clean = bpsk_modulate(encode(trellis, bits, terminate=True))
    return clean + rng.normal(0.0, sigma, clean.size)


def _codebook(trellis, length):
    """BPSK images of every terminated encoding of `length` info bits."""
    rows = []
    for msg in range(2**length):
        bits = [(msg >> (length - 1 - i)) & 1 for i in range(length)]
        rows.append(bpsk_modulate(encode(trellis, bits, terminate=True)))
    return np.array(rows)


def _msg_bits(msg, length):
    return np.array([(msg >> (length - 1 - i)) & 1 for i in range(length)],
                    dtype=np.uint8)


class TestBranchMetric:
    def test_exact_match(self):
        assert branch_metric([1.0, 1.0], [0, 0]) == 0.0

    def test_opposite(self):
        assert branch_metric([1.0, 1.0], [1, 1]) == 8.0

    def test_fractional(self):
        assert branch_metric([0.5, -0.3], [0, 1]) == pytest.approx(0.74)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            branch_metric([1.0], [0, 0])


class TestViterbiDecode:
    def test_noiseless_recovery(self, trellis75):
        rng = np.random.default_rng(0)
        bits = rng.integers(0, 2, 64)
        received = bpsk_modulate(encode(trellis75, bits, terminate=True))
        assert np.array_equal(viterbi_decode(trellis75, received, True), bits)

    def test_single_flip_corrected(self, trellis75):
        rng = np.random.default_rng(1)
        for _ in range(20):
            bits = rng.integers(0, 2, 32)
            received = bpsk_modulate(encode(trellis75, bits, terminate=True))
            received[rng.integers(0, received.size)] *= -1.0
            assert np.array_equal(viterbi_decode(trellis75, received, True), bits)

    def test_ml_oracle(self, trellis75):
        length = 12
        codebook = _codebook(trellis75, length)
        sigma = ebn0_to_sigma(2.0, 0.5)
        rng = np.random.default_rng(2)
        for _ in range(100):
            msg = int(rng.integers(0, 2**length))
            received = codebook[msg] + rng.normal(0.0, sigma, codebook.shape[1])
            ml = int(np.argmin(((received - codebook) ** 2).sum(axis=1)))
            got = viterbi_decode(trellis75, received, True)
            assert np.array_equal(got, _msg_bits(ml, length))

    def test_unterminated_frames(self, trellis75):
        rng = np.random.default_rng(3)
        bits = rng.integers(0, 2, 40)
        received = bpsk_modulate(encode(trellis75, bits, terminate=False))
        assert np.array_equal(viterbi_decode(trellis75, received, False), bits)

    def test_bad_frame_length(self, trellis75):
        with pytest.raises(ValueError):
            viterbi_decode(trellis75, np.zeros(7), True)


class TestKbestStep:
    def test_k1_matches_acs(self, trellis75):
        # two paths merging into one state: survivor = min(metric + branch)
        p_a = DecodePath(state=0, metric=1.0, bits=0b00, nbits=2)
        p_b = DecodePath(state=1, metric=2.0, bits=0b01, nbits=2)
        # predecessors of state 0 are (state 0, u=0) and (state 1, u=0);
        # symbols (0, 0) make both branch metrics equal (2.0 each)
        by_state = kbest_step([p_a, p_b], trellis75, [0.0, 0.0], K=1)
        merged = by_state[0]
        assert len(merged) == 1
        assert merged[0].metric == pytest.approx(3.0)
        assert merged[0].bits == 0b000

    def test_k_exceeds_arrivals(self, trellis75):
        paths = [DecodePath(state=s, metric=float(s), bits=s, nbits=2)
                 for s in range(3)]
        by_state = kbest_step(paths, trellis75, [0.3, -0.2], K=4)
        assert sum(len(v) for v in by_state.values()) == 6

    def test_retention_cap(self, trellis75):
        paths = [DecodePath(state=s, metric=float(s), bits=s, nbits=2)
                 for s in range(4)] * 3
        by_state = kbest_step(paths, trellis75, [0.3, -0.2], K=2)
        assert all(len(v) <= 2 for v in by_state.values())
        for bucket in by_state.values():
            metrics = [p.metric for p in bucket]
            assert metrics == sorted(metrics)


class TestKbestDecode:
    def test_k1_equals_viterbi(self, trellis75):
        rng = np.random.default_rng(4)
        sigma = ebn0_to_sigma(2.0, 0.5)
        for _ in range(100):
            bits = rng.integers(0, 2, 40)
            received = _transmit(trellis75, bits, sigma, rng)
            top = kbest_decode(trellis75, received, K=1, terminated=True)[0]
            assert np.array_equal(top.info_bit_array(2),
                                  viterbi_decode(trellis75, received, True))

    def test_global_topk_oracle(self, trellis75):
        length, K = 8, 4
        codebook = _codebook(trellis75, length)
        sigma = ebn0_to_sigma(2.0, 0.5)
        rng = np.random.default_rng(5)
        for _ in range(50):
            msg = int(rng.integers(0, 2**length))
            received = codebook[msg] + rng.normal(0.0, sigma, codebook.shape[1])
            metrics = ((received - codebook) ** 2).sum(axis=1)
            want = sorted(range(2**length), key=lambda m: (metrics[m], m))[:K]
            got = kbest_decode(trellis75, received, K=K, terminated=True)
            got_msgs = [int.from_bytes(p.chars, "big") for p in got]
            assert got_msgs == want
            for path, msg_id in zip(got, want):
                assert path.metric == pytest.approx(metrics[msg_id], rel=1e-9)

    def test_metrics_sorted(self, trellis75):
        rng = np.random.default_rng(6)
        received = _transmit(trellis75, rng.integers(0, 2, 24), 1.0, rng)
        paths = kbest_decode(trellis75, received, K=6, terminated=True)
        metrics = [p.metric for p in paths]
        assert metrics == sorted(metrics)

    def test_metric_additivity(self, trellis75):
        rng = np.random.default_rng(7)
        received = _transmit(trellis75, rng.integers(0, 2, 24), 0.8, rng)
        for path in kbest_decode(trellis75, received, K=8, terminated=True):
            bits = path.bit_array()
            state = 0
            total = 0.0
            for t, b in enumerate(bits):
                ns, out = trellis75.transition(state, int(b))
                total += branch_metric(received[2 * t:2 * t + 2], out)
                state = ns
            assert path.metric == pytest.approx(total, rel=1e-9)

    def test_standard_survivor_in_kbest_list(self, trellis75):
        # ACS survivor metric at every (state, time) equals the best K-best
        # member there: run the K-best extension manually alongside numpy ACS
        rng = np.random.default_rng(8)
        bits = rng.integers(0, 2, 32)
        received = _transmit(trellis75, bits, 1.0, rng)
        paths = [DecodePath()]
        num_states = trellis75.num_states
        acs = np.full(num_states, np.inf)
        acs[0] = 0.0
        for t in range(32):
            step = received[2 * t:2 * t + 2]
            by_state = kbest_step(paths, trellis75, step, K=4)
            paths = [p for s in sorted(by_state) for p in by_state[s]]
            nxt = np.full(num_states, np.inf)
            for s in range(num_states):
                for u in (0, 1):
                    ns, out = trellis75.transition(s, u)
                    cand = acs[s] + branch_metric(step, out)
                    nxt[ns] = min(nxt[ns], cand)
            acs = nxt
            for s, bucket in by_state.items():
                assert bucket[0].metric == pytest.approx(acs[s], rel=1e-9)

    def test_byte_assembly(self, trellis75):
        data = b"Hi"
        bits = np.unpackbits(np.frombuffer(data, np.uint8))
        received = bpsk_modulate(encode(trellis75, bits, terminate=True))
        top = kbest_decode(trellis75, received, K=2, terminated=True)[0]
        assert top.chars == data

    def test_k_validation(self, trellis75):
        with pytest.raises(ValueError):
            kbest_decode(trellis75, np.zeros(8), K=0, terminated=False)
