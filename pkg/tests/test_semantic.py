import math

import numpy as np
import pytest

from lmviterbi import (
    DecodePath,
    LmPrior,
    PrefixGroup,
    SemanticDecoderConfig,
    UniformPrior,
    bits_to_byte,
    bits_to_bytes,
    bpsk_modulate,
    build_trellis,
    bytes_to_bits,
    ebn0_to_sigma,
    encode,
    final_select,
    group_by_prefix,
    llm_viterbi_decode,
    parse_generator_spec,
    path_joint_score,
    prune_to_best_prefix,
    viterbi_decode,
)
from lmviterbi.viterbi import branch_metric


class TablePrior(LmPrior):
    """Fixed log-probabilities per byte string, additive over splits."""

    def __init__(self, per_prefix: dict[bytes, float]):
        self.per_prefix = per_prefix

    def score(self, context: bytes, continuation: bytes) -> float:
        if not continuation:
            return 0.0
        return self.per_prefix[context + continuation] - self.per_prefix.get(context, 0.0)


class TestByteMapping:
    def test_ascii_a(self):
        assert bits_to_byte([0, 1, 0, 0, 0, 0, 0, 1]) == 65

    def test_zero(self):
        assert bits_to_byte([0] * 8) == 0

    def test_ascii_h(self):
        assert bits_to_byte([0, 1, 1, 0, 1, 0, 0, 0]) == 104

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            bits_to_byte([0, 1])

    def test_roundtrip(self):
        data = b"Hello, world!"
        assert bits_to_bytes(bytes_to_bits(data)) == data

    def test_matches_path_assembly(self):
        value = 0b01000001
        path = DecodePath(bits=value, nbits=8)
        path.complete_byte()
        assert path.chars == bytes([bits_to_byte([(value >> (7 - i)) & 1
                                                  for i in range(8)])])


class TestJointScore:
    def test_zero(self):
        assert path_joint_score(0.0, 0.0, 1.0) == 0.0

    def test_substitution(self):
        assert path_joint_score(2.0, -3.0, 1.0) == pytest.approx(-4.0)

    def test_sigma_scaling(self):
        m, logp = 6.0, -1.5
        a = path_joint_score(m, logp, 1.0)
        b = path_joint_score(m, logp, 2.0)
        assert (a - logp) == pytest.approx(2 * (b - logp))

    def test_argmax_invariant_to_shift(self):
        scores = [path_joint_score(m, lp, 0.7) for m, lp in
                  [(1.0, -2.0), (0.5, -4.0), (2.0, -0.5)]]
        shifted = [s + 123.456 for s in scores]
        assert int(np.argmax(scores)) == int(np.argmax(shifted))

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            path_joint_score(1.0, -1.0, 0.0)


def _path_with(chars: bytes, m_prev: float = 0.0, metric: float = 0.0,
               bits: int = 0) -> DecodePath:
    return DecodePath(state=0, metric=metric, bits=bits,
                      nbits=8 * len(chars), chars=chars, m_last_byte=metric,
                      m_prev_byte=m_prev)


class TestGroupByPrefix:
    def test_hello_variants(self):
        paths = [_path_with(b"HELLO"), _path_with(b"HELLA"),
                 _path_with(b"HALLE"), _path_with(b"HALLT")]
        groups = group_by_prefix(paths, j=5)
        by_prefix = {g.prefix: len(g.members) for g in groups}
        assert by_prefix == {b"HELL": 2, b"HALL": 2}

    def test_single_group(self):
        paths = [_path_with(b"ABCD"), _path_with(b"ABCE")]
        groups = group_by_prefix(paths, j=4)
        assert len(groups) == 1 and len(groups[0].members) == 2

    def test_all_distinct(self):
        paths = [_path_with(bytes([65 + i]) + b"XY") for i in range(5)]
        groups = group_by_prefix(paths, j=3)
        assert len(groups) == 5

    def test_short_path_rejected(self):
        with pytest.raises(ValueError):
            group_by_prefix([_path_with(b"AB")], j=3)


class TestPruneToBestPrefix:
    def test_hell_beats_hall(self):
        lm = TablePrior({b"HELL": -6.0, b"HALL": -11.0})
        hell = [_path_with(b"HELLO", m_prev=10.0), _path_with(b"HELLA", m_prev=10.0)]
        hall = [_path_with(b"HALLE", m_prev=9.0), _path_with(b"HALLT", m_prev=9.0)]
        groups = group_by_prefix(hell + hall, j=5)
        survivors = prune_to_best_prefix(groups, lm, sigma2=1.0)
        # scores: HELL -6 - 10/2 = -11 beats HALL -11 - 9/2 = -15.5
        assert {p.chars for p in survivors} == {b"HELLO", b"HELLA"}
        assert all(p.lm_scored == 4 and p.lm_logprob == -6.0 for p in survivors)

    def test_single_group_keeps_all(self):
        lm = TablePrior({b"ABC": -1.0})
        paths = [_path_with(b"ABCD"), _path_with(b"ABCE"), _path_with(b"ABCF")]
        survivors = prune_to_best_prefix(group_by_prefix(paths, j=4), lm, 1.0)
        assert len(survivors) == 3

    def test_uniform_prior_minimum_metric_wins(self):
        lm = UniformPrior()
        a = [_path_with(b"AAAA", m_prev=4.0)]
        b = [_path_with(b"BBBB", m_prev=2.0)]
        survivors = prune_to_best_prefix(group_by_prefix(a + b, j=4), lm, 1.0)
        assert survivors[0].chars == b"BBBB"

    def test_empty_groups_rejected(self):
        with pytest.raises(ValueError):
            prune_to_best_prefix([], UniformPrior(), 1.0)


class TestFinalSelect:
    def test_single_survivor(self):
        only = _path_with(b"X", metric=3.0)
        assert final_select([only], UniformPrior(), 1.0) is only

    def test_argmax(self):
        lm = TablePrior({b"AB": -1.0, b"CD": -4.0})
        # joint scores: -1 - 2/2 = -2 vs -4 - 2/2 = -5
        good = _path_with(b"AB", metric=2.0, bits=1)
        bad = _path_with(b"CD", metric=2.0, bits=2)
        assert final_select([bad, good], lm, 1.0) is good

    def test_uniform_reduces_to_min_metric(self):
        paths = [_path_with(b"AA", metric=5.0, bits=1),
                 _path_with(b"BB", metric=1.0, bits=2),
                 _path_with(b"CC", metric=3.0, bits=3)]
        assert final_select(paths, UniformPrior(), 1.0).chars == b"BB"

    def test_updates_cache(self):
        lm = TablePrior({b"AB": -1.5})
        p = _path_with(b"AB", metric=0.0)
        final_select([p], lm, 1.0)
        assert p.lm_cache == (2, -1.5)


class TestLlmViterbiDecode:
    def test_noiseless_recovery(self, trellis75, text_world):
        _, test, model = text_world
        sigma2 = ebn0_to_sigma(6.0, 0.5) ** 2
        for prior in (model, UniformPrior()):
            msg = test[0]
            received = bpsk_modulate(encode(trellis75, bytes_to_bits(msg), True))
            cfg = SemanticDecoderConfig(sigma2=sigma2, K=8, N=5)
            result = llm_viterbi_decode(trellis75, received, prior, cfg)
            assert result.text == msg
            assert np.array_equal(result.bits, bytes_to_bits(msg))

    def test_reduction_to_viterbi(self, trellis75):
        rng = np.random.default_rng(11)
        sigma = ebn0_to_sigma(2.0, 0.5)
        chars = 6
        cfg = SemanticDecoderConfig(sigma2=sigma * sigma, K=8, N=chars + 1)
        prior = UniformPrior()
        for _ in range(200):
            msg = bytes(rng.integers(0, 256, chars, dtype=np.uint8))
            bits = bytes_to_bits(msg)
            clean = bpsk_modulate(encode(trellis75, bits, True))
            received = clean + rng.normal(0.0, sigma, clean.size)
            result = llm_viterbi_decode(trellis75, received, prior, cfg)
            assert np.array_equal(result.bits,
                                  viterbi_decode(trellis75, received, True))
            assert not result.diagnostics.prune_events

    def test_micro_map_oracle(self, trellis75, text_world):
        _, _, model = text_world
        sigma = ebn0_to_sigma(0.0, 0.5)
        codebook = np.array([
            bpsk_modulate(encode(trellis75, bytes_to_bits(bytes([b])), True))
            for b in range(256)
        ])
        lm_scores = np.array([model.score(b"", bytes([b])) for b in range(256)])
        cfg = SemanticDecoderConfig(sigma2=sigma * sigma, K=64, N=5)
        rng = np.random.default_rng(12)
        for _ in range(30):
            byte = int(rng.integers(0, 256))
            received = codebook[byte] + rng.normal(0.0, sigma, codebook.shape[1])
            joint = (-((received - codebook) ** 2).sum(axis=1) / (2 * sigma**2)
                     + lm_scores)
            want = int(np.argmax(joint))
            result = llm_viterbi_decode(trellis75, received, model, cfg)
            assert result.text == bytes([want])

    def test_checkpoint_properties(self, trellis75, text_world):
        _, test, model = text_world
        rng = np.random.default_rng(13)
        sigma = ebn0_to_sigma(2.0, 0.5)
        msg = test[1]
        bits = bytes_to_bits(msg)
        clean = bpsk_modulate(encode(trellis75, bits, True))
        received = clean + rng.normal(0.0, sigma, clean.size)
        seen = []

        def hook(j, groups, survivors):
            seen.append((j, groups, list(survivors)))

        cfg = SemanticDecoderConfig(sigma2=sigma * sigma, K=8, N=5)
        result = llm_viterbi_decode(trellis75, received, model, cfg, checkpoint_hook=hook)
        assert seen, "expected at least one checkpoint"
        group_total = 0
        for j, groups, survivors in seen:
            group_total += len(groups)
            # groups partition the K-best population
            assert sum(len(g.members) for g in groups) >= len(survivors)
            for g in groups:
                for member in g.members:
                    # identical prefix implies identical trajectory: recompute
                    # the cumulative metric at bit (j-1)*8 from the bit history
                    recomputed = 0.0
                    state = 0
                    hist = member.bit_array()
                    for t in range((j - 1) * 8):
                        ns, out = trellis75.transition(state, int(hist[t]))
                        recomputed += branch_metric(received[2 * t:2 * t + 2], out)
                        state = ns
                    assert recomputed == pytest.approx(g.m_prefix, rel=1e-9, abs=1e-9)
            # monotone pruning: all survivors agree on the first j-1 bytes
            prefixes = {p.chars[:j - 1] for p in survivors}
            assert len(prefixes) == 1
        # LM-call economy: one call per unique prefix at checkpoints plus one
        # per surviving candidate in the final evaluation
        diag = result.diagnostics
        assert diag.lm_calls == group_total + diag.final_candidates

    def test_peak_paths_by_constraint_length(self, text_world):
        _, test, model = text_world
        rng = np.random.default_rng(14)
        msg = test[2][:30]
        bits = bytes_to_bits(msg)
        sigma = ebn0_to_sigma(3.0, 0.5)
        peaks = {}
        for nu, gens in ((3, ["7", "5"]), (5, ["35", "23"])):
            trellis = build_trellis(parse_generator_spec(gens, nu))
            clean = bpsk_modulate(encode(trellis, bits, True))
            received = clean + rng.normal(0.0, sigma, clean.size)
            cfg = SemanticDecoderConfig(sigma2=sigma * sigma, K=8, N=5)
            result = llm_viterbi_decode(trellis, received, model, cfg)
            peaks[nu] = result.diagnostics.peak_paths
        assert peaks[3] == 8 * 4
        assert peaks[5] == 8 * 16

    def test_tail_excluded_from_text(self, trellis75, text_world):
        _, test, model = text_world
        msg = test[3]
        received = bpsk_modulate(encode(trellis75, bytes_to_bits(msg), True))
        cfg = SemanticDecoderConfig(sigma2=0.25, K=4, N=5)
        result = llm_viterbi_decode(trellis75, received, model, cfg)
        assert len(result.text) == len(msg)
        assert result.bits.size == 8 * len(msg)

    def test_malformed_frame_rejected(self, trellis75):
        cfg = SemanticDecoderConfig(sigma2=1.0, K=2, N=5)
        with pytest.raises(ValueError):
            llm_viterbi_decode(trellis75, np.zeros(30), UniformPrior(), cfg)
        with pytest.raises(ValueError):
            # 12 info bits is not a whole number of bytes
            llm_viterbi_decode(trellis75, np.zeros(28), UniformPrior(), cfg)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SemanticDecoderConfig(sigma2=1.0, K=0)
        with pytest.raises(ValueError):
            SemanticDecoderConfig(sigma2=1.0, N=0)
        with pytest.raises(ValueError):
            SemanticDecoderConfig(sigma2=-1.0)
        with pytest.raises(ValueError):
            SemanticDecoderConfig(sigma2=1.0, char_bits=7)
