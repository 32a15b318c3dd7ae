import json
import os

import numpy as np
import pytest

from lmviterbi import ExperimentConfig, SweepError, error_metrics, levenshtein, \
    load_corpus, measure_latency, run_sweep
from lmviterbi.harness import CSV_COLUMNS, ChannelSpec, CodeSpec, CorpusSpec, \
    DecoderSpec, OutputSpec, PriorSpec, StopRule

from stub_bridge import StubBridge
from synthetic_text import make_sentences


def _write_corpus(path, sentences):
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(s.decode("latin-1") + "\n")


@pytest.fixture()
def corpus_file(tmp_path, text_world):
    _, test, _ = text_world
    path = tmp_path / "corpus.txt"
    _write_corpus(path, test)
    return path


def _config(tmp_path, corpus_path, decoders, ebn0=(3.0,), seed=1234,
            max_frames=20, target=10**6, prior=None, measure_time=False,
            trial_log=None):
    return ExperimentConfig(
        code=CodeSpec(generators=("7", "5"), constraint_length=3),
        channel=ChannelSpec(ebn0_db=tuple(ebn0), seed=seed),
        corpus=CorpusSpec(path=str(corpus_path)),
        prior=prior or PriorSpec(kind="uniform"),
        decoders=tuple(decoders),
        stop=StopRule(target_block_errors=target, max_frames=max_frames),
        output=OutputSpec(csv_path=str(tmp_path / "out.csv"),
                          trial_log_path=str(trial_log) if trial_log else None,
                          measure_time=measure_time),
    )


class TestLoadCorpus:
    def test_length_filter(self, tmp_path):
        path = tmp_path / "c.txt"
        _write_corpus(path, [b"a" * 50, b"b" * 90, b"c" * 130])
        assert load_corpus(path, 80, 120) == [b"b" * 90]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("")
        with pytest.raises(ValueError):
            load_corpus(path)

    def test_no_upper_bound(self, tmp_path):
        path = tmp_path / "c.txt"
        _write_corpus(path, [b"a" * 50, b"b" * 90, b"c" * 130])
        assert len(load_corpus(path, 1, None)) == 3

    def test_strict_ascii(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("café\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_corpus(path, strict_ascii=True)
        assert load_corpus(path, strict_ascii=False) == ["café".encode("latin-1")]


class TestErrorMetrics:
    def test_identical(self):
        bits = np.ones(16, dtype=np.uint8)
        assert error_metrics(bits, bits, b"ab", b"ab") == (0.0, 0, 0.0, 0)

    def test_one_bit_flip(self):
        ref = np.zeros(800, dtype=np.uint8)
        hyp = ref.copy()
        hyp[17] = 1
        ber, block, _, _ = error_metrics(ref, hyp, b"x" * 100, b"x" * 100)
        assert ber == pytest.approx(1 / 800)
        assert block == 1

    def test_hello_hallo(self):
        ref = np.zeros(40, dtype=np.uint8)
        ber, block, cer, edit = error_metrics(ref, ref, b"HELLO", b"HALLO")
        assert cer == pytest.approx(1 / 5)
        assert edit == 1

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            error_metrics(np.zeros(8), np.zeros(16), b"a", b"ab")

    def test_levenshtein_cases(self):
        assert levenshtein(b"kitten", b"sitting") == 3
        assert levenshtein(b"", b"abc") == 3
        assert levenshtein(b"abc", b"abc") == 0
        assert levenshtein(b"abcd", b"bcd") == 1


class TestRunSweep:
    def test_stop_rule_on_errors(self, tmp_path, corpus_file):
        config = _config(tmp_path, corpus_file, [DecoderSpec(kind="standard")],
                         ebn0=(-2.0,), target=3, max_frames=500)
        result = run_sweep(config)
        row = result.rows[0]
        assert row.block_errors >= 3
        assert row.frames < 500

    def test_noiseless_limit(self, tmp_path, corpus_file):
        config = _config(tmp_path, corpus_file, [DecoderSpec(kind="standard")],
                         ebn0=(60.0,), max_frames=5)
        row = run_sweep(config).rows[0]
        assert row.bler == 0.0
        assert row.frames == 5

    def test_determinism(self, tmp_path, corpus_file, text_world):
        _, _, _ = text_world
        decoders = [DecoderSpec(kind="standard"),
                    DecoderSpec(kind="llm-viterbi", K=4, N=5)]
        prior = PriorSpec(kind="ngram", corpus_path=str(corpus_file))
        config = _config(tmp_path, corpus_file, decoders, ebn0=(2.0, 4.0),
                         max_frames=8, prior=prior)
        first = run_sweep(config)
        csv_one = (tmp_path / "out.csv").read_bytes()
        second = run_sweep(config)
        csv_two = (tmp_path / "out.csv").read_bytes()
        assert csv_one == csv_two
        assert first.csv_text == second.csv_text

    def test_csv_columns(self, tmp_path, corpus_file):
        config = _config(tmp_path, corpus_file, [DecoderSpec(kind="standard")],
                         max_frames=2)
        run_sweep(config)
        header = (tmp_path / "out.csv").read_text().splitlines()[0]
        assert header.split(",") == CSV_COLUMNS

    def test_decoders_see_identical_noise(self, tmp_path, corpus_file):
        # a K=1 list decoder must match the standard decoder frame by frame
        decoders = [DecoderSpec(kind="standard"), DecoderSpec(kind="kbest", K=1)]
        config = _config(tmp_path, corpus_file, decoders, ebn0=(2.0,),
                         max_frames=12)
        result = run_sweep(config)
        std = [t for t in result.trials if t.decoder_id == "standard"]
        kb = [t for t in result.trials if t.decoder_id == "kbest"]
        assert [t.hyp_text for t in std] == [t.hyp_text for t in kb]

    def test_bler_monotone_in_snr(self, tmp_path, corpus_file):
        config = _config(tmp_path, corpus_file, [DecoderSpec(kind="standard")],
                         ebn0=(1.0, 3.0, 5.0), max_frames=60)
        rows = run_sweep(config).rows
        blers = [r.bler for r in rows]
        ses = [np.sqrt(max(b * (1 - b), 1e-9) / r.frames)
               for b, r in zip(blers, rows)]
        assert blers[0] + 2 * ses[0] >= blers[1] - 2 * ses[1]
        assert blers[1] + 2 * ses[1] >= blers[2] - 2 * ses[2]

    def test_trial_log(self, tmp_path, corpus_file):
        log = tmp_path / "trials.ndjson"
        config = _config(tmp_path, corpus_file, [DecoderSpec(kind="standard")],
                         max_frames=3, trial_log=log)
        run_sweep(config)
        records = [json.loads(line) for line in log.read_text().splitlines()]
        assert len(records) == 3
        assert {"frame", "decoder", "bit_errors", "ref_b64", "hyp_b64"} <= set(records[0])

    def test_oneshot_with_stub_bridge(self, tmp_path, corpus_file):
        with StubBridge() as bridge:  # identity correction
            decoders = [DecoderSpec(kind="standard"),
                        DecoderSpec(kind="oneshot-baseline", endpoint=bridge.endpoint)]
            config = _config(tmp_path, corpus_file, decoders, ebn0=(3.0,),
                             max_frames=6)
            result = run_sweep(config)
        std, one = result.rows
        assert one.decoder == "oneshot-baseline"
        assert one.bler == std.bler  # identity correction changes nothing

    def test_failures_surface_and_abort(self, tmp_path, corpus_file):
        with StubBridge() as bridge:
            bridge.mode = "error"
            decoders = [DecoderSpec(kind="oneshot-baseline", endpoint=bridge.endpoint)]
            config = _config(tmp_path, corpus_file, decoders, ebn0=(3.0,),
                             max_frames=100)
            with pytest.raises(SweepError):
                run_sweep(config)

    def test_latency_ordering(self, tmp_path, corpus_file):
        decoders = [DecoderSpec(kind="standard"),
                    DecoderSpec(kind="llm-viterbi", K=8, N=5)]
        config = _config(tmp_path, corpus_file, decoders, ebn0=(3.0,),
                         max_frames=5, measure_time=True,
                         prior=PriorSpec(kind="ngram",
                                         corpus_path=str(corpus_file)))
        result = run_sweep(config)
        latency = measure_latency(result.trials)
        assert latency[("llm-viterbi", 3.0)] > latency[("standard", 3.0)]

    def test_from_toml(self, tmp_path, corpus_file):
        toml_path = tmp_path / "exp.toml"
        toml_path.write_text(f"""
schema_version = 1

[code]
generators = ["7", "5"]
constraint_length = 3

[channel]
ebn0_db = [3.0]
seed = 7

[corpus]
path = "{os.path.basename(corpus_file)}"

[prior]
kind = "uniform"

[[decoders]]
kind = "standard"

[stop]
target_block_errors = 1000000
max_frames = 4

[output]
csv_path = "toml_out.csv"
measure_time = false
""")
        config = ExperimentConfig.from_toml(toml_path)
        assert config.corpus.path == str(corpus_file)
        result = run_sweep(config)
        assert (tmp_path / "toml_out.csv").exists()
        assert result.rows[0].frames == 4

    def test_schema_version_required(self, tmp_path):
        toml_path = tmp_path / "bad.toml"
        toml_path.write_text("schema_version = 99\n")
        with pytest.raises(SweepError):
            ExperimentConfig.from_toml(toml_path)

    def test_unknown_keys_rejected(self, tmp_path, corpus_file):
        toml_path = tmp_path / "bad.toml"
        toml_path.write_text("""
schema_version = 1
[code]
generators = ["7", "5"]
constraint_length = 3
bogus_knob = true
""")
        with pytest.raises(SweepError):
            ExperimentConfig.from_toml(toml_path)
