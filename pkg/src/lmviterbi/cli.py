"""Command-line entry point.

Subcommands: encode, decode, simulate, sweep, train-ngram, lm-check.
Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
Symbol files hold one real value per line at 17 significant digits; bit
files hold one line of 0/1 characters.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .channel import NoiseSpec, awgn_apply, bpsk_modulate, ebn0_to_sigma
from .codes import build_trellis, free_distance, encode, parse_generator_spec
from .harness import ENDPOINT_ENV_VAR, ExperimentConfig, SweepError, error_metrics, \
    load_corpus, run_sweep
from .priors import BridgeClient, BridgeError, ByteNGramModel, RemotePrior, \
    UniformPrior, check_conformance, train_ngram
from .semantic import SemanticDecoderConfig, bits_to_bytes, bytes_to_bits, \
    llm_viterbi_decode
from .viterbi import kbest_decode, viterbi_decode

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _add_code_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--generators", default="7,5",
                        help="comma-separated octal generator masks (default 7,5)")
    parser.add_argument("--nu", type=int, default=3,
                        help="constraint length (default 3)")
    parser.add_argument("--recursive", action="store_true",
                        help="recursive-systematic encoder (last mask = feedback)")
    parser.add_argument("--no-terminate", dest="terminate", action="store_false",
                        help="skip zero-tail termination")


def _build_trellis(args):
    gs = parse_generator_spec(args.generators.split(","), args.nu, args.recursive)
    return build_trellis(gs)


def _add_prior_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--prior", choices=["uniform", "ngram", "remote"],
                        default="uniform")
    parser.add_argument("--model", help="n-gram model file (prior=ngram)")
    parser.add_argument("--endpoint",
                        default=os.environ.get(ENDPOINT_ENV_VAR),
                        help=f"bridge endpoint host:port (default ${ENDPOINT_ENV_VAR})")


def _make_prior(args):
    if args.prior == "uniform":
        return UniformPrior(), None
    if args.prior == "ngram":
        if not args.model:
            raise SystemExit2("--model is required with --prior ngram")
        return ByteNGramModel.load(args.model), None
    if not args.endpoint:
        raise SystemExit2("--endpoint (or the environment default) is required")
    client = BridgeClient(args.endpoint)
    return RemotePrior(client), client


class SystemExit2(Exception):
    """Usage error detected after argparse."""


def _read_symbols(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return np.array([float(line) for line in fh if line.strip()])


def _write_symbols(path, symbols) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in symbols:
            fh.write(f"{float(v):.17g}\n")


def _read_text_arg(args) -> bytes:
    if args.text is not None:
        return args.text.encode("latin-1")
    with open(args.infile, "rb") as fh:
        return fh.read().rstrip(b"\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_encode(args) -> int:
    trellis = _build_trellis(args)
    data = _read_text_arg(args)
    bits = bytes_to_bits(data)
    coded = encode(trellis, bits, terminate=args.terminate)
    line = "".join(str(int(b)) for b in coded)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(line + "\n")
    else:
        print(line)
    return 0


def _cmd_decode(args) -> int:
    trellis = _build_trellis(args)
    received = _read_symbols(args.infile)
    if args.decoder == "standard":
        bits = viterbi_decode(trellis, received, args.terminate)
    elif args.decoder == "kbest":
        top = kbest_decode(trellis, received, args.K, args.terminate)[0]
        bits = top.info_bit_array(trellis.memory if args.terminate else 0)
    else:
        prior, client = _make_prior(args)
        if args.sigma2 is not None:
            sigma2 = args.sigma2
        elif args.ebn0 is not None:
            sigma2 = ebn0_to_sigma(args.ebn0, trellis.generator.rate) ** 2
        else:
            raise SystemExit2("llm-viterbi needs --sigma2 or --ebn0")
        cfg = SemanticDecoderConfig(sigma2=sigma2, K=args.K, N=args.N,
                                    terminated=args.terminate)
        try:
            result = llm_viterbi_decode(trellis, received, prior, cfg)
        finally:
            if client is not None:
                client.close()
        bits = result.bits
    text = bits_to_bytes(bits).decode("latin-1")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_simulate(args) -> int:
    trellis = _build_trellis(args)
    data = _read_text_arg(args)
    bits = bytes_to_bits(data)
    print(f"message: {data.decode('latin-1')!r} ({len(data)} chars, "
          f"{bits.size} info bits)")
    print(f"code: generators ({args.generators}) nu={args.nu} "
          f"recursive={args.recursive} free_distance={free_distance(trellis)}")
    coded = encode(trellis, bits, terminate=args.terminate)
    print(f"coded bits: {coded.size} (rate {trellis.generator.rate})")
    sigma = ebn0_to_sigma(args.ebn0, trellis.generator.rate)
    clean = bpsk_modulate(coded)
    received = awgn_apply(clean, NoiseSpec(sigma=sigma, ebn0_db=args.ebn0,
                                           seed=args.seed))
    print(f"channel: Eb/N0 = {args.ebn0} dB, sigma = {sigma:.5f}, seed = {args.seed}")
    if args.decoder == "llm-viterbi":
        prior, client = _make_prior(args)
        cfg = SemanticDecoderConfig(sigma2=sigma * sigma, K=args.K, N=args.N,
                                    terminated=args.terminate)
        try:
            result = llm_viterbi_decode(trellis, received, prior, cfg)
        finally:
            if client is not None:
                client.close()
        hyp_bits, hyp = result.bits, result.text
        d = result.diagnostics
        print(f"decoder: llm-viterbi K={args.K} N={args.N}: {d.lm_calls} LM calls, "
              f"peak {d.peak_paths} paths, {d.wall_ms:.1f} ms")
        for j, num_groups, survivors in d.prune_events:
            print(f"  checkpoint j={j}: {num_groups} prefix groups -> "
                  f"{survivors} paths kept")
    elif args.decoder == "kbest":
        top = kbest_decode(trellis, received, args.K, args.terminate)[0]
        hyp_bits = top.info_bit_array(trellis.memory if args.terminate else 0)
        hyp = top.chars
        print(f"decoder: kbest K={args.K}")
    else:
        hyp_bits = viterbi_decode(trellis, received, args.terminate)
        hyp = bits_to_bytes(hyp_bits)
        print("decoder: standard viterbi")
    ber, block, cer, edit = error_metrics(bits, hyp_bits, data, hyp)
    print(f"decoded: {hyp.decode('latin-1')!r}")
    print(f"metrics: ber={ber:.5f} block_error={block} cer={cer:.5f} edit={edit}")
    return 0 if block == 0 else 0


def _cmd_sweep(args) -> int:
    config = ExperimentConfig.from_toml(args.config)
    if args.out:
        from dataclasses import replace
        config = replace(config, output=replace(config.output, csv_path=args.out))
    result = run_sweep(config)
    print(f"wrote {len(result.rows)} rows to {config.output.csv_path}")
    for row in result.rows:
        print(f"  {row.decoder} @ {row.ebn0_db} dB: bler={row.bler:.4g} "
              f"({row.block_errors}/{row.frames} frames)")
    return 0


def _cmd_train_ngram(args) -> int:
    sentences = load_corpus(args.corpus, args.min_chars,
                            args.max_chars, strict_ascii=False)
    model = train_ngram(sentences, order=args.order, alpha=args.alpha)
    model.save(args.out)
    print(f"trained order-{args.order} model on {len(sentences)} sentences "
          f"-> {args.out}")
    return 0


def _cmd_lm_check(args) -> int:
    prior, client = _make_prior(args)
    try:
        report = check_conformance(prior, num_contexts=args.contexts,
                                   chain_tol=args.chain_tol,
                                   norm_tol=args.norm_tol)
    finally:
        if client is not None:
            client.close()
    print(report.summary())
    print("conformance:", "PASS" if report.passed else "FAIL")
    return 0 if report.passed else RUNTIME_ERROR


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmviterbi",
        description="Convolutional coding with language-model-guided decoding",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode text to a coded-bits file")
    _add_code_flags(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--text")
    group.add_argument("--in", dest="infile")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("decode", help="decode a symbol file to text")
    _add_code_flags(p)
    _add_prior_flags(p)
    p.add_argument("--in", dest="infile", required=True,
                   help="symbol file, one real value per line")
    p.add_argument("--out")
    p.add_argument("--decoder", choices=["standard", "kbest", "llm-viterbi"],
                   default="standard")
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--N", type=int, default=5)
    p.add_argument("--ebn0", type=float, help="Eb/N0 in dB (sets sigma^2)")
    p.add_argument("--sigma2", type=float, help="override noise variance")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("simulate", help="single frame end-to-end with trace")
    _add_code_flags(p)
    _add_prior_flags(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--text")
    group.add_argument("--in", dest="infile")
    p.add_argument("--ebn0", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--decoder", choices=["standard", "kbest", "llm-viterbi"],
                   default="standard")
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--N", type=int, default=5)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="run an experiment config to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the CSV output path")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("train-ngram", help="train a byte n-gram model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--min-chars", type=int, default=1)
    p.add_argument("--max-chars", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_ngram)

    p = sub.add_parser("lm-check", help="run the prior conformance suite")
    _add_prior_flags(p)
    p.add_argument("--contexts", type=int, default=100)
    p.add_argument("--chain-tol", type=float, default=1e-6)
    p.add_argument("--norm-tol", type=float, default=1e-4)
    p.set_defaults(func=_cmd_lm_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        return args.func(args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (SweepError, BridgeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
