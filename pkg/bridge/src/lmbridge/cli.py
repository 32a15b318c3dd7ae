"""lmbridge command line: serve, finetune, train-correction, export-pairs."""

from __future__ import annotations

import argparse
import base64
import json
import sys

from .correct import Corrector
from .model import ByteLm
from .server import BridgeServer, BridgeState
from .similarity import SimilarityScorer
from .train import finetune_lm, load_pairs, load_sentences, train_correction


def _cmd_serve(args) -> int:
    lm = ByteLm.load(args.model, max_context=args.max_context)
    corrector = None
    if args.correction:
        corrector = Corrector(ByteLm.load(args.correction))
    similarity = SimilarityScorer(args.sbert)
    state = BridgeState(lm, model_name=args.name, corrector=corrector,
                        similarity=similarity)
    server = BridgeServer(state, host=args.host, port=args.port)
    print(f"serving {args.name} on {server.endpoint} "
          f"(similarity backend: {similarity.backend})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def _build_or_load(args) -> ByteLm:
    if args.init:
        return ByteLm.load(args.init)
    return ByteLm.build(d_model=args.d_model, num_layers=args.layers,
                        num_heads=args.heads, d_ff=args.d_ff, seed=args.seed)


def _cmd_finetune(args) -> int:
    sentences = load_sentences(args.corpus, args.min_chars, args.max_chars)
    lm = _build_or_load(args)
    print(f"training on {len(sentences)} sentences "
          f"({sum(len(s) for s in sentences)} bytes)")
    finetune_lm(lm, sentences, epochs=args.epochs, batch_size=args.batch_size,
                lr=args.lr, seed=args.seed)
    lm.save(args.out)
    print(f"saved checkpoint to {args.out}")
    return 0


def _cmd_train_correction(args) -> int:
    pairs = load_pairs(args.pairs)
    lm = _build_or_load(args)
    print(f"training correction model on {len(pairs)} pairs")
    train_correction(lm, pairs, epochs=args.epochs, batch_size=args.batch_size,
                     lr=args.lr, seed=args.seed)
    lm.save(args.out)
    print(f"saved checkpoint to {args.out}")
    return 0


def _cmd_export_pairs(args) -> int:
    """Trial log (NDJSON with ref_b64/hyp_b64) -> tab-separated noisy/clean."""
    count = 0
    with open(args.trials, "r", encoding="utf-8") as src, \
            open(args.out, "w", encoding="utf-8") as dst:
        for line in src:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if record.get("failed"):
                continue
            if args.decoder and record.get("decoder") != args.decoder:
                continue
            noisy = base64.b64decode(record["hyp_b64"]).decode("latin-1")
            clean = base64.b64decode(record["ref_b64"]).decode("latin-1")
            if "\t" in noisy or "\t" in clean:
                continue
            dst.write(f"{noisy}\t{clean}\n")
            count += 1
    print(f"wrote {count} pairs to {args.out}")
    return 0 if count else 1


def _cmd_similarity(args) -> int:
    scorer = SimilarityScorer(args.model)
    value = scorer.similarity(args.a.encode("latin-1"), args.b.encode("latin-1"))
    print(f"{value:.6f}")
    return 0


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--init", help="continue from an existing checkpoint")
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-model", type=int, default=128)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--d-ff", type=int, default=256)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmbridge",
        description="Byte-level LM server for the decoder wire protocol",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="serve a trained checkpoint over TCP")
    p.add_argument("--model", required=True, help="byte LM checkpoint directory")
    p.add_argument("--correction", help="one-shot correction checkpoint")
    p.add_argument("--sbert", help="sentence-embedding model path (optional)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=9000)
    p.add_argument("--name", default="byte-t5")
    p.add_argument("--max-context", type=int, default=384)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("finetune", help="autoregressive training on a corpus")
    p.add_argument("--corpus", required=True, help="one sentence per line")
    p.add_argument("--min-chars", type=int, default=80)
    p.add_argument("--max-chars", type=int, default=120)
    _add_train_flags(p)
    p.set_defaults(func=_cmd_finetune)

    p = sub.add_parser("train-correction",
                       help="seq2seq training on noisy/clean pairs")
    p.add_argument("--pairs", required=True, help="tab-separated noisy/clean")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train_correction)

    p = sub.add_parser("export-pairs",
                       help="decoder trial log -> correction training pairs")
    p.add_argument("--trials", required=True, help="NDJSON trial log")
    p.add_argument("--out", required=True)
    p.add_argument("--decoder", default="standard",
                   help="which decoder's outputs become the noisy side")
    p.set_defaults(func=_cmd_export_pairs)

    p = sub.add_parser("similarity", help="score two strings")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--model", help="sentence-embedding model path")
    p.set_defaults(func=_cmd_similarity)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
