"""Byte-level autoregressive scoring with a T5 decoder.

The model runs in decoder-only mode: the encoder sees a single null (pad)
token and the decoder processes the byte sequence with causal
self-attention.  Token ids follow the byte-level T5 convention
(pad=0, eos=1, unk=2, byte b -> 3+b), kept entirely on this side of the
wire; clients speak raw bytes.  Scores renormalize the output distribution
over the 256 byte tokens, so the prior contract (normalization, chain rule,
scores <= 0) holds by construction.
"""

from __future__ import annotations

import os

import torch
from transformers import T5Config, T5ForConditionalGeneration

PAD_ID = 0
EOS_ID = 1
BYTE_OFFSET = 3
VOCAB_SIZE = 384  # 3 specials + 256 bytes + sentinel room

torch.set_num_threads(1)  # deterministic and fastest for these model sizes


def bytes_to_ids(data: bytes) -> list[int]:
    return [BYTE_OFFSET + b for b in data]


def ids_to_bytes(ids) -> bytes:
    out = bytearray()
    for i in ids:
        i = int(i)
        if BYTE_OFFSET <= i < BYTE_OFFSET + 256:
            out.append(i - BYTE_OFFSET)
    return bytes(out)


def build_t5(d_model: int = 128, num_layers: int = 2, num_heads: int = 4,
             d_ff: int = 256, d_kv: int = 32, seed: int = 0) -> T5ForConditionalGeneration:
    torch.manual_seed(seed)
    config = T5Config(
        vocab_size=VOCAB_SIZE,
        d_model=d_model,
        d_kv=d_kv,
        d_ff=d_ff,
        num_layers=num_layers,
        num_decoder_layers=num_layers,
        num_heads=num_heads,
        decoder_start_token_id=PAD_ID,
        pad_token_id=PAD_ID,
        eos_token_id=EOS_ID,
    )
    return T5ForConditionalGeneration(config)


class ByteLm:
    """Loaded byte LM plus the scoring rules of the wire protocol."""

    def __init__(self, model: T5ForConditionalGeneration,
                 max_context: int = 384) -> None:
        self.model = model.eval()
        self.max_context = max_context

    @classmethod
    def build(cls, max_context: int = 384, **kwargs) -> "ByteLm":
        return cls(build_t5(**kwargs), max_context=max_context)

    @classmethod
    def load(cls, path: str, max_context: int = 384) -> "ByteLm":
        model = T5ForConditionalGeneration.from_pretrained(path)
        return cls(model, max_context=max_context)

    def save(self, path: str) -> None:
        os.makedirs(path, exist_ok=True)
        self.model.save_pretrained(path)

    # -- scoring -----------------------------------------------------------

    def _byte_logprobs(self, sequences: list[list[int]]) -> torch.Tensor:
        """Per-position log P(byte | prefix) for a padded batch.

        Returns (batch, max_len, 256); positions predict the token at their
        own index (decoder inputs are the sequences shifted right).
        """
        batch = len(sequences)
        max_len = max(len(s) for s in sequences)
        dec = torch.full((batch, max_len), PAD_ID, dtype=torch.long)
        for row, seq in enumerate(sequences):
            if len(seq) > 1:
                dec[row, 1:len(seq)] = torch.tensor(seq[:-1], dtype=torch.long)
        enc = torch.full((batch, 1), PAD_ID, dtype=torch.long)
        with torch.inference_mode():
            logits = self.model(input_ids=enc, decoder_input_ids=dec).logits
        byte_logits = logits[:, :, BYTE_OFFSET:BYTE_OFFSET + 256]
        return torch.log_softmax(byte_logits.float(), dim=-1)

    def score(self, context: bytes, continuation: bytes) -> tuple[float, bool]:
        """(log-probability of continuation given context, truncated flag)."""
        return self.batch_score([(context, continuation)])[0]

    def batch_score(self, requests: list[tuple[bytes, bytes]]) -> list[tuple[float, bool]]:
        results: list[tuple[float, bool] | None] = [None] * len(requests)
        sequences = []
        spans = []
        rows = []
        for idx, (context, continuation) in enumerate(requests):
            if not continuation:
                results[idx] = (0.0, False)
                continue
            truncated = len(context) > self.max_context
            if truncated:
                context = context[-self.max_context:]
            seq = bytes_to_ids(context + continuation)
            rows.append((idx, truncated))
            spans.append((len(context), len(context) + len(continuation)))
            sequences.append(seq)
        if sequences:
            logprobs = self._byte_logprobs(sequences)
            for row, ((idx, truncated), (lo, hi), seq) in enumerate(
                    zip(rows, spans, sequences)):
                targets = torch.tensor([seq[i] - BYTE_OFFSET for i in range(lo, hi)])
                positions = torch.arange(lo, hi)
                total = logprobs[row, positions, targets].sum()
                results[idx] = (float(total), truncated)
        return results  # type: ignore[return-value]
