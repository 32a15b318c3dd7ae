"""Autoregressive fine-tuning of the byte LM and the correction model.

The objective is next-byte cross-entropy over every position of every
training sentence, optimized with Adam. Defaults: batch size 32, learning
rate 1e-4, 3 epochs, sentences filtered to 80..120 characters.
"""

from __future__ import annotations

import torch

from .model import BYTE_OFFSET, EOS_ID, ByteLm, bytes_to_ids

IGNORE = -100


def load_sentences(path: str, min_chars: int = 80, max_chars: int = 120) -> list[bytes]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line and min_chars <= len(line) <= max_chars:
                out.append(line.encode("latin-1"))
    if not out:
        raise ValueError(f"no sentences in {path} within [{min_chars}, {max_chars}]")
    return out


def _label_batch(token_rows: list[list[int]]) -> torch.Tensor:
    width = max(len(r) for r in token_rows)
    labels = torch.full((len(token_rows), width), IGNORE, dtype=torch.long)
    for i, row in enumerate(token_rows):
        labels[i, :len(row)] = torch.tensor(row, dtype=torch.long)
    return labels


def finetune_lm(
    lm: ByteLm,
    sentences: list[bytes],
    epochs: int = 3,
    batch_size: int = 32,
    lr: float = 1e-4,
    seed: int = 0,
    log=print,
) -> list[float]:
    """Train in decoder-only mode; returns the mean loss per epoch."""
    model = lm.model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    generator = torch.Generator().manual_seed(seed)
    losses = []
    for epoch in range(epochs):
        order = torch.randperm(len(sentences), generator=generator).tolist()
        total, batches = 0.0, 0
        for start in range(0, len(order), batch_size):
            rows = [bytes_to_ids(sentences[i]) for i in order[start:start + batch_size]]
            labels = _label_batch(rows)
            enc = torch.zeros((labels.shape[0], 1), dtype=torch.long)
            loss = model(input_ids=enc, labels=labels).loss
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss)
            batches += 1
        losses.append(total / batches)
        if log:
            log(f"epoch {epoch + 1}/{epochs}: loss {losses[-1]:.4f}")
    model.eval()
    return losses


def perplexity(lm: ByteLm, sentences: list[bytes]) -> float:
    """Per-byte perplexity under the renormalized byte distribution."""
    total_logprob = 0.0
    total_bytes = 0
    for sentence in sentences:
        logprob, _ = lm.score(b"", sentence)
        total_logprob += logprob
        total_bytes += len(sentence)
    return float(torch.exp(torch.tensor(-total_logprob / total_bytes)))


# ---------------------------------------------------------------------------
# One-shot correction (standard encoder-decoder seq2seq)
# ---------------------------------------------------------------------------


def load_pairs(path: str) -> list[tuple[bytes, bytes]]:
    """Tab-separated noisy/clean pairs, one per line."""
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            noisy, _, clean = line.partition("\t")
            pairs.append((noisy.encode("latin-1"), clean.encode("latin-1")))
    if not pairs:
        raise ValueError(f"no pairs in {path}")
    return pairs


def train_correction(
    lm: ByteLm,
    pairs: list[tuple[bytes, bytes]],
    epochs: int = 3,
    batch_size: int = 32,
    lr: float = 1e-4,
    seed: int = 0,
    log=print,
) -> list[float]:
    """Seq2seq training: encoder reads noisy text, decoder emits clean text."""
    model = lm.model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    generator = torch.Generator().manual_seed(seed)
    losses = []
    for epoch in range(epochs):
        order = torch.randperm(len(pairs), generator=generator).tolist()
        total, batches = 0.0, 0
        for start in range(0, len(order), batch_size):
            chunk = [pairs[i] for i in order[start:start + batch_size]]
            enc_rows = [bytes_to_ids(noisy) + [EOS_ID] for noisy, _ in chunk]
            width = max(len(r) for r in enc_rows)
            enc = torch.zeros((len(chunk), width), dtype=torch.long)
            mask = torch.zeros((len(chunk), width), dtype=torch.long)
            for i, row in enumerate(enc_rows):
                enc[i, :len(row)] = torch.tensor(row, dtype=torch.long)
                mask[i, :len(row)] = 1
            labels = _label_batch([bytes_to_ids(clean) + [EOS_ID] for _, clean in chunk])
            loss = model(input_ids=enc, attention_mask=mask, labels=labels).loss
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss)
            batches += 1
        losses.append(total / batches)
        if log:
            log(f"epoch {epoch + 1}/{epochs}: loss {losses[-1]:.4f}")
    model.eval()
    return losses
