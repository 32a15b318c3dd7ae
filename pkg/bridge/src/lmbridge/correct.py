"""One-shot post-correction: decode fully, then rewrite the text seq2seq."""

from __future__ import annotations

import torch

from .model import EOS_ID, ByteLm, bytes_to_ids, ids_to_bytes


class Corrector:
    """Greedy seq2seq rewriting with a trained encoder-decoder checkpoint."""

    def __init__(self, lm: ByteLm, max_extra: int = 16) -> None:
        self.lm = lm
        self.max_extra = max_extra

    def correct(self, text: bytes) -> bytes:
        if not text:
            return b""
        model = self.lm.model
        enc = torch.tensor([bytes_to_ids(text) + [EOS_ID]], dtype=torch.long)
        with torch.inference_mode():
            out = model.generate(
                input_ids=enc,
                max_new_tokens=len(text) + self.max_extra,
                num_beams=1,
                do_sample=False,
            )
        return ids_to_bytes(out[0].tolist())
