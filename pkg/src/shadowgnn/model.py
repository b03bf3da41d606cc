"""Encoder plus decoder as one parameter tree."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .decoder import Decoder, Teacher
from .encoder import Encoder, EncoderConfig, EncoderInput, EncoderOutput
from .numerics import Module, Tensor


class ShadowGNN(Module):
    def __init__(self, rng: np.random.Generator, vocab_size: int, config: EncoderConfig):
        self.encoder = Encoder(rng, vocab_size, config)
        self.decoder = Decoder(rng, config.d)

    def encode(self, inp: EncoderInput, rng: Optional[np.random.Generator] = None) -> EncoderOutput:
        return self.encoder(inp, rng=rng)

    def loss(self, inp: EncoderInput, gold: Teacher, rng: Optional[np.random.Generator] = None) -> Tensor:
        return self.decoder.loss(self.encoder(inp, rng=rng), gold)

    def decode_scored(self, inp: EncoderInput, beam_size: int = 5) -> tuple[list, float]:
        return self.decoder.decode_scored(self.encoder(inp), inp.graph, beam_size)
