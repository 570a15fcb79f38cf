"""Autoregressive vertex sequence module.

Each token is embedded as the sum of a coordinate-type embedding (z/y/x
from its position mod 3), a sequence-position embedding, and a value
embedding over the 257-token vocabulary. A causal transformer decoder with
cross-attention to the point-cloud context predicts the next-token
distribution at every step.
"""

import torch
from torch import nn

from .. import codec
from .blocks import TransformerStack


class VertexModule(nn.Module):
    def __init__(self, config):
        super().__init__()
        self.config = config
        width = config.width
        self.value_emb = nn.Embedding(codec.VERTEX_VOCAB, width)
        self.coord_emb = nn.Embedding(3, width)
        self.pos_emb = nn.Embedding(config.max_vertex_seq_len + 1, width)
        self.start = nn.Parameter(torch.zeros(width))
        self.stack = TransformerStack(
            width, config.heads, config.ff_hidden, config.dropout,
            config.depth, cross_attention=True,
        )
        self.out = nn.Linear(width, codec.VERTEX_VOCAB)
        for emb in (self.value_emb, self.coord_emb, self.pos_emb):
            nn.init.normal_(emb.weight, std=0.02)
        # near-uniform initial distribution
        nn.init.normal_(self.out.weight, std=1e-3)
        nn.init.zeros_(self.out.bias)

    def embed_tokens(self, tokens, start_position=0):
        """Sum of value, coordinate-type, and position embeddings.

        tokens: (B, L) long; `start_position` offsets the sequence position
        (used by incremental decoding).
        """
        b, length = tokens.shape
        positions = torch.arange(start_position, start_position + length, device=tokens.device)
        if length and int(positions[-1]) >= self.pos_emb.num_embeddings:
            raise ValueError("sequence too long")
        coord = positions % 3
        return (
            self.value_emb(tokens)
            + self.coord_emb(coord).unsqueeze(0)
            + self.pos_emb(positions).unsqueeze(0)
        )

    def forward(self, targets, context, context_mask=None):
        """Teacher-forced logits: row i predicts targets[:, i].

        targets: (B, L) long; context: (B, K, width); context_mask True on
        valid context entries. Returns (B, L, 257).
        """
        b, length = targets.shape
        start = self.start.view(1, 1, -1).expand(b, 1, -1)
        if length > 1:
            x = torch.cat([start, self.embed_tokens(targets[:, :-1])], dim=1)
        else:
            x = start
        h = self.stack(x, context=context, context_mask=context_mask, causal=True)
        return self.out(h)

    def next_logits(self, prefix, context, context_mask=None):
        """Logits for the token following `prefix` (a 1-D long tensor)."""
        b = context.shape[0]
        start = self.start.view(1, 1, -1).expand(b, 1, -1)
        if len(prefix):
            x = torch.cat([start, self.embed_tokens(prefix.view(1, -1))], dim=1)
        else:
            x = start
        h = self.stack(x, context=context, context_mask=context_mask, causal=True)
        return self.out(h[:, -1])


class VertexDecoderSession:
    """Incremental decoding with per-block key/value caches."""

    def __init__(self, module, context, context_mask=None):
        self.module = module
        self.context = context
        self.context_mask = context_mask
        self.caches = module.stack.new_caches()
        self.count = 0
        start = module.start.view(1, 1, -1)
        h = module.stack(
            start, context=context, context_mask=context_mask, causal=True, caches=self.caches
        )
        self.logits = module.out(h[:, -1, :])[0]

    def push(self, token):
        tok = torch.tensor([[int(token)]], device=self.logits.device)
        x = self.module.embed_tokens(tok, start_position=self.count)
        self.count += 1
        h = self.module.stack(
            x, context=self.context, context_mask=self.context_mask,
            causal=True, caches=self.caches,
        )
        self.logits = self.module.out(h[:, -1, :])[0]
        return self.logits
