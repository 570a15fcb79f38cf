"""Transformer decoder/encoder building blocks.

Pre-normalization layout, multi-head attention with an optional key/value
cache for incremental decoding, and the shared cross-entropy loss. All
blocks are plain float32 `nn.Module`s; the gradient checker switches them
to float64.
"""

import math

import torch
from torch import nn

from ..errors import TrainingError


class MultiHeadAttention(nn.Module):
    def __init__(self, width, heads, dropout):
        super().__init__()
        if width % heads != 0:
            raise ValueError("width must be divisible by heads")
        self.width = width
        self.heads = heads
        self.head_dim = width // heads
        self.q_proj = nn.Linear(width, width)
        self.k_proj = nn.Linear(width, width)
        self.v_proj = nn.Linear(width, width)
        self.out_proj = nn.Linear(width, width)
        self.drop = nn.Dropout(dropout)

    def forward(self, query, keyval, causal=False, key_mask=None, cache=None):
        """query: (B, Lq, W); keyval: (B, Lk, W).

        `key_mask` is True on valid key positions. With `cache` (a dict),
        new keys/values are appended and attended; the query is then the
        new suffix only.
        """
        b, lq, _ = query.shape
        q = self.q_proj(query)
        k = self.k_proj(keyval)
        v = self.v_proj(keyval)
        if cache is not None:
            if "k" in cache:
                k = torch.cat([cache["k"], k], dim=1)
                v = torch.cat([cache["v"], v], dim=1)
            cache["k"] = k
            cache["v"] = v
        lk = k.shape[1]

        def split(t):
            return t.view(b, -1, self.heads, self.head_dim).transpose(1, 2)

        scores = split(q) @ split(k).transpose(-2, -1) / math.sqrt(self.head_dim)
        if causal:
            # rows are the last lq of lk positions
            pos_q = torch.arange(lk - lq, lk, device=query.device)
            pos_k = torch.arange(lk, device=query.device)
            banned = pos_k[None, :] > pos_q[:, None]
            scores = scores.masked_fill(banned, float("-inf"))
        if key_mask is not None:
            scores = scores.masked_fill(~key_mask[:, None, None, :], float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        attn = self.drop(attn)
        out = (attn @ split(v)).transpose(1, 2).reshape(b, lq, self.width)
        return self.out_proj(out)


class FeedForward(nn.Module):
    def __init__(self, width, hidden, dropout):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(width, hidden),
            nn.ReLU(),
            nn.Dropout(dropout),
            nn.Linear(hidden, width),
        )

    def forward(self, x):
        return self.net(x)


class DecoderBlock(nn.Module):
    """Pre-norm block: causal self-attention, optional cross-attention to a
    context sequence, feed-forward."""

    def __init__(self, width, heads, ff_hidden, dropout, cross_attention):
        super().__init__()
        self.self_norm = nn.LayerNorm(width)
        self.self_attn = MultiHeadAttention(width, heads, dropout)
        if cross_attention:
            self.cross_norm = nn.LayerNorm(width)
            self.cross_attn = MultiHeadAttention(width, heads, dropout)
        else:
            self.cross_norm = None
            self.cross_attn = None
        self.ff_norm = nn.LayerNorm(width)
        self.ff = FeedForward(width, ff_hidden, dropout)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, context=None, context_mask=None, causal=True, cache=None):
        h = self.self_norm(x)
        x = x + self.drop(self.self_attn(h, h, causal=causal, cache=cache))
        if self.cross_attn is not None and context is not None:
            h = self.cross_norm(x)
            x = x + self.drop(self.cross_attn(h, context, key_mask=context_mask))
        x = x + self.drop(self.ff(self.ff_norm(x)))
        return x


class TransformerStack(nn.Module):
    """A stack of decoder blocks plus the final normalization."""

    def __init__(self, width, heads, ff_hidden, dropout, depth, cross_attention):
        super().__init__()
        self.blocks = nn.ModuleList(
            DecoderBlock(width, heads, ff_hidden, dropout, cross_attention)
            for _ in range(depth)
        )
        self.final_norm = nn.LayerNorm(width)

    def forward(self, x, context=None, context_mask=None, causal=True, caches=None):
        if x.shape[-2] < 1:
            raise ValueError("sequence must have at least one position")
        for i, block in enumerate(self.blocks):
            cache = None if caches is None else caches[i]
            x = block(x, context=context, context_mask=context_mask, causal=causal, cache=cache)
        return self.final_norm(x)

    def new_caches(self):
        return [{} for _ in self.blocks]


def cross_entropy(logits, targets, ignore_mask=None):
    """Mean negative log-softmax of the target classes.

    logits: (..., V); targets: (...) long; ignore_mask True on positions to
    skip. Raises if every position is ignored.
    """
    logp = torch.log_softmax(logits, dim=-1)
    picked = logp.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    if ignore_mask is not None:
        keep = ~ignore_mask
        if not bool(keep.any()):
            raise TrainingError("all positions masked in cross_entropy")
        picked = picked[keep]
    return -picked.mean()
