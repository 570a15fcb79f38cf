"""Pointer-network face sequence module.

The quantized vertex list is first refined by a non-causal transformer
encoder. A causal decoder then consumes the face token sequence, where a
vertex-index token is embedded by gathering the refined embedding of that
vertex, and the stop and end-face tokens get learned vectors. Output
scores are dot products of a projected decoder state against the refined
vertex embeddings plus two learned keys, so the output distribution is
always over exactly the available vertices and the two special tokens.
"""

import math

import torch
from torch import nn

from .. import codec
from .blocks import TransformerStack


class FaceModule(nn.Module):
    def __init__(self, config):
        super().__init__()
        self.config = config
        width = config.width
        # vertex list encoder
        self.coord_embs = nn.ModuleList(
            nn.Embedding(codec.VERTEX_STOP, width) for _ in range(3)
        )
        if config.face_vertex_positions:
            self.vertex_pos_emb = nn.Embedding(config.max_vertices, width)
        else:
            self.vertex_pos_emb = None
        self.encoder = TransformerStack(
            width, config.heads, config.ff_hidden, config.dropout,
            config.depth, cross_attention=False,
        )
        # face sequence decoder
        self.start = nn.Parameter(torch.zeros(width))
        self.stop_value = nn.Parameter(torch.randn(width) * 0.02)
        self.end_value = nn.Parameter(torch.randn(width) * 0.02)
        self.face_emb = nn.Embedding(config.max_faces + 1, width)
        self.slot_emb = nn.Embedding(config.max_face_len + 2, width)
        self.decoder = TransformerStack(
            width, config.heads, config.ff_hidden, config.dropout,
            config.depth, cross_attention=False,
        )
        self.pointer_proj = nn.Linear(width, width)
        self.stop_key = nn.Parameter(torch.randn(width) * 0.02)
        self.end_key = nn.Parameter(torch.randn(width) * 0.02)
        for emb in (*self.coord_embs, self.face_emb, self.slot_emb):
            nn.init.normal_(emb.weight, std=0.02)
        # near-uniform initial pointer distribution
        nn.init.normal_(self.pointer_proj.weight, std=1e-3)
        nn.init.zeros_(self.pointer_proj.bias)
        if self.vertex_pos_emb is not None:
            nn.init.normal_(self.vertex_pos_emb.weight, std=0.02)

    def encode_vertices(self, vertices):
        """Refined embeddings of a quantized vertex list.

        vertices: (V, 3) long lattice coordinates in canonical order.
        Returns (V, width).
        """
        vertices = torch.as_tensor(vertices, dtype=torch.long)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise ValueError("vertices must have shape (V, 3)")
        if len(vertices) == 0:
            raise ValueError("empty vertex list")
        if len(vertices) > self.config.max_vertices:
            raise ValueError("sequence too long")
        x = sum(emb(vertices[:, axis]) for axis, emb in enumerate(self.coord_embs))
        if self.vertex_pos_emb is not None:
            x = x + self.vertex_pos_emb(torch.arange(len(vertices)))
        h = self.encoder(x.unsqueeze(0), causal=False)
        return h[0]

    def token_positions(self, tokens):
        """Face index and in-face slot for each token of a face sequence.

        Replays the sequence: vertex tokens advance the slot, the end-face
        token closes the face, stop sits at slot 0 of the next face id.
        Returns two equal-length lists.
        """
        face_ids, slots = [], []
        face, slot = 0, 0
        for tok in tokens:
            face_ids.append(face)
            slots.append(slot)
            if tok == codec.FACE_END:
                face += 1
                slot = 0
            else:
                slot += 1
        return face_ids, slots

    def embed_tokens(self, tokens, refined, face_ids, slots):
        """Input embeddings for face tokens given refined vertex embeddings.

        tokens: (L,) long; refined: (V, width); face_ids/slots: (L,) long.
        """
        if len(tokens) == 0:
            return refined.new_zeros(0, self.config.width)
        rows = []
        for tok in tokens.tolist():
            if tok == codec.FACE_STOP:
                rows.append(self.stop_value)
            elif tok == codec.FACE_END:
                rows.append(self.end_value)
            else:
                rows.append(refined[tok - codec.FACE_INDEX_OFFSET])
        value = torch.stack(rows)
        # clamp so rollouts past the nominal face-count/face-length limits
        # reuse the last table row instead of indexing out of range
        face_ids = face_ids.clamp(max=self.face_emb.num_embeddings - 1)
        slots = slots.clamp(max=self.slot_emb.num_embeddings - 1)
        return value + self.face_emb(face_ids) + self.slot_emb(slots)

    def scores(self, h, refined, vertex_mask=None):
        """Pointer logits for decoder states.

        h: (..., width); refined: (V, width) or (B, V, width). Returns
        logits over [stop, end-face, vertex 0..V-1]; masked vertices get
        -inf.
        """
        q = self.pointer_proj(h)
        scale = math.sqrt(self.config.width)
        s_stop = (q * self.stop_key).sum(-1, keepdim=True)
        s_end = (q * self.end_key).sum(-1, keepdim=True)
        s_vert = q @ refined.transpose(-2, -1)
        logits = torch.cat([s_stop, s_end, s_vert], dim=-1) / scale
        if vertex_mask is not None:
            pad = torch.cat(
                [vertex_mask.new_ones(*vertex_mask.shape[:-1], 2), vertex_mask], dim=-1
            )
            logits = logits.masked_fill(~pad, float("-inf"))
        return logits

    def forward(self, targets, refined, vertex_mask=None):
        """Teacher-forced logits for one face sequence.

        targets: (L,) long face tokens; refined: (V, width) from
        `encode_vertices`; vertex_mask: optional (V,) bool, True on real
        vertices. Returns (L, V + 2).
        """
        targets = torch.as_tensor(targets, dtype=torch.long)
        if targets.ndim != 1:
            raise ValueError("targets must be one-dimensional")
        if len(targets) > self.config.max_face_seq_len:
            raise ValueError("sequence too long")
        face_ids, slots = self.token_positions(targets.tolist())
        face_ids = torch.tensor(face_ids, dtype=torch.long)
        slots = torch.tensor(slots, dtype=torch.long)
        if len(targets) > 1:
            emb = self.embed_tokens(targets[:-1], refined, face_ids[:-1], slots[:-1])
            x = torch.cat([self.start.view(1, -1), emb], dim=0)
        else:
            x = self.start.view(1, -1)
        h = self.decoder(x.unsqueeze(0), causal=True)[0]
        return self.scores(h, refined, vertex_mask)


class FaceDecoderSession:
    """Incremental face decoding with key/value caches.

    Tracks the face and slot counters so each pushed token is embedded the
    same way teacher forcing would embed it.
    """

    def __init__(self, module, refined, vertex_mask=None):
        self.module = module
        self.refined = refined
        self.vertex_mask = vertex_mask
        self.caches = module.decoder.new_caches()
        self.count = 0
        self.face = 0
        self.slot = 0
        h = module.decoder(module.start.view(1, 1, -1), causal=True, caches=self.caches)
        self.logits = module.scores(h[0, -1], refined, vertex_mask)

    def push(self, token):
        token = int(token)
        face_id = torch.tensor([self.face])
        slot = torch.tensor([self.slot])
        x = self.module.embed_tokens(
            torch.tensor([token]), self.refined, face_id, slot
        )
        if token == codec.FACE_END:
            self.face += 1
            self.slot = 0
        else:
            self.slot += 1
        self.count += 1
        h = self.module.decoder(x.unsqueeze(0), causal=True, caches=self.caches)
        self.logits = self.module.scores(h[0, -1], self.refined, self.vertex_mask)
        return self.logits
