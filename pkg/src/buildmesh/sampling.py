"""Constrained nucleus sampling and the token-level rollouts.

Each step masks the model's next-token distribution with the hard decoding
constraints, redistributes the removed mass, and samples from the top-p
nucleus. Rollouts report a failure reason instead of raising when the
sample runs out of budget or the mask dead-ends.
"""

import numpy as np
import torch

from . import codec
from .constraints import (
    REDISTRIBUTE_EVEN,
    FaceDecodeState,
    VertexDecodeState,
    face_mask,
    redistribute,
    vertex_mask,
)
from .errors import DeadEndError
from .nn.face_model import FaceDecoderSession
from .nn.vertex_model import VertexDecoderSession

FAIL_NO_STOP_VERTICES = "no-stop-vertices"
FAIL_NO_STOP_FACES = "no-stop-faces"
FAIL_DEAD_END = "dead-end"


def nucleus_sample(logits, mask, rng, top_p=0.9, redistribution=REDISTRIBUTE_EVEN):
    """Sample one token from the constrained top-p nucleus.

    logits: 1-D tensor or array; mask: boolean admissibility over the same
    vocabulary. Raises DeadEndError when the mask admits nothing.
    """
    if isinstance(logits, torch.Tensor):
        logits = logits.detach().cpu().numpy()
    logits = np.asarray(logits, dtype=np.float64)
    finite = np.isfinite(logits)
    shifted = np.where(finite, logits - logits[finite].max(), -np.inf)
    exp = np.exp(shifted)
    probs = exp / exp.sum()
    probs = redistribute(probs, mask, redistribution)
    order = np.argsort(-probs, kind="stable")
    csum = np.cumsum(probs[order])
    # smallest prefix reaching top_p, never empty
    keep = int(np.searchsorted(csum, top_p, side="left")) + 1
    kept = order[:keep]
    kept_probs = probs[kept] / probs[kept].sum()
    return int(rng.choice(kept, p=kept_probs))


def greedy_sample(logits, mask, redistribution=REDISTRIBUTE_EVEN):
    """Most probable admissible token (used for overfit evaluation)."""
    if isinstance(logits, torch.Tensor):
        logits = logits.detach().cpu().numpy()
    logits = np.asarray(logits, dtype=np.float64)
    finite = np.isfinite(logits)
    shifted = np.where(finite, logits - logits[finite].max(), -np.inf)
    exp = np.exp(shifted)
    probs = redistribute(exp / exp.sum(), mask, redistribution)
    return int(np.argmax(probs))


def rollout_vertices(session, rng, max_len, top_p=0.9,
                     redistribution=REDISTRIBUTE_EVEN, greedy=False):
    """Sample a full vertex token sequence from a live decoder session.

    `session` exposes `.logits` for the next step and `.push(token)`;
    returns (tokens, failure reason or None).
    """
    state = VertexDecodeState()
    tokens = []
    while len(tokens) < max_len:
        mask = vertex_mask(state)
        try:
            if greedy:
                tok = greedy_sample(session.logits, mask, redistribution)
            else:
                tok = nucleus_sample(session.logits, mask, rng, top_p, redistribution)
        except DeadEndError:
            return tokens, FAIL_DEAD_END
        tokens.append(tok)
        state.push(tok)
        if tok == codec.VERTEX_STOP:
            return tokens, None
        session.push(tok)
    return tokens, FAIL_NO_STOP_VERTICES


def rollout_faces(session, vertex_count, rng, max_len, top_p=0.9,
                  redistribution=REDISTRIBUTE_EVEN, greedy=False):
    """Face-sequence analogue of `rollout_vertices`."""
    state = FaceDecodeState(vertex_count)
    tokens = []
    while len(tokens) < max_len:
        mask = face_mask(state)
        try:
            if greedy:
                tok = greedy_sample(session.logits, mask, redistribution)
            else:
                tok = nucleus_sample(session.logits, mask, rng, top_p, redistribution)
        except DeadEndError:
            return tokens, FAIL_DEAD_END
        tokens.append(tok)
        state.push(tok)
        if tok == codec.FACE_STOP:
            return tokens, None
        session.push(tok)
    return tokens, FAIL_NO_STOP_FACES


class NeuralSampler:
    """Bundles the trained modules behind the two-rollout interface the
    reconstruction loop needs."""

    def __init__(self, encoder, vertex_module, face_module, top_p=0.9,
                 redistribution=REDISTRIBUTE_EVEN, greedy=False):
        self.encoder = encoder
        self.vertex_module = vertex_module
        self.face_module = face_module
        self.top_p = top_p
        self.redistribution = redistribution
        self.greedy = greedy

    def sample_vertices(self, cloud_normalized, rng):
        """Returns (vertex array (V, 3) int64 or None, failure or None)."""
        with torch.no_grad():
            cells, feats = self.encoder(cloud_normalized)
            context = feats.unsqueeze(0)
            session = VertexDecoderSession(self.vertex_module, context)
            max_len = self.vertex_module.config.max_vertex_seq_len
            tokens, failure = rollout_vertices(
                session, rng, max_len, self.top_p, self.redistribution, self.greedy
            )
        if failure is not None:
            return None, failure
        return codec.decode_vertices(tokens), None

    def sample_faces(self, vertices, rng):
        """Returns (face tuple or None, failure or None)."""
        with torch.no_grad():
            refined = self.face_module.encode_vertices(torch.as_tensor(vertices))
            session = FaceDecoderSession(self.face_module, refined)
            max_len = self.face_module.config.max_face_seq_len
            tokens, failure = rollout_faces(
                session, len(vertices), rng, max_len, self.top_p,
                self.redistribution, self.greedy
            )
        if failure is not None:
            return None, failure
        return codec.decode_faces(tokens, len(vertices)), None
