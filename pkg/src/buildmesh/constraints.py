"""Token-level binary masks enforcing the hard decoding constraints.

Vertex side: the stop token may only follow a completed (z, y, x) triple
and at least one vertex; z is non-decreasing across vertices, y is
non-decreasing at equal z, and x strictly increases at equal (z, y).
Face side: a new face's first index is >= the previous face's first index,
later indices are strictly above the first and distinct within the face,
the end-face token needs at least 3 in-face indices, and the stop token is
only legal in place of a new face once one face is complete.

Masks are local (one-step) rules; a rollout can still reach an all-false
mask (e.g. x forced past 255), which the sampler treats as a failed
attempt rather than backtracking.
"""

import numpy as np

from . import codec
from .errors import DeadEndError

REDISTRIBUTE_EVEN = "even"
REDISTRIBUTE_PROPORTIONAL = "proportional"


class VertexDecodeState:
    """Replayable decode state for the vertex token stream."""

    def __init__(self, tokens=()):
        self.complete = []      # finished (z, y, x) triples, in emit order
        self.partial = []       # 0-2 coordinates of the triple in progress
        self.stopped = False
        for tok in tokens:
            self.push(tok)

    @property
    def next_coordinate(self):
        # flattening order inside a triple is (z, y, x)
        return "zyx"[len(self.partial)]

    def push(self, tok):
        tok = int(tok)
        if self.stopped:
            raise ValueError("sequence already stopped")
        if tok == codec.VERTEX_STOP:
            self.stopped = True
            return
        self.partial.append(tok)
        if len(self.partial) == 3:
            self.complete.append(tuple(self.partial))
            self.partial = []


def vertex_mask(state):
    """Boolean mask over the 257 vertex tokens admissible in `state`."""
    mask = np.zeros(codec.VERTEX_VOCAB, dtype=bool)
    if state.stopped:
        return mask
    prev = state.complete[-1] if state.complete else None
    slot = len(state.partial)
    if slot == 0:  # z of a new triple
        lo = prev[0] if prev is not None else 0
        mask[lo:256] = True
        if prev is not None:
            mask[codec.VERTEX_STOP] = True
    elif slot == 1:  # y
        z = state.partial[0]
        lo = prev[1] if prev is not None and z == prev[0] else 0
        mask[lo:256] = True
    else:  # x, strict increase on full (z, y) tie
        z, y = state.partial
        if prev is not None and z == prev[0] and y == prev[1]:
            mask[prev[2] + 1 : 256] = True
        else:
            mask[0:256] = True
    return mask


class FaceDecodeState:
    """Replayable decode state for the face token stream."""

    def __init__(self, vertex_count, tokens=()):
        self.vertex_count = vertex_count
        self.faces_done = 0
        self.current = []           # vertex indices of the open face
        self.prev_first = None      # first index of the previous face
        self.stopped = False
        for tok in tokens:
            self.push(tok)

    def push(self, tok):
        tok = int(tok)
        if self.stopped:
            raise ValueError("sequence already stopped")
        if tok == codec.FACE_STOP:
            self.stopped = True
        elif tok == codec.FACE_END:
            self.prev_first = self.current[0]
            self.faces_done += 1
            self.current = []
        else:
            self.current.append(tok - codec.FACE_INDEX_OFFSET)


def face_mask(state):
    """Boolean mask over `vertex_count + 2` face tokens admissible in `state`."""
    mask = np.zeros(state.vertex_count + 2, dtype=bool)
    if state.stopped:
        return mask
    if not state.current:  # first slot of a new face (or the stop)
        lo = state.prev_first if state.prev_first is not None else 0
        mask[codec.FACE_INDEX_OFFSET + lo :] = True
        if state.faces_done > 0:
            mask[codec.FACE_STOP] = True
    else:
        first = state.current[0]
        used = set(state.current)
        for idx in range(first + 1, state.vertex_count):
            if idx not in used:
                mask[idx + codec.FACE_INDEX_OFFSET] = True
        if len(state.current) >= 3:
            mask[codec.FACE_END] = True
    return mask


def redistribute(probs, mask, mode=REDISTRIBUTE_EVEN):
    """Zero masked probabilities and hand their mass to the valid tokens.

    `even` adds the removed mass in equal shares (the default); and
    `proportional` renormalizes the surviving entries.
    """
    probs = np.asarray(probs, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if probs.shape != mask.shape:
        raise ValueError("probs and mask shapes differ")
    valid = int(mask.sum())
    if valid == 0:
        raise DeadEndError("dead end: mask admits no token")
    removed = probs[~mask].sum()
    out = np.where(mask, probs, 0.0)
    if removed == 0.0:
        return out
    if mode == REDISTRIBUTE_EVEN:
        out[mask] += removed / valid
    elif mode == REDISTRIBUTE_PROPORTIONAL:
        out[mask] /= 1.0 - removed
    else:
        raise ValueError(f"unknown redistribution mode {mode!r}")
    return out
