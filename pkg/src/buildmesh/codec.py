"""Conversion between canonical quantized meshes and flat token sequences.

Vertex side: each vertex contributes its (z, y, x) lattice values as three
tokens, terminated by the stop token 256 (so coordinate values double as
token ids). Face side: token 0 is the stop, token 1 closes the current
polygon, and token k >= 2 denotes vertex index k - 2; every face, including
the last, is closed before the stop.
"""

import operator

from .errors import CodecError
from .geometry import is_canonical

VERTEX_STOP = 256
VERTEX_VOCAB = 257  # 256 coordinate values + stop

FACE_STOP = 0
FACE_END = 1
FACE_INDEX_OFFSET = 2


def _as_token(tok, pos):
    try:
        tok = operator.index(tok)
    except TypeError:
        raise CodecError(f"token {tok!r} is not an integer", position=pos) from None
    if tok < 0:
        raise CodecError(f"token {tok} outside vocabulary", position=pos)
    return tok


def encode_vertices(qmesh):
    """Flatten a canonical mesh's vertices into a token list."""
    if not is_canonical(qmesh):
        raise CodecError("mesh is not in canonical form")
    tokens = []
    for x, y, z in qmesh.vertices:
        tokens.extend((int(z), int(y), int(x)))
    tokens.append(VERTEX_STOP)
    return tokens


def decode_vertices(seq):
    """Inverse of `encode_vertices`; returns a list of (x, y, z) triples."""
    seq = list(seq)
    vertices = []
    triple = []
    for pos, tok in enumerate(seq):
        tok = _as_token(tok, pos)
        if tok > VERTEX_STOP:
            raise CodecError(f"token {tok} outside vocabulary", position=pos)
        if tok == VERTEX_STOP:
            if triple:
                raise CodecError("stop token inside triple", position=pos)
            if pos != len(seq) - 1:
                raise CodecError("tokens after stop", position=pos + 1)
            _check_vertex_order(vertices)
            return vertices
        triple.append(tok)
        if len(triple) == 3:
            z, y, x = triple
            vertices.append((x, y, z))
            triple = []
    raise CodecError("missing stop token", position=len(seq))


def _check_vertex_order(vertices):
    for i in range(1, len(vertices)):
        a = vertices[i - 1]
        b = vertices[i]
        if (a[2], a[1], a[0]) >= (b[2], b[1], b[0]):
            raise CodecError(f"vertices {a} and {b} violate (z, y, x) ordering")


def encode_faces(qmesh):
    """Flatten a canonical mesh's faces into a token list."""
    if not is_canonical(qmesh):
        raise CodecError("mesh is not in canonical form")
    tokens = []
    for f in qmesh.faces:
        if len(f) < 3:
            raise CodecError(f"face {f} has fewer than 3 vertices")
        tokens.extend(i + FACE_INDEX_OFFSET for i in f)
        tokens.append(FACE_END)
    tokens.append(FACE_STOP)
    return tokens


def decode_faces(seq, vertex_count):
    """Inverse of `encode_faces`; validates the face ordering rules."""
    seq = list(seq)
    faces = []
    current = []
    for pos, tok in enumerate(seq):
        tok = _as_token(tok, pos)
        if tok == FACE_STOP:
            if current:
                raise CodecError("stop token inside a face", position=pos)
            if pos != len(seq) - 1:
                raise CodecError("tokens after stop", position=pos + 1)
            _check_face_rules(faces)
            return faces
        if tok == FACE_END:
            if len(current) < 3:
                raise CodecError(f"face with {len(current)} vertices", position=pos)
            faces.append(tuple(current))
            current = []
            continue
        idx = tok - FACE_INDEX_OFFSET
        if idx >= vertex_count:
            raise CodecError(f"vertex index {idx} out of range", position=pos)
        current.append(idx)
    raise CodecError("missing stop token", position=len(seq))


def _check_face_rules(faces):
    prev_first = None
    for f in faces:
        if len(set(f)) != len(f):
            raise CodecError(f"face {f} repeats a vertex index")
        if any(i <= f[0] for i in f[1:]):
            raise CodecError(f"face {f} has an index not above its first")
        if prev_first is not None and f[0] < prev_first:
            raise CodecError(f"face {f} starts below the previous face's first index")
        prev_first = f[0]


def vertex_sequence_length(vertex_count):
    return 3 * vertex_count + 1


def face_sequence_length(faces):
    return sum(len(f) + 1 for f in faces) + 1
