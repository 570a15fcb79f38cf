"""Finite-difference gradient verification.

Runs a model's loss in float64, compares the analytic gradient of sampled
parameters against central finite differences, and reports the maximum
relative error. Used by tests and the command-line `grad-check` command on
a miniature end-to-end model.
"""

import numpy as np
import torch

from .. import codec
from .blocks import cross_entropy
from .config import miniature_config
from .encoder import PointCloudEncoder
from .face_model import FaceModule
from .vertex_model import VertexModule


def gradient_check(loss_fn, parameters, rng, samples=200, epsilon=1e-4):
    """Max relative error between analytic and central-difference gradients.

    loss_fn() evaluates the scalar loss with the parameters' current
    values. Each sampled scalar parameter entry is nudged by ±epsilon.
    """
    parameters = [p for p in parameters if p.requires_grad]
    for p in parameters:
        if p.dtype != torch.float64:
            raise ValueError("gradient check requires float64 parameters")
        p.grad = None
    loss = loss_fn()
    loss.backward()

    sizes = np.array([p.numel() for p in parameters])
    total = int(sizes.sum())
    count = min(samples, total)
    flat_choice = rng.choice(total, size=count, replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    worst = 0.0
    for flat in flat_choice:
        pi = int(np.searchsorted(offsets, flat, side="right") - 1)
        param = parameters[pi]
        local = int(flat - offsets[pi])
        analytic = float(param.grad.view(-1)[local])
        with torch.no_grad():
            orig = float(param.view(-1)[local])
            param.view(-1)[local] = orig + epsilon
            up = float(loss_fn())
            param.view(-1)[local] = orig - epsilon
            down = float(loss_fn())
            param.view(-1)[local] = orig
        fd = (up - down) / (2.0 * epsilon)
        # the floor turns the test into an absolute one for near-zero
        # gradients, where the difference quotient is pure roundoff noise
        scale = max(abs(analytic), abs(fd), 1e-3)
        worst = max(worst, abs(analytic - fd) / scale)
    return worst


def miniature_model(seed=0):
    """Tiny encoder + vertex module + face module in float64."""
    config = miniature_config()
    torch.manual_seed(seed)
    encoder = PointCloudEncoder(config).double()
    vertex = VertexModule(config).double()
    face = FaceModule(config).double()
    return config, encoder, vertex, face


def miniature_loss(encoder, vertex, face, cloud, vertex_tokens, face_tokens, mesh_vertices):
    """Combined next-token loss of both modules on one training example."""
    cells, feats = encoder(cloud)
    context = feats.unsqueeze(0)
    v_logits = vertex(vertex_tokens.view(1, -1), context)
    v_loss = cross_entropy(v_logits[0], vertex_tokens)
    refined = face.encode_vertices(mesh_vertices)
    f_logits = face(face_tokens, refined)
    f_loss = cross_entropy(f_logits, face_tokens)
    return v_loss + f_loss


def run_miniature_check(seed=0, samples=200, epsilon=1e-4):
    """Gradient check on the miniature end-to-end model; returns max error."""
    config, encoder, vertex, face = miniature_model(seed)
    rng = np.random.default_rng(seed)
    # move off the near-zero head initialization to a generic point, where
    # no gradient is vanishingly small relative to the difference step
    with torch.no_grad():
        for module in (encoder, vertex, face):
            for p in module.parameters():
                p.add_(torch.randn_like(p) * 0.1)

    cloud = rng.uniform(-0.6, 0.6, size=(20, 3))
    verts = np.unique(rng.integers(0, codec.VERTEX_STOP, size=(4, 3)), axis=0)
    vertex_tokens = torch.tensor(
        [int(t) for t in verts[:, [2, 1, 0]].ravel()] + [codec.VERTEX_STOP]
    )
    face_tokens = torch.tensor(
        [2, 3, 4, codec.FACE_END, codec.FACE_STOP], dtype=torch.long
    )
    mesh_vertices = torch.from_numpy(verts)

    def loss_fn():
        return miniature_loss(
            encoder, vertex, face, cloud, vertex_tokens, face_tokens, mesh_vertices
        )

    params = (
        list(encoder.parameters())
        + list(vertex.parameters())
        + list(face.parameters())
    )
    return gradient_check(loss_fn, params, rng, samples=samples, epsilon=epsilon)
