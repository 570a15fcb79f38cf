"""Dataset preparation, augmentation, and the two-phase training loop.

The vertex module (with the point-cloud encoder) and the face module are
trained as separate optimization problems. Both use teacher forcing,
linear warmup into cosine decay, global gradient clipping, and Adam.
"""

import csv
import math
import os
from dataclasses import dataclass

import numpy as np
import torch

from . import codec
from .errors import TrainingError
from .geometry import PolyMesh, canonicalize, normalize, quantize
from .nn import (
    FaceModule,
    PointCloudEncoder,
    VertexModule,
    cross_entropy,
    save_checkpoint,
)

MAX_VERTICES = 100
MAX_FACES = 500


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    max_grad_norm: float = 1.0
    peak_lr: float = 3e-4
    warmup_steps: int = 200
    total_steps: int = 20000
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    augment_scale: bool = True
    augment_rotate: bool = True
    augment_jitter: bool = True
    jitter_fraction: float = 0.1
    seed: int = 0
    log_every: int = 50
    checkpoint_every: int = 2000

    def __post_init__(self):
        if not self.warmup_steps < self.total_steps:
            raise TrainingError("warmup must be shorter than the total run")
        if self.peak_lr <= 0:
            raise TrainingError("peak learning rate must be positive")

    def to_dict(self):
        from dataclasses import asdict

        d = asdict(self)
        d["adam_betas"] = list(d["adam_betas"])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "adam_betas" in d:
            d["adam_betas"] = tuple(d["adam_betas"])
        return cls(**d)


def filter_dataset(samples):
    """Keep (mesh, cloud) pairs within the vertex and face budget."""
    return [
        (mesh, cloud)
        for mesh, cloud in samples
        if mesh.vertex_count <= MAX_VERTICES and mesh.face_count <= MAX_FACES
    ]


def augment(mesh, cloud, rng, cfg):
    """Random scale/rotation on the pair, point jitter on the cloud only."""
    verts = np.asarray(mesh.vertices, dtype=np.float64)
    cloud = np.asarray(cloud, dtype=np.float64)
    if cfg.augment_scale:
        scale = rng.uniform(0.8, 1.2, size=3)
        verts = verts * scale
        cloud = cloud * scale
    if cfg.augment_rotate:
        theta = rng.uniform(0.0, 2.0 * math.pi)
        c, s = math.cos(theta), math.sin(theta)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        verts = verts @ rot.T
        cloud = cloud @ rot.T
    if cfg.augment_jitter and cfg.jitter_fraction > 0:
        diameter = float(np.linalg.norm(cloud.max(axis=0) - cloud.min(axis=0)))
        direction = rng.normal(size=cloud.shape)
        norms = np.linalg.norm(direction, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        magnitude = rng.uniform(0.0, cfg.jitter_fraction * diameter, size=(len(cloud), 1))
        cloud = cloud + direction / norms * magnitude
    return PolyMesh(vertices=verts, faces=mesh.faces), cloud


def lr_schedule(step, cfg):
    """Linear warmup to the peak, then cosine decay to zero."""
    if step < cfg.warmup_steps:
        return cfg.peak_lr * step / cfg.warmup_steps
    progress = (step - cfg.warmup_steps) / (cfg.total_steps - cfg.warmup_steps)
    return cfg.peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def prepare_sample(mesh, cloud):
    """Normalize, quantize, canonicalize, tokenize one training pair.

    Returns (normalized cloud, quantized mesh, vertex tokens, face tokens).
    """
    cloud_n, transform = normalize(cloud)
    mesh_n = PolyMesh(vertices=transform.apply(mesh.vertices), faces=mesh.faces)
    qmesh = canonicalize(quantize(mesh_n, cloud_n, transform))
    vertex_tokens = codec.encode_vertices(qmesh)
    face_tokens = codec.encode_faces(qmesh)
    return cloud_n, qmesh, vertex_tokens, face_tokens


def _batch_loss(module_name, batch, encoder, vertex_module, face_module):
    losses = []
    for cloud_n, qmesh, vertex_tokens, face_tokens in batch:
        if module_name == "vertex":
            cells, feats = encoder(cloud_n)
            context = feats.unsqueeze(0)
            targets = torch.tensor(vertex_tokens, dtype=torch.long).view(1, -1)
            logits = vertex_module(targets, context)
            losses.append(cross_entropy(logits[0], targets[0]))
        else:
            refined = face_module.encode_vertices(
                torch.from_numpy(qmesh.vertices)
            )
            targets = torch.tensor(face_tokens, dtype=torch.long)
            logits = face_module(targets, refined)
            losses.append(cross_entropy(logits, targets))
    return torch.stack(losses).mean()


def train_step(module_name, batch, models, optimizer, step, cfg):
    """One clipped Adam update; returns (loss value, post-clip grad norm)."""
    encoder, vertex_module, face_module = models
    lr = lr_schedule(step, cfg)
    for group in optimizer.param_groups:
        group["lr"] = lr
    optimizer.zero_grad()
    loss = _batch_loss(module_name, batch, encoder, vertex_module, face_module)
    if not torch.isfinite(loss):
        raise TrainingError(
            f"non-finite loss {float(loss.detach())!r} at step {step} ({module_name} module)"
        )
    loss.backward()
    params = [p for g in optimizer.param_groups for p in g["params"]]
    torch.nn.utils.clip_grad_norm_(params, cfg.max_grad_norm)
    grad_norm = math.sqrt(
        sum(float((p.grad ** 2).sum()) for p in params if p.grad is not None)
    )
    optimizer.step()
    return float(loss.detach()), grad_norm


def _module_params(module_name, encoder, vertex_module, face_module):
    if module_name == "vertex":
        return list(encoder.parameters()) + list(vertex_module.parameters())
    return list(face_module.parameters())


def train_module(module_name, dataset, model_cfg, cfg, out_dir=None, steps=None):
    """Train one module (with its encoder for the vertex phase).

    dataset: list of (mesh, cloud) pairs in meters. Returns the trained
    (encoder, vertex module, face module) triple and the loss history.
    """
    if module_name not in ("vertex", "face"):
        raise TrainingError(f"unknown module {module_name!r}")
    dataset = filter_dataset(dataset)
    if not dataset:
        raise TrainingError("no data after filtering")
    steps = steps if steps is not None else cfg.total_steps

    torch.manual_seed(cfg.seed)
    encoder = PointCloudEncoder(model_cfg)
    vertex_module = VertexModule(model_cfg)
    face_module = FaceModule(model_cfg)
    models = (encoder, vertex_module, face_module)
    params = _module_params(module_name, *models)
    optimizer = torch.optim.Adam(
        params, lr=cfg.peak_lr, betas=cfg.adam_betas, eps=cfg.adam_eps
    )
    rng = np.random.default_rng(cfg.seed)

    log_path = None
    writer = None
    log_file = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        log_path = os.path.join(out_dir, f"{module_name}_log.csv")
        log_file = open(log_path, "w", newline="")
        writer = csv.writer(log_file)
        writer.writerow(["step", "lr", "loss"])

    history = []
    try:
        for step in range(steps):
            idx = rng.integers(len(dataset), size=cfg.batch_size)
            batch = []
            for i in idx:
                mesh, cloud = dataset[int(i)]
                if cfg.augment_scale or cfg.augment_rotate or cfg.augment_jitter:
                    mesh, cloud = augment(mesh, cloud, rng, cfg)
                batch.append(prepare_sample(mesh, cloud))
            loss, _ = train_step(module_name, batch, models, optimizer, step, cfg)
            history.append(loss)
            if writer is not None and (step % cfg.log_every == 0 or step == steps - 1):
                writer.writerow([step, lr_schedule(step, cfg), loss])
            if out_dir is not None and (
                (step + 1) % cfg.checkpoint_every == 0 or step == steps - 1
            ):
                _save_phase(out_dir, module_name, model_cfg, models)
    finally:
        if log_file is not None:
            log_file.close()
    return models, history


def _save_phase(out_dir, module_name, model_cfg, models):
    encoder, vertex_module, face_module = models
    if module_name == "vertex":
        save_checkpoint(
            os.path.join(out_dir, "vertex.ckpt"), model_cfg,
            {"encoder": encoder, "vertex": vertex_module},
        )
    else:
        save_checkpoint(
            os.path.join(out_dir, "face.ckpt"), model_cfg,
            {"face": face_module},
        )
