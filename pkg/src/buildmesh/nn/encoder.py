"""Sparse voxel encoder for the conditioning point cloud.

The normalized cloud is voxelized on a fine grid over [-1, 1]^3; occupancy
features are then pooled through stride-2 sparse convolution stages down to
the coarse grid. Each stage has one weight matrix per child octant, so the
features of a coarse cell depend only on the occupancy pattern inside it;
shifting the cloud by a whole coarse cell shifts indices and leaves
features unchanged. A learned embedding of the coarse (i, j, k) index is
added at the end.
"""

import numpy as np
import torch
from torch import nn

from ..errors import GeometryError
from ..geometry import as_cloud


class PointCloudEncoder(nn.Module):
    def __init__(self, config):
        super().__init__()
        self.config = config
        channels = config.encoder_channels
        self.stem = nn.Parameter(torch.randn(channels[0]) * 0.1)
        self.stage_weights = nn.ParameterList()
        self.stage_biases = nn.ParameterList()
        for c_in, c_out in zip(channels[:-1], channels[1:]):
            scale = 1.0 / np.sqrt(8 * c_in)
            self.stage_weights.append(nn.Parameter(torch.randn(8, c_out, c_in) * scale))
            self.stage_biases.append(nn.Parameter(torch.zeros(c_out)))
        res = config.coarse_resolution
        self.index_emb = nn.ModuleList(nn.Embedding(res, config.width) for _ in range(3))

    def voxelize(self, cloud):
        """Occupied fine-grid cells of a normalized cloud, sorted and unique."""
        cloud = as_cloud(cloud)
        if np.abs(cloud).max() > 1.0 + 1e-6:
            raise GeometryError("cloud is not normalized (coordinates beyond 1)")
        res = self.config.fine_resolution
        idx = np.floor((cloud + 1.0) * 0.5 * res).astype(np.int64)
        idx = np.clip(idx, 0, res - 1)
        idx = np.unique(idx, axis=0)
        return torch.from_numpy(idx)

    def pool_cells(self, cells):
        """Run the convolution stages; returns (coarse cells, features)."""
        if len(cells) == 0:
            raise GeometryError("no occupied voxels")
        device = self.stem.device
        cells = cells.to(device)
        feats = self.stem.unsqueeze(0).expand(len(cells), -1)
        for weight, bias in zip(self.stage_weights, self.stage_biases):
            parents = torch.div(cells, 2, rounding_mode="floor")
            octant = cells - parents * 2
            octant_id = octant[:, 0] * 4 + octant[:, 1] * 2 + octant[:, 2]
            unique_parents, inverse = torch.unique(parents, dim=0, return_inverse=True)
            contrib = torch.einsum("koc,kc->ko", weight[octant_id], feats)
            agg = feats.new_zeros(len(unique_parents), weight.shape[1])
            agg = agg.index_add(0, inverse, contrib)
            feats = torch.relu(agg + bias)
            cells = unique_parents
        return cells, feats

    def forward(self, cloud):
        """Context embeddings for one normalized cloud.

        Returns (cells (k, 3) int64 coarse indices, features (k, width)).
        """
        cells, feats = self.pool_cells(self.voxelize(cloud))
        pos = sum(emb(cells[:, axis]) for axis, emb in enumerate(self.index_emb))
        return cells, feats + pos
