"""buildmesh: autoregressive reconstruction of polygonal building meshes
from 3D point clouds, with constrained sampling, validity-checked rejection
loops, a synthetic training corpus, and mesh evaluation metrics."""

__version__ = "0.1.0"
