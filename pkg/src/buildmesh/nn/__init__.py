from .blocks import cross_entropy
from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .config import ModelConfig, miniature_config
from .encoder import PointCloudEncoder
from .face_model import FaceDecoderSession, FaceModule
from .gradcheck import gradient_check, run_miniature_check
from .vertex_model import VertexDecoderSession, VertexModule

__all__ = [
    "ModelConfig",
    "miniature_config",
    "cross_entropy",
    "PointCloudEncoder",
    "VertexModule",
    "VertexDecoderSession",
    "FaceModule",
    "FaceDecoderSession",
    "save_checkpoint",
    "read_checkpoint",
    "load_checkpoint",
    "gradient_check",
    "run_miniature_check",
]
