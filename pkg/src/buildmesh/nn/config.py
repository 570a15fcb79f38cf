"""Model hyperparameters shared by the encoder and both generative modules."""

from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class ModelConfig:
    # transformer width is 256 throughout; depth/heads/ff are desk-scale picks
    width: int = 256
    heads: int = 4
    depth: int = 4
    ff_hidden: int = 512
    dropout: float = 0.2
    # dataset filter limits; they size the embedding tables
    max_vertices: int = 100
    max_faces: int = 500
    max_face_len: int = 12
    # point-cloud encoder: fine voxel grid pooled down to the coarse grid
    fine_resolution: int = 128
    coarse_resolution: int = 16
    encoder_channels: tuple = field(default=(32, 64, 128, 256))
    # positional encoding of the vertex list inside the face module's encoder
    face_vertex_positions: bool = True

    def __post_init__(self):
        object.__setattr__(self, "encoder_channels", tuple(self.encoder_channels))
        stages = len(self.encoder_channels) - 1
        if self.fine_resolution != self.coarse_resolution << stages:
            raise ValueError(
                "fine_resolution must equal coarse_resolution * 2^(encoder stages)"
            )
        if self.encoder_channels[-1] != self.width:
            raise ValueError("last encoder channel count must equal the model width")
        if self.width % self.heads != 0:
            raise ValueError("width must be divisible by heads")

    @property
    def max_vertex_seq_len(self):
        return 3 * self.max_vertices + 1

    @property
    def max_face_seq_len(self):
        return self.max_faces * (self.max_face_len + 1) + 1

    def to_dict(self):
        d = asdict(self)
        d["encoder_channels"] = list(d["encoder_channels"])
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def miniature_config():
    """Tiny end-to-end configuration (< 10^4 parameters) for gradient checks."""
    return ModelConfig(
        width=4,
        heads=2,
        depth=1,
        ff_hidden=8,
        dropout=0.0,
        max_vertices=6,
        max_faces=5,
        max_face_len=4,
        fine_resolution=16,
        coarse_resolution=4,
        encoder_channels=(3, 4, 4),
    )
