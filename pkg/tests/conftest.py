import numpy as np
import pytest

from buildmesh.geometry import Lattice, NormTransform, QuantizedMesh, canonicalize


def unit_lattice():
    """Lattice over the normalized cube [-1, 1]^3."""
    return Lattice(origin=np.array([-1.0, -1.0, -1.0]), cell=np.full(3, 2.0 / 256))


def identity_transform():
    return NormTransform(translation=np.zeros(3), scale=1.0)


def random_canonical_mesh(rng, max_vertices=12, max_faces=8):
    """Random canonical quantized mesh (geometry is arbitrary; only the
    combinatorial structure matters for codec/constraint tests)."""
    nv = int(rng.integers(3, max_vertices + 1))
    # rejection-free unique triples: sample until distinct
    while True:
        verts = rng.integers(0, 256, size=(nv, 3))
        if len(np.unique(verts, axis=0)) == nv:
            break
    nf = int(rng.integers(1, max_faces + 1))
    faces = []
    for _ in range(nf):
        size = int(rng.integers(3, min(nv, 6) + 1))
        faces.append(tuple(int(i) for i in rng.choice(nv, size=size, replace=False)))
    mesh = QuantizedMesh(
        vertices=verts,
        faces=tuple(faces),
        lattice=unit_lattice(),
        transform=identity_transform(),
    )
    return canonicalize(mesh)


def box_quantized(nx=200, ny=150, nz=100):
    """Axis-aligned box on the lattice with outward-facing windings.

    Vertex order matches the canonical (z, y, x) sort.
    """
    verts = np.array(
        [
            [0, 0, 0], [nx, 0, 0], [0, ny, 0], [nx, ny, 0],
            [0, 0, nz], [nx, 0, nz], [0, ny, nz], [nx, ny, nz],
        ],
        dtype=np.int64,
    )
    faces = (
        (0, 2, 3, 1),  # floor, normal -z
        (4, 5, 7, 6),  # roof, normal +z
        (0, 1, 5, 4),  # wall y=0, normal -y
        (2, 6, 7, 3),  # wall y=ny, normal +y
        (0, 4, 6, 2),  # wall x=0, normal -x
        (1, 3, 7, 5),  # wall x=nx, normal +x
    )
    return QuantizedMesh(
        vertices=verts, faces=faces, lattice=unit_lattice(), transform=identity_transform()
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
