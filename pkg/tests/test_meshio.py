import numpy as np
import pytest

from buildmesh import meshio
from buildmesh.errors import MeshFormatError
from buildmesh.geometry import PolyMesh


def test_mesh_round_trip(tmp_path, rng):
    mesh = PolyMesh(
        vertices=rng.normal(size=(8, 3)) * 5.0,
        faces=((0, 1, 2, 3), (4, 5, 6), (1, 5, 7)),
    )
    path = tmp_path / "m.obj"
    meshio.write_mesh(path, mesh)
    back = meshio.read_mesh(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert back.faces == mesh.faces


def test_cloud_round_trip(tmp_path, rng):
    cloud = rng.normal(size=(40, 3)) * 3.0
    path = tmp_path / "c.xyz"
    meshio.write_cloud(path, cloud)
    assert np.array_equal(meshio.read_cloud(path), cloud)


def test_comments_and_blank_lines(tmp_path):
    path = tmp_path / "m.obj"
    path.write_text("# header\n\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3  # tri\n")
    mesh = meshio.read_mesh(path)
    assert mesh.vertex_count == 3
    assert mesh.faces == ((0, 1, 2),)


@pytest.mark.parametrize(
    "content,lineno",
    [
        ("v 0 0 nan\n", 1),
        ("v 0 0 inf\n", 1),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n", 4),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 0\n", 4),
        ("v 0 0\n", 1),
        ("v 0 0 0\nf 1 1\n", 2),
        ("v 0 0 0\nvx 1 2 3\n", 2),
    ],
)
def test_mesh_parse_errors_carry_line_numbers(tmp_path, content, lineno):
    path = tmp_path / "bad.obj"
    path.write_text(content)
    with pytest.raises(MeshFormatError, match=f"line {lineno}"):
        meshio.read_mesh(path)


def test_cloud_parse_errors(tmp_path):
    path = tmp_path / "bad.xyz"
    path.write_text("0 0 0\n1 nan 0\n")
    with pytest.raises(MeshFormatError, match="line 2"):
        meshio.read_cloud(path)
    path.write_text("")
    with pytest.raises(MeshFormatError, match="no points"):
        meshio.read_cloud(path)
