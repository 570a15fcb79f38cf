"""ASCII mesh and point-cloud file formats.

Meshes use a wavefront-style format: `v x y z` lines followed by
`f i j k ...` lines with 1-based vertex indices. Point clouds are one
`x y z` triple per line. Blank lines and `#` comments are allowed.
Parsers reject NaN/Inf and out-of-range indices with line-numbered errors.
"""

import math

import numpy as np

from .errors import MeshFormatError
from .geometry import PolyMesh, as_cloud


def _parse_float(tok, line):
    try:
        value = float(tok)
    except ValueError:
        raise MeshFormatError(f"invalid number {tok!r}", line=line) from None
    if not math.isfinite(value):
        raise MeshFormatError(f"non-finite coordinate {tok!r}", line=line)
    return value


def read_mesh(path):
    vertices = []
    faces = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "v":
                if len(parts) != 4:
                    raise MeshFormatError("vertex line needs 3 coordinates", line=lineno)
                vertices.append([_parse_float(t, lineno) for t in parts[1:]])
            elif parts[0] == "f":
                if len(parts) < 4:
                    raise MeshFormatError("face line needs at least 3 indices", line=lineno)
                idx = []
                for tok in parts[1:]:
                    try:
                        i = int(tok)
                    except ValueError:
                        raise MeshFormatError(f"invalid index {tok!r}", line=lineno) from None
                    if i < 1 or i > len(vertices):
                        raise MeshFormatError(f"vertex index {i} out of range", line=lineno)
                    idx.append(i - 1)
                if len(set(idx)) != len(idx):
                    raise MeshFormatError("face repeats a vertex index", line=lineno)
                faces.append(tuple(idx))
            else:
                raise MeshFormatError(f"unknown directive {parts[0]!r}", line=lineno)
    if not vertices:
        raise MeshFormatError("mesh file has no vertices")
    return PolyMesh(vertices=np.array(vertices, dtype=np.float64), faces=tuple(faces))


def write_mesh(path, mesh):
    with open(path, "w", encoding="utf-8") as fh:
        for v in np.asarray(mesh.vertices, dtype=np.float64):
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in mesh.faces:
            fh.write("f " + " ".join(str(i + 1) for i in f) + "\n")


def read_cloud(path):
    points = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise MeshFormatError("point line needs 3 coordinates", line=lineno)
            points.append([_parse_float(t, lineno) for t in parts])
    if not points:
        raise MeshFormatError("point-cloud file has no points")
    return as_cloud(points)


def write_cloud(path, cloud):
    cloud = as_cloud(cloud)
    with open(path, "w", encoding="utf-8") as fh:
        for p in cloud:
            fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
