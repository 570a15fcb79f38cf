"""Semantic validity checks applied to generated meshes.

All three checks work in quantized lattice coordinates. Floor coverage
projects the conditioning cloud onto the ground plane and asks whether the
floor faces cover it; floor-wall connectivity requires every floor edge to
be shared with a wall face; the diagonal check requires wall edges to be
axis-aligned (horizontal or vertical).
"""

import numpy as np

from .geometry import FACE_FLOOR, FACE_WALL, classify_faces, mesh_edges

COVERAGE_THRESHOLD = 0.98
# buffer absorbs quantization and scan noise at the footprint boundary
COVERAGE_BUFFER = 2.0

COVERAGE_OK = "ok"
MISSING_FLOOR_FACES = "missing-floor-faces"
MISSING_FLOOR_VERTICES = "missing-floor-vertices"


def _to_lattice_xy(points, lattice):
    """Continuous lattice-unit xy coordinates of normalized points."""
    points = np.asarray(points, dtype=np.float64)
    coords = (points - lattice.origin) / lattice.cell
    coords = np.where(lattice.degenerate, 0.0, coords)
    return coords[:, :2]


def _polygon_cover(points, polygon, buffer):
    """True per point if inside `polygon` or within `buffer` of its boundary."""
    px, py = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    min_d2 = np.full(len(points), np.inf)
    n = len(polygon)
    for i in range(n):
        ax, ay = polygon[i]
        bx, by = polygon[(i + 1) % n]
        # even-odd ray casting along +x
        crosses = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = ax + (py - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (px < x_at)
        # squared distance to the segment
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        if seg2 == 0.0:
            t = np.zeros(len(points))
        else:
            t = np.clip(((px - ax) * dx + (py - ay) * dy) / seg2, 0.0, 1.0)
        d2 = (px - (ax + t * dx)) ** 2 + (py - (ay + t * dy)) ** 2
        min_d2 = np.minimum(min_d2, d2)
    return inside | (min_d2 <= buffer * buffer)


def check_floor_coverage(qmesh, cloud_normalized):
    """Coverage verdict: "ok", "missing-floor-faces", "missing-floor-vertices".

    The cloud's xy projection must be at least 98% covered by the floor
    faces (with a 2-lattice-unit buffer). When it is not, the verdict says
    whether the vertex set could even span the footprint: if the xy
    bounding box of all mesh vertices (same buffer) covers the cloud, the
    faces are at fault, otherwise the vertices are.
    """
    points = _to_lattice_xy(cloud_normalized, qmesh.lattice)
    labels = classify_faces(qmesh)
    covered = np.zeros(len(points), dtype=bool)
    for face, label in zip(qmesh.faces, labels):
        if label != FACE_FLOOR:
            continue
        polygon = qmesh.vertices[list(face), :2].astype(np.float64)
        covered |= _polygon_cover(points, polygon, COVERAGE_BUFFER)
    if covered.mean() >= COVERAGE_THRESHOLD:
        return COVERAGE_OK
    lo = qmesh.vertices[:, :2].min(axis=0) - COVERAGE_BUFFER
    hi = qmesh.vertices[:, :2].max(axis=0) + COVERAGE_BUFFER
    in_box = np.all((points >= lo) & (points <= hi), axis=1)
    if in_box.mean() >= COVERAGE_THRESHOLD:
        return MISSING_FLOOR_FACES
    return MISSING_FLOOR_VERTICES


def check_floor_wall_connectivity(qmesh):
    """True iff every floor-face edge is shared with some wall face."""
    labels = classify_faces(qmesh)
    floor_faces = [f for f, l in zip(qmesh.faces, labels) if l == FACE_FLOOR]
    if not floor_faces:
        return False
    wall_faces = [f for f, l in zip(qmesh.faces, labels) if l == FACE_WALL]
    wall_edges = mesh_edges(wall_faces)
    return all(edge in wall_edges for edge in mesh_edges(floor_faces))


def check_no_diagonal_wall_edges(qmesh):
    """True iff every wall edge is horizontal or vertical on the lattice."""
    labels = classify_faces(qmesh)
    wall_faces = [f for f, l in zip(qmesh.faces, labels) if l == FACE_WALL]
    for a, b in mesh_edges(wall_faces):
        da = qmesh.vertices[a] - qmesh.vertices[b]
        horizontal = da[2] == 0
        vertical = da[0] == 0 and da[1] == 0
        if not (horizontal or vertical):
            return False
    return True
