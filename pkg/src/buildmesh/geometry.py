"""Coordinate normalization, quantization, canonical mesh form, surface
sampling, and face classification.

Conventions
-----------
Point clouds are plain float64 arrays of shape (n, 3) in meters (or in the
normalized unit-sphere frame after `normalize`). Meshes carry an explicit
vertex array plus variable-length faces as index tuples. Quantized meshes
live on a 256^3 integer lattice derived from the normalized cloud's
axis-aligned bounding box; the `NormTransform`/`Lattice` pair maps lattice
coordinates back to meters.

Face classification operates in lattice coordinates: axis-aligned structures
are exact there, and the 5-degree / half-cell tolerances only absorb slopes
introduced by augmentation.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import GeometryError

QUANT_BITS = 8
QUANT_LEVELS = 1 << QUANT_BITS  # 256

_COS5 = np.cos(np.radians(5.0))
_SIN5 = np.sin(np.radians(5.0))
PLANARITY_TOL = 0.5  # lattice units, max residual to the best-fit plane
FLOOR_Z_TOL = 1.0    # lattice units, band above the lowest downward face

FACE_FLOOR = "floor"
FACE_WALL = "wall"
FACE_ROOF = "roof"
FACE_OTHER = "other"


def as_cloud(points):
    """Validate and return an (n, 3) float64 point cloud."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise GeometryError(f"point cloud must have shape (n, 3), got {arr.shape}")
    if len(arr) == 0:
        raise GeometryError("empty input")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("point cloud contains non-finite coordinates")
    return arr


@dataclass(frozen=True)
class NormTransform:
    """Affine map from world meters to the normalized unit-sphere frame.

    normalized = (p + translation) * scale, with scale in 1/meters.
    """

    translation: np.ndarray
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64))
        if not self.scale > 0:
            raise GeometryError("scale must be positive")

    def apply(self, points):
        return (np.asarray(points, dtype=np.float64) + self.translation) * self.scale

    def invert(self, points):
        return np.asarray(points, dtype=np.float64) / self.scale - self.translation


@dataclass(frozen=True)
class PolyMesh:
    """Vertices (v, 3) float64 plus faces as tuples of vertex indices."""

    vertices: np.ndarray
    faces: tuple

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise GeometryError(f"vertices must have shape (v, 3), got {verts.shape}")
        if not np.all(np.isfinite(verts)):
            raise GeometryError("mesh contains non-finite coordinates")
        faces = tuple(tuple(int(i) for i in f) for f in self.faces)
        for f in faces:
            if len(f) < 3:
                raise GeometryError(f"face {f} has fewer than 3 vertices")
            if len(set(f)) != len(f):
                raise GeometryError(f"face {f} repeats a vertex index")
            if any(i < 0 or i >= len(verts) for i in f):
                raise GeometryError(f"face {f} references a vertex out of range")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)

    @property
    def vertex_count(self):
        return len(self.vertices)

    @property
    def face_count(self):
        return len(self.faces)


@dataclass(frozen=True)
class Lattice:
    """256^3 quantization grid in the normalized frame.

    `origin` is the bounding-box minimum, `cell` the per-axis cell size.
    An axis whose bounding box has zero extent gets a cell of comparable
    size to the other axes and dequantizes to the origin exactly
    (`degenerate` marks such axes).
    """

    origin: np.ndarray
    cell: np.ndarray
    degenerate: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        object.__setattr__(self, "cell", np.asarray(self.cell, dtype=np.float64))
        if self.degenerate is None:
            object.__setattr__(self, "degenerate", np.zeros(3, dtype=bool))
        else:
            object.__setattr__(self, "degenerate", np.asarray(self.degenerate, dtype=bool))
        if np.any(self.cell <= 0):
            raise GeometryError("lattice cell sizes must be positive")

    @classmethod
    def from_cloud(cls, cloud):
        cloud = as_cloud(cloud)
        lo = cloud.min(axis=0)
        hi = cloud.max(axis=0)
        extent = hi - lo
        degenerate = extent == 0.0
        if np.all(degenerate):
            fallback = 1.0
        else:
            fallback = extent[~degenerate].max()
        cell = np.where(degenerate, fallback, extent) / QUANT_LEVELS
        return cls(origin=lo, cell=cell, degenerate=degenerate)

    def quantize(self, points):
        q = np.floor((np.asarray(points, dtype=np.float64) - self.origin) / self.cell)
        return np.clip(q, 0, QUANT_LEVELS - 1).astype(np.int64)

    def dequantize(self, coords):
        coords = np.asarray(coords, dtype=np.float64)
        centered = self.origin + (coords + 0.5) * self.cell
        exact = self.origin + coords * self.cell
        return np.where(self.degenerate, exact, centered)


@dataclass(frozen=True)
class QuantizedMesh:
    """Mesh on the integer lattice, plus the maps back to meters."""

    vertices: np.ndarray
    faces: tuple
    lattice: Lattice
    transform: NormTransform

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise GeometryError(f"vertices must have shape (v, 3), got {verts.shape}")
        if len(verts) and (verts.min() < 0 or verts.max() > QUANT_LEVELS - 1):
            raise GeometryError("quantized coordinates out of [0, 255]")
        if len(np.unique(verts, axis=0)) != len(verts):
            raise GeometryError("duplicate quantized vertices")
        faces = tuple(tuple(int(i) for i in f) for f in self.faces)
        for f in faces:
            if len(f) < 3 or len(set(f)) != len(f):
                raise GeometryError(f"invalid face {f}")
            if any(i < 0 or i >= len(verts) for i in f):
                raise GeometryError(f"face {f} references a vertex out of range")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)

    @property
    def vertex_count(self):
        return len(self.vertices)

    @property
    def face_count(self):
        return len(self.faces)


def normalize(cloud):
    """Center a cloud at its centroid and scale it into the unit sphere.

    Returns (normalized cloud, NormTransform). The farthest point ends up at
    norm 1; a degenerate single-point cloud keeps scale 1.
    """
    cloud = as_cloud(cloud)
    centroid = cloud.mean(axis=0)
    centered = cloud - centroid
    radius = np.linalg.norm(centered, axis=1).max()
    scale = 1.0 / radius if radius > 0 else 1.0
    transform = NormTransform(translation=-centroid, scale=scale)
    return centered * scale, transform


def quantize(mesh, cloud_normalized, transform):
    """Quantize a normalized mesh onto the lattice of the normalized cloud.

    Vertices collapsing to the same lattice triple are merged (first
    occurrence kept) and faces are remapped; faces left with fewer than
    3 distinct indices are dropped.
    """
    lattice = Lattice.from_cloud(cloud_normalized)
    return quantize_on_lattice(mesh, lattice, transform)


def quantize_on_lattice(mesh, lattice, transform):
    q = lattice.quantize(mesh.vertices)
    unique, remap = _merge_vertices(q)
    faces = []
    for f in mesh.faces:
        seen = []
        for i in f:
            j = int(remap[i])
            if j not in seen:
                seen.append(j)
        if len(seen) >= 3:
            faces.append(tuple(seen))
    return QuantizedMesh(vertices=unique, faces=tuple(faces), lattice=lattice, transform=transform)


def _merge_vertices(q):
    """Deduplicate rows keeping first-occurrence order; returns (rows, remap)."""
    _, first, inverse = np.unique(q, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    unique = q[np.sort(first)]
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    remap = rank[inverse]
    return unique, remap


def dequantize(qmesh):
    """Map a quantized mesh back to meters (lattice cell centers)."""
    norm_coords = qmesh.lattice.dequantize(qmesh.vertices)
    return PolyMesh(vertices=qmesh.transform.invert(norm_coords), faces=qmesh.faces)


def canonicalize(qmesh):
    """Canonical form: vertices sorted by (z, y, x); each face rotated to its
    lowest index with winding preserved; faces sorted lexicographically."""
    verts = qmesh.vertices
    order = np.lexsort((verts[:, 0], verts[:, 1], verts[:, 2]))
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    faces = []
    for f in qmesh.faces:
        remapped = tuple(int(rank[i]) for i in f)
        k = remapped.index(min(remapped))
        faces.append(remapped[k:] + remapped[:k])
    faces.sort()
    return QuantizedMesh(
        vertices=verts[order], faces=tuple(faces), lattice=qmesh.lattice, transform=qmesh.transform
    )


def is_canonical(qmesh):
    canon = canonicalize(qmesh)
    return np.array_equal(canon.vertices, qmesh.vertices) and canon.faces == qmesh.faces


def fan_triangles(mesh):
    """Fan-triangulate every face from its first vertex.

    Returns (tri_a, tri_b, tri_c) float64 arrays of shape (t, 3) and the
    owning face index per triangle. Corpus polygons are convex, so the fan
    is a valid triangulation.
    """
    verts = np.asarray(mesh.vertices, dtype=np.float64)
    a, b, c, owner = [], [], [], []
    for fi, f in enumerate(mesh.faces):
        for k in range(1, len(f) - 1):
            a.append(verts[f[0]])
            b.append(verts[f[k]])
            c.append(verts[f[k + 1]])
            owner.append(fi)
    return (
        np.asarray(a, dtype=np.float64).reshape(-1, 3),
        np.asarray(b, dtype=np.float64).reshape(-1, 3),
        np.asarray(c, dtype=np.float64).reshape(-1, 3),
        np.asarray(owner, dtype=np.int64),
    )


def face_normal(mesh, face):
    """Unnormalized Newell normal of a face (float64, any mesh type)."""
    pts = np.asarray(mesh.vertices, dtype=np.float64)[list(face)]
    nxt = np.roll(pts, -1, axis=0)
    n = np.array(
        [
            np.sum((pts[:, 1] - nxt[:, 1]) * (pts[:, 2] + nxt[:, 2])),
            np.sum((pts[:, 2] - nxt[:, 2]) * (pts[:, 0] + nxt[:, 0])),
            np.sum((pts[:, 0] - nxt[:, 0]) * (pts[:, 1] + nxt[:, 1])),
        ]
    )
    return n


def face_area(mesh, face):
    return 0.5 * np.linalg.norm(face_normal(mesh, face))


def surface_area(mesh):
    return sum(face_area(mesh, f) for f in mesh.faces)


def total_edge_length(mesh):
    verts = np.asarray(mesh.vertices, dtype=np.float64)
    return sum(
        float(np.linalg.norm(verts[i] - verts[j])) for i, j in mesh_edges(mesh.faces)
    )


def mesh_edges(faces):
    """Unique undirected edges (sorted index pairs) over all faces."""
    edges = set()
    for f in faces:
        for k in range(len(f)):
            i, j = f[k], f[(k + 1) % len(f)]
            edges.add((i, j) if i < j else (j, i))
    return edges


def sample_surface(mesh, n, rng):
    """Draw n points area-proportionally over the mesh surface.

    Faces are fan-triangulated; deterministic given the rng state.
    """
    if n < 0:
        raise GeometryError("sample count must be non-negative")
    if mesh.face_count == 0:
        raise GeometryError("mesh has no faces")
    tri_a, tri_b, tri_c, _ = fan_triangles(mesh)
    areas = 0.5 * np.linalg.norm(np.cross(tri_b - tri_a, tri_c - tri_a), axis=1)
    total = areas.sum()
    if total <= 0:
        raise GeometryError("mesh has zero surface area")
    if n == 0:
        return np.empty((0, 3), dtype=np.float64)
    counts = rng.multinomial(n, areas / total)
    chunks = []
    for t, count in enumerate(counts):
        if count == 0:
            continue
        u = rng.random(count)
        v = rng.random(count)
        flip = u + v > 1.0
        u[flip] = 1.0 - u[flip]
        v[flip] = 1.0 - v[flip]
        pts = (
            tri_a[t]
            + u[:, None] * (tri_b[t] - tri_a[t])
            + v[:, None] * (tri_c[t] - tri_a[t])
        )
        chunks.append(pts)
    return np.concatenate(chunks, axis=0)


def point_to_mesh_distance(point, mesh):
    """Exact minimum Euclidean distance from a point to the mesh surface."""
    return float(points_to_mesh_distance(np.asarray(point, dtype=np.float64)[None, :], mesh)[0])


def points_to_mesh_distance(points, mesh):
    if mesh.face_count == 0:
        raise GeometryError("mesh has no faces")
    tri_a, tri_b, tri_c, _ = fan_triangles(mesh)
    return kernels.points_to_triangles(points, tri_a, tri_b, tri_c)


def classify_faces(qmesh):
    """Classify every face of a quantized mesh as floor/wall/roof/other."""
    verts = qmesh.vertices.astype(np.float64)
    normals = []
    for f in qmesh.faces:
        n = face_normal(qmesh, f)
        norm = np.linalg.norm(n)
        normals.append(n / norm if norm > 0 else None)

    # Reference height: lowest vertex among downward-facing, planar faces.
    down_min_z = None
    for f, n in zip(qmesh.faces, normals):
        if n is None or not _is_planar(verts, f, n):
            continue
        if n[2] <= -_COS5:
            z = verts[list(f), 2].min()
            down_min_z = z if down_min_z is None else min(down_min_z, z)
    mesh_min_z = verts[:, 2].min() if len(verts) else 0.0

    labels = []
    for f, n in zip(qmesh.faces, normals):
        if n is None or not _is_planar(verts, f, n):
            labels.append(FACE_OTHER)
        elif n[2] <= -_COS5 and down_min_z is not None and (
            verts[list(f), 2].max() <= down_min_z + FLOOR_Z_TOL
        ):
            labels.append(FACE_FLOOR)
        elif abs(n[2]) < _SIN5:
            labels.append(FACE_WALL)
        elif n[2] >= _COS5 and verts[list(f), 2].min() > mesh_min_z + FLOOR_Z_TOL:
            labels.append(FACE_ROOF)
        else:
            labels.append(FACE_OTHER)
    return labels


def classify_face(face, qmesh):
    """Classification of a single face (see `classify_faces`)."""
    try:
        idx = qmesh.faces.index(tuple(face))
    except ValueError:
        raise GeometryError(f"face {face} not part of the mesh") from None
    return classify_faces(qmesh)[idx]


def _is_planar(verts, face, unit_normal):
    pts = verts[list(face)]
    d = (pts - pts.mean(axis=0)) @ unit_normal
    return np.abs(d).max() < PLANARITY_TOL
