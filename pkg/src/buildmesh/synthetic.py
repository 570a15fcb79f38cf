"""Parametric building corpus: paired polygonal meshes and simulated scans.

Buildings are closed meshes built from convex planar faces: a rectangular
or L-shaped footprint, vertical axis-aligned walls, and a flat, gabled,
hipped, or shed roof. Sloped constructions inset their upper vertices
toward the interior so that, after quantization, no face within 5 degrees
of vertical carries a diagonal edge: end gables and shed side pieces lean
inward and therefore classify as non-wall.

The scan simulator mimics an airborne sensor: roof faces are sampled
densely, walls sparsely with per-wall dropout, downward faces not at all.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import GeometryError
from .geometry import PolyMesh, face_area, face_normal
from .meshio import write_cloud, write_mesh

ROOF_KINDS = ("flat", "gable", "hip", "shed")
_COS5 = math.cos(math.radians(5.0))
# inset safety factor: quantization can skew angles by the cloud's
# per-axis cell ratio, so lean sloped end faces well past 5 degrees
_TILT_SAFETY = 2.5


@dataclass(frozen=True)
class BuildingSpec:
    width: float = 10.0
    depth: float = 8.0
    height: float = 6.0
    roof: str = "flat"
    pitch_deg: float = 25.0
    footprint: str = "rectangle"      # or "l-shape"
    notch_width: float = 0.0          # L-shape: width of the upper leg
    notch_depth: float = 0.0          # L-shape: depth of the lower leg
    overhang: float = 0.0             # flat roofs only
    chimney: tuple = None             # (x, y, w, d, h) on flat roofs

    def __post_init__(self):
        if min(self.width, self.depth, self.height) <= 0:
            raise GeometryError("building dimensions must be positive")
        if self.roof not in ROOF_KINDS:
            raise GeometryError(f"unknown roof kind {self.roof!r}")
        if self.footprint not in ("rectangle", "l-shape"):
            raise GeometryError(f"unknown footprint {self.footprint!r}")
        if self.footprint == "l-shape":
            if not (0 < self.notch_width < self.width):
                raise GeometryError("notch_width must lie inside the width")
            if not (0 < self.notch_depth < self.depth):
                raise GeometryError("notch_depth must lie inside the depth")
            if self.roof != "flat":
                raise GeometryError("l-shape footprints take flat roofs")
        if self.overhang and self.roof != "flat":
            raise GeometryError("overhangs apply to flat roofs only")
        if self.chimney is not None and self.roof != "flat":
            raise GeometryError("chimneys apply to flat roofs only")

    def to_dict(self):
        d = asdict(self)
        if d["chimney"] is not None:
            d["chimney"] = list(d["chimney"])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("chimney") is not None:
            d["chimney"] = tuple(d["chimney"])
        return cls(**d)


@dataclass(frozen=True)
class ScanSpec:
    roof_density: float = 12.0        # points per square meter
    wall_density: float = 4.0
    noise_sigma: float = 0.02         # meters
    wall_dropout: float = 0.15

    def __post_init__(self):
        if self.roof_density <= 0 or self.wall_density <= 0:
            raise GeometryError("densities must be positive")
        if self.wall_density >= self.roof_density:
            raise GeometryError("wall density must be below roof density")
        if self.noise_sigma < 0 or not 0 <= self.wall_dropout <= 1:
            raise GeometryError("invalid noise or dropout value")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class _MeshBuilder:
    def __init__(self):
        self.vertices = []
        self.index = {}
        self.faces = []

    def vertex(self, x, y, z):
        key = (round(float(x), 9), round(float(y), 9), round(float(z), 9))
        if key not in self.index:
            self.index[key] = len(self.vertices)
            self.vertices.append(key)
        return self.index[key]

    def face(self, corners):
        self.faces.append(tuple(self.vertex(*c) for c in corners))

    def build(self):
        return PolyMesh(
            vertices=np.array(self.vertices, dtype=np.float64),
            faces=tuple(self.faces),
        )


def _ridge_inset(spec, rise):
    """Horizontal inset leaning sloped end faces clearly off vertical."""
    xy_extent = max(spec.width, spec.depth)
    z_extent = spec.height + rise
    inset = _TILT_SAFETY * math.tan(math.radians(5.0)) * rise * xy_extent / z_extent
    return min(max(inset, 0.02 * xy_extent), 0.24 * min(spec.width, spec.depth))


def _wall(builder, a, b, z0, z1):
    """Vertical rectangle over the footprint segment a -> b."""
    (ax, ay), (bx, by) = a, b
    builder.face(
        [(ax, ay, z0), (bx, by, z0), (bx, by, z1), (ax, ay, z1)]
    )


def _rectangle_building(spec, builder):
    w, d, h = spec.width, spec.depth, spec.height
    corners = [(0.0, 0.0), (w, 0.0), (w, d), (0.0, d)]
    # floor wound clockwise from above: normal points down
    builder.face([(x, y, 0.0) for x, y in reversed(corners)])
    for i in range(4):
        _wall(builder, corners[i], corners[(i + 1) % 4], 0.0, h)

    if spec.roof == "flat":
        o = spec.overhang
        roof = [(-o, -o), (w + o, -o), (w + o, d + o), (-o, d + o)]
        builder.face([(x, y, h) for x, y in roof])
        if o > 0:
            # soffit ring: four downward trapezoids under the eaves
            for i in range(4):
                a, b = corners[i], corners[(i + 1) % 4]
                ra, rb = roof[i], roof[(i + 1) % 4]
                builder.face([(*a, h), (*ra, h), (*rb, h), (*b, h)])
        if spec.chimney is not None:
            cx, cy, cw, cd, ch = spec.chimney
            top = h + ch
            cc = [(cx, cy), (cx + cw, cy), (cx + cw, cy + cd), (cx, cy + cd)]
            for i in range(4):
                _wall(builder, cc[i], cc[(i + 1) % 4], h, top)
            builder.face([(x, y, top) for x, y in cc])
        return

    rise = math.tan(math.radians(spec.pitch_deg)) * (
        d if spec.roof == "shed" else d / 2.0
    )
    if spec.roof == "shed":
        delta = _ridge_inset(spec, rise)
        top = h + rise
        yt = d - delta
        left, right = (delta, yt, top), (w - delta, yt, top)
        builder.face([(0.0, 0.0, h), (w, 0.0, h), right, left])            # slope
        builder.face([(0.0, d, h), left, right, (w, d, h)])                # high end
        builder.face([(0.0, 0.0, h), left, (0.0, d, h)])                   # side
        builder.face([(w, 0.0, h), (w, d, h), right])                      # side
        return

    # gable and hip share a ridge parallel to x; the gable's inset is just
    # small enough to lean the end triangles off vertical
    rise = math.tan(math.radians(spec.pitch_deg)) * d / 2.0
    top = h + rise
    if spec.roof == "hip":
        inset = min(d / 2.0, w / 3.0)
    else:
        inset = _ridge_inset(spec, rise)
    r1 = (inset, d / 2.0, top)
    r2 = (w - inset, d / 2.0, top)
    builder.face([(0.0, 0.0, h), (w, 0.0, h), r2, r1])                     # south slope
    builder.face([(w, d, h), (0.0, d, h), r1, r2])                         # north slope
    builder.face([(0.0, d, h), (0.0, 0.0, h), r1])                         # west end
    builder.face([(w, 0.0, h), (w, d, h), r2])                             # east end


def _l_shape_building(spec, builder):
    w1, d2, h = spec.width, spec.depth, spec.height
    w2, d1 = spec.notch_width, spec.notch_depth
    # lower leg [0,w1]x[0,d1], upper leg [0,w2]x[d1,d2]
    lower = [(0.0, 0.0), (w1, 0.0), (w1, d1), (w2, d1), (0.0, d1)]
    upper = [(0.0, d1), (w2, d1), (w2, d2), (0.0, d2)]
    for poly in (lower, upper):
        builder.face([(x, y, 0.0) for x, y in reversed(poly)])
        builder.face([(x, y, h) for x, y in poly])
    # one wall per floor edge, so floor-wall connectivity holds edge by edge
    boundary = [
        ((0.0, 0.0), (w1, 0.0)),
        ((w1, 0.0), (w1, d1)),
        ((w1, d1), (w2, d1)),     # notch step
        ((w2, d1), (0.0, d1)),    # interior wall between the legs
        ((0.0, d1), (0.0, 0.0)),
        ((w2, d1), (w2, d2)),
        ((w2, d2), (0.0, d2)),
        ((0.0, d2), (0.0, d1)),
    ]
    for a, b in boundary:
        _wall(builder, a, b, 0.0, h)


def generate_building(spec, rng=None):
    """Deterministic mesh for one building spec."""
    builder = _MeshBuilder()
    if spec.footprint == "rectangle":
        _rectangle_building(spec, builder)
    else:
        _l_shape_building(spec, builder)
    mesh = builder.build()
    if mesh.vertex_count > 100 or mesh.face_count > 500:
        raise GeometryError("building exceeds the vertex or face budget")
    return mesh


def _face_kinds(mesh):
    """Scan role per face: "down" (unseen), "wall", or "roof"."""
    kinds = []
    for f in mesh.faces:
        n = face_normal(mesh, f)
        norm = np.linalg.norm(n)
        nz = n[2] / norm if norm > 0 else 0.0
        if nz <= -_COS5:
            kinds.append("down")
        elif abs(nz) < math.sin(math.radians(5.0)):
            kinds.append("wall")
        else:
            kinds.append("roof")
    return kinds


def _sample_polygon(mesh, f, count, rng):
    tris = [(f[0], f[k], f[k + 1]) for k in range(1, len(f) - 1)]
    areas = np.array(
        [
            0.5 * np.linalg.norm(np.cross(b - a, c - a))
            for a, b, c in (
                (mesh.vertices[i], mesh.vertices[j], mesh.vertices[k])
                for i, j, k in tris
            )
        ]
    )
    if areas.sum() == 0:
        return np.empty((0, 3))
    pick = rng.choice(len(tris), size=count, p=areas / areas.sum())
    u = rng.random(count)
    v = rng.random(count)
    fold = u + v > 1.0
    u[fold] = 1.0 - u[fold]
    v[fold] = 1.0 - v[fold]
    a = mesh.vertices[[tris[t][0] for t in pick]]
    b = mesh.vertices[[tris[t][1] for t in pick]]
    c = mesh.vertices[[tris[t][2] for t in pick]]
    return a + u[:, None] * (b - a) + v[:, None] * (c - a)


def simulate_scan(mesh, scan, rng):
    """Airborne-style point cloud for a building mesh."""
    kinds = _face_kinds(mesh)
    clouds = []
    for f, kind in zip(mesh.faces, kinds):
        if kind == "down":
            continue
        if kind == "wall":
            if rng.random() < scan.wall_dropout:
                continue
            density = scan.wall_density
        else:
            density = scan.roof_density
        count = int(rng.poisson(face_area(mesh, f) * density))
        if count:
            clouds.append(_sample_polygon(mesh, f, count, rng))
    if not clouds:
        raise GeometryError("simulated scan produced no points")
    cloud = np.vstack(clouds)
    if scan.noise_sigma > 0:
        cloud = cloud + rng.normal(scale=scan.noise_sigma, size=cloud.shape)
    return cloud


def random_spec(rng):
    """Random building spec drawn from the corpus distribution."""
    width = float(rng.uniform(8.0, 18.0))
    depth = float(rng.uniform(6.0, 14.0))
    height = float(rng.uniform(3.5, 8.0))
    if rng.random() < 0.25:
        return BuildingSpec(
            width=width, depth=depth, height=height, roof="flat",
            footprint="l-shape",
            notch_width=float(rng.uniform(0.35, 0.65) * width),
            notch_depth=float(rng.uniform(0.35, 0.65) * depth),
        )
    roof = ROOF_KINDS[int(rng.integers(len(ROOF_KINDS)))]
    kwargs = {}
    if roof == "flat":
        if rng.random() < 0.3:
            kwargs["overhang"] = float(rng.uniform(0.02, 0.05))
        if rng.random() < 0.3:
            cw = float(rng.uniform(0.8, 1.6))
            cd = float(rng.uniform(0.8, 1.6))
            kwargs["chimney"] = (
                float(rng.uniform(1.0, width - cw - 1.0)),
                float(rng.uniform(1.0, depth - cd - 1.0)),
                cw, cd, float(rng.uniform(0.8, 2.0)),
            )
    else:
        kwargs["pitch_deg"] = float(rng.uniform(15.0, 40.0))
    return BuildingSpec(
        width=width, depth=depth, height=height, roof=roof, **kwargs
    )


def generate_corpus(out_dir, n, seed, scan=None):
    """Write n paired (mesh, cloud) files plus a manifest; returns paths."""
    out_dir = str(out_dir)
    import os

    os.makedirs(out_dir, exist_ok=True)
    scan = scan or ScanSpec()
    root = np.random.SeedSequence(seed)
    entries = []
    for i, child in enumerate(root.spawn(n)):
        rng = np.random.default_rng(child)
        spec = random_spec(rng)
        mesh = generate_building(spec, rng)
        cloud = simulate_scan(mesh, scan, rng)
        mesh_path = os.path.join(out_dir, f"building_{i:05d}.mesh")
        cloud_path = os.path.join(out_dir, f"building_{i:05d}.cloud")
        write_mesh(mesh_path, mesh)
        write_cloud(cloud_path, cloud)
        entries.append(
            {
                "id": i,
                "mesh": os.path.basename(mesh_path),
                "cloud": os.path.basename(cloud_path),
                "spec": spec.to_dict(),
            }
        )
    manifest = {
        "seed": seed,
        "count": n,
        "scan": scan.to_dict(),
        "buildings": entries,
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest_path
