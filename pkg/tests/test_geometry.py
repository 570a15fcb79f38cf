import math

import numpy as np
import pytest
from conftest import box_quantized, identity_transform, random_canonical_mesh, unit_lattice

from buildmesh import geometry
from buildmesh.errors import GeometryError
from buildmesh.geometry import (
    Lattice,
    PolyMesh,
    QuantizedMesh,
    canonicalize,
    classify_face,
    classify_faces,
    dequantize,
    normalize,
    point_to_mesh_distance,
    quantize,
    sample_surface,
)


class TestNormalize:
    def test_single_point(self):
        cloud, t = normalize([[5.0, 5.0, 5.0]])
        assert np.allclose(cloud, 0.0)
        assert np.allclose(t.translation, [-5, -5, -5])
        assert t.scale == 1.0

    def test_already_unit_radius(self):
        cloud, t = normalize([[-1.0, 0, 0], [1.0, 0, 0]])
        assert np.allclose(cloud, [[-1, 0, 0], [1, 0, 0]])
        assert t.scale == 1.0

    def test_centroid_and_scale(self):
        cloud, t = normalize([[0.0, 0, 0], [4.0, 0, 0]])
        assert np.allclose(cloud, [[-1, 0, 0], [1, 0, 0]])
        assert np.allclose(t.translation, [-2, 0, 0])
        assert t.scale == 0.5

    def test_round_trip_identity(self, rng):
        pts = rng.normal(size=(50, 3)) * 7.0
        cloud, t = normalize(pts)
        assert np.linalg.norm(cloud, axis=1).max() == pytest.approx(1.0)
        back = t.invert(cloud)
        assert np.allclose(back, pts, rtol=1e-9, atol=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(GeometryError, match="empty input"):
            normalize(np.empty((0, 3)))


class TestQuantize:
    def _mesh(self, verts):
        faces = ((0, 1, 2),) if len(verts) >= 3 else ()
        return PolyMesh(vertices=np.asarray(verts, dtype=float), faces=faces)

    def test_bounds(self):
        cloud = np.array([[0.0, 0, 0], [1.0, 1, 1]])
        mesh = self._mesh([[0.0, 0, 0], [1.0, 1, 1], [0.5, 0.5, 0.5]])
        q = quantize(mesh, cloud, identity_transform())
        assert q.vertices.tolist() == [[0, 0, 0], [255, 255, 255], [128, 128, 128]]

    def test_merge_and_degenerate_faces(self):
        cloud = np.array([[0.0, 0, 0], [1.0, 1, 1]])
        mesh = PolyMesh(
            vertices=np.array([[0.0, 0, 0], [1e-9, 0, 0], [1.0, 1, 1], [0.5, 0.5, 0.5]]),
            faces=((0, 1, 2), (0, 2, 3)),
        )
        q = quantize(mesh, cloud, identity_transform())
        # first two vertices collapse to (0,0,0); face (0,1,2) degenerates
        assert len(q.vertices) == 3
        assert q.faces == ((0, 1, 2),)

    def test_zero_extent_axis(self):
        cloud = np.array([[0.0, 0, 0.5], [1.0, 1, 0.5]])  # flat in z
        mesh = self._mesh([[0.0, 0, 0.5], [1.0, 1, 0.5], [0.5, 0, 0.5]])
        q = quantize(mesh, cloud, identity_transform())
        assert np.all(q.vertices[:, 2] == 0)

    def test_dequantize_error_half_cell(self, rng):
        cloud = rng.normal(size=(60, 3))
        cloud_n, t = normalize(cloud)
        idx = rng.choice(60, size=6, replace=False)
        mesh_n = PolyMesh(vertices=cloud_n[idx], faces=((0, 1, 2), (3, 4, 5)))
        lattice = Lattice.from_cloud(cloud_n)
        q = geometry.quantize_on_lattice(mesh_n, lattice, t)
        back_n = lattice.dequantize(q.vertices)
        extent = cloud_n.max(axis=0) - cloud_n.min(axis=0)
        err = np.abs(back_n - mesh_n.vertices)
        assert np.all(err <= extent / 512 + 1e-12)


class TestCanonicalize:
    def test_vertex_order_x_breaks_tie(self):
        mesh = QuantizedMesh(
            vertices=np.array([[2, 0, 0], [1, 0, 0], [0, 5, 0]]),
            faces=((0, 1, 2),),
            lattice=unit_lattice(),
            transform=identity_transform(),
        )
        canon = canonicalize(mesh)
        assert canon.vertices.tolist() == [[1, 0, 0], [2, 0, 0], [0, 5, 0]]

    def test_face_rotation_and_sort(self):
        verts = np.array([[i, 0, 1] for i in range(6)])
        mesh = QuantizedMesh(
            vertices=verts,
            faces=((3, 5, 2), (0, 1, 2, 3)),
            lattice=unit_lattice(),
            transform=identity_transform(),
        )
        canon = canonicalize(mesh)
        assert canon.faces == ((0, 1, 2, 3), (2, 3, 5))

    def test_idempotent_and_geometry_preserving(self, rng):
        for _ in range(25):
            mesh = random_canonical_mesh(rng)
            again = canonicalize(mesh)
            assert np.array_equal(again.vertices, mesh.vertices)
            assert again.faces == mesh.faces

    def test_preserves_coordinate_cycles(self, rng):
        mesh = QuantizedMesh(
            vertices=rng.integers(0, 256, size=(6, 3)),
            faces=((5, 1, 3), (4, 2, 0, 1)),
            lattice=unit_lattice(),
            transform=identity_transform(),
        )
        canon = canonicalize(mesh)

        def cycles(m):
            out = set()
            for f in m.faces:
                coords = tuple(tuple(int(c) for c in m.vertices[i]) for i in f)
                k = coords.index(min(coords))
                out.add(coords[k:] + coords[:k])
            return out

        assert cycles(canon) == cycles(mesh)


class TestSampleSurface:
    def _square(self):
        return PolyMesh(
            vertices=np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]),
            faces=((0, 1, 2, 3),),
        )

    def test_containment(self, rng):
        pts = sample_surface(self._square(), 4, rng)
        assert pts.shape == (4, 3)
        assert np.all(pts[:, :2] >= 0) and np.all(pts[:, :2] <= 1)
        assert np.all(pts[:, 2] == 0)

    def test_area_proportional(self, rng):
        mesh = PolyMesh(
            vertices=np.array(
                [
                    [0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],        # area 1
                    [2.0, 0, 0], [5, 0, 0], [5, 1, 0], [2, 1, 0],        # area 3
                ]
            ),
            faces=((0, 1, 2, 3), (4, 5, 6, 7)),
        )
        pts = sample_surface(mesh, 40000, rng)
        on_second = int((pts[:, 0] >= 2.0).sum())
        assert abs(on_second - 30000) <= 300

    def test_zero_samples(self, rng):
        assert sample_surface(self._square(), 0, rng).shape == (0, 3)

    def test_reproducible(self):
        a = sample_surface(self._square(), 100, np.random.default_rng(7))
        b = sample_surface(self._square(), 100, np.random.default_rng(7))
        assert np.array_equal(a, b)

    def test_zero_area_rejected(self, rng):
        mesh = PolyMesh(vertices=np.zeros((3, 3)) + [[0, 0, 0], [1, 0, 0], [2, 0, 0]],
                        faces=((0, 1, 2),))
        with pytest.raises(GeometryError):
            sample_surface(mesh, 10, rng)


class TestPointToMeshDistance:
    def _square(self):
        return PolyMesh(
            vertices=np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]),
            faces=((0, 1, 2, 3),),
        )

    def test_on_face(self):
        assert point_to_mesh_distance([0.3, 0.7, 0.0], self._square()) == 0.0

    def test_above(self):
        assert point_to_mesh_distance([0.5, 0.5, 1.0], self._square()) == 1.0

    def test_corner(self):
        d = point_to_mesh_distance([2.0, 2.0, 0.0], self._square())
        assert d == pytest.approx(math.sqrt(2.0), abs=1e-12)

    def test_nonnegative_and_zero_on_surface(self, rng):
        mesh = dequantize(box_quantized())
        pts = sample_surface(mesh, 50, rng)
        d = geometry.points_to_mesh_distance(pts, mesh)
        assert np.all(d >= 0)
        assert np.all(d <= 1e-9)


class TestClassifyFace:
    def test_box_faces(self):
        mesh = box_quantized()
        labels = classify_faces(mesh)
        assert labels == ["floor", "roof", "wall", "wall", "wall", "wall"]
        assert classify_face((0, 2, 3, 1), mesh) == "floor"

    def test_pitched_face_is_other(self):
        # 30-degree slope: n_z = cos(30) is below the cos(5) roof threshold
        run = 100
        rise = int(round(run * math.tan(math.radians(30))))
        mesh = QuantizedMesh(
            vertices=np.array(
                [[0, 0, 0], [100, 0, 0], [0, 0, 10],
                 [0, 100, 10 + rise], [100, 100, 10 + rise], [0, 80, 200]]
            ),
            faces=((2, 0, 1), (2, 3, 4)),
            lattice=unit_lattice(),
            transform=identity_transform(),
        )
        # face (2,3,4): from z=10 at y=0 to z=10+rise at y=100
        labels = classify_faces(mesh)
        assert labels[1] == "other"

    def test_degenerate_face_is_other(self):
        mesh = QuantizedMesh(
            vertices=np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 5, 5]]),
            faces=((0, 1, 2),),
            lattice=unit_lattice(),
            transform=identity_transform(),
        )
        assert classify_faces(mesh) == ["other"]
