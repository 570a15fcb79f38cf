import numpy as np
import pytest
import torch
from conftest import box_quantized, identity_transform, unit_lattice

from buildmesh import codec
from buildmesh.constraints import REDISTRIBUTE_PROPORTIONAL
from buildmesh.errors import DeadEndError
from buildmesh.geometry import QuantizedMesh
from buildmesh.nn import FaceModule, PointCloudEncoder, VertexModule, miniature_config
from buildmesh.pipeline import (
    FAIL_EXHAUSTED,
    GenerationOutcome,
    SamplerConfig,
    reconstruct_mesh,
)
from buildmesh.sampling import (
    FAIL_NO_STOP_FACES,
    FAIL_NO_STOP_VERTICES,
    NeuralSampler,
    nucleus_sample,
    rollout_faces,
    rollout_vertices,
)
from buildmesh.validity import (
    COVERAGE_OK,
    MISSING_FLOOR_FACES,
    MISSING_FLOOR_VERTICES,
    check_floor_coverage,
    check_floor_wall_connectivity,
    check_no_diagonal_wall_edges,
)


def lattice_points(coords):
    """Normalized-space coordinates of continuous lattice positions."""
    lat = unit_lattice()
    return lat.origin + np.asarray(coords, dtype=np.float64) * lat.cell


def footprint_cloud(rng, nx=200, ny=150, nz=100, n=400):
    coords = np.column_stack(
        [
            rng.uniform(0, nx, size=n),
            rng.uniform(0, ny, size=n),
            np.full(n, float(nz)),
        ]
    )
    return lattice_points(coords)


class TestNucleusSample:
    def test_full_distribution_when_top_p_one(self, rng):
        logits = np.zeros(4)
        mask = np.ones(4, dtype=bool)
        seen = {nucleus_sample(logits, mask, rng, top_p=1.0) for _ in range(400)}
        assert seen == {0, 1, 2, 3}

    def test_dominant_token_owns_the_nucleus(self, rng):
        logits = np.log(np.array([0.95, 0.03, 0.02]))
        mask = np.ones(3, dtype=bool)
        draws = {nucleus_sample(logits, mask, rng, top_p=0.9) for _ in range(200)}
        assert draws == {0}

    def test_masked_argmax_never_sampled(self, rng):
        logits = np.array([10.0, 0.0, 0.0])
        mask = np.array([False, True, True])
        draws = {nucleus_sample(logits, mask, rng, top_p=0.9) for _ in range(200)}
        assert 0 not in draws

    def test_dead_end_raises(self, rng):
        with pytest.raises(DeadEndError):
            nucleus_sample(np.zeros(3), np.zeros(3, dtype=bool), rng)

    def test_deterministic_given_rng_state(self):
        logits = np.array([0.1, 0.3, 0.2, 0.05])
        mask = np.ones(4, dtype=bool)
        a = [nucleus_sample(logits, mask, np.random.default_rng(5)) for _ in range(1)]
        b = [nucleus_sample(logits, mask, np.random.default_rng(5)) for _ in range(1)]
        assert a == b


class _FlatSession:
    """Stub decoder session with constant logits."""

    def __init__(self, logits):
        self.logits = np.asarray(logits, dtype=np.float64)

    def push(self, token):
        return self.logits


class TestRollouts:
    def test_truncation_without_stop(self, rng):
        logits = np.zeros(codec.VERTEX_VOCAB)
        logits[codec.VERTEX_STOP] = -1e9  # never stops
        tokens, failure = rollout_vertices(_FlatSession(logits), rng, max_len=4)
        assert failure == FAIL_NO_STOP_VERTICES
        assert len(tokens) == 4

    def test_successful_rollout_decodes(self, rng):
        logits = np.zeros(codec.VERTEX_VOCAB)
        tokens, failure = rollout_vertices(
            _FlatSession(logits), rng, max_len=301, top_p=1.0
        )
        if failure is None:
            verts = codec.decode_vertices(tokens)
            assert len(verts) >= 1

    def test_face_stop_before_any_face_impossible(self, rng):
        for seed in range(30):
            local = np.random.default_rng(seed)
            tokens, failure = rollout_faces(
                _FlatSession(np.zeros(8)), 6, local, max_len=5, top_p=1.0
            )
            assert tokens[0] != codec.FACE_STOP

    def test_face_truncation(self, rng):
        # strictly ranked logits with a tight nucleus make the rollout
        # deterministic: 2 3 4 5 end-face 2 ... with the stop unreachable
        logits = np.array([-1e9, 16.0, 20.0, 19.0, 18.0, 17.0, -1e9, -1e9])
        tokens, failure = rollout_faces(
            _FlatSession(logits), 6, rng, max_len=6, top_p=0.5,
            redistribution=REDISTRIBUTE_PROPORTIONAL,
        )
        assert failure == FAIL_NO_STOP_FACES
        assert tokens == [2, 3, 4, 5, codec.FACE_END, 2]


class TestValidityChecks:
    def test_box_passes_everything(self, rng):
        box = box_quantized()
        cloud = footprint_cloud(rng)
        assert check_floor_coverage(box, cloud) == COVERAGE_OK
        assert check_floor_wall_connectivity(box)
        assert check_no_diagonal_wall_edges(box)

    def test_missing_floor_face(self, rng):
        box = box_quantized()
        no_floor = QuantizedMesh(
            vertices=box.vertices, faces=box.faces[1:],
            lattice=box.lattice, transform=box.transform,
        )
        assert check_floor_coverage(no_floor, footprint_cloud(rng)) == MISSING_FLOOR_FACES

    def test_cloud_wider_than_vertex_bbox(self, rng):
        box = box_quantized()
        coords = np.column_stack(
            [rng.uniform(0, 500, 400), rng.uniform(0, 150, 400), np.full(400, 100.0)]
        )
        verdict = check_floor_coverage(box, lattice_points(coords))
        assert verdict == MISSING_FLOOR_VERTICES

    def test_missing_wall_breaks_connectivity(self):
        box = box_quantized()
        faces = tuple(f for f in box.faces if f != (0, 1, 5, 4))
        partial = QuantizedMesh(
            vertices=box.vertices, faces=faces,
            lattice=box.lattice, transform=box.transform,
        )
        assert not check_floor_wall_connectivity(partial)

    def test_slanted_neighbor_is_not_a_wall(self):
        # lean-to: the face over floor edge (0, 1) tilts 45 degrees inward,
        # so it classifies non-wall and the floor edge is orphaned
        verts = np.array(
            [
                [0, 0, 0], [200, 0, 0], [0, 150, 0], [200, 150, 0],
                [0, 100, 100], [200, 100, 100], [0, 150, 100], [200, 150, 100],
            ]
        )
        mesh = QuantizedMesh(
            vertices=verts,
            faces=(
                (0, 2, 3, 1),          # floor
                (0, 1, 5, 4),          # slanted front, 45 degrees
                (2, 6, 7, 3),          # back wall
                (0, 4, 6, 2),          # side wall
                (1, 3, 7, 5),          # side wall
                (4, 5, 7, 6),          # top
            ),
            lattice=unit_lattice(),
            transform=identity_transform(),
        )
        assert not check_floor_wall_connectivity(mesh)

    def test_no_floor_face_fails_connectivity(self):
        box = box_quantized()
        walls_only = QuantizedMesh(
            vertices=box.vertices, faces=box.faces[2:],
            lattice=box.lattice, transform=box.transform,
        )
        assert not check_floor_wall_connectivity(walls_only)

    def test_diagonal_wall_edge(self):
        box = box_quantized()
        # split one wall into triangles: the split edge is diagonal
        faces = ((0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5), (0, 5, 4),
                 (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5))
        tilted = QuantizedMesh(
            vertices=box.vertices, faces=faces,
            lattice=box.lattice, transform=box.transform,
        )
        assert not check_no_diagonal_wall_edges(tilted)

    def test_rectangular_wall_ok(self):
        assert check_no_diagonal_wall_edges(box_quantized())


class ScriptedSampler:
    """Replays fixed vertex/face results; the last entry repeats forever."""

    def __init__(self, vertex_script, face_script):
        self.vertex_script = list(vertex_script)
        self.face_script = list(face_script)

    def _next(self, script):
        return script.pop(0) if len(script) > 1 else script[0]

    def sample_vertices(self, cloud, rng):
        return self._next(self.vertex_script)

    def sample_faces(self, vertices, rng):
        return self._next(self.face_script)


class TestReconstructLoop:
    """The loop builds its lattice from the input cloud, so the scripted
    meshes span the full 0..255 range of a cube-filling cloud."""

    CFG = SamplerConfig()

    def _cloud(self, rng):
        return rng.uniform(0.0, 12.0, size=(400, 3))

    def test_valid_first_sample_single_calls(self, rng):
        box = box_quantized(nx=255, ny=255, nz=255)
        sampler = ScriptedSampler([(box.vertices, None)], [(box.faces, None)])
        out = reconstruct_mesh(self._cloud(rng), sampler, self.CFG, rng)
        assert out.ok
        assert out.failure is None
        assert out.vertex_rollouts == 1
        assert out.face_rollouts == 1

    def test_retry_after_diagonal_then_success(self, rng):
        box = box_quantized(nx=255, ny=255, nz=255)
        bad_faces = ((0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5), (0, 5, 4),
                     (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5))
        sampler = ScriptedSampler(
            [(box.vertices, None)],
            [(bad_faces, None), (box.faces, None)],
        )
        out = reconstruct_mesh(self._cloud(rng), sampler, self.CFG, rng)
        assert out.ok
        assert out.face_rollouts == 2
        assert out.attempts == ["diagonal-walls"]

    def test_missing_floor_vertices_exhausts_vertex_loop(self, rng):
        # quarter-width box under the full-size cloud: no vertex set spans it
        small = box_quantized(nx=60, ny=255, nz=255)
        sampler = ScriptedSampler([(small.vertices, None)], [(small.faces, None)])
        out = reconstruct_mesh(self._cloud(rng), sampler, self.CFG, rng)
        assert not out.ok
        assert out.failure == FAIL_EXHAUSTED
        assert out.vertex_rollouts == 10
        assert out.face_rollouts == 10  # one per vertex iteration, then break
        assert set(out.attempts) == {"missing-floor-vertices"}

    def test_missing_floor_faces_retries_faces_only(self, rng):
        box = box_quantized(nx=255, ny=255, nz=255)
        sampler = ScriptedSampler(
            [(box.vertices, None)], [(box.faces[1:], None)]
        )
        out = reconstruct_mesh(self._cloud(rng), sampler, self.CFG, rng)
        assert not out.ok
        assert out.failure == FAIL_EXHAUSTED
        assert out.face_rollouts == 100
        assert set(out.attempts) == {"missing-floor-faces"}

    def test_success_outcome_revalidates(self, rng):
        box = box_quantized(nx=255, ny=255, nz=255)
        sampler = ScriptedSampler([(box.vertices, None)], [(box.faces, None)])
        cloud = self._cloud(rng)
        out = reconstruct_mesh(cloud, sampler, self.CFG, rng)
        q = out.quantized
        from buildmesh.geometry import normalize
        cloud_n, _ = normalize(cloud)
        assert check_floor_coverage(q, cloud_n) == COVERAGE_OK
        assert check_floor_wall_connectivity(q)
        assert check_no_diagonal_wall_edges(q)

    def test_neural_sampler_deterministic(self):
        cfg = miniature_config()
        torch.manual_seed(0)
        sampler = NeuralSampler(
            PointCloudEncoder(cfg).eval(),
            VertexModule(cfg).eval(),
            FaceModule(cfg).eval(),
        )
        cloud = np.random.default_rng(3).uniform(-0.5, 0.5, size=(50, 3))
        a = reconstruct_mesh(cloud, sampler, self.CFG, np.random.default_rng(9))
        b = reconstruct_mesh(cloud, sampler, self.CFG, np.random.default_rng(9))
        assert a.attempts == b.attempts
        assert a.ok == b.ok
        if a.ok:
            assert np.array_equal(a.quantized.vertices, b.quantized.vertices)
            assert a.quantized.faces == b.quantized.faces
