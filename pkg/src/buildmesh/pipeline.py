"""Reconstruction loop: sample, check, resample.

The outer loop draws vertex sets, the inner loop draws face sets for the
current vertices. Each candidate mesh runs the validity checks in order:
floor coverage (which decides whether to regenerate vertices or just
faces), floor-wall connectivity, then the diagonal-wall-edge test. The
first candidate passing everything is returned; running out of iterations
reports "exhausted".
"""

from dataclasses import dataclass, field
from typing import Optional

from .constraints import REDISTRIBUTE_EVEN
from .geometry import Lattice, QuantizedMesh, dequantize, normalize
from .validity import (
    COVERAGE_OK,
    MISSING_FLOOR_VERTICES,
    check_floor_coverage,
    check_floor_wall_connectivity,
    check_no_diagonal_wall_edges,
)

FAIL_FLOOR_COVERAGE = "floor-coverage"
FAIL_FLOOR_CONNECTIVITY = "floor-connectivity"
FAIL_DIAGONAL_WALLS = "diagonal-walls"
FAIL_EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class SamplerConfig:
    top_p: float = 0.9
    max_vertex_iterations: int = 10
    max_face_iterations: int = 10
    redistribution: str = REDISTRIBUTE_EVEN

    def __post_init__(self):
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_vertex_iterations < 1 or self.max_face_iterations < 1:
            raise ValueError("iteration budgets must be at least 1")


@dataclass
class GenerationOutcome:
    """Result of one reconstruction: a mesh or a failure reason."""

    mesh: object = None                 # PolyMesh in meters, or None
    quantized: Optional[QuantizedMesh] = None
    failure: Optional[str] = None
    attempts: list = field(default_factory=list)
    vertex_rollouts: int = 0
    face_rollouts: int = 0

    @property
    def ok(self):
        return self.mesh is not None


def reconstruct_mesh(cloud, sampler, cfg, rng):
    """Run the full rejection loop on one point cloud (in meters).

    `sampler` provides sample_vertices(normalized cloud, rng) and
    sample_faces(vertices, rng), each returning (result, failure reason).
    """
    cloud_n, transform = normalize(cloud)
    lattice = Lattice.from_cloud(cloud_n)
    outcome = GenerationOutcome()

    for _ in range(cfg.max_vertex_iterations):
        vertices, failure = sampler.sample_vertices(cloud_n, rng)
        outcome.vertex_rollouts += 1
        if failure is not None:
            outcome.attempts.append(failure)
            continue
        for _ in range(cfg.max_face_iterations):
            faces, failure = sampler.sample_faces(vertices, rng)
            outcome.face_rollouts += 1
            if failure is not None:
                outcome.attempts.append(failure)
                continue
            candidate = QuantizedMesh(
                vertices=vertices, faces=faces, lattice=lattice, transform=transform
            )
            coverage = check_floor_coverage(candidate, cloud_n)
            if coverage == MISSING_FLOOR_VERTICES:
                outcome.attempts.append(coverage)
                break  # current vertex set cannot span the footprint
            if coverage != COVERAGE_OK:
                outcome.attempts.append(coverage)
                continue
            if not check_floor_wall_connectivity(candidate):
                outcome.attempts.append(FAIL_FLOOR_CONNECTIVITY)
                continue
            if not check_no_diagonal_wall_edges(candidate):
                outcome.attempts.append(FAIL_DIAGONAL_WALLS)
                continue
            outcome.quantized = candidate
            outcome.mesh = dequantize(candidate)
            return outcome
    outcome.failure = FAIL_EXHAUSTED
    return outcome
