"""Evaluation metrics for reconstructed meshes.

Point-set metrics (chamfer, Hausdorff) run on surface samples; MDE is the
one-sided mean distance from ground-truth surface samples to the predicted
surface. Vertex and edge precision/recall use greedy ascending one-to-one
matching under a distance threshold.
"""

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .geometry import (
    mesh_edges,
    points_to_mesh_distance,
    sample_surface,
    surface_area,
    total_edge_length,
)
from .kernels import nearest_distances

DEFAULT_MATCH_THRESHOLD = 1.0  # meters
EDGE_SAMPLES = 100


@dataclass(frozen=True)
class MatchReport:
    precision: float
    recall: float
    f1: float
    threshold: float
    matches: tuple

    @classmethod
    def from_matches(cls, matches, n_gt, n_pred, threshold):
        m = len(matches)
        precision = m / n_pred if n_pred else 0.0
        recall = m / n_gt if n_gt else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        return cls(precision, recall, f1, threshold, tuple(matches))


def _as_points(points, name):
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3 or len(points) == 0:
        raise GeometryError(f"{name} must be a nonempty (n, 3) point set")
    return points


def chamfer(a, b):
    """Sum of the two directed mean nearest-neighbor distances."""
    a = _as_points(a, "a")
    b = _as_points(b, "b")
    return float(nearest_distances(a, b).mean() + nearest_distances(b, a).mean())


def hausdorff(a, b):
    """Max of the two directed sup-inf nearest-neighbor distances."""
    a = _as_points(a, "a")
    b = _as_points(b, "b")
    return float(max(nearest_distances(a, b).max(), nearest_distances(b, a).max()))


def mde(gt_mesh, pred_mesh, n=10000, seed=0):
    """Mean distance from ground-truth surface samples to the predicted
    surface (one-sided by design)."""
    samples = sample_surface(gt_mesh, n, np.random.default_rng(seed))
    return float(points_to_mesh_distance(samples, pred_mesh).mean())


def _greedy_match(distances, threshold):
    """One-to-one matches, cheapest pairs first, strictly below threshold."""
    n, m = distances.shape
    order = np.argsort(distances, axis=None, kind="stable")
    gt_used = np.zeros(n, dtype=bool)
    pred_used = np.zeros(m, dtype=bool)
    matches = []
    for flat in order:
        i, j = divmod(int(flat), m)
        if distances[i, j] >= threshold:
            break
        if gt_used[i] or pred_used[j]:
            continue
        gt_used[i] = True
        pred_used[j] = True
        matches.append((i, j))
    return matches


def vertex_prf(gt_vertices, pred_vertices, threshold=DEFAULT_MATCH_THRESHOLD):
    """Precision/recall/F1 of the predicted vertex set."""
    gt = np.asarray(gt_vertices, dtype=np.float64).reshape(-1, 3)
    pred = np.asarray(pred_vertices, dtype=np.float64).reshape(-1, 3)
    if len(gt) == 0 or len(pred) == 0:
        return MatchReport.from_matches([], len(gt), len(pred), threshold)
    d = np.linalg.norm(gt[:, None, :] - pred[None, :, :], axis=-1)
    matches = _greedy_match(d, threshold)
    return MatchReport.from_matches(matches, len(gt), len(pred), threshold)


def _edge_points(mesh, samples=EDGE_SAMPLES):
    """(E, samples, 3) evenly spaced points along each unique edge."""
    edges = sorted(mesh_edges(mesh.faces))
    verts = np.asarray(mesh.vertices, dtype=np.float64)
    t = np.linspace(0.0, 1.0, samples)[None, :, None]
    a = verts[[e[0] for e in edges]][:, None, :]
    b = verts[[e[1] for e in edges]][:, None, :]
    return edges, a + (b - a) * t


def edge_distance(points_a, points_b):
    """RMS distance between order-aligned edge samples, min over reversal."""
    fwd = np.sqrt(np.mean(np.sum((points_a - points_b) ** 2, axis=-1)))
    rev = np.sqrt(np.mean(np.sum((points_a - points_b[::-1]) ** 2, axis=-1)))
    return float(min(fwd, rev))


def edge_prf(gt_mesh, pred_mesh, threshold=DEFAULT_MATCH_THRESHOLD):
    """Precision/recall/F1 of the predicted edge set."""
    gt_edges, gt_pts = _edge_points(gt_mesh)
    pred_edges, pred_pts = _edge_points(pred_mesh)
    if len(gt_edges) == 0 or len(pred_edges) == 0:
        return MatchReport.from_matches([], len(gt_edges), len(pred_edges), threshold)
    d = np.empty((len(gt_edges), len(pred_edges)))
    for i in range(len(gt_edges)):
        for j in range(len(pred_edges)):
            d[i, j] = edge_distance(gt_pts[i], pred_pts[j])
    matches = _greedy_match(d, threshold)
    return MatchReport.from_matches(matches, len(gt_edges), len(pred_edges), threshold)


def count_errors(gt_mesh, pred_mesh):
    """Absolute differences of the four global aggregates."""
    return {
        "vertex_count": abs(gt_mesh.vertex_count - pred_mesh.vertex_count),
        "face_count": abs(gt_mesh.face_count - pred_mesh.face_count),
        "edge_length": abs(total_edge_length(gt_mesh) - total_edge_length(pred_mesh)),
        "face_area": abs(surface_area(gt_mesh) - surface_area(pred_mesh)),
    }
