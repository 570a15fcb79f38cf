"""Distance kernels with a compiled core and a pure-python fallback.

The Cython extension ``_fast`` is used when it was built; otherwise the
numpy implementation ``_ref`` takes over. Setting the environment variable
``BUILDMESH_PURE_PYTHON=1`` forces the fallback (used by the benchmark and
the backend-equivalence tests). Both backends are bit-identical.
"""

import os

import numpy as np

from . import _ref

if os.environ.get("BUILDMESH_PURE_PYTHON"):
    _impl = _ref
else:
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = _ref

BACKEND = _impl.BACKEND


def _as_points(arr, name):
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out.ndim != 2 or out.shape[1] != 3:
        raise ValueError(f"{name} must have shape (n, 3), got {out.shape}")
    return out


def nearest_distances(query, target):
    """Euclidean distance from each row of `query` to its nearest row of `target`."""
    query = _as_points(query, "query")
    target = _as_points(target, "target")
    if len(target) == 0:
        raise ValueError("empty target set")
    return _impl.nearest_distances(query, target)


def points_to_triangles(points, tri_a, tri_b, tri_c):
    """Distance from each point to the nearest of the given triangles."""
    points = _as_points(points, "points")
    tri_a = _as_points(tri_a, "tri_a")
    tri_b = _as_points(tri_b, "tri_b")
    tri_c = _as_points(tri_c, "tri_c")
    if not len(tri_a) == len(tri_b) == len(tri_c):
        raise ValueError("triangle corner arrays must have equal length")
    if len(tri_a) == 0:
        raise ValueError("empty triangle set")
    return _impl.points_to_triangles(points, tri_a, tri_b, tri_c)
