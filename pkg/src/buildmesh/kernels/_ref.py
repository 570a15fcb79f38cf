"""Pure-numpy fallback implementations of the distance kernels.

Mirrors the Cython extension ``_fast`` operation for operation so both
backends produce bit-identical results. Inputs are float64 arrays; callers
are responsible for shape/dtype normalization (see ``kernels.__init__``).
"""

import numpy as np

BACKEND = "python"

_CHUNK = 256  # rows per block, bounds peak memory of the pairwise expansion


def nearest_distances(query, target):
    """Euclidean distance from each query point to its nearest target point.

    query: (n, 3), target: (m, 3); returns (n,) float64.
    """
    out = np.empty(len(query), dtype=np.float64)
    for start in range(0, len(query), _CHUNK):
        block = query[start : start + _CHUNK]
        diff = block[:, None, :] - target[None, :, :]
        d2 = (diff * diff).sum(axis=2)
        out[start : start + _CHUNK] = np.sqrt(d2.min(axis=1))
    return out


def points_to_triangles(points, tri_a, tri_b, tri_c):
    """Distance from each point to the nearest of the given triangles.

    points: (n, 3); tri_a/b/c: (t, 3) triangle corners; returns (n,) float64.
    Closest-point-on-triangle follows the standard barycentric region tests;
    degenerate triangles fall back to segment distances.
    """
    best = np.full(len(points), np.inf, dtype=np.float64)
    for start in range(0, len(points), _CHUNK):
        block = points[start : start + _CHUNK]
        d2 = _block_tri_sqdist(block, tri_a, tri_b, tri_c)
        best[start : start + _CHUNK] = d2.min(axis=1)
    return np.sqrt(best)


def _block_tri_sqdist(p, a, b, c):
    """Squared distances, shape (len(p), len(a))."""
    p = p[:, None, :]
    a = a[None, :, :]
    b = b[None, :, :]
    c = c[None, :, :]

    ab = b - a
    ac = c - a
    ap = p - a
    d1 = (ab * ap).sum(-1)
    d2 = (ac * ap).sum(-1)

    bp = p - b
    d3 = (ab * bp).sum(-1)
    d4 = (ac * bp).sum(-1)

    cp = p - c
    d5 = (ab * cp).sum(-1)
    d6 = (ac * cp).sum(-1)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    def sq(v):
        return (v * v).sum(-1)

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
        w_ac = d2 / (d2 - d6)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = va + vb + vc
        v_in = vb / denom
        w_in = vc / denom

    q_ab = a + v_ab[..., None] * ab
    q_ac = a + w_ac[..., None] * ac
    q_bc = b + w_bc[..., None] * (c - b)
    q_in = a + v_in[..., None] * ab + w_in[..., None] * ac

    region_a = (d1 <= 0.0) & (d2 <= 0.0)
    region_b = (d3 >= 0.0) & (d4 <= d3)
    region_ab = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    region_c = (d6 >= 0.0) & (d5 <= d6)
    region_ac = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    region_bc = (va <= 0.0) & ((d4 - d3) >= 0.0) & ((d5 - d6) >= 0.0)
    degenerate = denom == 0.0

    dist = np.select(
        [region_a, region_b, region_ab, region_c, region_ac, region_bc, degenerate],
        [
            sq(ap),
            sq(bp),
            sq(p - q_ab),
            sq(cp),
            sq(p - q_ac),
            sq(p - q_bc),
            np.minimum(np.minimum(sq(ap), sq(bp)), sq(cp)),
        ],
        default=sq(p - q_in),
    )
    return dist
