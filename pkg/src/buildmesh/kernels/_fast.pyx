# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled distance kernels.

Arithmetic mirrors ``_ref`` expression for expression so both backends
return bit-identical float64 results.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()

BACKEND = "cython"


def nearest_distances(double[:, ::1] query, double[:, ::1] target):
    cdef Py_ssize_t n = query.shape[0]
    cdef Py_ssize_t m = target.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double best, dx, dy, dz, d2
    for i in range(n):
        best = INFINITY
        for j in range(m):
            dx = query[i, 0] - target[j, 0]
            dy = query[i, 1] - target[j, 1]
            dz = query[i, 2] - target[j, 2]
            d2 = (dx * dx + dy * dy) + dz * dz
            if d2 < best:
                best = d2
        out[i] = sqrt(best)
    return out_arr


cdef inline double _sq3(double x, double y, double z) noexcept nogil:
    return (x * x + y * y) + z * z


cdef double _tri_sqdist(double px, double py, double pz,
                        double ax, double ay, double az,
                        double bx, double by, double bz,
                        double cx, double cy, double cz) noexcept nogil:
    cdef double abx = bx - ax, aby = by - ay, abz = bz - az
    cdef double acx = cx - ax, acy = cy - ay, acz = cz - az
    cdef double apx = px - ax, apy = py - ay, apz = pz - az
    cdef double d1 = abx * apx + aby * apy + abz * apz
    cdef double d2 = acx * apx + acy * apy + acz * apz
    cdef double bpx = px - bx, bpy = py - by, bpz = pz - bz
    cdef double d3 = abx * bpx + aby * bpy + abz * bpz
    cdef double d4 = acx * bpx + acy * bpy + acz * bpz
    cdef double cpx = px - cx, cpy = py - cy, cpz = pz - cz
    cdef double d5 = abx * cpx + aby * cpy + abz * cpz
    cdef double d6 = acx * cpx + acy * cpy + acz * cpz
    cdef double vc = d1 * d4 - d3 * d2
    cdef double vb = d5 * d2 - d1 * d6
    cdef double va = d3 * d6 - d5 * d4
    cdef double denom = va + vb + vc
    cdef double v, w, qx, qy, qz, da, db, dc

    if d1 <= 0.0 and d2 <= 0.0:
        return _sq3(apx, apy, apz)
    if d3 >= 0.0 and d4 <= d3:
        return _sq3(bpx, bpy, bpz)
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        qx = ax + v * abx
        qy = ay + v * aby
        qz = az + v * abz
        return _sq3(px - qx, py - qy, pz - qz)
    if d6 >= 0.0 and d5 <= d6:
        return _sq3(cpx, cpy, cpz)
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        qx = ax + w * acx
        qy = ay + w * acy
        qz = az + w * acz
        return _sq3(px - qx, py - qy, pz - qz)
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = bx + w * (cx - bx)
        qy = by + w * (cy - by)
        qz = bz + w * (cz - bz)
        return _sq3(px - qx, py - qy, pz - qz)
    if denom == 0.0:
        da = _sq3(apx, apy, apz)
        db = _sq3(bpx, bpy, bpz)
        dc = _sq3(cpx, cpy, cpz)
        if db < da:
            da = db
        if dc < da:
            da = dc
        return da
    v = vb / denom
    w = vc / denom
    qx = ax + abx * v + acx * w
    qy = ay + aby * v + acy * w
    qz = az + abz * v + acz * w
    return _sq3(px - qx, py - qy, pz - qz)


def points_to_triangles(double[:, ::1] points, double[:, ::1] tri_a,
                        double[:, ::1] tri_b, double[:, ::1] tri_c):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t t = tri_a.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, k
    cdef double best, d2
    for i in range(n):
        best = INFINITY
        for k in range(t):
            d2 = _tri_sqdist(points[i, 0], points[i, 1], points[i, 2],
                             tri_a[k, 0], tri_a[k, 1], tri_a[k, 2],
                             tri_b[k, 0], tri_b[k, 1], tri_b[k, 2],
                             tri_c[k, 0], tri_c[k, 1], tri_c[k, 2])
            if d2 < best:
                best = d2
        out[i] = sqrt(best)
    return out_arr
