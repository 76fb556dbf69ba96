# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled ray-casting kernel. Same contract as raycast_py.cast_rays."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, floor


def cast_rays_arrays(
    double[:, ::1] origins,
    double[:, ::1] dirs,
    double[::1] t_max,
    int[::1] excl_a,
    double[::1] excl_a_t,
    int[::1] excl_b,
    double[::1] excl_b_t,
    double[:, ::1] normals,
    double[::1] offsets,
    double[:, ::1] basis_u,
    double[:, ::1] basis_v,
    double[:, ::1] origin,
    double[::1] pixel,
    int[::1] rows,
    int[::1] cols,
    long long[::1] start,
    unsigned char[::1] bits,
):
    cdef Py_ssize_t n = origins.shape[0]
    cdef Py_ssize_t m = offsets.shape[0]
    cdef cnp.ndarray[cnp.int32_t, ndim=1] best_s_arr = np.full(n, -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best_t_arr = np.full(n, np.inf)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] front_arr = np.zeros(n, dtype=np.uint8)
    cdef int[::1] best_s = best_s_arr
    cdef double[::1] best_t = best_t_arr
    cdef unsigned char[::1] front = front_arr

    cdef Py_ssize_t i, s
    cdef double ox, oy, oz, dx, dy, dz, tm
    cdef double denom, t, hx, hy, hz, su, tv
    cdef long long row, col
    cdef double t_min = 1e-9

    with nogil:
        for i in range(n):
            ox = origins[i, 0]; oy = origins[i, 1]; oz = origins[i, 2]
            dx = dirs[i, 0]; dy = dirs[i, 1]; dz = dirs[i, 2]
            tm = t_max[i]
            for s in range(m):
                if rows[s] == 0 or cols[s] == 0:
                    continue
                denom = normals[s, 0] * dx + normals[s, 1] * dy + normals[s, 2] * dz
                if denom == 0.0:
                    continue
                t = (offsets[s] - (normals[s, 0] * ox + normals[s, 1] * oy + normals[s, 2] * oz)) / denom
                if t <= t_min or t >= tm or t >= best_t[i]:
                    continue
                if excl_a[i] == s and t <= excl_a_t[i]:
                    continue
                if excl_b[i] == s and t >= tm - excl_b_t[i]:
                    continue
                hx = ox + t * dx; hy = oy + t * dy; hz = oz + t * dz
                su = basis_u[s, 0] * hx + basis_u[s, 1] * hy + basis_u[s, 2] * hz - origin[s, 0]
                tv = basis_v[s, 0] * hx + basis_v[s, 1] * hy + basis_v[s, 2] * hz - origin[s, 1]
                col = <long long>floor(su / pixel[s])
                row = <long long>floor(tv / pixel[s])
                if row < 0 or row >= rows[s] or col < 0 or col >= cols[s]:
                    continue
                if bits[start[s] + row * cols[s] + col] == 0:
                    continue
                best_t[i] = t
                best_s[i] = s
            if best_s[i] >= 0:
                s = best_s[i]
                denom = normals[s, 0] * dx + normals[s, 1] * dy + normals[s, 2] * dz
                front[i] = 1 if denom < 0.0 else 0
    return best_s_arr, best_t_arr, front_arr
