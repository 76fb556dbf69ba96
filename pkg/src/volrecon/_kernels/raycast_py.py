"""Pure-numpy ray-casting backend (plane-major vectorization).

Semantics are shared with the compiled backend: a ray hits surface s where
it crosses the plane at parameter t in (1e-9, t_max) inside a set
occupancy pixel; the first (smallest-t) such crossing wins. Two optional
per-ray exclusions suppress hits on a named surface near the ray origin
(t <= excl_a_t) or near the segment end (t >= t_max - excl_b_t).
"""

from __future__ import annotations

import numpy as np

T_MIN = 1e-9


def cast_rays(origins, dirs, t_max, excl_a, excl_a_t, excl_b, excl_b_t, pack):
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    n = len(origins)
    best_t = np.full(n, np.inf)
    best_s = np.full(n, -1, dtype=np.int32)
    for s in range(pack.count):
        if pack.rows[s] == 0 or pack.cols[s] == 0:
            continue
        denom = dirs @ pack.normals[s]
        num = pack.offsets[s] - origins @ pack.normals[s]
        safe = np.where(denom == 0.0, 1.0, denom)
        t = np.where(denom == 0.0, np.inf, num / safe)
        valid = (t > T_MIN) & (t < t_max) & (t < best_t)
        valid &= ~((excl_a == s) & (t <= excl_a_t))
        valid &= ~((excl_b == s) & (t >= t_max - excl_b_t))
        vi = np.flatnonzero(valid)
        if vi.size == 0:
            continue
        hit = origins[vi] + t[vi, None] * dirs[vi]
        su = hit @ pack.basis_u[s] - pack.origin[s, 0]
        tv = hit @ pack.basis_v[s] - pack.origin[s, 1]
        col = np.floor(su / pack.pixel[s]).astype(np.int64)
        row = np.floor(tv / pack.pixel[s]).astype(np.int64)
        inb = (row >= 0) & (row < pack.rows[s]) & (col >= 0) & (col < pack.cols[s])
        vi = vi[inb]
        if vi.size == 0:
            continue
        occ = pack.bits[pack.start[s] + row[inb] * pack.cols[s] + col[inb]] != 0
        vi = vi[occ]
        best_t[vi] = t[vi]
        best_s[vi] = s
    front = np.zeros(n, dtype=np.uint8)
    hitm = best_s >= 0
    if hitm.any():
        nd = np.einsum("ij,ij->i", dirs[hitm], pack.normals[best_s[hitm]])
        front[hitm] = (nd < 0).astype(np.uint8)
    return best_s, best_t, front
