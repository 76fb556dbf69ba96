"""Flat array bundle describing a set of planes with occupancy grids,
shared by the compiled and the pure-numpy ray-casting backends."""

from __future__ import annotations

import numpy as np


class SurfacePack:
    """Per-surface plane parameters, 2D frames and packed occupancy bits.

    ``bits`` is one flat uint8 array; surface s owns the row-major block
    ``bits[start[s] : start[s] + rows[s] * cols[s]]``.
    """

    def __init__(self, normals, offsets, basis_u, basis_v, origin, pixel, rows, cols, start, bits):
        self.normals = np.ascontiguousarray(normals, dtype=np.float64)
        self.offsets = np.ascontiguousarray(offsets, dtype=np.float64)
        self.basis_u = np.ascontiguousarray(basis_u, dtype=np.float64)
        self.basis_v = np.ascontiguousarray(basis_v, dtype=np.float64)
        self.origin = np.ascontiguousarray(origin, dtype=np.float64)
        self.pixel = np.ascontiguousarray(pixel, dtype=np.float64)
        self.rows = np.ascontiguousarray(rows, dtype=np.int32)
        self.cols = np.ascontiguousarray(cols, dtype=np.int32)
        self.start = np.ascontiguousarray(start, dtype=np.int64)
        self.bits = np.ascontiguousarray(bits, dtype=np.uint8)

    @property
    def count(self) -> int:
        return len(self.offsets)

    @classmethod
    def from_surfaces(cls, surfaces) -> "SurfacePack":
        """Build from objects exposing normal, offset, basis_u, basis_v and
        an ``occupancy`` bitmap (planes.OccupancyBitmap)."""
        m = len(surfaces)
        normals = np.zeros((m, 3))
        offsets = np.zeros(m)
        basis_u = np.zeros((m, 3))
        basis_v = np.zeros((m, 3))
        origin = np.zeros((m, 2))
        pixel = np.ones(m)
        rows = np.zeros(m, dtype=np.int32)
        cols = np.zeros(m, dtype=np.int32)
        start = np.zeros(m, dtype=np.int64)
        chunks = []
        pos = 0
        for i, s in enumerate(surfaces):
            normals[i] = s.normal
            offsets[i] = s.offset
            basis_u[i] = s.basis_u
            basis_v[i] = s.basis_v
            occ = s.occupancy
            pixel[i] = occ.pixel_size
            origin[i] = occ.origin
            rows[i], cols[i] = occ.bits.shape
            start[i] = pos
            if occ.bits.size:
                chunks.append(occ.bits.astype(np.uint8).ravel())
                pos += occ.bits.size
        bits = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.uint8)
        return cls(normals, offsets, basis_u, basis_v, origin, pixel, rows, cols, start, bits)
