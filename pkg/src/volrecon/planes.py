"""RANSAC plane detection with per-plane occupancy bitmaps.

Detection is greedy: score candidate planes from locality-biased 3-point
samples, keep the largest connected component of the inliers on a coarse
grid (the point-cluster epsilon), extract the best plane when its
connected support reaches the minimum point count, remove its inliers and
repeat until a missed plane of minimum size is sufficiently improbable.
The occupancy bitmap is a binary grid in the plane frame marking pixels
that contain at least one projected inlier; it is the density-independent
support proxy used by every later stage.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .pointcloud import PointCloud, PointCloudError

_CC_STRUCTURE = np.ones((3, 3), dtype=bool)


@dataclass
class RansacParams:
    distance: float = 0.01
    normal_tol_deg: float = 6.0
    cluster_eps: float = 0.20
    min_points: int = 1000
    miss_prob: float = 0.001
    pixel_size: float = 0.20
    seed: int = 0
    batch: int = 64
    local_k: int = 32


@dataclass
class OccupancyBitmap:
    """Binary support grid in a plane's 2D frame.

    Pixel (row, col) covers [origin + (col, row) * pixel, origin +
    (col+1, row+1) * pixel); a bit is set iff at least one inlier projects
    into the pixel.
    """

    origin: np.ndarray  # (2,) = (s0, t0)
    pixel_size: float
    bits: np.ndarray  # (rows, cols) bool

    @classmethod
    def from_points(cls, coords2d: np.ndarray, pixel_size: float) -> "OccupancyBitmap":
        coords2d = np.asarray(coords2d, dtype=np.float64)
        if coords2d.ndim != 2 or len(coords2d) == 0:
            raise ValueError("need at least one projected point")
        # origin snapped to the global grid so that rebuilding from a point
        # subset keeps pixel boundaries in phase (support can only shrink)
        origin = np.floor(coords2d.min(axis=0) / pixel_size) * pixel_size
        ij = np.floor((coords2d - origin) / pixel_size).astype(np.int64)
        shape = ij.max(axis=0) + 1
        bits = np.zeros((shape[1], shape[0]), dtype=bool)  # rows = t axis
        bits[ij[:, 1], ij[:, 0]] = True
        return cls(origin=origin, pixel_size=pixel_size, bits=bits)

    @classmethod
    def empty(cls, pixel_size: float) -> "OccupancyBitmap":
        return cls(origin=np.zeros(2), pixel_size=pixel_size, bits=np.zeros((0, 0), dtype=bool))

    def support_area(self) -> float:
        return float(self.bits.sum()) * self.pixel_size**2

    def pixel_indices(self, coords2d: np.ndarray):
        rel = (np.asarray(coords2d) - self.origin) / self.pixel_size
        cols = np.floor(rel[:, 0]).astype(np.int64)
        rows = np.floor(rel[:, 1]).astype(np.int64)
        return rows, cols

    def test(self, coords2d: np.ndarray) -> np.ndarray:
        """Occupancy of the pixels containing the given frame coordinates."""
        rows, cols = self.pixel_indices(coords2d)
        ok = (rows >= 0) & (rows < self.bits.shape[0]) & (cols >= 0) & (cols < self.bits.shape[1])
        out = np.zeros(len(rows), dtype=bool)
        if ok.any():
            out[ok] = self.bits[rows[ok], cols[ok]]
        return out

    def occupied_extent(self):
        """((s_min, s_max), (t_min, t_max)) of set pixels, pixel-aligned."""
        rows, cols = np.nonzero(self.bits)
        if len(rows) == 0:
            return None
        px = self.pixel_size
        return (
            (self.origin[0] + cols.min() * px, self.origin[0] + (cols.max() + 1) * px),
            (self.origin[1] + rows.min() * px, self.origin[1] + (rows.max() + 1) * px),
        )


def plane_frame(normal: np.ndarray):
    """Deterministic orthonormal in-plane basis (u, v) for a unit normal.

    Vertical-ish planes get v = +z (so the bitmap's row axis is height);
    horizontal-ish planes get u = +x, v = +y.
    """
    n = np.asarray(normal, dtype=np.float64)
    if abs(n[2]) > 0.99:
        u = np.array([1.0, 0.0, 0.0])
        v = np.array([0.0, 1.0, 0.0])
        return u, v
    u = np.array([n[1], -n[0], 0.0])
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    if v[2] < 0:
        u, v = -u, -v
    return u, v


@dataclass
class DetectedPlane:
    """Plane {x : normal . x = offset} with its supporting inliers."""

    normal: np.ndarray
    offset: float
    inlier_indices: np.ndarray
    basis_u: np.ndarray
    basis_v: np.ndarray
    occupancy: OccupancyBitmap

    def project2d(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.column_stack([pts @ self.basis_u, pts @ self.basis_v])

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(points) @ self.normal - self.offset


def build_occupancy(plane: DetectedPlane, cloud: PointCloud, pixel_size: float) -> OccupancyBitmap:
    if len(plane.inlier_indices) == 0:
        raise ValueError("plane has no inliers")
    coords = plane.project2d(cloud.positions[plane.inlier_indices])
    return OccupancyBitmap.from_points(coords, pixel_size)


def remove_inliers(plane: DetectedPlane, removed, cloud: PointCloud) -> DetectedPlane:
    """Plane with the given point indices dropped and occupancy rebuilt."""
    removed = np.asarray(list(removed) if isinstance(removed, set) else removed, dtype=np.int64)
    if removed.size and not np.isin(removed, plane.inlier_indices).all():
        raise ValueError("removed indices are not a subset of the plane inliers")
    kept = plane.inlier_indices[~np.isin(plane.inlier_indices, removed)]
    if len(kept) == 0:
        occ = OccupancyBitmap.empty(plane.occupancy.pixel_size)
        return replace(plane, inlier_indices=kept, occupancy=occ)
    new = replace(plane, inlier_indices=kept)
    return replace(new, occupancy=build_occupancy(new, cloud, plane.occupancy.pixel_size))


def _largest_component(coords2d: np.ndarray, cluster_eps: float):
    """Mask of the points in the largest 8-connected pixel cluster."""
    origin = coords2d.min(axis=0)
    ij = np.floor((coords2d - origin) / cluster_eps).astype(np.int64)
    shape = ij.max(axis=0) + 1
    grid = np.zeros((shape[1], shape[0]), dtype=bool)
    grid[ij[:, 1], ij[:, 0]] = True
    labels, n = ndimage.label(grid, structure=_CC_STRUCTURE)
    if n <= 1:
        return np.ones(len(coords2d), dtype=bool)
    point_labels = labels[ij[:, 1], ij[:, 0]]
    best = int(np.argmax(np.bincount(point_labels, minlength=n + 1)[1:])) + 1
    return point_labels == best


def _fit_plane(points: np.ndarray):
    """Least-squares plane through points: (unit normal, offset)."""
    centroid = points.mean(axis=0)
    centered = points - centroid
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    normal = eigvecs[:, 0]
    normal = normal / np.linalg.norm(normal)
    return normal, float(normal @ centroid)


def _inliers_of(positions, normals, normal, offset, distance, cos_tol):
    close = np.abs(positions @ normal - offset) <= distance
    aligned = np.abs(normals @ normal) >= cos_tol
    return close & aligned


def detect_planes(cloud: PointCloud, params: RansacParams | None = None) -> list[DetectedPlane]:
    """Greedy RANSAC extraction of planes with connected-support scoring.

    Returned planes have pairwise-disjoint inlier sets, at least
    ``min_points`` connected support each, and normals oriented with the
    majority of their inliers' point normals.
    """
    params = params or RansacParams()
    if not cloud.has_normals:
        raise PointCloudError("plane detection requires normals")
    rng = np.random.default_rng(params.seed)
    cos_tol = math.cos(math.radians(params.normal_tol_deg))
    positions = cloud.positions
    normals = cloud.normals
    remaining = np.arange(len(cloud), dtype=np.int64)
    planes: list[DetectedPlane] = []

    while len(remaining) >= params.min_points:
        pts = positions[remaining]
        nrm = normals[remaining]
        tree = cKDTree(pts)
        p_detect = 0.25 * params.min_points / len(remaining)
        t_max = math.ceil(math.log(params.miss_prob) / math.log(max(1e-12, 1.0 - p_detect)))
        tried = 0
        best = None  # (count, area, normal_key, normal, offset, inlier_mask)
        while tried < t_max:
            nb = min(params.batch, t_max - tried)
            tried += nb
            seeds = rng.integers(0, len(pts), size=nb)
            k = min(params.local_k, len(pts))
            _, nbidx = tree.query(pts[seeds], k=k)
            picks = rng.integers(1, k, size=(nb, 2))
            i2 = nbidx[np.arange(nb), picks[:, 0]]
            i3 = nbidx[np.arange(nb), picks[:, 1]]
            a, b, c = pts[seeds], pts[i2], pts[i3]
            cand_n = np.cross(b - a, c - a)
            lens = np.linalg.norm(cand_n, axis=1)
            ok = lens > 1e-12
            if not ok.any():
                continue
            cand_n = cand_n[ok] / lens[ok, None]
            cand_d = np.einsum("ij,ij->i", cand_n, a[ok])
            # raw counts first, connected filtering only for contenders
            raw = np.empty(len(cand_n), dtype=np.int64)
            for ci in range(len(cand_n)):
                raw[ci] = np.count_nonzero(
                    _inliers_of(pts, nrm, cand_n[ci], cand_d[ci], params.distance, cos_tol)
                )
            floor = params.min_points if best is None else max(params.min_points, best[0])
            for ci in np.argsort(-raw):
                if raw[ci] < floor:
                    break
                mask = _inliers_of(pts, nrm, cand_n[ci], cand_d[ci], params.distance, cos_tol)
                u2, v2 = plane_frame(cand_n[ci])
                coords = np.column_stack([pts[mask] @ u2, pts[mask] @ v2])
                cc = _largest_component(coords, params.cluster_eps)
                count = int(cc.sum())
                if count < params.min_points:
                    continue
                sub = np.flatnonzero(mask)[cc]
                area = len(np.unique(np.floor(coords[cc] / params.pixel_size).astype(np.int64), axis=0))
                key = (count, area, tuple(-cand_n[ci]))
                if best is None or key > (best[0], best[1], tuple(-best[3])):
                    full_mask = np.zeros(len(pts), dtype=bool)
                    full_mask[sub] = True
                    best = (count, area, None, cand_n[ci], cand_d[ci], full_mask)
            if best is not None:
                break
        if best is None:
            break
        # iterative refit: a raw RANSAC candidate catches a biased band of
        # the noisy surface; alternate least-squares refit and inlier
        # recollection until the support stabilizes
        _, _, _, n0, d0, mask = best
        final_mask, normal, offset = mask, n0, d0
        for _ in range(10):
            n1, d1 = _fit_plane(pts[final_mask])
            mask1 = _inliers_of(pts, nrm, n1, d1, params.distance, cos_tol)
            u, v = plane_frame(n1)
            coords = np.column_stack([pts[mask1] @ u, pts[mask1] @ v])
            cc = _largest_component(coords, params.cluster_eps)
            if cc.sum() < params.min_points:
                break
            new_mask = np.zeros(len(pts), dtype=bool)
            new_mask[np.flatnonzero(mask1)[cc]] = True
            changed = (new_mask != final_mask).any()
            final_mask, normal, offset = new_mask, n1, d1
            if not changed:
                break
        # orient with the majority of inlier point normals
        if np.einsum("ij,j->", nrm[final_mask], normal) < 0:
            normal, offset = -normal, -offset
        u, v = plane_frame(normal)
        inliers = remaining[final_mask]
        plane = DetectedPlane(
            normal=normal,
            offset=offset,
            inlier_indices=inliers,
            basis_u=u,
            basis_v=v,
            occupancy=OccupancyBitmap.empty(params.pixel_size),
        )
        plane.occupancy = build_occupancy(plane, cloud, params.pixel_size)
        planes.append(plane)
        remaining = remaining[~final_mask]
    return planes


def planes_debug_json(planes: list[DetectedPlane]) -> str:
    """JSON debug dump: normal, offset, inlier count, bitmap dims + bits."""
    items = []
    for p in planes:
        bits = p.occupancy.bits
        items.append(
            {
                "normal": [float(x) for x in p.normal],
                "offset": float(p.offset),
                "inliers": int(len(p.inlier_indices)),
                "bitmap": {
                    "origin": [float(x) for x in p.occupancy.origin],
                    "pixel_size": p.occupancy.pixel_size,
                    "rows": int(bits.shape[0]),
                    "cols": int(bits.shape[1]),
                    "bits": "".join("1" if b else "0" for b in bits.ravel()),
                },
            }
        )
    return json.dumps({"planes": items}, indent=2)
