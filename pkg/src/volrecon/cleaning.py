"""Outlier removal by hemisphere ray casting against plane occupancy.

Each point casts rays into the hemisphere around its normal; the fraction
of rays that hit a set occupancy pixel on any detected plane approximates
the probability that the point lies inside the building. Points below the
threshold are dropped and the occupancy bitmaps are rebuilt, iterated a
small number of times.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import SurfacePack, cast_rays
from .planes import DetectedPlane, remove_inliers
from .pointcloud import PointCloud

SELF_EXCLUDE_DIST = 0.01  # matches the RANSAC point-to-plane distance

_RAY_CHUNK = 2_000_000


@dataclass
class InsideScore:
    point_index: int
    score: float


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    x ^= x >> np.uint64(30)
    x = (x * np.uint64(0xBF58476D1CE4E5B9)).astype(np.uint64)
    x ^= x >> np.uint64(27)
    x = (x * np.uint64(0x94D049BB133111EB)).astype(np.uint64)
    return x ^ (x >> np.uint64(31))


def _hash_uniform(keys: np.ndarray, salt: int) -> np.ndarray:
    h = _splitmix64(keys ^ np.uint64(salt))
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def hemisphere_directions(normals: np.ndarray, point_keys: np.ndarray,
                          n_rays: int, seed: int) -> np.ndarray:
    """Uniform hemisphere directions around each normal, shape
    (len(normals) * n_rays, 3).

    Rays derive from a counter-based hash of (seed, point key, ray index),
    so each point's rays are a pure function of its identity: scores are
    independent of point order and of which other points are present.
    """
    n = len(normals)
    with np.errstate(over="ignore"):
        keys = (
            np.repeat(point_keys.astype(np.uint64), n_rays) * np.uint64(n_rays)
            + np.tile(np.arange(n_rays, dtype=np.uint64), n)
            + np.uint64(seed) * np.uint64(0x9E3779B97F4A7C15)
        )
    z = 2.0 * _hash_uniform(keys, 0x1234_5678) - 1.0
    phi = 2.0 * np.pi * _hash_uniform(keys, 0x0BAD_CAFE)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    dirs = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    rep = np.repeat(normals, n_rays, axis=0)
    flip = np.einsum("ij,ij->i", dirs, rep) < 0
    dirs[flip] = -dirs[flip]
    return dirs


def _point_plane_map(n_points: int, planes: list[DetectedPlane]) -> np.ndarray:
    owner = np.full(n_points, -1, dtype=np.int32)
    for i, p in enumerate(planes):
        owner[p.inlier_indices] = i
    return owner


def inside_scores(
    cloud: PointCloud,
    planes: list[DetectedPlane],
    n_rays: int = 64,
    seed: int = 0,
    eps_self: float = SELF_EXCLUDE_DIST,
) -> np.ndarray:
    """in(p) for every point of the cloud: hit fraction of n_rays
    hemisphere rays (self plane excluded within eps_self of the origin)."""
    if n_rays < 1:
        raise ValueError("n_rays must be >= 1")
    if not cloud.has_normals:
        raise ValueError("inside scores require point normals")
    pack = SurfacePack.from_surfaces(planes)
    owner = _point_plane_map(len(cloud), planes)
    n = len(cloud)
    hits = np.zeros(n, dtype=np.int64)
    points_per_chunk = max(1, _RAY_CHUNK // n_rays)
    for lo in range(0, n, points_per_chunk):
        hi = min(n, lo + points_per_chunk)
        dirs = hemisphere_directions(
            cloud.normals[lo:hi], cloud.source_indices[lo:hi], n_rays, seed
        )
        origins = np.repeat(cloud.positions[lo:hi], n_rays, axis=0)
        excl = np.repeat(owner[lo:hi], n_rays)
        hit_s, _, _ = cast_rays(
            origins, dirs,
            excl_a=excl, excl_a_t=np.full(len(origins), eps_self),
            pack=pack,
        )
        hits[lo:hi] = (hit_s >= 0).reshape(hi - lo, n_rays).sum(axis=1)
    return hits / float(n_rays)


def inside_score(
    point_index: int,
    cloud: PointCloud,
    planes: list[DetectedPlane],
    n_rays: int = 64,
    seed: int = 0,
) -> InsideScore:
    """Score a single point (see inside_scores)."""
    sub = cloud.select(np.array([point_index]))
    owner = _point_plane_map(len(cloud), planes)[point_index]
    pack = SurfacePack.from_surfaces(planes)
    dirs = hemisphere_directions(sub.normals, sub.source_indices, n_rays, seed)
    origins = np.repeat(sub.positions, n_rays, axis=0)
    excl = np.full(n_rays, owner, dtype=np.int32)
    hit_s, _, _ = cast_rays(
        origins, dirs, excl_a=excl,
        excl_a_t=np.full(n_rays, SELF_EXCLUDE_DIST), pack=pack,
    )
    return InsideScore(point_index, float((hit_s >= 0).sum()) / n_rays)


def clean(
    cloud: PointCloud,
    planes: list[DetectedPlane],
    threshold: float = 0.5,
    iterations: int = 3,
    n_rays: int = 64,
    seed: int = 0,
):
    """Iterated outlier removal.

    Returns (cleaned cloud, planes re-indexed against it, per-iteration
    removal counts). Scores are computed for all points of the current
    cloud in each iteration; survivors keep their relative order.
    """
    current = cloud
    current_planes = list(planes)
    removed_per_iter = []
    for it in range(iterations):
        scores = inside_scores(current, current_planes, n_rays=n_rays, seed=seed + it)
        keep = scores >= threshold
        removed = int((~keep).sum())
        removed_per_iter.append(removed)
        if removed == 0:
            continue
        dropped = np.flatnonzero(~keep)
        new_planes = []
        for p in current_planes:
            gone = p.inlier_indices[np.isin(p.inlier_indices, dropped)]
            new_planes.append(remove_inliers(p, gone, current))
        # re-index surviving inliers against the compacted cloud
        remap = np.cumsum(keep) - 1
        for i, p in enumerate(new_planes):
            new_planes[i] = type(p)(
                normal=p.normal,
                offset=p.offset,
                inlier_indices=remap[p.inlier_indices].astype(np.int64),
                basis_u=p.basis_u,
                basis_v=p.basis_v,
                occupancy=p.occupancy,
            )
        current = current.select(keep)
        current_planes = new_planes
    return current, current_planes, removed_per_iter
