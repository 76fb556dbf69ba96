"""Synthetic ground-truth scenes: floor plans to sampled point clouds.

A scene is a set of prism rooms (2D polygon x story z-interval). Points
are sampled on every interior-visible surface (walls, floor, ceiling) at
a fixed density with Gaussian noise along the surface normal and true
inward normals; outliers are added in a shell around the building. Ground
truth records per-point room membership, room volumes and wall segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pointcloud import PointCloud


class SceneError(Exception):
    pass


@dataclass
class RoomSpec:
    polygon: np.ndarray  # (k, 2) CCW
    z0: float
    z1: float
    story: int = 0


@dataclass
class SceneSpec:
    rooms: list
    density: float = 250.0  # points / m^2
    noise_sigma: float = 0.005
    outlier_count: int = 0
    outlier_margin: tuple = (4.0, 7.0)  # shell distance from the building bbox
    seed: int = 0
    clutter: list = field(default_factory=list)  # (center 3d, normal, width, height)
    omit_walls: list = field(default_factory=list)  # (room index, edge index): unscanned


@dataclass
class GroundTruth:
    rooms: list  # RoomSpec
    volumes: np.ndarray
    point_labels: np.ndarray  # room index, -1 for outliers
    wall_segments: list  # ((x0,y0),(x1,y1), story) per interior wall edge
    outlier_count: int


def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _point_in_polygon(pt, poly) -> bool:
    x, y = pt
    inside = False
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        if (y0 > y) != (y1 > y):
            xs = x0 + (y - y0) / (y1 - y0) * (x1 - x0)
            if x < xs:
                inside = not inside
    return inside


def _polygons_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    if _point_in_polygon(a.mean(axis=0), b) or _point_in_polygon(b.mean(axis=0), a):
        return True
    for i in range(len(a)):
        p0, p1 = a[i], a[(i + 1) % len(a)]
        for j in range(len(b)):
            q0, q1 = b[j], b[(j + 1) % len(b)]
            if _segments_cross(p0, p1, q0, q1):
                return True
    return False


def _segments_cross(p0, p1, q0, q1) -> bool:
    def orient(a, b, c):
        v = float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        return (v > 1e-12) - (v < -1e-12)

    o1, o2 = orient(p0, p1, q0), orient(p0, p1, q1)
    o3, o4 = orient(q0, q1, p0), orient(q0, q1, p1)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def _sample_wall(rng, p0, p1, z0, z1, density, sigma):
    """Points on the vertical rectangle over segment p0->p1, normal to the
    interior left of the walk direction (CCW polygon => inward normal)."""
    d = np.asarray(p1, dtype=float) - np.asarray(p0, dtype=float)
    length = float(np.hypot(*d))
    normal = np.array([-d[1], d[0], 0.0]) / length  # left of p0->p1
    area = length * (z1 - z0)
    n = int(round(density * area))
    t = rng.uniform(0, 1, n)
    z = rng.uniform(z0, z1, n)
    pts = np.column_stack([
        p0[0] + t * d[0],
        p0[1] + t * d[1],
        z,
    ])
    if sigma:
        pts += np.outer(rng.normal(0, sigma, n), normal)
    return pts, np.tile(normal, (n, 1))


def _sample_horizontal(rng, poly, z, up, density, sigma):
    area = abs(_polygon_area(poly))
    n = int(round(density * area))
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    pts2 = np.empty((0, 2))
    while len(pts2) < n:
        cand = rng.uniform(lo, hi, size=(max(32, 2 * (n - len(pts2))), 2))
        keep = np.array([_point_in_polygon(p, poly) for p in cand])
        pts2 = np.vstack([pts2, cand[keep]])
    pts2 = pts2[:n]
    normal = np.array([0.0, 0.0, 1.0 if up else -1.0])
    pts = np.column_stack([pts2, np.full(n, float(z))])
    if sigma:
        pts += np.outer(rng.normal(0, sigma, n), normal)
    return pts, np.tile(normal, (n, 1))


def generate(spec: SceneSpec):
    """Sample the scene; returns (PointCloud with true normals and labels,
    GroundTruth)."""
    for i in range(len(spec.rooms)):
        for j in range(i + 1, len(spec.rooms)):
            a, b = spec.rooms[i], spec.rooms[j]
            if a.z1 > b.z0 + 1e-9 and b.z1 > a.z0 + 1e-9:
                if _polygons_overlap(np.asarray(a.polygon, float), np.asarray(b.polygon, float)):
                    raise SceneError(f"rooms {i} and {j} overlap")
    rng = np.random.default_rng(spec.seed)
    all_pts, all_nrm, all_lab = [], [], []
    volumes = []
    wall_segments = []
    for ri, room in enumerate(spec.rooms):
        poly = np.asarray(room.polygon, dtype=float)
        if _polygon_area(poly) < 0:
            poly = poly[::-1]
        volumes.append(abs(_polygon_area(poly)) * (room.z1 - room.z0))
        omitted = {(r, e) for r, e in spec.omit_walls}
        for i in range(len(poly)):
            if (ri, i) in omitted:
                continue
            p0, p1 = poly[i], poly[(i + 1) % len(poly)]
            pts, nrm = _sample_wall(rng, p0, p1, room.z0, room.z1, spec.density, spec.noise_sigma)
            all_pts.append(pts)
            all_nrm.append(nrm)
            all_lab.append(np.full(len(pts), ri))
            wall_segments.append((tuple(p0), tuple(p1), room.story))
        for z, up in ((room.z0, True), (room.z1, False)):
            pts, nrm = _sample_horizontal(rng, poly, z, up, spec.density, spec.noise_sigma)
            all_pts.append(pts)
            all_nrm.append(nrm)
            all_lab.append(np.full(len(pts), ri))
    for center, normal, width, height in spec.clutter:
        normal = np.asarray(normal, dtype=float)
        normal /= np.linalg.norm(normal)
        u = np.cross([0, 0, 1.0], normal)
        u /= np.linalg.norm(u)
        v = np.cross(normal, u)
        n = int(round(spec.density * width * height))
        su = rng.uniform(-width / 2, width / 2, n)
        sv = rng.uniform(-height / 2, height / 2, n)
        pts = np.asarray(center) + np.outer(su, u) + np.outer(sv, v)
        if spec.noise_sigma:
            pts += np.outer(rng.normal(0, spec.noise_sigma, n), normal)
        all_pts.append(pts)
        all_nrm.append(np.tile(normal, (n, 1)))
        all_lab.append(np.full(n, -2))  # clutter: interior but roomless
    positions = np.vstack(all_pts)
    lo = positions.min(axis=0)
    hi = positions.max(axis=0)
    if spec.outlier_count:
        m0, m1 = spec.outlier_margin
        out = np.empty((0, 3))
        while len(out) < spec.outlier_count:
            cand = rng.uniform(lo - m1, hi + m1, size=(4 * spec.outlier_count, 3))
            inside_margin = np.all((cand > lo - m0) & (cand < hi + m0), axis=1)
            out = np.vstack([out, cand[~inside_margin]])
        out = out[: spec.outlier_count]
        nrm = rng.normal(size=(len(out), 3))
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        all_pts.append(out)
        all_nrm.append(nrm)
        all_lab.append(np.full(len(out), -1))
        positions = np.vstack(all_pts)
    normals = np.vstack(all_nrm)
    labels = np.concatenate(all_lab).astype(np.int32)
    cloud = PointCloud(positions, normals)
    gt = GroundTruth(
        rooms=list(spec.rooms),
        volumes=np.array(volumes),
        point_labels=labels,
        wall_segments=wall_segments,
        outlier_count=spec.outlier_count,
    )
    return cloud, gt


# ---------------------------------------------------------------------------
# Acceptance scenes


def scene_s1(density=250.0, sigma=0.0, seed=0) -> SceneSpec:
    """One 4 x 5 x 2.6 m room."""
    poly = np.array([[0, 0], [4, 0], [4, 5], [0, 5]], dtype=float)
    return SceneSpec([RoomSpec(poly, 0.0, 2.6)], density=density, noise_sigma=sigma, seed=seed)


def scene_s2(density=250.0, sigma=0.005, outliers=500, seed=0) -> SceneSpec:
    """Two rooms sharing a 0.24 m wall."""
    r1 = np.array([[0, 0], [4, 0], [4, 5], [0, 5]], dtype=float)
    r2 = np.array([[4.24, 0], [8.24, 0], [8.24, 5], [4.24, 5]], dtype=float)
    return SceneSpec(
        [RoomSpec(r1, 0.0, 2.6), RoomSpec(r2, 0.0, 2.6)],
        density=density, noise_sigma=sigma, outlier_count=outliers, seed=seed,
    )


def scene_s2_clutter(density=250.0, sigma=0.005, seed=0) -> SceneSpec:
    """S2 plus furniture-like planar clutter inside room 1."""
    spec = scene_s2(density=density, sigma=sigma, outliers=0, seed=seed)
    spec.clutter = [
        (np.array([1.5, 2.5, 0.9]), np.array([1.0, 0.0, 0.0]), 1.8, 1.7),
        (np.array([2.6, 1.2, 0.8]), np.array([0.0, 1.0, 0.0]), 1.8, 1.5),
    ]
    return spec


def scene_s2_open_hallway(density=250.0, sigma=0.005, seed=0) -> SceneSpec:
    """S2 with the second room's east wall unscanned (no terminating
    surface, as with a hallway that was never closed off in the scan)."""
    spec = scene_s2(density=density, sigma=sigma, outliers=0, seed=seed)
    spec.omit_walls = [(1, 1)]
    return spec


def scene_s3(density=250.0, sigma=0.005, seed=0) -> SceneSpec:
    """Two stories, two rooms each, slab thickness 0.3 m."""
    r1 = np.array([[0, 0], [4, 0], [4, 5], [0, 5]], dtype=float)
    r2 = np.array([[4.24, 0], [8.24, 0], [8.24, 5], [4.24, 5]], dtype=float)
    rooms = [
        RoomSpec(r1, 0.0, 2.6, story=0),
        RoomSpec(r2, 0.0, 2.6, story=0),
        RoomSpec(r1.copy(), 2.9, 5.5, story=1),
        RoomSpec(r2.copy(), 2.9, 5.5, story=1),
    ]
    return SceneSpec(rooms, density=density, noise_sigma=sigma, seed=seed)


def scene_s4(density=250.0, sigma=0.005, seed=0, angle_deg=30.0) -> SceneSpec:
    """Three rooms; the wall splitting the left block is rotated."""
    ang = math.radians(angle_deg)
    # wall axis direction (sin a, cos a): runs from y=0 to y=3 starting at x=3
    dx = 3.0 * math.tan(ang)
    t = 0.24  # rotated-wall thickness, measured perpendicular
    w = t / math.cos(ang)
    left = np.array([[0, 0], [3, 0], [3 + dx, 3], [0, 3]], dtype=float)
    right = np.array([[3 + w, 0], [7, 0], [7, 3], [3 + dx + w, 3]], dtype=float)
    third = np.array([[0, 3.24], [7, 3.24], [7, 6.24], [0, 6.24]], dtype=float)
    rooms = [RoomSpec(left, 0.0, 2.6), RoomSpec(right, 0.0, 2.6), RoomSpec(third, 0.0, 2.6)]
    return SceneSpec(rooms, density=density, noise_sigma=sigma, seed=seed)


def scene_by_name(name: str, **kwargs) -> SceneSpec:
    scenes = {"s1": scene_s1, "s2": scene_s2, "s2_clutter": scene_s2_clutter,
              "s2_open_hallway": scene_s2_open_hallway, "s3": scene_s3, "s4": scene_s4}
    if name not in scenes:
        raise SceneError(f"unknown scene {name!r}; choose from {sorted(scenes)}")
    return scenes[name](**kwargs)
