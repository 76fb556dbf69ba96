"""Surface and wall/slab candidate construction.

Detected planes are pruned by support area, classified as vertical wall
or horizontal slab surfaces, and rectified (wall normals projected into
the xy-plane, slab normals snapped to +-z, offset refit over the
inliers). Each surface carries an occupancy bitmap rebuilt on the
rectified plane and a multi-label support bitmap of per-room point-label
fractions; both are dilated to extend support into wall interiors.
Opposing surfaces are then paired into volumetric wall candidates, with
virtual partner surfaces synthesized for unpaired ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .planes import DetectedPlane, OccupancyBitmap, plane_frame
from .pointcloud import PointCloud

WALL = "wall"
SLAB = "slab"


@dataclass
class MultiLabelBitmap:
    """Per-pixel soft room-label assignment in [0,1]^n on a plane frame."""

    origin: np.ndarray
    pixel_size: float
    values: np.ndarray  # (rows, cols, n_labels) float32

    @classmethod
    def empty(cls, pixel_size: float, n_labels: int) -> "MultiLabelBitmap":
        return cls(np.zeros(2), pixel_size, np.zeros((0, 0, n_labels), dtype=np.float32))

    def lookup(self, coords2d: np.ndarray) -> np.ndarray:
        """Per-point label vectors; zeros outside the grid."""
        coords2d = np.atleast_2d(coords2d)
        out = np.zeros((len(coords2d), self.values.shape[2] if self.values.ndim == 3 else 0),
                       dtype=np.float32)
        if self.values.size == 0:
            return out
        rel = (coords2d - self.origin) / self.pixel_size
        cols = np.floor(rel[:, 0]).astype(np.int64)
        rows = np.floor(rel[:, 1]).astype(np.int64)
        ok = (rows >= 0) & (rows < self.values.shape[0]) & (cols >= 0) & (cols < self.values.shape[1])
        out[ok] = self.values[rows[ok], cols[ok]]
        return out


@dataclass
class SurfaceCandidate:
    """Rectified wall/slab surface; virtual surfaces carry no support."""

    id: int
    kind: str  # WALL | SLAB
    normal: np.ndarray
    offset: float
    basis_u: np.ndarray
    basis_v: np.ndarray
    occupancy: OccupancyBitmap
    support: MultiLabelBitmap | None = None
    is_virtual: bool = False
    inlier_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    footprint: tuple | None = None  # ((s0,s1),(t0,t1)) frame extent, set for virtuals
    ref_point: np.ndarray | None = None  # representative 3D point on the surface

    def occupied_extent(self):
        if self.footprint is not None:
            return self.footprint
        return self.occupancy.occupied_extent()

    def extent_corners(self) -> np.ndarray:
        """3D corners of the occupied frame extent."""
        (s0, s1), (t0, t1) = self.occupied_extent()
        corners = []
        for s in (s0, s1):
            for t in (t0, t1):
                corners.append(s * self.basis_u + t * self.basis_v + self.offset * self.normal)
        return np.array(corners)


@dataclass
class WallCandidate:
    """Volumetric wall/slab between two approximately opposing surfaces."""

    id: int
    surface_a: SurfaceCandidate
    surface_b: SurfaceCandidate
    thickness: float
    kind: str

    @property
    def is_virtual_pair(self) -> bool:
        return self.surface_a.is_virtual or self.surface_b.is_virtual


def classify_rectify(
    planes: list[DetectedPlane],
    cloud: PointCloud,
    min_wall_area: float = 2.0,
    min_slab_area: float = 5.0,
    vertical_tol_deg: float = 10.0,
    horizontal_tol_deg: float = 10.0,
    pixel_size: float = 0.20,
) -> list[SurfaceCandidate]:
    """Keep near-vertical / near-horizontal planes with enough support
    area, snap them exactly and refit the offset over the inliers."""
    out: list[SurfaceCandidate] = []
    for plane in planes:
        nz = abs(plane.normal[2])
        tilt_from_vertical = math.degrees(math.asin(min(1.0, nz)))
        tilt_from_horizontal = math.degrees(math.acos(min(1.0, nz)))
        area = plane.occupancy.support_area()
        if tilt_from_vertical <= vertical_tol_deg and area >= min_wall_area:
            kind = WALL
            normal = plane.normal.copy()
            normal[2] = 0.0
            normal /= np.linalg.norm(normal)
        elif tilt_from_horizontal <= horizontal_tol_deg and area >= min_slab_area:
            kind = SLAB
            normal = np.array([0.0, 0.0, math.copysign(1.0, plane.normal[2])])
        else:
            continue
        pts = cloud.positions[plane.inlier_indices]
        offset = float(np.mean(pts @ normal))
        u, v = plane_frame(normal)
        coords = np.column_stack([pts @ u, pts @ v])
        occ = OccupancyBitmap.from_points(coords, pixel_size)
        out.append(
            SurfaceCandidate(
                id=len(out),
                kind=kind,
                normal=normal,
                offset=offset,
                basis_u=u,
                basis_v=v,
                occupancy=occ,
                inlier_indices=plane.inlier_indices.copy(),
                ref_point=np.asarray(pts.mean(axis=0) - (pts.mean(axis=0) @ normal - offset) * normal),
            )
        )
    return out


def build_support(
    surface: SurfaceCandidate,
    cloud: PointCloud,
    n_labels: int,
    pixel_size: float = 0.10,
) -> MultiLabelBitmap:
    """Per-pixel per-label fraction of the surface's labeled points."""
    if cloud.labels is None:
        raise ValueError("point labels required before support bitmaps")
    if surface.is_virtual or len(surface.inlier_indices) == 0:
        return MultiLabelBitmap.empty(pixel_size, n_labels)
    pts = cloud.positions[surface.inlier_indices]
    labels = cloud.labels[surface.inlier_indices]
    coords = np.column_stack([pts @ surface.basis_u, pts @ surface.basis_v])
    origin = np.floor(coords.min(axis=0) / pixel_size) * pixel_size
    ij = np.floor((coords - origin) / pixel_size).astype(np.int64)
    shape = ij.max(axis=0) + 1
    values = np.zeros((shape[1], shape[0], n_labels), dtype=np.float64)
    counts = np.zeros((shape[1], shape[0]), dtype=np.float64)
    labeled = labels >= 0
    np.add.at(counts, (ij[labeled, 1], ij[labeled, 0]), 1.0)
    np.add.at(values, (ij[labeled, 1], ij[labeled, 0], labels[labeled]), 1.0)
    nonzero = counts > 0
    values[nonzero] /= counts[nonzero][:, None]
    return MultiLabelBitmap(origin, pixel_size, values.astype(np.float32))


def dilate_support(bitmap: MultiLabelBitmap, radius: int) -> MultiLabelBitmap:
    """Chebyshev (entrywise-max) dilation by ``radius`` pixels, padding the
    grid so support can grow past its original bounds."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0 or bitmap.values.size == 0:
        return MultiLabelBitmap(bitmap.origin.copy(), bitmap.pixel_size, bitmap.values.copy())
    padded = np.pad(bitmap.values, ((radius, radius), (radius, radius), (0, 0)))
    size = 2 * radius + 1
    out = ndimage.maximum_filter(padded, size=(size, size, 1), mode="constant")
    origin = bitmap.origin - radius * bitmap.pixel_size
    return MultiLabelBitmap(origin, bitmap.pixel_size, out)


def dilate_occupancy(occ: OccupancyBitmap, radius: int) -> OccupancyBitmap:
    if radius <= 0 or occ.bits.size == 0:
        return OccupancyBitmap(occ.origin.copy(), occ.pixel_size, occ.bits.copy())
    padded = np.pad(occ.bits, radius)
    out = ndimage.binary_dilation(padded, structure=np.ones((2 * radius + 1,) * 2, dtype=bool))
    return OccupancyBitmap(occ.origin - radius * occ.pixel_size, occ.pixel_size, out)


def dilate_surfaces(
    surfaces: list[SurfaceCandidate],
    radius: int,
    support_pixel: float = 0.10,
) -> None:
    """Shared dilation stage: the support bitmaps are dilated by ``radius``
    pixels and the occupancy bitmaps by the equivalent metric reach."""
    for s in surfaces:
        if s.support is not None:
            s.support = dilate_support(s.support, radius)
        if not s.is_virtual and s.occupancy.bits.size:
            occ_radius = math.ceil(radius * support_pixel / s.occupancy.pixel_size - 1e-12)
            s.occupancy = dilate_occupancy(s.occupancy, occ_radius)


def _anti_parallel(a: SurfaceCandidate, b: SurfaceCandidate, max_angle_deg: float) -> bool:
    if a.kind != b.kind:
        return False
    if a.kind == SLAB:
        return a.normal[2] * b.normal[2] < 0
    return float(a.normal @ b.normal) <= -math.cos(math.radians(max_angle_deg))


def _signed_gap(a: SurfaceCandidate, b: SurfaceCandidate) -> float:
    """Distance between the two (nearly) parallel planes, evaluated at the
    midpoint of their reference points; sign is positive when the
    reference midpoint lies between the planes."""
    c0 = 0.5 * (a.ref_point + b.ref_point)
    da = a.offset - float(a.normal @ c0)
    db = b.offset - float(b.normal @ c0)
    return da + db


def _footprints_overlap(a: SurfaceCandidate, b: SurfaceCandidate) -> bool:
    """Occupied extents must overlap after projecting b onto a's frame."""
    ea = a.occupied_extent()
    if ea is None or b.occupied_extent() is None:
        return False
    corners = b.extent_corners()
    s = corners @ a.basis_u
    t = corners @ a.basis_v
    (s0, s1), (t0, t1) = ea
    return s.max() > s0 and s.min() < s1 and t.max() > t0 and t.min() < t1


def pair_surfaces(a: SurfaceCandidate, b: SurfaceCandidate,
                  max_thickness: float, max_angle_deg: float):
    """Thickness if (a, b) form a wall candidate, else None."""
    if not _anti_parallel(a, b, max_angle_deg):
        return None
    gap = abs(_signed_gap(a, b))
    if not (0.0 < gap <= max_thickness):
        return None
    if not _footprints_overlap(a, b):
        return None
    return gap


def _virtual_partner(surface: SurfaceCandidate, next_id: int, thickness: float) -> SurfaceCandidate:
    """Opposing virtual surface ``thickness`` behind the given surface."""
    normal = -surface.normal
    offset = thickness - surface.offset  # plane at surface.offset - thickness along +n
    u, v = plane_frame(normal)
    ext = surface.occupied_extent()
    corners = surface.extent_corners() - thickness * surface.normal
    s = corners @ u
    t = corners @ v
    footprint = ((float(s.min()), float(s.max())), (float(t.min()), float(t.max())))
    ref = surface.ref_point - thickness * surface.normal
    return SurfaceCandidate(
        id=next_id,
        kind=surface.kind,
        normal=normal,
        offset=offset,
        basis_u=u,
        basis_v=v,
        occupancy=OccupancyBitmap.empty(surface.occupancy.pixel_size),
        support=None,
        is_virtual=True,
        footprint=footprint,
        ref_point=ref,
    )


def pair_walls(
    surfaces: list[SurfaceCandidate],
    max_thickness: float = 0.6,
    max_angle_deg: float = 5.0,
    virtual_thickness: float = 0.3,
):
    """All opposing surface pairs within the thickness threshold become
    wall candidates; a surface with no pair gets a virtual opposing
    partner at ``virtual_thickness``. Returns (candidates, all surfaces
    including the synthesized virtual ones)."""
    surfaces = list(surfaces)
    walls: list[WallCandidate] = []
    paired: set[int] = set()
    for i in range(len(surfaces)):
        for j in range(i + 1, len(surfaces)):
            gap = pair_surfaces(surfaces[i], surfaces[j], max_thickness, max_angle_deg)
            if gap is None:
                continue
            walls.append(
                WallCandidate(len(walls), surfaces[i], surfaces[j], gap, surfaces[i].kind)
            )
            paired.add(surfaces[i].id)
            paired.add(surfaces[j].id)
    next_id = max((s.id for s in surfaces), default=-1) + 1
    for s in list(surfaces):
        if s.id in paired or s.is_virtual:
            continue
        partner = _virtual_partner(s, next_id, virtual_thickness)
        next_id += 1
        surfaces.append(partner)
        walls.append(WallCandidate(len(walls), s, partner, virtual_thickness, s.kind))
    return walls, surfaces
