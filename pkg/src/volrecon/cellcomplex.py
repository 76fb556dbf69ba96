"""Stacked exact 2D arrangements: the 3D cell complex.

Vertical wall-surface planes become lines of an exact (rational
arithmetic) 2D arrangement clipped to the scene bounding box; horizontal
slab-surface planes become z-cuts. Cells are (convex 2D face) x
(z-interval) prisms. Every neighboring cell pair carries one oriented
face whose normal points toward the first cell of the pair; orientation
is inherited from the source surface of the supporting plane, so faces on
detected surfaces point into the observed space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .candidates import SLAB, WALL, SurfaceCandidate, WallCandidate

SNAP = 10**9  # rational snap denominator for line coefficients
MERGE_OFFSET_TOL = 0.005  # coincident-plane merge distance (m)

LATERAL = "lateral"
HORIZONTAL = "horizontal"


class ComplexError(Exception):
    pass


def _frac(x: float, denom: int = SNAP) -> Fraction:
    return Fraction(round(float(x) * denom), denom)


def _sign(v: Fraction) -> int:
    return (v > 0) - (v < 0)


@dataclass
class ExactLine:
    """Oriented rational line a*x + b*y = c; the positive side
    {a*x + b*y > c} is the side the source surface normal points to."""

    a: Fraction
    b: Fraction
    c: Fraction
    sources: list = field(default_factory=list)  # (surface_id, +-1 vs (a, b))

    def eval(self, x: Fraction, y: Fraction) -> Fraction:
        return self.a * x + self.b * y - self.c

    def direction_key(self):
        an, bn = self.a, self.b
        scale = an.denominator * bn.denominator // math.gcd(an.denominator, bn.denominator)
        ai, bi = int(an * scale), int(bn * scale)
        g = math.gcd(abs(ai), abs(bi))
        return (ai // g, bi // g)

    def normal_norm(self) -> float:
        return math.hypot(float(self.a), float(self.b))


def line_from_surface(surface: SurfaceCandidate) -> ExactLine:
    nx, ny = float(surface.normal[0]), float(surface.normal[1])
    return ExactLine(_frac(nx), _frac(ny), _frac(surface.offset))


def _polygon_area2(poly) -> Fraction:
    total = Fraction(0)
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return total  # twice the signed area


def _clip_half(poly, line: ExactLine, keep: int):
    """Exact convex clip keeping the side keep*(a*x+b*y-c) >= 0."""
    vals = [line.eval(x, y) * keep for (x, y) in poly]
    signs = [_sign(v) for v in vals]
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        if signs[i] >= 0:
            out.append(poly[i])
        if signs[i] * signs[j] < 0:
            t = vals[i] / (vals[i] - vals[j])
            x = poly[i][0] + t * (poly[j][0] - poly[i][0])
            y = poly[i][1] + t * (poly[j][1] - poly[i][1])
            out.append((x, y))
    dedup = []
    for p in out:
        if not dedup or p != dedup[-1]:
            dedup.append(p)
    if len(dedup) >= 2 and dedup[0] == dedup[-1]:
        dedup.pop()
    if len(dedup) < 3 or _polygon_area2(dedup) <= 0:
        return None
    return dedup


@dataclass
class Face2D:
    id: int
    vertex_ids: list
    area: Fraction
    centroid: tuple  # (Fraction, Fraction)


@dataclass
class Edge2D:
    id: int
    v0: int
    v1: int
    faces: list
    lines: list  # carrier input-line ids (empty for clip boundary)
    length: float


@dataclass
class Arrangement2D:
    lines: list
    clip: tuple  # (x0, y0, x1, y1) Fractions
    vertices: list  # exact (Fraction, Fraction)
    faces: list  # Face2D, bounded faces only
    edges: list  # Edge2D

    def __post_init__(self):
        self.edge_lookup = {(e.v0, e.v1): e for e in self.edges}

    def euler_counts(self):
        """(V, E, F) with F including the unbounded face."""
        return len(self.vertices), len(self.edges), len(self.faces) + 1

    def face_vertices_float(self, face: Face2D) -> np.ndarray:
        return np.array([[float(self.vertices[v][0]), float(self.vertices[v][1])]
                         for v in face.vertex_ids])


def exact_arrangement_2d(lines: list[ExactLine], clip) -> Arrangement2D:
    """Arrangement of the given rational lines inside the clip rectangle.

    Built by iterated exact convex splitting; coincident input lines are
    harmless (the second split is a no-op and both appear as carriers of
    the shared edges).
    """
    x0, y0, x1, y1 = (c if isinstance(c, Fraction) else _frac(c) for c in clip)
    if not (x1 > x0 and y1 > y0):
        raise ComplexError("empty clip rectangle")
    polys = [[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]]
    for line in lines:
        if line.a == 0 and line.b == 0:
            raise ComplexError("degenerate line with zero normal")
        nxt = []
        for poly in polys:
            signs = [_sign(line.eval(x, y)) for (x, y) in poly]
            has_pos = any(s > 0 for s in signs)
            has_neg = any(s < 0 for s in signs)
            if has_pos and has_neg:
                for keep in (1, -1):
                    piece = _clip_half(poly, line, keep)
                    if piece is not None:
                        nxt.append(piece)
            else:
                nxt.append(poly)
        polys = nxt

    vertex_ids: dict = {}
    vertices: list = []

    def vid(p):
        if p not in vertex_ids:
            vertex_ids[p] = len(vertices)
            vertices.append(p)
        return vertex_ids[p]

    faces = []
    edge_map: dict = {}
    for poly in polys:
        ids = [vid(p) for p in poly]
        area2 = _polygon_area2(poly)
        cx = sum(p[0] for p in poly) / len(poly)
        cy = sum(p[1] for p in poly) / len(poly)
        face = Face2D(len(faces), ids, area2 / 2, (cx, cy))
        faces.append(face)
        for k in range(len(ids)):
            a, b = ids[k], ids[(k + 1) % len(ids)]
            key = (a, b) if a < b else (b, a)
            edge_map.setdefault(key, []).append(face.id)

    edges = []
    for (a, b), face_list in sorted(edge_map.items()):
        pa, pb = vertices[a], vertices[b]
        carriers = [
            li for li, line in enumerate(lines)
            if line.eval(*pa) == 0 and line.eval(*pb) == 0
        ]
        length = math.hypot(float(pb[0] - pa[0]), float(pb[1] - pa[1]))
        edges.append(Edge2D(len(edges), a, b, sorted(face_list), carriers, length))
    return Arrangement2D(list(lines), (x0, y0, x1, y1), vertices, faces, edges)


@dataclass
class ZCut:
    z: float
    orient: int  # +1: source normals point up (c_a above), -1: down
    sources: list  # surface ids


@dataclass
class Cell:
    id: int
    face2d: int
    interval: int
    z_lo: float
    z_hi: float
    volume: float
    diameter: float
    walls: tuple = ()


@dataclass
class OrientedFace:
    """Face between cells ca -| cb: the normal points toward ca."""

    id: int
    ca: int
    cb: int
    kind: str
    area: float
    source_surfaces: tuple
    # geometry for Monte-Carlo sampling
    edge2d: tuple | None = None  # ((x0,y0),(x1,y1)) floats, lateral only
    z_lo: float = 0.0
    z_hi: float = 0.0
    face2d: int = -1  # horizontal only
    normal: np.ndarray | None = None


@dataclass
class CellComplex:
    arrangement: Arrangement2D
    zcuts: list
    cells: list
    faces: list
    walls: list
    surfaces: list
    line_of_surface: dict
    cut_of_surface: dict
    bbox: tuple  # ((x0,y0,z0),(x1,y1,z1)) floats
    inner_face_diagnostics: int = 0

    @property
    def n_intervals(self) -> int:
        return len(self.zcuts) - 1

    def cell_id(self, face2d: int, interval: int) -> int:
        return face2d * self.n_intervals + interval

    def cell_polygon(self, cell: Cell) -> np.ndarray:
        return self.arrangement.face_vertices_float(self.arrangement.faces[cell.face2d])


def _collect_surfaces(walls: list[WallCandidate]) -> list[SurfaceCandidate]:
    seen = {}
    for w in walls:
        for s in (w.surface_a, w.surface_b):
            seen.setdefault(s.id, s)
    return [seen[k] for k in sorted(seen)]


def _merge_lines(surfaces, clip):
    """One ExactLine per distinct vertical plane.

    Detection noise leaves azimuths a fraction of a degree apart even for
    re-detections of the same physical plane, so lines merge when their
    maximum positional divergence across the clip region stays within the
    coincidence tolerance (first line wins and keeps the exact geometry).
    """
    cx0 = (float(clip[0]) + float(clip[2])) / 2
    cy0 = (float(clip[1]) + float(clip[3])) / 2
    radius = math.hypot(float(clip[2]) - float(clip[0]), float(clip[3]) - float(clip[1])) / 2

    def divergence(la: ExactLine, lb: ExactLine) -> float:
        na = np.array([float(la.a), float(la.b)]) / la.normal_norm()
        nb = np.array([float(lb.a), float(lb.b)]) / lb.normal_norm()
        flip = 1.0 if na @ nb >= 0 else -1.0
        nb = flip * nb
        da = float(la.c) / la.normal_norm() - (na[0] * cx0 + na[1] * cy0)
        db = flip * float(lb.c) / lb.normal_norm() - (nb[0] * cx0 + nb[1] * cy0)
        sin_dt = abs(na[0] * nb[1] - na[1] * nb[0])
        return abs(da - db) + sin_dt * radius

    lines: list[ExactLine] = []
    line_of_surface: dict[int, int] = {}
    for s in surfaces:
        if s.kind != WALL:
            continue
        cand = line_from_surface(s)
        match = None
        orient = 1
        for li, line in enumerate(lines):
            na = np.array([float(line.a), float(line.b)])
            nc = np.array([float(cand.a), float(cand.b)])
            same_side = (na @ nc) >= 0
            if divergence(line, cand) <= MERGE_OFFSET_TOL:
                match, orient = li, (1 if same_side else -1)
                break
        if match is None:
            cand.sources.append((s.id, 1))
            lines.append(cand)
            line_of_surface[s.id] = len(lines) - 1
        else:
            lines[match].sources.append((s.id, orient))
            line_of_surface[s.id] = match
    return lines, line_of_surface


def _merge_zcuts(surfaces):
    cuts: list[ZCut] = []
    cut_of_surface: dict[int, int] = {}
    for s in surfaces:
        if s.kind != SLAB:
            continue
        z = float(s.offset * s.normal[2])  # plane height
        orient = 1 if s.normal[2] > 0 else -1
        match = None
        for ci, cut in enumerate(cuts):
            if cut.orient == orient and abs(cut.z - z) <= MERGE_OFFSET_TOL:
                match = ci
                break
        if match is None:
            cuts.append(ZCut(z, orient, [s.id]))
            cut_of_surface[s.id] = len(cuts) - 1
        else:
            cuts[match].sources.append(s.id)
            cut_of_surface[s.id] = match
    order = sorted(range(len(cuts)), key=lambda i: cuts[i].z)
    remap = {old: new for new, old in enumerate(order)}
    cuts = [cuts[i] for i in order]
    cut_of_surface = {sid: remap[ci] for sid, ci in cut_of_surface.items()}
    return cuts, cut_of_surface


def _default_bbox_xy(surfaces, margin=1.0):
    corners = np.vstack([s.extent_corners()[:, :2] for s in surfaces])
    lo = corners.min(axis=0) - margin
    hi = corners.max(axis=0) + margin
    return (
        Fraction(round(lo[0] * 1000), 1000),
        Fraction(round(lo[1] * 1000), 1000),
        Fraction(round(hi[0] * 1000), 1000),
        Fraction(round(hi[1] * 1000), 1000),
    )


def build_complex(walls: list[WallCandidate], clip_xy=None) -> CellComplex:
    """Cell complex from the wall/slab candidates (see module docstring)."""
    surfaces = _collect_surfaces(walls)
    if not any(s.kind == WALL for s in surfaces):
        raise ComplexError("need at least one vertical candidate surface")
    if clip_xy is None:
        clip_xy = _default_bbox_xy(surfaces)
    lines, line_of_surface = _merge_lines(surfaces, clip_xy)
    zcuts, cut_of_surface = _merge_zcuts(surfaces)
    if len(zcuts) < 2:
        raise ComplexError("cannot bound interior vertically: need >= 2 horizontal planes")
    arr = exact_arrangement_2d(lines, clip_xy)

    n_intervals = len(zcuts) - 1
    cells: list[Cell] = []
    for face in arr.faces:
        pts = arr.face_vertices_float(face)
        d2 = 0.0
        for i in range(len(pts)):
            d2 = max(d2, float(((pts - pts[i]) ** 2).sum(axis=1).max()))
        diam2d = math.sqrt(d2)
        for k in range(n_intervals):
            z_lo, z_hi = zcuts[k].z, zcuts[k + 1].z
            dz = z_hi - z_lo
            cells.append(
                Cell(
                    id=face.id * n_intervals + k,
                    face2d=face.id,
                    interval=k,
                    z_lo=z_lo,
                    z_hi=z_hi,
                    volume=float(face.area) * dz,
                    diameter=math.hypot(diam2d, dz),
                )
            )

    complex_ = CellComplex(
        arrangement=arr,
        zcuts=zcuts,
        cells=cells,
        faces=[],
        walls=walls,
        surfaces=surfaces,
        line_of_surface=line_of_surface,
        cut_of_surface=cut_of_surface,
        bbox=(
            (float(clip_xy[0]), float(clip_xy[1]), zcuts[0].z),
            (float(clip_xy[2]), float(clip_xy[3]), zcuts[-1].z),
        ),
    )
    _build_faces(complex_)
    wall_membership(complex_, walls)
    return complex_


def _build_faces(cx: CellComplex) -> None:
    arr = cx.arrangement
    faces: list[OrientedFace] = []
    surf_by_id = {s.id: s for s in cx.surfaces}
    for edge in arr.edges:
        if len(edge.faces) != 2 or not edge.lines:
            continue
        line = arr.lines[edge.lines[0]]
        fa, fb = edge.faces
        sa = _sign(line.eval(*arr.faces[fa].centroid))
        ca2d, cb2d = (fa, fb) if sa > 0 else (fb, fa)
        p0 = arr.vertices[edge.v0]
        p1 = arr.vertices[edge.v1]
        sources = tuple(
            sid for li in edge.lines for (sid, _o) in arr.lines[li].sources
        )
        nrm = np.array([float(line.a), float(line.b), 0.0])
        nrm /= np.linalg.norm(nrm)
        for k in range(cx.n_intervals):
            z_lo, z_hi = cx.zcuts[k].z, cx.zcuts[k + 1].z
            faces.append(
                OrientedFace(
                    id=len(faces),
                    ca=cx.cell_id(ca2d, k),
                    cb=cx.cell_id(cb2d, k),
                    kind=LATERAL,
                    area=edge.length * (z_hi - z_lo),
                    source_surfaces=sources,
                    edge2d=((float(p0[0]), float(p0[1])), (float(p1[0]), float(p1[1]))),
                    z_lo=z_lo,
                    z_hi=z_hi,
                    normal=nrm,
                )
            )
    for cut_idx in range(1, len(cx.zcuts) - 1):
        cut = cx.zcuts[cut_idx]
        nrm = np.array([0.0, 0.0, float(cut.orient)])
        for face2d in range(len(arr.faces)):
            below = cx.cell_id(face2d, cut_idx - 1)
            above = cx.cell_id(face2d, cut_idx)
            ca, cb = (above, below) if cut.orient > 0 else (below, above)
            faces.append(
                OrientedFace(
                    id=len(faces),
                    ca=ca,
                    cb=cb,
                    kind=HORIZONTAL,
                    area=float(arr.faces[face2d].area),
                    source_surfaces=tuple(cut.sources),
                    face2d=face2d,
                    z_lo=cut.z,
                    z_hi=cut.z,
                    normal=nrm,
                )
            )
    cx.faces = faces


def _face2d_between_lines(cx: CellComplex, wall: WallCandidate):
    """2D face ids strictly between the wall's two surface lines."""
    arr = cx.arrangement
    la = arr.lines[cx.line_of_surface[wall.surface_a.id]]
    lb = arr.lines[cx.line_of_surface[wall.surface_b.id]]
    qa = wall.surface_a.ref_point
    qb = wall.surface_b.ref_point
    side_a = _sign(la.eval(_frac(qb[0]), _frac(qb[1])))
    side_b = _sign(lb.eval(_frac(qa[0]), _frac(qa[1])))
    if side_a == 0 or side_b == 0:
        return []
    out = []
    for face in arr.faces:
        ea = _sign(la.eval(*face.centroid))
        eb = _sign(lb.eval(*face.centroid))
        if ea == side_a and eb == side_b:
            out.append(face.id)
    return out


def _interval_range_for_z(cx: CellComplex, z_min: float, z_max: float, expand: int = 1):
    hit = [
        k for k in range(cx.n_intervals)
        if cx.zcuts[k].z < z_max and cx.zcuts[k + 1].z > z_min
    ]
    if not hit:
        return range(0)
    lo = max(0, hit[0] - expand)
    hi = min(cx.n_intervals - 1, hit[-1] + expand)
    return range(lo, hi + 1)


def _surface_z_extent(surface: SurfaceCandidate):
    ext = surface.occupied_extent()
    if ext is None:
        return None
    return ext[1]  # v axis is +z for rectified walls


def wall_membership(cx: CellComplex, walls: list[WallCandidate]) -> CellComplex:
    """Compute per-cell wall sets W_c.

    Vertical candidates claim cells strictly between their two lines, in
    z-intervals meeting the surfaces' occupied z-extent expanded by one
    interval; slab candidates claim cells between their two cuts whose 2D
    face bounding box meets the candidate footprint.
    """
    memberships: list[set] = [set() for _ in cx.cells]
    arr = cx.arrangement
    for wall in walls:
        if wall.kind == WALL:
            face_ids = _face2d_between_lines(cx, wall)
            exts = [e for e in (_surface_z_extent(wall.surface_a),
                                _surface_z_extent(wall.surface_b)) if e is not None]
            if not exts or not face_ids:
                continue
            z_min = min(e[0] for e in exts)
            z_max = max(e[1] for e in exts)
            intervals = _interval_range_for_z(cx, z_min, z_max, expand=1)
            for f2 in face_ids:
                for k in intervals:
                    memberships[cx.cell_id(f2, k)].add(wall.id)
        else:
            ca = cx.cut_of_surface[wall.surface_a.id]
            cb = cx.cut_of_surface[wall.surface_b.id]
            lo_cut, hi_cut = min(ca, cb), max(ca, cb)
            if lo_cut == hi_cut:
                continue
            boxes = []
            for s in (wall.surface_a, wall.surface_b):
                ext = s.occupied_extent()
                if ext is not None:
                    boxes.append(ext)
            if not boxes:
                continue
            s0 = min(b[0][0] for b in boxes)
            s1 = max(b[0][1] for b in boxes)
            t0 = min(b[1][0] for b in boxes)
            t1 = max(b[1][1] for b in boxes)
            for face in arr.faces:
                pts = arr.face_vertices_float(face)
                if pts[:, 0].max() <= s0 or pts[:, 0].min() >= s1:
                    continue
                if pts[:, 1].max() <= t0 or pts[:, 1].min() >= t1:
                    continue
                for k in range(lo_cut, hi_cut):
                    memberships[cx.cell_id(face.id, k)].add(wall.id)
    for cell, ws in zip(cx.cells, memberships):
        cell.walls = tuple(sorted(ws))
    cx.inner_face_diagnostics = _inner_face_diagnostic(cx)
    return cx


def _inner_face_diagnostic(cx: CellComplex) -> int:
    """Count inner faces that are not the boundary face of any other wall
    (the construction usually guarantees zero; footprint-limited wall
    extents can break it at candidate extremities)."""
    bad = 0
    for f in cx.faces:
        wa = set(cx.cells[f.ca].walls)
        wb = set(cx.cells[f.cb].walls)
        if (wa & wb) and not (wa ^ wb):
            bad += 1
    return bad


def complex_debug_json(cx: CellComplex) -> str:
    cells = [
        {
            "id": c.id,
            "face2d": c.face2d,
            "z": [c.z_lo, c.z_hi],
            "volume": c.volume,
            "walls": list(c.walls),
            "polygon": cx.cell_polygon(c).tolist(),
        }
        for c in cx.cells
    ]
    faces = [
        {
            "id": f.id,
            "ca": f.ca,
            "cb": f.cb,
            "kind": f.kind,
            "area": f.area,
            "sources": list(f.source_surfaces),
        }
        for f in cx.faces
    ]
    return json.dumps(
        {"cells": cells, "faces": faces,
         "inner_face_diagnostics": cx.inner_face_diagnostics},
        indent=2,
    )
