"""Volumetric building model extracted from a solved labeling.

Rooms are per-label cell unions, walls per active wall id, intersections
the cells carrying two or more active walls. Adjacency records room-wall
incidence across boundary faces and wall-wall connectivity through shared
intersection cells. Exports: OBJ meshes (one object per entity, outward
winding) and a versioned JSON document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cellcomplex import CellComplex
from .ilp.model import IlpModel
from .ilp.solve import Labeling
from .ilp.validate import _assignments

SCHEMA_VERSION = 1


@dataclass
class RoomEntity:
    label: int
    cells: list
    volume: float


@dataclass
class WallEntity:
    wall_id: int
    cells: list
    thickness: float
    kind: str
    axis: list  # unit direction of the wall plane (in-plane for vertical)
    surfaces: list  # two (normal, offset) pairs


@dataclass
class BuildingModel:
    rooms: list
    walls: list
    intersections: list  # (cell id, wall ids)
    adjacency: list  # ("room", label, "wall", wall id) and ("wall", a, "wall", b)
    warnings: list = field(default_factory=list)


def _cell_prism(cx: CellComplex, cell_id: int):
    cell = cx.cells[cell_id]
    poly = cx.cell_polygon(cell)
    return poly, cell.z_lo, cell.z_hi


def _connected_components(cells, neighbors):
    remaining = set(cells)
    comps = []
    while remaining:
        seed = min(remaining)
        stack = [seed]
        comp = {seed}
        remaining.discard(seed)
        while stack:
            c = stack.pop()
            for nb in neighbors.get(c, ()):
                if nb in remaining:
                    remaining.discard(nb)
                    comp.add(nb)
                    stack.append(nb)
        comps.append(sorted(comp))
    return comps


def extract(labeling: Labeling, model: IlpModel, cx: CellComplex) -> BuildingModel:
    rooms_of, outside, multi, walls_of = _assignments(model, labeling)
    room_cells: dict = {}
    for c in range(model.n_cells):
        for r in multi[c]:
            room_cells.setdefault(r, []).append(c)
    wall_cells: dict = {}
    for c in range(model.n_cells):
        for w in walls_of[c]:
            wall_cells.setdefault(w, []).append(c)

    rooms = [
        RoomEntity(label=r, cells=cells, volume=float(sum(cx.cells[c].volume for c in cells)))
        for r, cells in sorted(room_cells.items())
    ]
    walls = []
    for w, cells in sorted(wall_cells.items()):
        cand = cx.walls[w]
        n = cand.surface_a.normal
        if cand.kind == "wall":
            axis = [float(-n[1]), float(n[0]), 0.0]
        else:
            axis = [0.0, 0.0, 1.0]
        walls.append(
            WallEntity(
                wall_id=w,
                cells=cells,
                thickness=cand.thickness,
                kind=cand.kind,
                axis=axis,
                surfaces=[
                    {"normal": [float(x) for x in s.normal], "offset": float(s.offset),
                     "virtual": bool(s.is_virtual)}
                    for s in (cand.surface_a, cand.surface_b)
                ],
            )
        )
    intersections = [
        (c, sorted(walls_of[c])) for c in range(model.n_cells) if len(walls_of[c]) >= 2
    ]

    adjacency = set()
    for f in cx.faces:
        ra, rb = rooms_of[f.ca], rooms_of[f.cb]
        for w in set(cx.cells[f.cb].walls) - set(cx.cells[f.ca].walls):
            if w in walls_of[f.cb] and ra is not None:
                adjacency.add(("room", ra, "wall", w))
    for c, ws in intersections:
        for i in range(len(ws)):
            for j in range(i + 1, len(ws)):
                adjacency.add(("wall", ws[i], "wall", ws[j]))

    warnings = []
    neighbors: dict = {}
    for f in cx.faces:
        neighbors.setdefault(f.ca, []).append(f.cb)
        neighbors.setdefault(f.cb, []).append(f.ca)
    for room in rooms:
        comps = _connected_components(room.cells, neighbors)
        if len(comps) > 1:
            warnings.append(
                f"room label {room.label} has {len(comps)} disconnected components"
            )
    return BuildingModel(rooms, walls, intersections, sorted(adjacency), warnings)


# ---------------------------------------------------------------------------
# Mesh export


def _entity_boundary_quads(cx: CellComplex, cells: list):
    """Boundary facets of a cell union as (vertex loop, outward normal).

    Facets are lateral rectangles and horizontal polygons; a facet is on
    the boundary iff the neighboring cell across it is missing or not in
    the set. The stacked-arrangement construction guarantees facets of
    touching cells coincide exactly, so no T-junctions arise.
    """
    cell_set = set(cells)
    facets = []
    arr = cx.arrangement
    for cid in cells:
        cell = cx.cells[cid]
        face2 = arr.faces[cell.face2d]
        poly = cx.cell_polygon(cell)
        n_vert = len(poly)
        # lateral facets: one per polygon edge
        for k in range(n_vert):
            p0 = poly[k]
            p1 = poly[(k + 1) % n_vert]
            neighbor = _lateral_neighbor(cx, cell, face2, k)
            if neighbor in cell_set:
                continue
            quad = [
                (p0[0], p0[1], cell.z_lo),
                (p1[0], p1[1], cell.z_lo),
                (p1[0], p1[1], cell.z_hi),
                (p0[0], p0[1], cell.z_hi),
            ]
            edge = np.array([p1[0] - p0[0], p1[1] - p0[1]])
            outward = np.array([edge[1], -edge[0], 0.0])  # CCW polygon: right side
            facets.append((quad, outward / max(np.linalg.norm(outward), 1e-300)))
        for z, up, interval in ((cell.z_lo, False, cell.interval - 1),
                                (cell.z_hi, True, cell.interval + 1)):
            if 0 <= interval < cx.n_intervals and cx.cell_id(cell.face2d, interval) in cell_set:
                continue
            loop = [(p[0], p[1], z) for p in poly]
            if not up:
                loop = loop[::-1]
            facets.append((loop, np.array([0.0, 0.0, 1.0 if up else -1.0])))
    return facets


def _lateral_neighbor(cx: CellComplex, cell, face2, k):
    """Cell id across the k-th polygon edge (or None at the clip boundary)."""
    arr = cx.arrangement
    a = face2.vertex_ids[k]
    b = face2.vertex_ids[(k + 1) % len(face2.vertex_ids)]
    key = (a, b) if a < b else (b, a)
    edge = arr.edge_lookup.get(key)
    if edge is None or len(edge.faces) != 2:
        return None
    other = edge.faces[0] if edge.faces[1] == face2.id else edge.faces[1]
    return cx.cell_id(other, cell.interval)


def export_mesh(bm: BuildingModel, cx: CellComplex, what: str = "all") -> str:
    """OBJ document with one named object per entity, fan-triangulated
    convex facets, outward winding."""
    entities = []
    if what in ("rooms", "all"):
        entities += [(f"room_{r.label}", r.cells) for r in bm.rooms]
    if what in ("walls", "all"):
        entities += [(f"wall_{w.wall_id}", w.cells) for w in bm.walls]
    lines = ["# volrecon mesh export"]
    vert_ids: dict = {}
    verts: list = []

    def vid(p):
        key = (round(p[0], 12), round(p[1], 12), round(p[2], 12))
        if key not in vert_ids:
            vert_ids[key] = len(verts) + 1
            verts.append(key)
        return vert_ids[key]

    objects = []
    for name, cells in entities:
        tris = []
        for loop, normal in _entity_boundary_quads(cx, cells):
            ids = [vid(p) for p in loop]
            # orient CCW seen from outside (right-hand rule along normal)
            p0, p1, p2 = (np.array(loop[i]) for i in range(3))
            if np.dot(np.cross(p1 - p0, p2 - p0), normal) < 0:
                ids = ids[::-1]
            for k in range(1, len(ids) - 1):
                tris.append((ids[0], ids[k], ids[k + 1]))
        objects.append((name, tris))
    for key in verts:
        lines.append(f"v {key[0]:.12g} {key[1]:.12g} {key[2]:.12g}")
    for name, tris in objects:
        lines.append(f"o {name}")
        for a, b, c in tris:
            lines.append(f"f {a} {b} {c}")
    return "\n".join(lines) + "\n"


def mesh_triangles(bm: BuildingModel, cx: CellComplex, entity: str) -> np.ndarray:
    """(n, 3, 3) float32 triangle array for one entity (binary streaming)."""
    if entity.startswith("room_"):
        cells = next(r.cells for r in bm.rooms if r.label == int(entity[5:]))
    elif entity.startswith("wall_"):
        cells = next(w.cells for w in bm.walls if w.wall_id == int(entity[5:]))
    else:
        raise KeyError(f"unknown entity {entity!r}")
    tris = []
    for loop, normal in _entity_boundary_quads(cx, cells):
        pts = [np.array(p) for p in loop]
        if np.dot(np.cross(pts[1] - pts[0], pts[2] - pts[0]), normal) < 0:
            pts = pts[::-1]
        for k in range(1, len(pts) - 1):
            tris.append([pts[0], pts[k], pts[k + 1]])
    return np.array(tris, dtype=np.float32)


def export_model_json(bm: BuildingModel, cx: CellComplex) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "rooms": [
            {
                "id": int(r.label),
                "volume": r.volume,
                "cells": [int(c) for c in r.cells],
                "boundary_polygons": [
                    [[float(x) for x in p] for p in loop]
                    for loop, _ in _entity_boundary_quads(cx, r.cells)
                ],
            }
            for r in bm.rooms
        ],
        "walls": [
            {
                "id": int(w.wall_id),
                "kind": w.kind,
                "axis": w.axis,
                "thickness": w.thickness,
                "surfaces": w.surfaces,
                "cells": [int(c) for c in w.cells],
            }
            for w in bm.walls
        ],
        "intersections": [
            {"cell": int(c), "walls": [int(w) for w in ws]} for c, ws in bm.intersections
        ],
        "adjacency": [list(edge) for edge in bm.adjacency],
        "warnings": bm.warnings,
    }
    return json.dumps(doc, indent=2, sort_keys=True)
