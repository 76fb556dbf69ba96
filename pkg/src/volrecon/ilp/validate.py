"""Independent post-solve validation.

Re-evaluates the labeling rules directly from the cell complex (cells,
faces, wall memberships), not from the model's constraint rows, so a
model-construction bug cannot hide a violation. Also recomputes the
objective from the labeling and the priors alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..cellcomplex import CellComplex
from .model import IlpModel, OUTSIDE, ROOM
from .solve import Labeling


@dataclass
class Violation:
    rule: str
    detail: str


def _assignments(model: IlpModel, labeling: Labeling):
    """Per cell: (room_or_none, outside flag, set of active walls)."""
    rooms = [None] * model.n_cells
    outside = np.zeros(model.n_cells, dtype=bool)
    multi = [[] for _ in range(model.n_cells)]
    walls = [set() for _ in range(model.n_cells)]
    for j in np.flatnonzero(labeling.values):
        c = int(model.var_cell[j])
        kind = model.var_kind[j]
        if kind == ROOM:
            multi[c].append(int(model.var_label[j]))
        elif kind == OUTSIDE:
            outside[c] = True
        else:
            walls[c].add(int(model.var_label[j]))
    for c in range(model.n_cells):
        rooms[c] = multi[c][0] if len(multi[c]) == 1 else None
    return rooms, outside, multi, walls


def validate(labeling: Labeling, model: IlpModel, cx: CellComplex) -> list[Violation]:
    violations: list[Violation] = []
    rooms, outside, multi, walls = _assignments(model, labeling)

    for c in range(model.n_cells):
        count = len(multi[c]) + (1 if outside[c] else 0)
        if count != 1:
            violations.append(Violation(
                "constraint-1", f"cell {c} has {count} active room/outside labels"))

    for f in cx.faces:
        ra, rb = rooms[f.ca], rooms[f.cb]
        oa, ob = outside[f.ca], outside[f.cb]
        # room label only on the positive side (directional form)
        if rb is not None and ra != rb:
            violations.append(Violation(
                "constraint-2",
                f"face {f.id}: room {rb} active on negative-side cell {f.cb} "
                f"but not on positive-side cell {f.ca}"))
        if ra is not None and rb is not None and ra != rb:
            violations.append(Violation(
                "constraint-2", f"face {f.id}: distinct rooms {ra}/{rb} adjacent"))

        wa = set(cx.cells[f.ca].walls)
        wb = set(cx.cells[f.cb].walls)
        boundary = wb - wa
        inner = wa & wb
        # transition coverage
        if ob and not oa:
            active_boundary = walls[f.cb] & boundary
            if not active_boundary:
                violations.append(Violation(
                    "constraint-4",
                    f"face {f.id}: outside cell {f.cb} borders non-outside cell "
                    f"{f.ca} with no active boundary wall"))
        for w in inner:
            xb = 1 if w in walls[f.cb] else 0
            xa = 1 if w in walls[f.ca] else 0
            if xb - xa < 0:
                violations.append(Violation(
                    "constraint-5",
                    f"face {f.id}: wall {w} ends toward the positive side"))
            if xb - xa == 1 and not (walls[f.cb] & boundary):
                violations.append(Violation(
                    "constraint-6",
                    f"face {f.id}: wall {w} ends with no supporting boundary wall"))

    for c in range(model.n_cells):
        if walls[c] and not outside[c]:
            violations.append(Violation(
                "constraint-3", f"cell {c} carries walls {sorted(walls[c])} without outside label"))
        extra = walls[c] - set(cx.cells[c].walls)
        if extra:
            violations.append(Violation(
                "constraint-3", f"cell {c} carries walls {sorted(extra)} outside their candidates"))
    return violations


def recompute_objective(labeling: Labeling, model: IlpModel, cx: CellComplex,
                        cell_pr: np.ndarray, face_pr: np.ndarray) -> float:
    """Objective recomputed from the labeling and priors (independent of
    the model's stored coefficients)."""
    rooms, outside, multi, walls = _assignments(model, labeling)
    n_rooms = model.n_rooms
    reward = 0.0
    for c, cell in enumerate(cx.cells):
        if outside[c]:
            reward += cell_pr[c, n_rooms] * cell.volume
        for r in multi[c]:
            reward += cell_pr[c, r] * cell.volume
    wall_cost = 0.0
    for fi, f in enumerate(cx.faces):
        wa = set(cx.cells[f.ca].walls)
        wb = set(cx.cells[f.cb].walls)
        unsupported = (1.0 - face_pr[fi]) * f.area
        for w in wb - wa:
            if w in walls[f.cb]:
                wall_cost += unsupported
        for w in wa & wb:
            xb = 1 if w in walls[f.cb] else 0
            xa = 1 if w in walls[f.ca] else 0
            wall_cost += (xb - xa) * unsupported
    return -reward + model.alpha * wall_cost


def active_wall_face_area(labeling: Labeling, model: IlpModel, cx: CellComplex) -> float:
    """Total built wall surface area (boundary faces of active walls plus
    inner end caps), unweighted by support."""
    _, _, _, walls = _assignments(model, labeling)
    total = 0.0
    for f in cx.faces:
        wa = set(cx.cells[f.ca].walls)
        wb = set(cx.cells[f.cb].walls)
        for w in wb - wa:
            if w in walls[f.cb]:
                total += f.area
        for w in wa & wb:
            total += ((1 if w in walls[f.cb] else 0) - (1 if w in walls[f.ca] else 0)) * f.area
    return total
