"""0-1 model over cell labelings.

Binary variables assign room/outside/wall labels to cells. Constraint
rows (all integer coefficients):

  1. per cell: exactly one room-or-outside label;
  2. per face and room label: the room may only sit on the positive side;
  3. per (cell, containing wall): walls only on outside-labeled cells;
  4. per face: a room/outside transition needs an active boundary wall on
     the outside cell (empty wall set makes the transition infeasible in
     that direction);
  5. per face and inner wall: the wall may only end toward the negative
     side;
  6. per face and inner wall: a wall ending there needs another active
     wall for which the face is a boundary face;
  plus an optional redundant outside-direction row per face.

Objective: -sum volume-weighted room/outside priors + alpha * unsupported
wall face area (boundary faces on the wall's outside cell, inner faces as
activation differences).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..cellcomplex import CellComplex

ROOM = "room"
OUTSIDE = "outside"
WALL_LABEL = "wall"

SENSE_LE = "<="
SENSE_GE = ">="
SENSE_EQ = "=="


class ModelError(Exception):
    pass


@dataclass
class UserConstraint:
    """Hard steering constraint on a single cell.

    kind: force_room (optional room id), force_outside, force_wall,
    forbid_wall.
    """

    kind: str
    cell: int
    room: int | None = None
    wall: int | None = None
    id: int = 0
    active: bool = True


@dataclass
class Row:
    cols: np.ndarray
    vals: np.ndarray
    sense: str
    rhs: float
    tag: str


@dataclass
class IlpModel:
    n_cells: int
    n_rooms: int
    alpha: float
    var_cell: np.ndarray
    var_kind: list
    var_label: np.ndarray
    var_index: dict  # (cell, kind, label) -> column
    objective: np.ndarray
    rows: list
    forced: list = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    def var(self, cell: int, kind: str, label: int = -1):
        return self.var_index.get((cell, kind, label))

    def var_name(self, j: int) -> str:
        kind = self.var_kind[j]
        if kind == ROOM:
            lid = self.var_label[j]
        elif kind == OUTSIDE:
            lid = self.n_rooms
        else:
            lid = self.n_rooms + 1 + self.var_label[j]
        return f"x_c{self.var_cell[j]}_l{lid}"

    def row_counts(self) -> dict:
        counts: dict = {}
        for r in self.rows:
            counts[r.tag] = counts.get(r.tag, 0) + 1
        return counts


def _face_wall_sets(cx: CellComplex, face):
    wa = cx.cells[face.ca].walls
    wb = cx.cells[face.cb].walls
    sa, sb = set(wa), set(wb)
    boundary = tuple(sorted(sb - sa))  # walls in cb, not in ca
    inner = tuple(sorted(sa & sb))
    return boundary, inner


def build_model(
    cx: CellComplex,
    cell_pr: np.ndarray,
    face_pr: np.ndarray,
    alpha: float = 0.04,
    forced: list[UserConstraint] = (),
    prune_rooms: bool = True,
    redundant_rows: bool = True,
) -> IlpModel:
    n_cells = len(cx.cells)
    n_rooms = cell_pr.shape[1] - 1
    if face_pr.shape[0] != len(cx.faces):
        raise ModelError("face priors do not match the complex")

    user_rooms = {}
    for uc in forced:
        if not uc.active:
            continue
        if uc.cell < 0 or uc.cell >= n_cells:
            raise ModelError(f"constraint references unknown cell {uc.cell}")
        if uc.kind == "force_room" and uc.room is not None:
            user_rooms.setdefault(uc.cell, set()).add(uc.room)

    # room variable pruning: keep (c, r) with positive prior or a user
    # reference, then drop variables forced to zero by the one-sided
    # room-direction rows until stable (user-kept ones get explicit rows)
    room_vars = [set() for _ in range(n_cells)]
    for c in range(n_cells):
        if prune_rooms:
            for r in np.flatnonzero(cell_pr[c, :n_rooms] > 0):
                room_vars[c].add(int(r))
            for r in user_rooms.get(c, ()):
                room_vars[c].add(int(r))
        else:
            room_vars[c] = set(range(n_rooms))
    keep_always = {(c, r) for c, rs in user_rooms.items() for r in rs}
    if prune_rooms:
        changed = True
        while changed:
            changed = False
            for f in cx.faces:
                for r in list(room_vars[f.cb]):
                    if r not in room_vars[f.ca] and (f.cb, r) not in keep_always:
                        room_vars[f.cb].discard(r)
                        changed = True

    var_index: dict = {}
    var_cell = []
    var_kind = []
    var_label = []

    def add_var(cell, kind, label=-1):
        key = (cell, kind, label)
        if key not in var_index:
            var_index[key] = len(var_cell)
            var_cell.append(cell)
            var_kind.append(kind)
            var_label.append(label)
        return var_index[key]

    for c in range(n_cells):
        add_var(c, OUTSIDE)
        for r in sorted(room_vars[c]):
            add_var(c, ROOM, r)
        for w in cx.cells[c].walls:
            add_var(c, WALL_LABEL, w)

    objective = np.zeros(len(var_cell))
    for (c, kind, label), j in var_index.items():
        if kind == OUTSIDE:
            objective[j] = -cell_pr[c, n_rooms] * cx.cells[c].volume
        elif kind == ROOM:
            objective[j] = -cell_pr[c, label] * cx.cells[c].volume

    rows: list[Row] = []

    def add_row(coeffs, sense, rhs, tag):
        cols = np.array([c for c, _ in coeffs], dtype=np.int64)
        vals = np.array([v for _, v in coeffs], dtype=np.float64)
        rows.append(Row(cols, vals, sense, float(rhs), tag))

    for c in range(n_cells):
        coeffs = [(var_index[(c, OUTSIDE, -1)], 1.0)]
        coeffs += [(var_index[(c, ROOM, r)], 1.0) for r in sorted(room_vars[c])]
        add_row(coeffs, SENSE_EQ, 1.0, "eq1")

    for fi, f in enumerate(cx.faces):
        boundary, inner = _face_wall_sets(cx, f)
        w_area = alpha * (1.0 - face_pr[fi]) * f.area
        for r in sorted(room_vars[f.cb] | room_vars[f.ca]):
            ja = var_index.get((f.ca, ROOM, r))
            jb = var_index.get((f.cb, ROOM, r))
            if ja is not None and jb is not None:
                add_row([(ja, 1.0), (jb, -1.0)], SENSE_GE, 0.0, "eq2")
            elif jb is not None:
                add_row([(jb, 1.0)], SENSE_LE, 0.0, "eq2fix")
        # room/outside transition coverage (empty sum = hard direction ban)
        coeffs = [(var_index[(f.cb, WALL_LABEL, w)], 1.0) for w in boundary]
        coeffs += [(var_index[(f.cb, OUTSIDE, -1)], -1.0), (var_index[(f.ca, OUTSIDE, -1)], 1.0)]
        add_row(coeffs, SENSE_GE, 0.0, "eq4")
        for w in inner:
            ja = var_index[(f.ca, WALL_LABEL, w)]
            jb = var_index[(f.cb, WALL_LABEL, w)]
            add_row([(jb, 1.0), (ja, -1.0)], SENSE_GE, 0.0, "eq5")
            coeffs = [(var_index[(f.cb, WALL_LABEL, wp)], 1.0) for wp in boundary]
            coeffs += [(jb, -1.0), (ja, 1.0)]
            add_row(coeffs, SENSE_GE, 0.0, "eq6")
            objective[jb] += w_area
            objective[ja] -= w_area
        for w in boundary:
            objective[var_index[(f.cb, WALL_LABEL, w)]] += w_area
        if redundant_rows:
            add_row(
                [(var_index[(f.ca, OUTSIDE, -1)], 1.0), (var_index[(f.cb, OUTSIDE, -1)], -1.0)],
                SENSE_LE, 0.0, "eq11",
            )

    for c in range(n_cells):
        jo = var_index[(c, OUTSIDE, -1)]
        for w in cx.cells[c].walls:
            add_row([(var_index[(c, WALL_LABEL, w)], 1.0), (jo, -1.0)], SENSE_LE, 0.0, "eq3")

    for uc in forced:
        if not uc.active:
            continue
        if uc.kind == "force_outside":
            add_row([(var_index[(uc.cell, OUTSIDE, -1)], 1.0)], SENSE_EQ, 1.0, "user")
        elif uc.kind == "force_room":
            if uc.room is None:
                add_row([(var_index[(uc.cell, OUTSIDE, -1)], 1.0)], SENSE_EQ, 0.0, "user")
            else:
                j = var_index.get((uc.cell, ROOM, uc.room))
                if j is None:
                    raise ModelError(
                        f"no room variable for (cell {uc.cell}, room {uc.room})"
                    )
                add_row([(j, 1.0)], SENSE_EQ, 1.0, "user")
        elif uc.kind in ("force_wall", "forbid_wall"):
            j = var_index.get((uc.cell, WALL_LABEL, uc.wall))
            if j is None:
                raise ModelError(
                    f"no wall variable for (cell {uc.cell}, wall {uc.wall})"
                )
            add_row([(j, 1.0)], SENSE_EQ, 1.0 if uc.kind == "force_wall" else 0.0, "user")
        else:
            raise ModelError(f"unknown constraint kind {uc.kind!r}")

    return IlpModel(
        n_cells=n_cells,
        n_rooms=n_rooms,
        alpha=alpha,
        var_cell=np.array(var_cell, dtype=np.int64),
        var_kind=var_kind,
        var_label=np.array(var_label, dtype=np.int64),
        var_index=var_index,
        objective=objective,
        rows=rows,
        forced=list(forced),
    )
