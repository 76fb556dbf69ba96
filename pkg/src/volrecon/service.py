"""Local HTTP service for the interactive steering loop.

A session holds the reconstruction state (complex, priors, model,
constraints). Clients inspect cells and the current model, add or remove
hard constraints, draw virtual walls, change alpha and trigger re-solves.
Solves run on a background thread; mutations are rejected with 409 while
one is in flight. Meshes stream as OBJ text or a little-endian binary
triangle buffer (u32 count, then count x 9 float32).
"""

from __future__ import annotations

import json
import re
import struct
import threading
import traceback
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import building, candidates, cellcomplex, priors
from .config import Config
from .ilp import UserConstraint, build_model, solve, validate
from .pipeline import Session as PipelineSession, run_stage
from .planes import OccupancyBitmap, plane_frame

API_VERSION = 1

IDLE = "idle"
SOLVING = "solving"
DONE = "done"
FAILED = "failed"


class ConflictError(Exception):
    pass


class SteeringSession:
    """Mutable reconstruction session behind the HTTP API."""

    def __init__(self, pipeline_session: PipelineSession):
        self._lock = threading.Lock()
        self.config: Config = pipeline_session.config
        self.complex = pipeline_session.complex
        self.surfaces = pipeline_session.surfaces
        self.walls = pipeline_session.walls
        self.cell_pr = pipeline_session.cell_pr
        self.face_pr = pipeline_session.face_pr
        self.n_rooms = self.cell_pr.shape[1] - 1
        self.model = pipeline_session.model
        self.labeling = pipeline_session.labeling
        self.building_model = pipeline_session.building_model
        self.constraints: dict[int, UserConstraint] = {}
        self._next_constraint = 1
        self._next_job = 1
        self.job_state = IDLE
        self.job_error = None
        self.job_id = None
        self.infeasible_hint: list[int] = []

    # -- constraint handling -------------------------------------------------

    def add_constraints(self, items) -> list[int]:
        with self._lock:
            if self.job_state == SOLVING:
                raise ConflictError("solve in progress")
            ids = []
            for item in items:
                uc = UserConstraint(
                    kind=item["kind"],
                    cell=int(item["cell"]),
                    room=item.get("room"),
                    wall=item.get("wall"),
                    id=self._next_constraint,
                )
                self._validate_constraint(uc)
                self.constraints[uc.id] = uc
                ids.append(uc.id)
                self._next_constraint += 1
            return ids

    def _validate_constraint(self, uc: UserConstraint) -> None:
        if uc.cell < 0 or uc.cell >= len(self.complex.cells):
            raise KeyError(f"cell {uc.cell} does not exist")
        if uc.kind in ("force_wall", "forbid_wall"):
            if uc.wall is None or uc.wall not in self.complex.cells[uc.cell].walls:
                raise KeyError(f"cell {uc.cell} is not contained in wall {uc.wall}")
        elif uc.kind == "force_room":
            if uc.room is not None and not (0 <= uc.room < self.n_rooms):
                raise KeyError(f"room {uc.room} does not exist")
        elif uc.kind != "force_outside":
            raise ValueError(f"unknown constraint kind {uc.kind!r}")

    def remove_constraint(self, cid: int) -> None:
        with self._lock:
            if self.job_state == SOLVING:
                raise ConflictError("solve in progress")
            if cid not in self.constraints:
                raise KeyError(f"constraint {cid} does not exist")
            del self.constraints[cid]

    # -- virtual walls ---------------------------------------------------------

    def add_virtual_wall(self, p0, p1, z_lo, z_hi, thickness) -> int:
        with self._lock:
            if self.job_state == SOLVING:
                raise ConflictError("solve in progress")
            p0 = np.asarray(p0, dtype=float)
            p1 = np.asarray(p1, dtype=float)
            seg = p1 - p0
            length = float(np.hypot(*seg))
            if length < 1e-6:
                raise ValueError("zero-length segment")
            if thickness <= 0:
                raise ValueError("thickness must be positive")
            n2 = np.array([-seg[1], seg[0]]) / length
            mid = 0.5 * (p0 + p1)
            existing = self._find_existing_wall(n2, mid, thickness)
            if existing is not None:
                return existing
            wall_id = self._append_virtual_pair(p0, p1, n2, z_lo, z_hi, thickness)
            self._rebuild()
            return wall_id

    def _find_existing_wall(self, n2, mid, thickness) -> int | None:
        for w in self.walls:
            if w.kind != candidates.WALL:
                continue
            na = w.surface_a.normal[:2]
            if abs(float(na @ n2)) < 0.999:
                continue
            d_mid = float(na @ mid)
            center = 0.5 * (w.surface_a.offset - w.surface_b.offset)
            if abs(d_mid - center) <= cellcomplex.MERGE_OFFSET_TOL + thickness / 2 and \
               abs(w.thickness - thickness) <= cellcomplex.MERGE_OFFSET_TOL:
                return w.id
        return None

    def _append_virtual_pair(self, p0, p1, n2, z_lo, z_hi, thickness) -> int:
        next_sid = max(s.id for s in self.surfaces) + 1
        mid = 0.5 * (np.asarray(p0) + np.asarray(p1))
        pair = []
        for sign in (1.0, -1.0):
            normal = np.array([sign * n2[0], sign * n2[1], 0.0])
            offset = float(normal[:2] @ mid) + thickness / 2
            u, v = plane_frame(normal)
            corners3 = []
            for p in (p0, p1):
                base = np.array([p[0], p[1], 0.0]) + (offset - float(normal[:2] @ p)) * normal
                corners3.append(base + np.array([0, 0, z_lo]))
                corners3.append(base + np.array([0, 0, z_hi]))
            corners3 = np.array(corners3)
            s_coords = corners3 @ u
            t_coords = corners3 @ v
            surf = candidates.SurfaceCandidate(
                id=next_sid,
                kind=candidates.WALL,
                normal=normal,
                offset=offset,
                basis_u=u,
                basis_v=v,
                occupancy=OccupancyBitmap.empty(self.config.occupancy_pixel),
                support=None,
                is_virtual=True,
                footprint=((float(s_coords.min()), float(s_coords.max())),
                           (float(t_coords.min()), float(t_coords.max()))),
                ref_point=np.array([mid[0], mid[1], (z_lo + z_hi) / 2])
                + (offset - float(normal[:2] @ mid)) * normal,
            )
            pair.append(surf)
            next_sid += 1
        wall_id = len(self.walls)
        self.surfaces.extend(pair)
        self.walls.append(candidates.WallCandidate(wall_id, pair[0], pair[1],
                                                   thickness, candidates.WALL))
        return wall_id

    def _rebuild(self) -> None:
        """Full rebuild of complex, priors and model (v1 behavior)."""
        self.complex = cellcomplex.build_complex(self.walls)
        self.cell_pr = priors.cell_priors(
            self.complex, self.surfaces, self.n_rooms,
            k_base=self.config.prior_k_base, d_rays=self.config.prior_rays,
            rng_seed=self.config.seed,
        )
        self.face_pr = priors.face_priors(
            self.complex, self.surfaces,
            k_base=self.config.prior_k_base, rng_seed=self.config.seed,
        )
        # constraints reference cells of the old complex; drop them
        self.constraints.clear()
        self.model = None
        self.labeling = None
        self.building_model = None

    # -- solving ---------------------------------------------------------------

    def start_solve(self, alpha=None) -> int:
        with self._lock:
            if self.job_state == SOLVING:
                raise ConflictError("solve in progress")
            if alpha is not None:
                self.config.alpha = float(alpha)
            self.job_state = SOLVING
            self.job_error = None
            self.job_id = self._next_job
            self._next_job += 1
            snapshot = [UserConstraint(u.kind, u.cell, u.room, u.wall, u.id, u.active)
                        for u in self.constraints.values() if u.active]
            thread = threading.Thread(target=self._solve_worker, args=(snapshot,), daemon=True)
            thread.start()
            return self.job_id

    def _solve_worker(self, forced) -> None:
        try:
            model = build_model(
                self.complex, self.cell_pr, self.face_pr,
                alpha=self.config.alpha, forced=forced,
                prune_rooms=self.config.prune_room_vars,
                redundant_rows=self.config.redundant_outside_rows,
            )
            labeling = solve(model, gap_tol=self.config.gap_tol,
                             time_limit=self.config.time_limit)
            with self._lock:
                if labeling.solver_status == "infeasible":
                    self.job_state = FAILED
                    self.job_error = "infeasible"
                    self.infeasible_hint = self._infeasibility_hint(forced)
                    return
                violations = validate(labeling, model, self.complex)
                if violations:
                    self.job_state = FAILED
                    self.job_error = f"{len(violations)} validation violations"
                    return
                self.model = model
                self.labeling = labeling
                self.building_model = building.extract(labeling, model, self.complex)
                self.job_state = DONE
        except Exception as exc:  # noqa: BLE001 - reported through the API
            with self._lock:
                self.job_state = FAILED
                self.job_error = f"{type(exc).__name__}: {exc}"

    def _infeasibility_hint(self, forced) -> list[int]:
        """Best effort: constraint ids whose removal restores feasibility."""
        hint = []
        for uc in forced:
            others = [u for u in forced if u.id != uc.id]
            try:
                model = build_model(self.complex, self.cell_pr, self.face_pr,
                                    alpha=self.config.alpha, forced=others,
                                    prune_rooms=self.config.prune_room_vars)
                lab = solve(model, gap_tol=0.5, time_limit=20.0)
                if lab.solver_status != "infeasible":
                    hint.append(uc.id)
            except Exception:  # noqa: BLE001
                continue
        return hint

    def status(self) -> dict:
        with self._lock:
            out = {
                "version": API_VERSION,
                "state": self.job_state,
                "job": self.job_id,
            }
            if self.job_state == DONE and self.labeling is not None:
                out["gap"] = self.labeling.gap
                out["objective"] = self.labeling.objective_value
            if self.job_error:
                out["error"] = self.job_error
                if self.infeasible_hint:
                    out["constraints_involved"] = self.infeasible_hint
            return out


# ---------------------------------------------------------------------------
# HTTP layer


def _mesh_binary(tris: np.ndarray) -> bytes:
    buf = struct.pack("<I", len(tris))
    return buf + tris.astype("<f4").reshape(-1).tobytes()


class _Handler(BaseHTTPRequestHandler):
    session: SteeringSession = None
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, code: int, payload, content_type="application/json"):
        if isinstance(payload, (dict, list)):
            body = json.dumps(payload).encode()
        elif isinstance(payload, str):
            body = payload.encode()
        else:
            body = payload
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, code: int, message: str):
        self._send(code, {"version": API_VERSION, "error": message})

    def _body(self):
        length = int(self.headers.get("Content-Length", 0))
        if length == 0:
            return {}
        return json.loads(self.rfile.read(length))

    def do_GET(self):  # noqa: N802
        try:
            url = urlparse(self.path)
            if url.path == "/model":
                if self.session.building_model is None:
                    return self._error(409, "no solved model yet")
                doc = building.export_model_json(self.session.building_model, self.session.complex)
                return self._send(200, doc)
            if url.path == "/cells":
                return self._cells(url)
            if url.path == "/solve/status":
                return self._send(200, self.session.status())
            match = re.fullmatch(r"/mesh/([A-Za-z0-9_]+)", url.path)
            if match:
                return self._mesh(match.group(1), url)
            return self._error(404, f"unknown path {url.path}")
        except Exception as exc:  # noqa: BLE001
            traceback.print_exc()
            return self._error(500, str(exc))

    def _cells(self, url):
        qs = parse_qs(url.query)
        cx = self.session.complex
        items = []
        bbox = None
        if "bbox" in qs:
            vals = [float(v) for v in qs["bbox"][0].split(",")]
            if len(vals) != 6:
                return self._error(400, "bbox must be x0,y0,z0,x1,y1,z1")
            bbox = vals
        for cell in cx.cells:
            poly = cx.cell_polygon(cell)
            if bbox is not None:
                if (poly[:, 0].max() < bbox[0] or poly[:, 0].min() > bbox[3]
                        or poly[:, 1].max() < bbox[1] or poly[:, 1].min() > bbox[4]
                        or cell.z_hi < bbox[2] or cell.z_lo > bbox[5]):
                    continue
            label = None
            if self.session.labeling is not None and self.session.model is not None:
                model = self.session.model
                lab = self.session.labeling
                if lab.value(model, cell.id, "outside"):
                    label = "outside"
                else:
                    for r in range(model.n_rooms):
                        if lab.value(model, cell.id, "room", r):
                            label = f"room_{r}"
                            break
            items.append({
                "id": cell.id,
                "polygon": poly.tolist(),
                "z": [cell.z_lo, cell.z_hi],
                "volume": cell.volume,
                "walls": list(cell.walls),
                "label": label,
            })
        return self._send(200, {"version": API_VERSION, "cells": items})

    def _mesh(self, entity: str, url):
        if self.session.building_model is None:
            return self._error(409, "no solved model yet")
        qs = parse_qs(url.query)
        fmt = qs.get("format", ["obj"])[0]
        try:
            tris = building.mesh_triangles(self.session.building_model, self.session.complex, entity)
        except (KeyError, StopIteration):
            return self._error(404, f"unknown entity {entity}")
        if fmt == "bin":
            return self._send(200, _mesh_binary(tris), content_type="application/octet-stream")
        lines = [f"o {entity}"]
        for t in tris.reshape(-1, 3):
            lines.append(f"v {t[0]} {t[1]} {t[2]}")
        for i in range(0, 3 * len(tris), 3):
            lines.append(f"f {i + 1} {i + 2} {i + 3}")
        return self._send(200, "\n".join(lines) + "\n", content_type="text/plain")

    def do_POST(self):  # noqa: N802
        try:
            url = urlparse(self.path)
            if url.path == "/constraints":
                body = self._body()
                items = body if isinstance(body, list) else body.get("constraints", [body])
                try:
                    ids = self.session.add_constraints(items)
                except ConflictError as exc:
                    return self._error(409, str(exc))
                except KeyError as exc:
                    return self._error(404, str(exc.args[0]))
                except (ValueError, TypeError) as exc:
                    return self._error(400, str(exc))
                return self._send(200, {"version": API_VERSION, "ids": ids})
            if url.path == "/walls/virtual":
                body = self._body()
                try:
                    wall_id = self.session.add_virtual_wall(
                        body["p0"], body["p1"],
                        float(body.get("z_lo", self.session.complex.zcuts[0].z)),
                        float(body.get("z_hi", self.session.complex.zcuts[-1].z)),
                        float(body.get("thickness", self.session.config.virtual_thickness)),
                    )
                except ConflictError as exc:
                    return self._error(409, str(exc))
                except (ValueError, KeyError) as exc:
                    return self._error(400, str(exc))
                return self._send(200, {"version": API_VERSION, "wall": wall_id})
            if url.path == "/solve":
                body = self._body()
                try:
                    job = self.session.start_solve(alpha=body.get("alpha"))
                except ConflictError as exc:
                    return self._error(409, str(exc))
                return self._send(200, {"version": API_VERSION, "job": job})
            return self._error(404, f"unknown path {url.path}")
        except Exception as exc:  # noqa: BLE001
            traceback.print_exc()
            return self._error(500, str(exc))

    def do_DELETE(self):  # noqa: N802
        match = re.fullmatch(r"/constraints/(\d+)", urlparse(self.path).path)
        if not match:
            return self._error(404, "unknown path")
        try:
            self.session.remove_constraint(int(match.group(1)))
        except ConflictError as exc:
            return self._error(409, str(exc))
        except KeyError as exc:
            return self._error(404, str(exc.args[0]))
        return self._send(200, {"version": API_VERSION, "removed": int(match.group(1))})


def make_server(session: SteeringSession, port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"session": session})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve(session_dir, config: Config, port: int = 8472) -> None:
    """Load a pipeline session directory and serve it (blocking)."""
    pipeline_session = run_stage("solve", session_dir, config)
    session = SteeringSession(pipeline_session)
    server = make_server(session, port)
    print(f"serving on http://127.0.0.1:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
