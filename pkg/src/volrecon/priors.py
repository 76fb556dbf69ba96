"""Monte-Carlo room/outside priors per cell and support priors per face.

Cell priors: sample points inside the prism cell, cast rays in random
directions; the first set occupancy pixel hit on a surface's front side
votes with that pixel's (dilated) multi-label vector, renormalized; back
sides, misses and label-free pixels vote outside. Face priors: the
fraction of uniform samples on the face that land in set (dilated)
occupancy pixels of the face's source surfaces; virtual-only faces get 0.
"""

from __future__ import annotations

import math

import numpy as np

from ._kernels import SurfacePack, cast_rays
from .candidates import SurfaceCandidate
from .cellcomplex import LATERAL, Cell, CellComplex, OrientedFace

K_BASE = 100
K_FLOOR = 32
D_RAYS = 64


def _triangulate_weights(poly: np.ndarray):
    """Fan triangulation of a convex polygon with area weights."""
    v0 = poly[0]
    tris = []
    weights = []
    for i in range(1, len(poly) - 1):
        a, b = poly[i], poly[i + 1]
        area = 0.5 * abs((a[0] - v0[0]) * (b[1] - v0[1]) - (b[0] - v0[0]) * (a[1] - v0[1]))
        tris.append((v0, a, b))
        weights.append(area)
    w = np.array(weights)
    total = w.sum()
    if total <= 0:
        w = np.ones(len(w)) / len(w)
    else:
        w = w / total
    return tris, w


def _sample_in_polygon(poly: np.ndarray, n: int, rng) -> np.ndarray:
    tris, w = _triangulate_weights(poly)
    picks = rng.choice(len(tris), size=n, p=w)
    r1 = np.sqrt(rng.uniform(size=n))
    r2 = rng.uniform(size=n)
    out = np.empty((n, 2))
    for t in range(len(tris)):
        mask = picks == t
        if not mask.any():
            continue
        a, b, c = (np.asarray(v, dtype=float) for v in tris[t])
        u = r1[mask, None]
        v = r2[mask, None]
        out[mask] = (1 - u) * a + u * (1 - v) * b + u * v * c
    return out


def _sphere_dirs(n: int, rng) -> np.ndarray:
    d = rng.normal(size=(n, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _multilabel_votes(surfaces, hit_surface, hit_points, n_rooms) -> np.ndarray:
    """Vote vector (rooms + outside) for each front hit."""
    votes = np.zeros((len(hit_surface), n_rooms + 1))
    votes[:, n_rooms] = 1.0  # default outside
    for si in np.unique(hit_surface):
        s = surfaces[si]
        if s.support is None:
            continue
        mask = hit_surface == si
        pts = hit_points[mask]
        coords = np.column_stack([pts @ s.basis_u, pts @ s.basis_v])
        vec = s.support.lookup(coords).astype(np.float64)
        sums = vec.sum(axis=1)
        labeled = sums > 0
        sub = np.zeros((mask.sum(), n_rooms + 1))
        sub[:, n_rooms] = 1.0
        sub[labeled, :n_rooms] = vec[labeled] / sums[labeled, None]
        sub[labeled, n_rooms] = 0.0
        votes[mask] = sub
    return votes


def cell_prior(
    cell: Cell,
    cx: CellComplex,
    surfaces: list[SurfaceCandidate],
    n_rooms: int,
    k_base: int = K_BASE,
    d_rays: int = D_RAYS,
    rng_seed: int = 0,
    pack: SurfacePack | None = None,
) -> np.ndarray:
    """p_C(cell, .) over rooms + outside; entries sum to 1."""
    if pack is None:
        pack = SurfacePack.from_surfaces(surfaces)
    rng = np.random.default_rng([rng_seed, cell.id])
    k = max(K_FLOOR, math.ceil(k_base * max(cell.volume, cell.diameter)))
    poly = cx.cell_polygon(cell)
    pts2 = _sample_in_polygon(poly, k, rng)
    zs = rng.uniform(cell.z_lo, cell.z_hi, size=k)
    origins = np.repeat(np.column_stack([pts2, zs]), d_rays, axis=0)
    dirs = np.tile(_sphere_dirs(d_rays, rng), (k, 1))
    hit_s, hit_t, front = cast_rays(origins, dirs, pack=pack)
    votes = np.zeros((len(origins), n_rooms + 1))
    votes[:, n_rooms] = 1.0
    front_hits = (hit_s >= 0) & (front > 0)
    if front_hits.any():
        pts = origins[front_hits] + hit_t[front_hits, None] * dirs[front_hits]
        votes[front_hits] = _multilabel_votes(surfaces, hit_s[front_hits], pts, n_rooms)
    return votes.mean(axis=0)


def cell_priors(
    cx: CellComplex,
    surfaces: list[SurfaceCandidate],
    n_rooms: int,
    k_base: int = K_BASE,
    d_rays: int = D_RAYS,
    rng_seed: int = 0,
) -> np.ndarray:
    """p_C for every cell: array (n_cells, n_rooms + 1)."""
    pack = SurfacePack.from_surfaces(surfaces)
    out = np.zeros((len(cx.cells), n_rooms + 1))
    for cell in cx.cells:
        out[cell.id] = cell_prior(cell, cx, surfaces, n_rooms,
                                  k_base=k_base, d_rays=d_rays,
                                  rng_seed=rng_seed, pack=pack)
    return out


def _face_samples(face: OrientedFace, cx: CellComplex, k: int, rng) -> np.ndarray:
    if face.kind == LATERAL:
        (p0, p1) = face.edge2d
        t = rng.uniform(size=k)
        z = rng.uniform(face.z_lo, face.z_hi, size=k)
        xy = np.outer(1 - t, p0) + np.outer(t, p1)
        return np.column_stack([xy, z])
    poly = cx.cell_polygon(cx.cells[cx.cell_id(face.face2d, 0)])
    pts2 = _sample_in_polygon(poly, k, rng)
    return np.column_stack([pts2, np.full(k, face.z_lo)])


def _face_diameter(face: OrientedFace, cx: CellComplex) -> float:
    if face.kind == LATERAL:
        (p0, p1) = face.edge2d
        w = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
        return math.hypot(w, face.z_hi - face.z_lo)
    poly = cx.cell_polygon(cx.cells[cx.cell_id(face.face2d, 0)])
    d2 = 0.0
    for i in range(len(poly)):
        d2 = max(d2, float(((poly - poly[i]) ** 2).sum(axis=1).max()))
    return math.sqrt(d2)


def face_prior(
    face: OrientedFace,
    cx: CellComplex,
    surfaces_by_id: dict,
    k_base: int = K_BASE,
    rng_seed: int = 0,
) -> float:
    """p_F(face): occupancy-supported fraction of uniform face samples."""
    sources = [surfaces_by_id[sid] for sid in face.source_surfaces]
    real = [s for s in sources if not s.is_virtual and s.occupancy.bits.size]
    if not real:
        return 0.0
    rng = np.random.default_rng([rng_seed, 1 + face.id])
    k = max(K_FLOOR, math.ceil(k_base * max(face.area, _face_diameter(face, cx))))
    pts = _face_samples(face, cx, k, rng)
    supported = np.zeros(k, dtype=bool)
    for s in real:
        coords = np.column_stack([pts @ s.basis_u, pts @ s.basis_v])
        supported |= s.occupancy.test(coords)
    return float(supported.mean())


def face_priors(
    cx: CellComplex,
    surfaces: list[SurfaceCandidate],
    k_base: int = K_BASE,
    rng_seed: int = 0,
) -> np.ndarray:
    by_id = {s.id: s for s in surfaces}
    return np.array([
        face_prior(f, cx, by_id, k_base=k_base, rng_seed=rng_seed) for f in cx.faces
    ])
