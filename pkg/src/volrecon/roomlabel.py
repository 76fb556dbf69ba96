"""Unsupervised room segmentation via patch visibility and Markov clustering.

Coarse per-plane occupancy grids define point patches; mutual visibility
between patch pairs (ray casting against the fine occupancy bitmaps) forms
a graph whose Markov clusters become the room labels. Points inherit the
label of the patch owning their coarse pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ._kernels import SurfacePack, cast_segments
from .planes import DetectedPlane
from .pointcloud import PointCloud

_SEGMENT_CHUNK = 1_000_000


@dataclass
class Patch:
    plane_index: int
    pixel: tuple[int, int]  # (row, col) in the coarse grid
    center: np.ndarray  # 3D
    normal: np.ndarray


@dataclass
class VisibilityGraph:
    patches: list[Patch]
    adjacency: sp.csr_matrix  # symmetric, no self loops


@dataclass
class RoomLabelSet:
    n: int
    assignment: np.ndarray  # per entity, -1 = unlabeled


def _coarse_grid(plane: DetectedPlane, cloud: PointCloud, patch_size: float):
    coords = plane.project2d(cloud.positions[plane.inlier_indices])
    origin = np.floor(coords.min(axis=0) / patch_size) * patch_size
    ij = np.floor((coords - origin) / patch_size).astype(np.int64)
    return origin, ij


def build_patches(
    planes: list[DetectedPlane], cloud: PointCloud, patch_size: float = 0.40
):
    """One patch per occupied coarse pixel per plane.

    The patch center is the centroid of the pixel's supporting points
    projected onto the plane (a raw pixel center can sit exactly on a
    room edge when the surface extent is a pixel multiple, letting rays
    graze along wall tops). Returns (patches, lookup) where lookup maps
    (plane_index, row, col) to the patch id.
    """
    if patch_size <= 0:
        raise ValueError("patch_size must be positive")
    patches: list[Patch] = []
    lookup: dict[tuple[int, int, int], int] = {}
    for pi, plane in enumerate(planes):
        if len(plane.inlier_indices) == 0:
            continue
        origin, ij = _coarse_grid(plane, cloud, patch_size)
        coords = plane.project2d(cloud.positions[plane.inlier_indices])
        cells, inverse = np.unique(ij, axis=0, return_inverse=True)
        sums = np.zeros((len(cells), 2))
        np.add.at(sums, inverse, coords)
        counts = np.bincount(inverse, minlength=len(cells)).astype(float)
        means = sums / counts[:, None]
        for k, (col, row) in enumerate(cells):
            s, t = means[k]
            center = s * plane.basis_u + t * plane.basis_v + plane.offset * plane.normal
            lookup[(pi, int(row), int(col))] = len(patches)
            patches.append(Patch(pi, (int(row), int(col)), center, plane.normal.copy()))
    return patches, lookup


def visibility_graph(
    patches: list[Patch],
    planes: list[DetectedPlane],
    eps: float = 0.10,
) -> VisibilityGraph:
    """Edge (i, j) iff the open segment between the eps-offset patch
    centers hits no occupied pixel.

    Crossings of an endpoint's own plane are ignored in a small window
    near that endpoint (guards detection noise). The window must stay
    well below the eps offset: the centers sit exactly eps off their
    planes, so a legitimate own-plane crossing (e.g. through a thin wall
    to the opposing surface) happens at distance >= eps and must block.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = len(patches)
    pack = SurfacePack.from_surfaces(planes)
    centers = np.array([p.center for p in patches]) if n else np.zeros((0, 3))
    normals = np.array([p.normal for p in patches]) if n else np.zeros((0, 3))
    plane_ids = np.array([p.plane_index for p in patches], dtype=np.int32)
    offs = centers + eps * normals
    guard = min(0.25 * eps, 0.02)
    ii, jj = np.triu_indices(n, k=1)
    edges_i, edges_j = [], []
    for lo in range(0, len(ii), _SEGMENT_CHUNK):
        hi = min(len(ii), lo + _SEGMENT_CHUNK)
        a, b = ii[lo:hi], jj[lo:hi]
        blocked = cast_segments(
            offs[a], offs[b], excl_a=plane_ids[a], excl_b=plane_ids[b], eps=guard, pack=pack
        )
        vis = ~blocked
        edges_i.append(a[vis])
        edges_j.append(b[vis])
    if edges_i:
        ei = np.concatenate(edges_i)
        ej = np.concatenate(edges_j)
    else:
        ei = ej = np.zeros(0, dtype=np.int64)
    data = np.ones(len(ei) * 2, dtype=np.float64)
    adj = sp.coo_matrix(
        (data, (np.r_[ei, ej], np.r_[ej, ei])), shape=(n, n)
    ).tocsr()
    return VisibilityGraph(patches, adj)


def markov_cluster(
    graph,
    inflation: float = 2.0,
    max_iters: int = 100,
    prune_eps: float = 1e-5,
    keep_top: int = 1000,
) -> RoomLabelSet:
    """Markov clustering of a visibility graph (or adjacency matrix).

    Expansion squares the column-stochastic matrix, inflation raises it
    entrywise to ``inflation`` and renormalizes; per-column pruning keeps
    entries >= prune_eps (top ``keep_top``). Iteration stops when every
    column's chaos (max entry minus sum of squared entries) drops below
    1e-8. Clusters are the weakly connected components of the limit
    matrix's nonzero structure, relabeled by smallest member node.
    """
    if inflation <= 1:
        raise ValueError("inflation must be > 1")
    adj = graph.adjacency if isinstance(graph, VisibilityGraph) else sp.csr_matrix(graph)
    n = adj.shape[0]
    if n == 0:
        return RoomLabelSet(0, np.zeros(0, dtype=np.int32))
    # MCL never mixes connected components (the iteration stays block
    # diagonal), so run it per component; the flow matrices stay small
    n_comp, comp = connected_components(adj, directed=False)
    labels = np.full(n, -1, dtype=np.int64)
    next_label = 0
    for ci in range(n_comp):
        nodes = np.flatnonzero(comp == ci)
        sub = adj[nodes][:, nodes]
        sub_labels = _mcl_component(sub, inflation, max_iters, prune_eps, keep_top)
        labels[nodes] = sub_labels + next_label
        next_label += int(sub_labels.max()) + 1
    return RoomLabelSet(next_label, _canonical_labels(labels))


def _mcl_component(adj: sp.csr_matrix, inflation, max_iters, prune_eps, keep_top) -> np.ndarray:
    n = adj.shape[0]
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    # visibility components are typically near-complete; BLAS dense matmul
    # beats sparse products by orders of magnitude there (same arithmetic)
    if n <= 5000 and adj.getnnz() / (n * n) > 0.10:
        m = _mcl_iterate_dense(adj, inflation, max_iters, prune_eps, keep_top)
        structure = sp.csr_matrix(m > 0)
    else:
        m = (adj + sp.identity(n, format="csr")).tocsc()
        m = _normalize_columns(m)
        for _ in range(max_iters):
            m = (m @ m).tocsc()  # expansion
            m = _normalize_columns(m.power(inflation))  # inflation
            m = _normalize_columns(_prune_columns(m, prune_eps, keep_top))
            if _max_chaos(m) < 1e-8:
                break
        structure = sp.csr_matrix((m.tocoo() > 0).astype(np.int8))
    _, comp = connected_components(structure, directed=True, connection="weak")
    return comp.astype(np.int64)


def _mcl_iterate_dense(adj: sp.csr_matrix, inflation, max_iters, prune_eps, keep_top) -> np.ndarray:
    n = adj.shape[0]
    m = adj.toarray() + np.eye(n)
    m /= m.sum(axis=0, keepdims=True)
    for _ in range(max_iters):
        m = m @ m
        np.power(m, inflation, out=m)
        m /= m.sum(axis=0, keepdims=True)
        m[m < prune_eps] = 0.0
        if n > keep_top:
            kth = np.partition(m, n - keep_top, axis=0)[n - keep_top]
            m[m < kth[None, :]] = 0.0
        sums = m.sum(axis=0, keepdims=True)
        sums[sums == 0] = 1.0
        m /= sums
        chaos = (m.max(axis=0) - np.square(m).sum(axis=0)).max()
        if chaos < 1e-8:
            break
    return m


def _normalize_columns(m: sp.csc_matrix) -> sp.csc_matrix:
    sums = np.asarray(m.sum(axis=0)).ravel()
    sums[sums == 0] = 1.0
    return (m @ sp.diags(1.0 / sums)).tocsc()


def _prune_columns(m: sp.csc_matrix, prune_eps: float, keep_top: int) -> sp.csc_matrix:
    m = m.tocsc()
    data, indptr = m.data, m.indptr
    keep = np.zeros(len(data), dtype=bool)
    for c in range(m.shape[1]):
        a, b = indptr[c], indptr[c + 1]
        col = data[a:b]
        ok = col >= prune_eps
        if ok.sum() > keep_top:
            thresh = np.partition(col, len(col) - keep_top)[len(col) - keep_top]
            ok = col >= thresh
        if not ok.any() and b > a:
            ok[np.argmax(col)] = True  # never empty a column entirely
        keep[a:b] = ok
    m.data[~keep] = 0.0
    m.eliminate_zeros()
    return m


def _max_chaos(m: sp.csc_matrix) -> float:
    chaos = 0.0
    data, indptr = m.data, m.indptr
    for c in range(m.shape[1]):
        col = data[indptr[c] : indptr[c + 1]]
        if len(col) == 0:
            continue
        chaos = max(chaos, float(col.max() - np.square(col).sum()))
    return chaos


def _canonical_labels(comp: np.ndarray) -> np.ndarray:
    """Relabel components in order of their smallest member index."""
    out = np.empty_like(comp)
    mapping: dict[int, int] = {}
    for i, c in enumerate(comp):
        if c not in mapping:
            mapping[c] = len(mapping)
        out[i] = mapping[c]
    return out


def label_points(
    cloud: PointCloud,
    patch_labels: RoomLabelSet,
    patches: list[Patch],
    lookup: dict,
    planes: list[DetectedPlane],
    patch_size: float = 0.40,
) -> RoomLabelSet:
    """Point-level labels: each inlier inherits the label of the patch
    owning its coarse pixel; points on no plane stay unlabeled (-1)."""
    labels = np.full(len(cloud), -1, dtype=np.int32)
    for pi, plane in enumerate(planes):
        if len(plane.inlier_indices) == 0:
            continue
        origin, ij = _coarse_grid(plane, cloud, patch_size)
        for k, idx in enumerate(plane.inlier_indices):
            patch_id = lookup.get((pi, int(ij[k, 1]), int(ij[k, 0])))
            if patch_id is not None:
                labels[idx] = patch_labels.assignment[patch_id]
    return RoomLabelSet(patch_labels.n, labels)
