"""Point cloud container, file I/O, normal estimation and subsampling.

Supported inputs are whitespace-separated xyz text ("x y z [nx ny nz]" per
line) and PLY (ascii or binary little-endian, properties x,y,z and optional
nx,ny,nz). The cloud keeps track of the indices of its points in the
originally loaded file so that downstream stages can be compared against
per-point ground truth after subsampling and cleaning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, minimum_spanning_tree
from scipy.spatial import cKDTree


class PointCloudError(Exception):
    pass


class ParseError(PointCloudError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class EmptyCloudError(PointCloudError):
    pass


@dataclass
class PointCloud:
    """Points with optional unit normals and optional room labels.

    ``labels`` uses -1 for unlabeled points. ``source_indices`` maps each
    point back to the cloud this one was derived from (identity for loaded
    clouds).
    """

    positions: np.ndarray
    normals: np.ndarray | None = None
    labels: np.ndarray | None = None
    source_indices: np.ndarray | None = None
    degenerate_normals: np.ndarray | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise PointCloudError("positions must be an (N, 3) array")
        if not np.isfinite(self.positions).all():
            raise PointCloudError("positions contain non-finite coordinates")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64)
            if self.normals.shape != self.positions.shape:
                raise PointCloudError("normals shape mismatch")
        if self.source_indices is None:
            self.source_indices = np.arange(len(self.positions), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def has_normals(self) -> bool:
        return self.normals is not None

    def select(self, index) -> "PointCloud":
        """New cloud with the given point subset, all channels aligned."""
        return PointCloud(
            positions=self.positions[index],
            normals=None if self.normals is None else self.normals[index],
            labels=None if self.labels is None else self.labels[index],
            source_indices=self.source_indices[index],
            degenerate_normals=None
            if self.degenerate_normals is None
            else self.degenerate_normals[index],
        )


# ---------------------------------------------------------------------------
# I/O


def _load_xyz(path: Path) -> PointCloud:
    positions = []
    normals = []
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (3, 6):
                raise ParseError(path, lineno, f"expected 3 or 6 columns, got {len(parts)}")
            try:
                values = [float(p) for p in parts]
            except ValueError:
                raise ParseError(path, lineno, f"non-numeric field in {parts!r}") from None
            positions.append(values[:3])
            if len(values) == 6:
                normals.append(values[3:])
            elif normals:
                raise ParseError(path, lineno, "mixed rows with and without normals")
    if not positions:
        raise EmptyCloudError(f"{path}: no points")
    nrm = np.array(normals) if len(normals) == len(positions) else None
    return PointCloud(np.array(positions), nrm)


_PLY_TYPES = {
    "float": ("f4", 4), "float32": ("f4", 4),
    "double": ("f8", 8), "float64": ("f8", 8),
    "int": ("i4", 4), "int32": ("i4", 4),
    "uint": ("u4", 4), "uint32": ("u4", 4),
    "short": ("i2", 2), "ushort": ("u2", 2),
    "char": ("i1", 1), "uchar": ("u1", 1), "int8": ("i1", 1), "uint8": ("u1", 1),
}


def _load_ply(path: Path) -> PointCloud:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"ply":
            raise ParseError(path, 1, "missing 'ply' magic")
        fmt = None
        n_vertices = None
        props = []  # (name, dtype_code) once inside the vertex element
        in_vertex = False
        lineno = 1
        while True:
            raw = fh.readline()
            lineno += 1
            if not raw:
                raise ParseError(path, lineno, "unterminated header")
            line = raw.decode("ascii", errors="replace").strip()
            if line.startswith("comment"):
                continue
            if line.startswith("format"):
                fmt = line.split()[1]
                if fmt not in ("ascii", "binary_little_endian"):
                    raise ParseError(path, lineno, f"unsupported format {fmt}")
            elif line.startswith("element"):
                _, name, count = line.split()
                in_vertex = name == "vertex"
                if in_vertex:
                    n_vertices = int(count)
                elif n_vertices is not None and int(count) > 0:
                    # trailing elements (e.g. faces) are ignored; vertices
                    # must come first for the binary reader below
                    in_vertex = False
            elif line.startswith("property") and in_vertex:
                parts = line.split()
                if parts[1] == "list":
                    raise ParseError(path, lineno, "list property in vertex element")
                if parts[1] not in _PLY_TYPES:
                    raise ParseError(path, lineno, f"unsupported property type {parts[1]}")
                props.append((parts[2], _PLY_TYPES[parts[1]][0]))
            elif line == "end_header":
                break
        if n_vertices is None:
            raise ParseError(path, lineno, "no vertex element")
        if n_vertices == 0:
            raise EmptyCloudError(f"{path}: no points")
        names = [p[0] for p in props]
        for req in ("x", "y", "z"):
            if req not in names:
                raise ParseError(path, lineno, f"missing vertex property {req}")
        if fmt == "ascii":
            rows = []
            for i in range(n_vertices):
                raw = fh.readline()
                lineno += 1
                if not raw:
                    raise ParseError(path, lineno, "unexpected end of file")
                parts = raw.split()
                if len(parts) < len(props):
                    raise ParseError(path, lineno, "short vertex record")
                try:
                    rows.append([float(v) for v in parts[: len(props)]])
                except ValueError:
                    raise ParseError(path, lineno, "non-numeric vertex field") from None
            data = {n: np.array([r[i] for r in rows]) for i, (n, _) in enumerate(props)}
        else:
            dtype = np.dtype([(n, "<" + c) for n, c in props])
            buf = fh.read(dtype.itemsize * n_vertices)
            if len(buf) < dtype.itemsize * n_vertices:
                raise ParseError(path, lineno, "truncated binary vertex data")
            rec = np.frombuffer(buf, dtype=dtype, count=n_vertices)
            data = {n: rec[n].astype(np.float64) for n, _ in props}
    positions = np.column_stack([data["x"], data["y"], data["z"]])
    normals = None
    if all(k in data for k in ("nx", "ny", "nz")):
        normals = np.column_stack([data["nx"], data["ny"], data["nz"]])
    return PointCloud(positions, normals)


def load(path, fmt: str | None = None) -> PointCloud:
    """Load a point cloud; ``fmt`` is one of xyz, ply, ply-ascii, ply-binary
    (None = guess from suffix)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    if fmt is None:
        fmt = "ply" if path.suffix.lower() == ".ply" else "xyz"
    if fmt in ("xyz", "xyz-text"):
        return _load_xyz(path)
    if fmt in ("ply", "ply-ascii", "ply-binary"):
        return _load_ply(path)
    raise ValueError(f"unknown format {fmt!r}")


def save(cloud: PointCloud, path, fmt: str | None = None) -> None:
    """Write xyz text or binary-little-endian PLY (double precision, so a
    load/save round trip preserves coordinates exactly)."""
    path = Path(path)
    if fmt is None:
        fmt = "ply" if path.suffix.lower() == ".ply" else "xyz"
    if fmt in ("xyz", "xyz-text"):
        with open(path, "w") as fh:
            for i in range(len(cloud)):
                row = cloud.positions[i]
                if cloud.normals is not None:
                    row = np.concatenate([row, cloud.normals[i]])
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        return
    if fmt in ("ply", "ply-binary", "ply-ascii"):
        names = ["x", "y", "z"] + (["nx", "ny", "nz"] if cloud.normals is not None else [])
        header = ["ply"]
        binary = fmt != "ply-ascii"
        header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
        header.append(f"element vertex {len(cloud)}")
        header += [f"property double {n}" for n in names]
        header.append("end_header")
        cols = cloud.positions if cloud.normals is None else np.hstack([cloud.positions, cloud.normals])
        with open(path, "wb") as fh:
            fh.write(("\n".join(header) + "\n").encode("ascii"))
            if binary:
                fh.write(np.ascontiguousarray(cols, dtype="<f8").tobytes())
            else:
                for row in cols:
                    fh.write((" ".join(repr(float(v)) for v in row) + "\n").encode("ascii"))
        return
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# Normal estimation


def estimate_normals(cloud: PointCloud, k: int = 16) -> PointCloud:
    """PCA normals from the k nearest neighbors of each point.

    The normal is the eigenvector of the smallest covariance eigenvalue.
    Signs are made locally consistent by propagating an orientation along
    a minimum spanning tree of the k-NN graph, then each connected
    component is flipped globally so that low-lying near-horizontal
    normals point up (+z), matching interior-facing floor scans.
    """
    n = len(cloud)
    if k < 3:
        raise ValueError("k must be >= 3")
    if n < k + 1:
        raise PointCloudError(f"need at least k+1={k + 1} points, have {n}")
    tree = cKDTree(cloud.positions)
    dists, idx = tree.query(cloud.positions, k=k + 1)
    neigh = cloud.positions[idx]  # (n, k+1, 3), column 0 is the point itself
    centered = neigh - neigh.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    eigvals, eigvecs = np.linalg.eigh(cov)
    normals = eigvecs[:, :, 0].copy()
    degenerate = eigvals[:, 2] <= 1e-18
    normals[degenerate] = (0.0, 0.0, 1.0)
    lens = np.linalg.norm(normals, axis=1)
    normals /= lens[:, None]

    # orientation propagation over an MST of the k-NN graph
    src = np.repeat(np.arange(n), k)
    dst = idx[:, 1:].ravel()
    weight = 1.0 + 1e-9 - np.abs(np.einsum("ij,ij->i", normals[src], normals[dst]))
    graph = coo_matrix((weight, (src, dst)), shape=(n, n))
    mst = minimum_spanning_tree(graph)
    sym = mst + mst.T
    visited = np.zeros(n, dtype=bool)
    for root in range(n):
        if visited[root]:
            continue
        order, pred = breadth_first_order(sym, root, directed=False, return_predecessors=True)
        visited[order] = True
        for node in order[1:]:
            p = pred[node]
            if np.dot(normals[node], normals[p]) < 0:
                normals[node] = -normals[node]
        # global flip per component: lowest near-horizontal normals up
        comp = order
        horiz = np.abs(normals[comp][:, 2]) > 0.7
        if horiz.any():
            zs = cloud.positions[comp][:, 2]
            low = zs <= np.quantile(zs, 0.25) + 1e-9
            vote = normals[comp][:, 2][horiz & low]
            if vote.size and vote.sum() < 0:
                normals[comp] = -normals[comp]
    return PointCloud(
        positions=cloud.positions,
        normals=normals,
        labels=cloud.labels,
        source_indices=cloud.source_indices,
        degenerate_normals=degenerate,
    )


# ---------------------------------------------------------------------------
# Subsampling


def subsample(cloud: PointCloud, min_dist: float) -> PointCloud:
    """Voxel-grid thinning: one point per occupied voxel of edge
    ``min_dist``, keeping the point nearest the voxel centroid."""
    if min_dist <= 0:
        raise ValueError("min_dist must be positive")
    if len(cloud) == 0:
        return cloud
    origin = cloud.positions.min(axis=0)
    keys3 = np.floor((cloud.positions - origin) / min_dist).astype(np.int64)
    # one linear key per voxel
    spans = keys3.max(axis=0) + 1
    lin = (keys3[:, 0] * spans[1] + keys3[:, 1]) * spans[2] + keys3[:, 2]
    order = np.argsort(lin, kind="stable")
    lin_sorted = lin[order]
    group_start = np.flatnonzero(np.r_[True, lin_sorted[1:] != lin_sorted[:-1]])
    group_end = np.r_[group_start[1:], len(lin_sorted)]
    centroids = (keys3 + 0.5) * min_dist + origin
    dist2 = np.einsum("ij,ij->i", cloud.positions - centroids, cloud.positions - centroids)
    keep = np.empty(len(group_start), dtype=np.int64)
    d_sorted = dist2[order]
    for gi, (a, b) in enumerate(zip(group_start, group_end)):
        keep[gi] = order[a + np.argmin(d_sorted[a:b])]
    keep.sort()
    return cloud.select(keep)
