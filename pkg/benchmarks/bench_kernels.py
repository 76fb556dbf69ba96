#!/usr/bin/env python3
"""Benchmark the compiled ray-casting kernel against the numpy fallback.

Workloads mirror the pipeline's hot paths: hemisphere cleaning rays,
visibility segments and prior sphere rays against a room-like surface
pack. Run after building the extension (pip install -e .).
"""

import time

import numpy as np

from volrecon import _kernels
from volrecon._kernels import SurfacePack, cast_rays
from volrecon.planes import DetectedPlane, OccupancyBitmap, plane_frame


def room_pack(n_planes=12, extent=8.0, pixel=0.2):
    rng = np.random.default_rng(0)
    surfaces = []
    for i in range(n_planes):
        normal = rng.normal(size=3)
        normal /= np.linalg.norm(normal)
        u, v = plane_frame(normal)
        bits = rng.uniform(size=(40, 40)) < 0.9
        surfaces.append(
            DetectedPlane(
                normal=normal,
                offset=float(rng.uniform(-extent / 2, extent / 2)),
                inlier_indices=np.zeros(0, dtype=np.int64),
                basis_u=u,
                basis_v=v,
                occupancy=OccupancyBitmap(np.array([-4.0, -4.0]), pixel, bits),
            )
        )
    return SurfacePack.from_surfaces(surfaces)


def make_rays(n, extent=8.0):
    rng = np.random.default_rng(1)
    origins = rng.uniform(-extent / 2, extent / 2, size=(n, 3))
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return origins, dirs


def run(backend, origins, dirs, pack, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        hit_s, hit_t, front = cast_rays(origins, dirs, pack=pack, force=backend)
        best = min(best, time.perf_counter() - t0)
    return best, hit_s


def main():
    pack = room_pack()
    print(f"compiled backend available: {_kernels.backend_name() == 'cython'}")
    header = f"{'rays':>10} {'numpy (s)':>12} {'cython (s)':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for n in (100_000, 500_000, 2_000_000):
        origins, dirs = make_rays(n)
        t_py, hits_py = run("py", origins, dirs, pack)
        if _kernels.backend_name() == "cython":
            t_cy, hits_cy = run("cy", origins, dirs, pack)
            assert np.array_equal(hits_py, hits_cy), "backends disagree"
            print(f"{n:>10} {t_py:>12.3f} {t_cy:>12.3f} {t_py / t_cy:>8.1f}x")
        else:
            print(f"{n:>10} {t_py:>12.3f} {'n/a':>12} {'n/a':>9}")


if __name__ == "__main__":
    main()
