"""Ray-casting kernels: compiled Cython core with a numpy fallback.

The backend is chosen at import time; set VOLRECON_KERNEL=py or =cy to
force one (cy raises if the extension is missing). All geometric stages
(cleaning, visibility, priors) go through cast_rays/cast_segments.
"""

from __future__ import annotations

import os

import numpy as np

from . import raycast_py
from .pack import SurfacePack

_choice = os.environ.get("VOLRECON_KERNEL", "auto")
_compiled = None
if _choice in ("auto", "cy"):
    try:
        from . import _raycast as _compiled  # type: ignore[attr-defined]
    except ImportError:
        if _choice == "cy":
            raise
        _compiled = None


def backend_name() -> str:
    return "cython" if _compiled is not None else "numpy"


def _cast_compiled(origins, dirs, t_max, excl_a, excl_a_t, excl_b, excl_b_t, pack):
    return _compiled.cast_rays_arrays(
        np.ascontiguousarray(origins, dtype=np.float64),
        np.ascontiguousarray(dirs, dtype=np.float64),
        np.ascontiguousarray(t_max, dtype=np.float64),
        np.ascontiguousarray(excl_a, dtype=np.int32),
        np.ascontiguousarray(excl_a_t, dtype=np.float64),
        np.ascontiguousarray(excl_b, dtype=np.int32),
        np.ascontiguousarray(excl_b_t, dtype=np.float64),
        pack.normals, pack.offsets, pack.basis_u, pack.basis_v,
        pack.origin, pack.pixel, pack.rows, pack.cols, pack.start, pack.bits,
    )


def cast_rays(origins, dirs, t_max=None, excl_a=None, excl_a_t=None,
              excl_b=None, excl_b_t=None, pack=None, force=None):
    """First occupied-pixel hit per ray.

    Returns (surface index or -1, hit parameter t, front-side flag).
    ``excl_a``/``excl_b`` name a surface whose hits are ignored within
    ``excl_a_t`` of the origin / ``excl_b_t`` of the segment end.
    """
    n = len(origins)
    if t_max is None:
        t_max = np.full(n, np.inf)
    if excl_a is None:
        excl_a = np.full(n, -1, dtype=np.int32)
    if excl_a_t is None:
        excl_a_t = np.zeros(n)
    if excl_b is None:
        excl_b = np.full(n, -1, dtype=np.int32)
    if excl_b_t is None:
        excl_b_t = np.zeros(n)
    use = force or ("cy" if _compiled is not None else "py")
    if use == "cy":
        return _cast_compiled(origins, dirs, t_max, excl_a, excl_a_t, excl_b, excl_b_t, pack)
    return raycast_py.cast_rays(
        origins, dirs,
        np.asarray(t_max, dtype=np.float64),
        np.asarray(excl_a, dtype=np.int32),
        np.asarray(excl_a_t, dtype=np.float64),
        np.asarray(excl_b, dtype=np.int32),
        np.asarray(excl_b_t, dtype=np.float64),
        pack,
    )


def cast_segments(a_pts, b_pts, excl_a, excl_b, eps, pack, force=None):
    """True per segment iff the open segment a->b crosses a set occupancy
    pixel, ignoring crossings of the endpoints' own surfaces within eps of
    the respective endpoint."""
    a_pts = np.asarray(a_pts, dtype=np.float64)
    b_pts = np.asarray(b_pts, dtype=np.float64)
    delta = b_pts - a_pts
    length = np.linalg.norm(delta, axis=1)
    length = np.where(length == 0, 1e-300, length)
    dirs = delta / length[:, None]
    hit_s, _, _ = cast_rays(
        a_pts, dirs, t_max=length,
        excl_a=excl_a, excl_a_t=np.full(len(a_pts), eps),
        excl_b=excl_b, excl_b_t=np.full(len(a_pts), eps),
        pack=pack, force=force,
    )
    return hit_s >= 0


__all__ = ["SurfacePack", "cast_rays", "cast_segments", "backend_name"]
