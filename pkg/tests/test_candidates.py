import math

import numpy as np
import pytest

from volrecon import candidates as cd
from volrecon import planes as pl
from volrecon.pointcloud import PointCloud


def plane_from_points(pts, normal, offset, cloud_offset=0):
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    u, v = pl.plane_frame(normal)
    cloud = PointCloud(pts, np.tile(normal, (len(pts), 1)))
    plane = pl.DetectedPlane(
        normal=normal,
        offset=offset,
        inlier_indices=np.arange(len(pts)) + cloud_offset,
        basis_u=u,
        basis_v=v,
        occupancy=pl.OccupancyBitmap.empty(0.2),
    )
    return plane, cloud


def patch_points(rng, normal, offset, width, height, n, tilt_axis=None, tilt_deg=0.0):
    normal = np.asarray(normal, dtype=float)
    normal /= np.linalg.norm(normal)
    if tilt_deg:
        ax = np.asarray(tilt_axis, dtype=float)
        ang = math.radians(tilt_deg)
        k = ax / np.linalg.norm(ax)
        normal = (
            normal * math.cos(ang)
            + np.cross(k, normal) * math.sin(ang)
            + k * (k @ normal) * (1 - math.cos(ang))
        )
    u, v = pl.plane_frame(normal)
    st = np.column_stack([rng.uniform(0, width, n), rng.uniform(0, height, n)])
    pts = np.outer(st[:, 0], u) + np.outer(st[:, 1], v) + offset * normal
    return pts, normal


def make_surface(sid, kind, normal, offset, coords_extent=(4.0, 2.6), rng=None, n=3000, pixel=0.2):
    """SurfaceCandidate with a dense rectangular footprint placed in
    consistent world coordinates (axis-aligned normals only)."""
    rng = rng or np.random.default_rng(sid)
    normal = np.asarray(normal, dtype=float)
    normal /= np.linalg.norm(normal)
    axis = int(np.argmax(np.abs(normal)))
    others = [a for a in range(3) if a != axis]
    pts = np.empty((n, 3))
    pts[:, axis] = offset / normal[axis]
    pts[:, others[0]] = rng.uniform(0, coords_extent[0], n)
    pts[:, others[1]] = rng.uniform(0, coords_extent[1], n)
    u, v = pl.plane_frame(normal)
    st = np.column_stack([pts @ u, pts @ v])
    occ = pl.OccupancyBitmap.from_points(st, pixel)
    return cd.SurfaceCandidate(
        id=sid, kind=kind, normal=normal, offset=offset,
        basis_u=u, basis_v=v, occupancy=occ, ref_point=pts.mean(axis=0),
    )


class TestClassifyRectify:
    def test_near_horizontal_snaps_to_z(self):
        rng = np.random.default_rng(0)
        n = np.array([0.05, 0.0, 0.9987])
        pts, normal = patch_points(rng, n, 1.0, 4.0, 4.0, 3000)
        plane, cloud = plane_from_points(pts, normal, 1.0)
        plane.occupancy = pl.build_occupancy(plane, cloud, 0.2)
        out = cd.classify_rectify([plane], cloud)
        assert len(out) == 1
        assert out[0].kind == cd.SLAB
        np.testing.assert_array_equal(out[0].normal, [0, 0, 1])

    def test_small_vertical_discarded(self):
        rng = np.random.default_rng(1)
        pts, normal = patch_points(rng, [1, 0, 0], 0.0, 1.0, 1.0, 500)
        plane, cloud = plane_from_points(pts, normal, 0.0)
        plane.occupancy = pl.build_occupancy(plane, cloud, 0.2)
        assert cd.classify_rectify([plane], cloud) == []

    def test_45_degree_discarded(self):
        rng = np.random.default_rng(2)
        n = np.array([1.0, 0.0, 1.0]) / math.sqrt(2)
        pts, normal = patch_points(rng, n, 0.0, 4.0, 4.0, 3000)
        plane, cloud = plane_from_points(pts, normal, 0.0)
        plane.occupancy = pl.build_occupancy(plane, cloud, 0.2)
        assert cd.classify_rectify([plane], cloud) == []

    def test_wall_normal_exactly_horizontal(self):
        rng = np.random.default_rng(3)
        n = np.array([0.998, 0.02, 0.05])
        pts, normal = patch_points(rng, n, 2.0, 4.0, 2.6, 3000)
        plane, cloud = plane_from_points(pts, normal, 2.0)
        plane.occupancy = pl.build_occupancy(plane, cloud, 0.2)
        out = cd.classify_rectify([plane], cloud)
        assert len(out) == 1
        assert out[0].kind == cd.WALL
        assert out[0].normal[2] == 0.0
        assert np.linalg.norm(out[0].normal) == pytest.approx(1.0, abs=1e-12)

    def test_rectification_keeps_inlier_rms_small(self):
        rng = np.random.default_rng(4)
        n = np.array([0.999, 0.0, 0.0447])  # ~2.6 degrees tilt
        n /= np.linalg.norm(n)
        pts, normal = patch_points(rng, n, 1.0, 3.0, 2.6, 4000)
        pts += np.outer(rng.normal(0, 0.005, len(pts)), normal)
        plane, cloud = plane_from_points(pts, normal, 1.0)
        plane.occupancy = pl.build_occupancy(plane, cloud, 0.2)
        out = cd.classify_rectify([plane], cloud)
        d = pts @ out[0].normal - out[0].offset
        assert np.sqrt((d**2).mean()) <= 2 * 0.01 + 0.08  # tilt residual dominates


class TestSupport:
    def build(self, labels):
        pts = np.array([[0.05, 0.05, 0.0]] * len(labels))
        cloud = PointCloud(pts, np.tile([0, 0, 1.0], (len(labels), 1)),
                           labels=np.array(labels, dtype=np.int32))
        surf = cd.SurfaceCandidate(
            id=0, kind=cd.SLAB, normal=np.array([0, 0, 1.0]), offset=0.0,
            basis_u=np.array([1.0, 0, 0]), basis_v=np.array([0, 1.0, 0]),
            occupancy=pl.OccupancyBitmap.from_points(pts[:, :2], 0.2),
            inlier_indices=np.arange(len(labels)),
            ref_point=np.zeros(3),
        )
        return cd.build_support(surf, cloud, n_labels=3)

    def test_pure_pixel(self):
        bm = self.build([1] * 10)
        np.testing.assert_allclose(bm.values[0, 0], [0, 1, 0])

    def test_mixed_pixel(self):
        bm = self.build([0] * 5 + [1] * 5)
        np.testing.assert_allclose(bm.values[0, 0], [0.5, 0.5, 0])

    def test_unlabeled_only_pixel_zero(self):
        bm = self.build([-1] * 4)
        np.testing.assert_allclose(bm.values[0, 0], [0, 0, 0])


class TestDilation:
    def test_radius_zero_identity(self):
        rng = np.random.default_rng(5)
        bm = cd.MultiLabelBitmap(np.zeros(2), 0.1, rng.uniform(size=(6, 6, 2)).astype(np.float32))
        out = cd.dilate_support(bm, 0)
        np.testing.assert_array_equal(out.values, bm.values)

    def test_single_pixel_grows_to_block(self):
        values = np.zeros((5, 5, 1), dtype=np.float32)
        values[2, 2, 0] = 1.0
        bm = cd.MultiLabelBitmap(np.zeros(2), 0.1, values)
        out = cd.dilate_support(bm, 2)
        # padded by the radius: the whole 5x5 neighborhood is nonzero
        nz_rows, nz_cols, _ = np.nonzero(out.values)
        assert nz_rows.min() == 2 and nz_rows.max() == 6
        assert nz_cols.min() == 2 and nz_cols.max() == 6
        assert (out.values > 0).sum() == 25

    def test_composition_law(self):
        rng = np.random.default_rng(6)
        values = (rng.uniform(size=(8, 7, 2)) * (rng.uniform(size=(8, 7, 2)) < 0.2)).astype(np.float32)
        bm = cd.MultiLabelBitmap(np.zeros(2), 0.1, values)
        a = cd.dilate_support(cd.dilate_support(bm, 1), 2)
        b = cd.dilate_support(bm, 3)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_allclose(a.origin, b.origin)

    def test_lookup_respects_origin_shift(self):
        values = np.zeros((3, 3, 1), dtype=np.float32)
        values[1, 1, 0] = 0.7
        bm = cd.MultiLabelBitmap(np.zeros(2), 0.1, values)
        out = cd.dilate_support(bm, 1)
        np.testing.assert_allclose(out.lookup(np.array([[0.05, 0.05]]))[0], [0.7])


class TestPairing:
    def test_facing_pair(self):
        rng = np.random.default_rng(7)
        a = make_surface(0, cd.WALL, [-1, 0, 0], -4.0, rng=rng)
        b = make_surface(1, cd.WALL, [1, 0, 0], 4.24, rng=rng)
        walls, surfaces = cd.pair_walls([a, b], max_thickness=0.5)
        assert len(walls) == 1
        assert walls[0].thickness == pytest.approx(0.24, abs=1e-9)
        assert len(surfaces) == 2

    def test_lone_surface_gets_virtual_partner(self):
        a = make_surface(0, cd.WALL, [1, 0, 0], 0.0)
        walls, surfaces = cd.pair_walls([a], virtual_thickness=0.3)
        assert len(walls) == 1
        assert walls[0].thickness == pytest.approx(0.3)
        assert walls[0].is_virtual_pair
        virtual = [s for s in surfaces if s.is_virtual]
        assert len(virtual) == 1
        # virtual plane sits 0.3 behind: {x = -0.3} with normal -x
        np.testing.assert_allclose(virtual[0].normal, [-1, 0, 0])
        assert virtual[0].offset == pytest.approx(0.3)

    def test_three_parallel_surfaces_match_bruteforce(self):
        # A at x=0 (normal +x), B/B' opposing pair at x=0.3, C at x=0.6
        # (normal -x): candidates (A,B) and (B',C)
        a = make_surface(0, cd.WALL, [1, 0, 0], 0.0)
        bb = make_surface(1, cd.WALL, [-1, 0, 0], -0.3)
        bp = make_surface(2, cd.WALL, [1, 0, 0], 0.3)
        c = make_surface(3, cd.WALL, [-1, 0, 0], -0.6)
        inputs = [a, bb, bp, c]
        walls, _ = cd.pair_walls(inputs, max_thickness=0.5)
        got = {tuple(sorted((w.surface_a.id, w.surface_b.id))) for w in walls if not w.is_virtual_pair}
        assert got == {(0, 1), (2, 3)}

        # all-pairs brute-force oracle applying the same predicate
        oracle = set()
        for i in range(len(inputs)):
            for j in range(i + 1, len(inputs)):
                if cd.pair_surfaces(inputs[i], inputs[j], 0.5, 5.0) is not None:
                    oracle.add((i, j))
        assert got == oracle

    def test_pair_count_random_scene_matches_oracle(self):
        rng = np.random.default_rng(8)
        surfaces = []
        for sid in range(10):
            sign = 1 if rng.uniform() < 0.5 else -1
            x = rng.uniform(0, 2.0)
            surfaces.append(make_surface(sid, cd.WALL, [sign, 0, 0], sign * x, rng=rng))
        walls, _ = cd.pair_walls(surfaces, max_thickness=0.6)
        got = {tuple(sorted((w.surface_a.id, w.surface_b.id))) for w in walls if not w.is_virtual_pair}
        oracle = set()
        for i in range(len(surfaces)):
            for j in range(i + 1, len(surfaces)):
                if cd.pair_surfaces(surfaces[i], surfaces[j], 0.6, 5.0) is not None:
                    oracle.add((i, j))
        assert got == oracle

    def test_every_surface_in_some_candidate(self):
        rng = np.random.default_rng(9)
        surfaces = [
            make_surface(0, cd.WALL, [1, 0, 0], 0.0, rng=rng),
            make_surface(1, cd.WALL, [0, 1, 0], 0.0, rng=rng),
            make_surface(2, cd.SLAB, [0, 0, 1], 0.0, rng=rng, coords_extent=(4.0, 4.0)),
        ]
        walls, all_surfaces = cd.pair_walls(surfaces)
        covered = set()
        for w in walls:
            covered.add(w.surface_a.id)
            covered.add(w.surface_b.id)
        assert {s.id for s in all_surfaces} == covered

    def test_slab_pairing(self):
        rng = np.random.default_rng(10)
        top = make_surface(0, cd.SLAB, [0, 0, 1], 2.9, rng=rng, coords_extent=(4.0, 4.0))
        bottom = make_surface(1, cd.SLAB, [0, 0, -1], -2.6, rng=rng, coords_extent=(4.0, 4.0))
        walls, _ = cd.pair_walls([top, bottom], max_thickness=0.6)
        real = [w for w in walls if not w.is_virtual_pair]
        assert len(real) == 1
        assert real[0].thickness == pytest.approx(0.3, abs=1e-9)

    def test_distant_parallel_not_paired(self):
        rng = np.random.default_rng(11)
        a = make_surface(0, cd.WALL, [1, 0, 0], 0.0, rng=rng)
        b = make_surface(1, cd.WALL, [-1, 0, 0], -4.0, rng=rng)
        walls, _ = cd.pair_walls([a, b], max_thickness=0.6)
        assert all(w.is_virtual_pair for w in walls)

    def test_no_footprint_overlap_no_pair(self):
        rng = np.random.default_rng(12)
        a = make_surface(0, cd.WALL, [1, 0, 0], 0.0, rng=rng)
        b = make_surface(1, cd.WALL, [-1, 0, 0], -0.3, rng=rng)
        # push b's footprint far away along the wall axis
        b.occupancy = pl.OccupancyBitmap(b.occupancy.origin + np.array([100.0, 0]),
                                         0.2, b.occupancy.bits)
        b.ref_point = b.ref_point + 100.0 * b.basis_u
        walls, _ = cd.pair_walls([a, b], max_thickness=0.6)
        assert all(w.is_virtual_pair for w in walls)

    def test_order_invariance(self):
        rng = np.random.default_rng(13)
        surfaces = [
            make_surface(0, cd.WALL, [1, 0, 0], 0.0, rng=rng),
            make_surface(1, cd.WALL, [-1, 0, 0], -0.24, rng=rng),
            make_surface(2, cd.WALL, [0, 1, 0], 0.0, rng=rng),
        ]
        walls_fwd, _ = cd.pair_walls(list(surfaces))
        walls_rev, _ = cd.pair_walls(list(reversed(surfaces)))
        key = lambda ws: sorted(tuple(sorted((w.surface_a.id, w.surface_b.id))) for w in ws)
        assert key(walls_fwd) == key(walls_rev)
