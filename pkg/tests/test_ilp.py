from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.optimize import linprog

from volrecon import cellcomplex as cc
from volrecon import ilp
from volrecon.ilp import model as ilp_model
from volrecon.ilp import simplex as sx
from volrecon.ilp.solve import exact_objective
from volrecon.ilp.validate import active_wall_face_area


def toy_complex(volumes, cell_walls, faces):
    """Hand-built complex stub: volumes per cell, wall-id tuple per cell,
    (ca, cb, area) per oriented face."""
    cells = [
        cc.Cell(id=i, face2d=0, interval=0, z_lo=0.0, z_hi=1.0,
                volume=float(v), diameter=1.0, walls=tuple(sorted(w)))
        for i, (v, w) in enumerate(zip(volumes, cell_walls))
    ]
    ofaces = [
        cc.OrientedFace(id=k, ca=a, cb=b, kind=cc.LATERAL, area=float(ar),
                        source_surfaces=())
        for k, (a, b, ar) in enumerate(faces)
    ]
    return SimpleNamespace(cells=cells, faces=ofaces)


def dyadic(rng, denom=256):
    return float(Fraction(int(rng.integers(0, denom + 1)), denom))


def random_toy(rng, n_cells=None, n_rooms=2):
    """Random chain toy with dyadic data (float arithmetic stays exact)."""
    n = int(n_cells or rng.integers(5, 8))
    volumes = [float(Fraction(int(rng.integers(1, 9)), 8)) for _ in range(n)]
    n_walls = int(rng.integers(1, 4))
    cell_walls = [set() for _ in range(n)]
    for w in range(n_walls):
        start = int(rng.integers(0, n))
        length = int(rng.integers(1, 4))
        for c in range(start, min(n, start + length)):
            cell_walls[c].add(w)
    faces = []
    for i in range(n - 1):
        a, b = (i, i + 1) if rng.uniform() < 0.5 else (i + 1, i)
        faces.append((a, b, float(Fraction(int(rng.integers(1, 9)), 8))))
    cx = toy_complex(volumes, cell_walls, faces)
    cell_pr = np.array([
        [dyadic(rng) if rng.uniform() < 0.7 else 0.0 for _ in range(n_rooms)] + [dyadic(rng)]
        for _ in range(n)
    ])
    face_pr = np.array([dyadic(rng) for _ in range(len(faces))])
    alpha = float(Fraction(int(rng.integers(1, 5)), 16))
    return cx, cell_pr, face_pr, alpha


def brute_force_optimum(model):
    """Exhaustive enumeration of all feasible 0-1 assignments; returns the
    exact (Fraction) optimal objective."""
    options = []
    for c in range(model.n_cells):
        opts = [model.var(c, ilp_model.OUTSIDE)]
        for r in range(model.n_rooms):
            j = model.var(c, ilp_model.ROOM, r)
            if j is not None:
                opts.append(j)
        options.append(opts)
    wall_vars = [j for j in range(model.n_vars) if model.var_kind[j] == ilp_model.WALL_LABEL]

    n_combo = int(np.prod([len(o) for o in options]))
    n_wall = 2 ** len(wall_vars)
    assert n_combo * n_wall <= 4_000_000, "toy too large for the oracle"

    cell_values = np.zeros((n_combo, model.n_vars), dtype=np.int8)
    stride = 1
    ids = np.arange(n_combo)
    for c, opts in enumerate(options):
        choice = (ids // stride) % len(opts)
        cell_values[ids, np.array(opts)[choice]] = 1
        stride *= len(opts)

    wall_values = np.zeros((n_wall, model.n_vars), dtype=np.int8)
    for b, j in enumerate(wall_vars):
        wall_values[:, j] = (np.arange(n_wall) >> b) & 1

    wall_set = set(wall_vars)
    cell_ok = np.ones(n_combo, dtype=bool)
    mixed_rows = []
    for row in model.rows:
        if any(j in wall_set for j in row.cols):
            mixed_rows.append(row)
            continue
        lhs = cell_values[:, row.cols] @ row.vals
        if row.sense == ilp_model.SENSE_EQ:
            cell_ok &= lhs == row.rhs
        elif row.sense == ilp_model.SENSE_LE:
            cell_ok &= lhs <= row.rhs
        else:
            cell_ok &= lhs >= row.rhs
    cell_values = cell_values[cell_ok]
    if len(cell_values) == 0:
        return None

    ok = np.ones((len(cell_values), n_wall), dtype=bool)
    for row in mixed_rows:
        lhs = cell_values[:, row.cols] @ row.vals
        lhs_w = wall_values[:, row.cols] @ row.vals
        total = lhs[:, None] + lhs_w[None, :]
        if row.sense == ilp_model.SENSE_EQ:
            ok &= total == row.rhs
        elif row.sense == ilp_model.SENSE_LE:
            ok &= total <= row.rhs
        else:
            ok &= total >= row.rhs
    if not ok.any():
        return None
    obj_cells = cell_values @ model.objective
    obj_walls = wall_values @ model.objective
    total_obj = np.where(ok, obj_cells[:, None] + obj_walls[None, :], np.inf)
    fmin = total_obj.min()
    near = np.argwhere(total_obj <= fmin + 1e-6)
    best = None
    for ci, wi in near:
        values = cell_values[ci] | wall_values[wi]
        exact = sum((Fraction(model.objective[j]) for j in np.flatnonzero(values)), Fraction(0))
        if best is None or exact < best:
            best = exact
    return best


class TestSimplex:
    def test_matches_scipy_on_random_lps(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            m, n = int(rng.integers(3, 10)), int(rng.integers(3, 10))
            rows = []
            for i in range(m):
                k = int(rng.integers(1, min(n, 4) + 1))
                cols = rng.choice(n, size=k, replace=False).astype(np.int64)
                vals = rng.integers(-3, 4, size=k).astype(np.float64)
                sense = ["<=", ">=", "=="][int(rng.integers(0, 3))]
                rhs = float(rng.integers(-2, 4))
                rows.append(SimpleNamespace(cols=cols, vals=vals, sense=sense, rhs=rhs))
            c = rng.normal(size=n)
            problem = sx.LpProblem(n, rows, c)
            status, x, obj = sx.solve_lp(problem, np.zeros(n), np.ones(n))

            a_ub, b_ub, a_eq, b_eq = [], [], [], []
            for row in rows:
                dense = np.zeros(n)
                dense[row.cols] = row.vals
                if row.sense == "<=":
                    a_ub.append(dense)
                    b_ub.append(row.rhs)
                elif row.sense == ">=":
                    a_ub.append(-dense)
                    b_ub.append(-row.rhs)
                else:
                    a_eq.append(dense)
                    b_eq.append(row.rhs)
            ref = linprog(
                c,
                A_ub=np.array(a_ub) if a_ub else None,
                b_ub=np.array(b_ub) if b_ub else None,
                A_eq=np.array(a_eq) if a_eq else None,
                b_eq=np.array(b_eq) if b_eq else None,
                bounds=[(0, 1)] * n,
                method="highs",
            )
            if ref.status == 2:
                assert status == sx.INFEASIBLE, f"trial {trial}: scipy infeasible, ours {status}"
            else:
                assert status == sx.OPTIMAL, f"trial {trial}: scipy feasible, ours {status}"
                assert obj == pytest.approx(ref.fun, abs=1e-7), f"trial {trial}"

    def test_degenerate_equalities(self):
        rows = [
            SimpleNamespace(cols=np.array([0, 1]), vals=np.array([1.0, 1.0]), sense="==", rhs=1.0),
            SimpleNamespace(cols=np.array([0, 1]), vals=np.array([1.0, -1.0]), sense=">=", rhs=0.0),
        ]
        problem = sx.LpProblem(2, rows, np.array([-1.0, -2.0]))
        status, x, obj = sx.solve_lp(problem, np.zeros(2), np.ones(2))
        assert status == sx.OPTIMAL
        assert obj == pytest.approx(-1.5)
        np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-9)


class TestBuildModel:
    def test_hand_counted_toy(self):
        # 2 cells, 1 face c0 -| c1, wall w0 containing only c1;
        # room prior only on c0
        cx = toy_complex([1.0, 1.0], [(), (0,)], [(0, 1, 1.0)])
        cell_pr = np.array([[0.5, 0.5], [0.0, 1.0]])
        face_pr = np.array([0.25])
        model = ilp.build_model(cx, cell_pr, face_pr, alpha=0.04)
        # variables: 2 outside + 1 room (c0) + 1 wall (c1, w0)
        assert model.n_vars == 4
        counts = model.row_counts()
        # rows: eq1 per cell; eq4 per face; eq11 per face; eq3 per (cell, wall)
        assert counts == {"eq1": 2, "eq4": 1, "eq11": 1, "eq3": 1}

    def test_direct_volume_coefficient(self):
        cx = toy_complex([1.0], [()], [])
        cell_pr = np.array([[1.0, 0.0]])
        model = ilp.build_model(cx, cell_pr, np.zeros(0))
        j = model.var(0, ilp_model.ROOM, 0)
        assert model.objective[j] == -1.0

    def test_supported_face_costs_nothing(self):
        cx = toy_complex([1.0, 1.0], [(), (0,)], [(0, 1, 3.0)])
        cell_pr = np.array([[1.0, 0.0], [0.0, 1.0]])
        face_pr = np.array([1.0])
        model = ilp.build_model(cx, cell_pr, face_pr, alpha=0.5)
        j = model.var(1, ilp_model.WALL_LABEL, 0)
        assert model.objective[j] == 0.0

    def test_unknown_forced_variable(self):
        cx = toy_complex([1.0], [()], [])
        with pytest.raises(ilp.ModelError):
            ilp.build_model(
                cx, np.array([[0.0, 1.0]]), np.zeros(0),
                forced=[ilp.UserConstraint("force_wall", 0, wall=3)],
            )

    def test_pruning_flag(self):
        cx = toy_complex([1.0, 1.0], [(), ()], [(0, 1, 1.0)])
        cell_pr = np.array([[0.0, 1.0], [0.0, 1.0]])
        pruned = ilp.build_model(cx, cell_pr, np.zeros(1), prune_rooms=True)
        full = ilp.build_model(cx, cell_pr, np.zeros(1), prune_rooms=False)
        assert pruned.n_vars == 2  # outside only
        assert full.n_vars == 4


class TestSolve:
    def test_bruteforce_equivalence_randomized(self):
        rng = np.random.default_rng(1)
        for trial in range(20):
            cx, cell_pr, face_pr, alpha = random_toy(rng)
            model = ilp.build_model(cx, cell_pr, face_pr, alpha=alpha)
            labeling = ilp.solve(model, gap_tol=0.0)
            oracle = brute_force_optimum(model)
            assert oracle is not None, f"trial {trial}: oracle found no feasible point"
            assert labeling.solver_status == "optimal"
            got = exact_objective(model, labeling.values)
            assert got == oracle, f"trial {trial}: {got} != {oracle}"

    def test_all_outside_when_priors_say_outside(self):
        cx = toy_complex([1.0, 2.0, 1.5], [(0,), (0,), ()],
                         [(0, 1, 1.0), (1, 2, 1.0)])
        cell_pr = np.array([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
        face_pr = np.zeros(2)
        model = ilp.build_model(cx, cell_pr, face_pr, alpha=0.04)
        labeling = ilp.solve(model)
        assert labeling.solver_status == "optimal"
        assert labeling.objective_value == pytest.approx(-4.5)
        for c in range(3):
            assert labeling.value(model, c, ilp_model.OUTSIDE) == 1
        assert not any(
            labeling.values[j] for j in range(model.n_vars)
            if model.var_kind[j] == ilp_model.WALL_LABEL
        )

    def test_contradictory_constraints_infeasible(self):
        # no room priors anywhere: forcing a cell non-outside violates Eq. 1
        cx = toy_complex([1.0, 1.0], [(), ()], [(0, 1, 1.0)])
        cell_pr = np.array([[0.0, 1.0], [0.0, 1.0]])
        model = ilp.build_model(
            cx, cell_pr, np.zeros(1),
            forced=[ilp.UserConstraint("force_room", 0, room=None)],
        )
        labeling = ilp.solve(model)
        assert labeling.solver_status == "infeasible"

    def test_positive_scaling_keeps_optima(self):
        rng = np.random.default_rng(2)
        cx, cell_pr, face_pr, alpha = random_toy(rng, n_cells=5)
        base = ilp.build_model(cx, cell_pr, face_pr, alpha=alpha)
        scaled = ilp.build_model(cx, cell_pr, face_pr, alpha=alpha)
        scaled.objective = scaled.objective * 8.0
        lab_base = ilp.solve(base, gap_tol=0.0)
        lab_scaled = ilp.solve(scaled, gap_tol=0.0)
        assert lab_scaled.objective_value == pytest.approx(8.0 * lab_base.objective_value, rel=1e-12)

    def test_alpha_zero_returns_argmax_when_feasible(self):
        # both cells prefer room 0; that labeling is feasible (face oriented
        # both ways is fine since labels agree)
        cx = toy_complex([1.0, 1.0], [(), ()], [(0, 1, 1.0)])
        cell_pr = np.array([[0.9, 0.1], [0.8, 0.2]])
        model = ilp.build_model(cx, cell_pr, np.zeros(1), alpha=0.0)
        labeling = ilp.solve(model)
        for c in range(2):
            assert labeling.value(model, c, ilp_model.ROOM, 0) == 1
        assert labeling.objective_value == pytest.approx(-(0.9 + 0.8))

    def test_determinism(self):
        rng = np.random.default_rng(3)
        cx, cell_pr, face_pr, alpha = random_toy(rng)
        m1 = ilp.build_model(cx, cell_pr, face_pr, alpha=alpha)
        m2 = ilp.build_model(cx, cell_pr, face_pr, alpha=alpha)
        l1 = ilp.solve(m1)
        l2 = ilp.solve(m2)
        np.testing.assert_array_equal(l1.values, l2.values)
        assert l1.objective_value == l2.objective_value


class TestExportLp:
    def test_single_variable_document(self):
        cx = toy_complex([1.0], [()], [])
        model = ilp.build_model(cx, np.array([[1.0, 0.0]]), np.zeros(0))
        doc = ilp.export_lp(model)
        assert "Minimize" in doc
        assert "Binaries" in doc
        assert "x_c0_l0" in doc
        assert "End" in doc

    def test_row_senses_present(self):
        cx = toy_complex([1.0, 1.0], [(), (0,)], [(0, 1, 1.0)])
        cell_pr = np.array([[1.0, 0.0], [0.0, 1.0]])
        model = ilp.build_model(cx, cell_pr, np.array([0.5]))
        doc = ilp.export_lp(model)
        assert " = 1" in doc
        assert " <= 0" in doc
        assert " >= 0" in doc

    def test_empty_model_error(self):
        model = ilp.IlpModel(
            n_cells=0, n_rooms=0, alpha=0.0,
            var_cell=np.zeros(0, dtype=np.int64), var_kind=[],
            var_label=np.zeros(0, dtype=np.int64), var_index={},
            objective=np.zeros(0), rows=[],
        )
        with pytest.raises(ilp.ModelError):
            ilp.export_lp(model)


class TestValidate:
    def solved_toy(self):
        rng = np.random.default_rng(4)
        cx, cell_pr, face_pr, alpha = random_toy(rng)
        model = ilp.build_model(cx, cell_pr, face_pr, alpha=alpha)
        labeling = ilp.solve(model)
        return cx, cell_pr, face_pr, model, labeling

    def test_solver_output_validates(self):
        cx, _, _, model, labeling = self.solved_toy()
        assert ilp.validate(labeling, model, cx) == []

    def test_room_next_to_outside_without_wall(self):
        cx = toy_complex([1.0, 1.0], [(), ()], [(0, 1, 1.0)])
        cell_pr = np.array([[1.0, 0.0], [0.0, 1.0]])
        model = ilp.build_model(cx, cell_pr, np.zeros(1))
        values = np.zeros(model.n_vars, dtype=np.int8)
        values[model.var(0, ilp_model.ROOM, 0)] = 1
        values[model.var(1, ilp_model.OUTSIDE)] = 1
        lab = ilp.Labeling(values, 0.0, "optimal")
        rules = {v.rule for v in ilp.validate(lab, model, cx)}
        assert "constraint-4" in rules

    def test_adjacent_distinct_rooms(self):
        cx = toy_complex([1.0, 1.0], [(), ()], [(0, 1, 1.0)])
        cell_pr = np.array([[1.0, 0.5, 0.0], [0.5, 1.0, 0.0]])
        model = ilp.build_model(cx, cell_pr, np.zeros(1), prune_rooms=False)
        values = np.zeros(model.n_vars, dtype=np.int8)
        values[model.var(0, ilp_model.ROOM, 0)] = 1
        values[model.var(1, ilp_model.ROOM, 1)] = 1
        lab = ilp.Labeling(values, 0.0, "optimal")
        rules = {v.rule for v in ilp.validate(lab, model, cx)}
        assert "constraint-2" in rules

    def test_wall_on_room_cell(self):
        cx = toy_complex([1.0], [(0,)], [])
        cell_pr = np.array([[1.0, 0.0]])
        model = ilp.build_model(cx, cell_pr, np.zeros(0))
        values = np.zeros(model.n_vars, dtype=np.int8)
        values[model.var(0, ilp_model.ROOM, 0)] = 1
        values[model.var(0, ilp_model.WALL_LABEL, 0)] = 1
        lab = ilp.Labeling(values, 0.0, "optimal")
        rules = {v.rule for v in ilp.validate(lab, model, cx)}
        assert "constraint-3" in rules

    def test_objective_recompute_matches(self):
        cx, cell_pr, face_pr, model, labeling = self.solved_toy()
        recomputed = ilp.recompute_objective(labeling, model, cx, cell_pr, face_pr)
        assert recomputed == pytest.approx(labeling.objective_value, rel=1e-9, abs=1e-12)

    def test_wall_area_measure(self):
        cx = toy_complex([1.0, 1.0], [(), (0,)], [(0, 1, 2.0)])
        cell_pr = np.array([[1.0, 0.0], [0.0, 1.0]])
        model = ilp.build_model(cx, cell_pr, np.array([0.0]))
        values = np.zeros(model.n_vars, dtype=np.int8)
        values[model.var(0, ilp_model.ROOM, 0)] = 1
        values[model.var(1, ilp_model.OUTSIDE)] = 1
        values[model.var(1, ilp_model.WALL_LABEL, 0)] = 1
        lab = ilp.Labeling(values, 0.0, "optimal")
        assert active_wall_face_area(lab, model, cx) == pytest.approx(2.0)
