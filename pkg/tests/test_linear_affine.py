"""Tests for exact linear and affine inversion."""

import numpy as np
import pytest
from scipy.linalg import expm

from invode.errors import LinearlyDependentData, NoRealSolution
from invode.linalg import SpectralClass
from invode.linear_affine import (
    AffineSolution,
    P2Region,
    RegimeLabel,
    TimedDataSet,
    classify_affine_regime,
    classify_linear_p2,
    phi_from_data,
    solve_affine,
    solve_linear,
    transform_affine,
    transform_linear,
)


def linear_data(a, b, m=None):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = m if m is not None else a.shape[0] + 1
    pts = [b]
    step = expm(a)
    for _ in range(m - 1):
        pts.append(step @ pts[-1])
    return TimedDataSet.from_points(pts)


def affine_data(a, c, b, m=None):
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    n = a.shape[0]
    m = m if m is not None else n + 2
    b_aug = np.zeros((n + 1, n + 1))
    b_aug[:n, :n] = a
    b_aug[:n, n] = c
    step = expm(b_aug)
    z = np.concatenate([np.asarray(b, dtype=float), [1.0]])
    pts = [z[:n].copy()]
    for _ in range(m - 1):
        z = step @ z
        pts.append(z[:n].copy())
    return TimedDataSet.from_points(pts)


class TestPhi:
    def test_diag_two_three(self):
        d = TimedDataSet.from_points([[1, 1], [2, 3], [4, 9]])
        phi = phi_from_data(d)
        assert np.allclose(phi, np.diag([2.0, 3.0]))
        x0 = d.points[:2].T
        x1 = d.points[1:].T
        assert np.allclose(phi @ x0, x1)

    def test_collinear_raises(self):
        d = TimedDataSet.from_points([[1, 0], [2, 0], [4, 0]])
        with pytest.raises(LinearlyDependentData):
            phi_from_data(d)

    def test_quarter_rotation(self):
        d = TimedDataSet.from_points([[1, 0], [0, 1], [-1, 0]])
        assert np.allclose(phi_from_data(d), [[0, -1], [1, 0]])


class TestSolveLinear:
    def test_unique_node(self):
        d = TimedDataSet.from_points([[1, 1], [2, 3], [4, 9]])
        res = solve_linear(d)
        assert res.exists and res.unique
        assert len(res) == 1
        w = np.sort(np.linalg.eigvals(res[0].matrix).real)
        assert np.allclose(w, [np.log(2.0), np.log(3.0)], atol=1e-10)
        assert res[0].stability.value == "unstable_node"
        assert np.allclose(res[0].initial, [1, 1])

    def test_no_real_solution_report(self):
        d = TimedDataSet.from_points([[1, 1], [-1, 2], [1, 4]])
        res = solve_linear(d)
        assert not res.exists
        assert len(res) == 0
        assert res.phi_class is SpectralClass.NEGATIVE_ODD_MULTIPLICITY
        assert "no real solution" in res.message

    def test_rotation_branches(self):
        d = TimedDataSet.from_points([[1, 0], [0, 1], [-1, 0]])
        res = solve_linear(d, max_winding=1)
        assert len(res) == 3
        rates = sorted(s.matrix[1, 0] for s in res)
        assert np.allclose(rates, [np.pi / 2 - 2 * np.pi, np.pi / 2, np.pi / 2 + 2 * np.pi])
        principal = [s for s in res if s.branch == 0][0]
        assert principal.stability.value == "center"

    def test_every_solution_reproduces_data(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            a = rng.standard_normal((2, 2))
            b = rng.standard_normal(2) + 2.5
            d = linear_data(a, b)
            try:
                res = solve_linear(d, max_winding=1)
            except Exception:
                continue
            for sol in res:
                step = expm(sol.matrix)
                x = sol.initial.copy()
                for j in range(1, d.size):
                    x = step @ x
                    assert np.linalg.norm(x - d.points[j]) <= 1e-7 * np.linalg.norm(d.points[j])

    def test_round_trip_random(self):
        rng = np.random.default_rng(9)
        done = 0
        while done < 100:
            kind = rng.integers(0, 2)
            if kind == 0:  # distinct real eigenvalues
                w = rng.uniform(-2, 2, size=2)
                if abs(w[0] - w[1]) < 1e-2:
                    continue
                v = rng.standard_normal((2, 2))
                if np.linalg.cond(v) > 50:
                    continue
                a = v @ np.diag(w) @ np.linalg.inv(v)
            else:  # complex pair, principal-branch recoverable
                mu = rng.uniform(-2, 2)
                om = rng.uniform(0.05, np.pi - 0.1)
                a = np.array([[mu, -om], [om, mu]])
            b = rng.uniform(0.5, 2.0, size=2)
            d = linear_data(a, b)
            res = solve_linear(d, max_winding=1)
            assert res.exists
            err = min(np.abs(s.matrix - a).max() for s in res)
            assert err <= 1e-8 * max(1.0, np.abs(a).max())
            done += 1

    def test_openness_under_perturbation(self):
        rng = np.random.default_rng(10)
        cases = [
            TimedDataSet.from_points([[1, 1], [2, 3], [4, 9]]),      # unique
            TimedDataSet.from_points([[1, 0], [0, 1], [-1, 0]]),     # exists (complex)
            TimedDataSet.from_points([[1, 1], [-1, 2], [1, 4]]),     # none
        ]
        for d in cases:
            base = solve_linear(d).exists
            scale = np.abs(d.points).max()
            for _ in range(100):
                noise = rng.uniform(-1, 1, size=d.points.shape) * 1e-6 * scale
                dp = TimedDataSet.from_points(d.points + noise)
                assert solve_linear(dp).exists is base


class TestClassifyP2:
    def test_stable_node(self):
        assert classify_linear_p2((1, 1), (0.5, 0.25), (0.25, 0.0625)) is P2Region.STABLE_NODE

    def test_saddle(self):
        assert classify_linear_p2((1, 1), (2, 0.5), (4, 0.25)) is P2Region.SADDLE

    def test_dne(self):
        assert classify_linear_p2((1, 1), (-1, 2), (1, 4)) is P2Region.DNE

    def test_dependent_points_raise(self):
        with pytest.raises(LinearlyDependentData):
            classify_linear_p2((1, 1), (2, 2), (3, 5))

    def test_transform_invariance(self):
        rng = np.random.default_rng(12)
        triples = [
            ((1, 1), (0.5, 0.25), (0.25, 0.0625)),
            ((1, 1), (2, 0.5), (4, 0.25)),
            ((1, 1), (-1, 2), (1, 4)),
            ((1, 0), (0, 1), (-1, 0)),
        ]
        for p0, p1, p2 in triples:
            ref = classify_linear_p2(p0, p1, p2)
            done = 0
            while done < 25:
                s = rng.standard_normal((2, 2))
                if np.linalg.cond(s) >= 100:
                    continue
                got = classify_linear_p2(s @ np.array(p0, float),
                                         s @ np.array(p1, float),
                                         s @ np.array(p2, float))
                assert got is ref
                done += 1


class TestTransformLinear:
    def test_identity(self):
        d = TimedDataSet.from_points([[1, 1], [2, 3], [4, 9]])
        sol = solve_linear(d)[0]
        out = transform_linear(sol, np.eye(2))
        assert np.allclose(out.matrix, sol.matrix)
        assert np.allclose(out.initial, sol.initial)

    def test_similarity_preserves_spectrum(self):
        d = TimedDataSet.from_points([[1, 1], [2, 3], [4, 9]])
        sol = solve_linear(d)[0]
        s = np.array([[1.0, 1.0], [0.0, 1.0]])
        out = transform_linear(sol, s)
        assert np.allclose(np.sort(np.linalg.eigvals(out.matrix).real),
                           [np.log(2.0), np.log(3.0)])
        assert out.stability is sol.stability

    def test_end_to_end_invariance(self):
        rng = np.random.default_rng(13)
        a = np.array([[0.2, -0.5], [0.1, -0.4]])
        b = np.array([1.0, 2.0])
        d = linear_data(a, b)
        sol = solve_linear(d)[0]
        done = 0
        while done < 50:
            s = rng.standard_normal((2, 2))
            if np.linalg.cond(s) >= 100:
                continue
            d2 = TimedDataSet.from_points(d.points @ s.T)
            got = solve_linear(d2)[0]
            expect = s @ sol.matrix @ np.linalg.inv(s)
            assert np.abs(got.matrix - expect).max() <= 1e-6 * max(1.0, np.abs(expect).max())
            done += 1


class TestSolveAffine:
    def test_recovery_from_analytic_forward_solution(self):
        # x(t) = (1 - e^-t, 1 - e^-2t) solves the affine system with
        # A = diag(-1, -2), c = (1, 2), b = (0, 0)
        pts = [(1 - np.exp(-t), 1 - np.exp(-2.0 * t)) for t in range(4)]
        d = TimedDataSet.from_points(pts)
        sols = solve_affine(d)
        assert len(sols) == 1
        assert np.abs(sols[0].matrix - np.diag([-1.0, -2.0])).max() <= 1e-6
        assert np.abs(sols[0].offset - np.array([1.0, 2.0])).max() <= 1e-6
        assert sols[0].regime is RegimeLabel.STABLE_NODE

    def test_straight_line_data_degenerate(self):
        d = TimedDataSet.from_points([[0, 0], [1, 1], [2, 2], [3, 3]])
        with pytest.raises(LinearlyDependentData):
            solve_affine(d)

    def test_negative_spectrum_raises(self):
        # one-step matrix with eigenvalue -1 on the state block
        pts = [[1, 1], [-1, 2], [1, 4], [-1, 8]]
        d = TimedDataSet.from_points(pts)
        with pytest.raises(NoRealSolution):
            solve_affine(d)

    def test_theorem_style_transform(self):
        rng = np.random.default_rng(14)
        a = np.array([[-0.5, 0.2], [0.1, -0.8]])
        c = np.array([0.4, -0.3])
        b = np.array([1.0, 0.5])
        d = affine_data(a, c, b)
        done = 0
        while done < 50:
            s = rng.standard_normal((2, 2))
            if np.linalg.cond(s) >= 100:
                continue
            r = rng.uniform(-2, 2, size=2)
            d2 = TimedDataSet.from_points(d.points @ s.T + r)
            got = solve_affine(d2)[0]
            a_exp = s @ a @ np.linalg.inv(s)
            c_exp = s @ (c - a @ np.linalg.inv(s) @ r)
            assert np.abs(got.matrix - a_exp).max() <= 1e-6 * max(1.0, np.abs(a_exp).max())
            assert np.abs(got.offset - c_exp).max() <= 1e-6 * max(1.0, np.abs(c_exp).max())
            done += 1

    def test_transform_affine_matches_fresh_solve(self):
        a = np.array([[-0.5, 0.2], [0.1, -0.8]])
        c = np.array([0.4, -0.3])
        b = np.array([1.0, 0.5])
        d = affine_data(a, c, b)
        sol = solve_affine(d)[0]
        s = np.array([[1.2, 0.3], [-0.2, 0.9]])
        r = np.array([0.7, -0.4])
        moved = transform_affine(sol, s, r)
        d2 = TimedDataSet.from_points(d.points @ s.T + r)
        fresh = solve_affine(d2)[0]
        assert np.abs(moved.matrix - fresh.matrix).max() <= 1e-8
        assert np.abs(moved.offset - fresh.offset).max() <= 1e-8

    def test_spiral_affine_has_winding_branches(self):
        a = np.array([[0.1, -1.3], [1.3, 0.1]])
        c = np.array([0.5, 0.2])
        d = affine_data(a, c, [2.0, 0.0])
        sols = solve_affine(d, max_winding=1)
        assert len(sols) == 3
        best = min(np.abs(s.matrix - a).max() for s in sols)
        assert best <= 1e-8


class TestAffineRegimes:
    def test_stable_node_with_fixed_point(self):
        sol = AffineSolution(np.diag([-1.0, -2.0]), np.array([1.0, 2.0]),
                             np.zeros(2), 0, RegimeLabel.DEGENERATE)
        assert classify_affine_regime(sol) is RegimeLabel.STABLE_NODE
        xstar = -np.linalg.inv(sol.matrix) @ sol.offset
        assert np.allclose(xstar, [1.0, 1.0])

    def test_parabolic(self):
        sol = AffineSolution(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([0.0, 1.0]),
                             np.zeros(2), 0, RegimeLabel.DEGENERATE)
        assert classify_affine_regime(sol) is RegimeLabel.PARABOLIC

    def test_river_pure_translation(self):
        sol = AffineSolution(np.zeros((2, 2)), np.array([1.0, 0.0]),
                             np.zeros(2), 0, RegimeLabel.DEGENERATE)
        assert classify_affine_regime(sol) is RegimeLabel.RIVER

    def test_river_with_relaxation(self):
        sol = AffineSolution(np.array([[-1.0, 0.0], [0.0, 0.0]]), np.array([0.0, 1.0]),
                             np.zeros(2), 0, RegimeLabel.DEGENERATE)
        assert classify_affine_regime(sol) is RegimeLabel.RIVER
