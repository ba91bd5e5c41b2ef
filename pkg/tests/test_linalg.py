"""Tests for the dense-matrix primitives."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from invode.errors import DegenerateSpectrum, NoRealLog, SingularMatrix, ZeroEigenvalue
from invode.linalg import (
    SpectralClass,
    Spectrum,
    classify_spectrum,
    invert,
    real_log_branches,
    spectrum,
)

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


class TestInvert:
    def test_identity(self):
        assert np.allclose(invert(np.eye(2)), np.eye(2))

    def test_hand_computed_2x2(self):
        # [[1,2],[1,3]] has det 1, adjugate [[3,-2],[-1,1]]
        m = np.array([[1.0, 2.0], [1.0, 3.0]])
        inv = invert(m)
        assert np.allclose(inv, [[3.0, -2.0], [-1.0, 1.0]])
        assert np.allclose(m @ inv, np.eye(2), atol=1e-12)

    def test_rank_one_raises(self):
        with pytest.raises(SingularMatrix):
            invert([[1.0, 2.0], [2.0, 4.0]])

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        done = 0
        while done < 200:
            m = rng.standard_normal((3, 3))
            if np.linalg.cond(m) >= 1e6:
                continue
            back = invert(invert(m))
            assert np.linalg.norm(back - m) <= 1e-9 * np.linalg.norm(m)
            done += 1

    @given(st.lists(st.floats(-10, 10), min_size=4, max_size=4))
    @settings(max_examples=100, deadline=None)
    def test_product_is_identity(self, vals):
        m = np.array(vals).reshape(2, 2)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) < 1e-3 or np.abs(m).max() == 0:
            return
        inv = invert(m)
        cond = np.linalg.cond(m)
        assert np.linalg.norm(m @ inv - np.eye(2)) <= 1e-12 * max(cond, 1.0)


class TestSpectrum:
    def test_diagonal(self):
        s = spectrum(np.diag([2.0, 3.0]))
        assert sorted(v.real for v in s.eigenvalues) == [2.0, 3.0]
        assert s.diagonalizable

    def test_rotation_pair(self):
        # characteristic polynomial lambda^2 + 1 = 0
        s = spectrum(ROT)
        vals = sorted(s.eigenvalues, key=lambda z: z.imag)
        assert vals[0] == pytest.approx(-1j)
        assert vals[1] == pytest.approx(1j)
        assert s.diagonalizable

    def test_jordan_block(self):
        s = spectrum([[1.0, 1.0], [0.0, 1.0]])
        assert s.multiplicities == (2,)
        assert s.eigenvalues[0] == pytest.approx(1.0)
        assert not s.diagonalizable


class TestClassify:
    def test_distinct_positive(self):
        assert classify_spectrum(Spectrum((2.0, 3.0), (1, 1), True)) \
            is SpectralClass.DISTINCT_POSITIVE_REAL

    def test_negative_odd(self):
        assert classify_spectrum(Spectrum((-1.0, 2.0), (1, 1), True)) \
            is SpectralClass.NEGATIVE_ODD_MULTIPLICITY

    def test_complex_pair(self):
        s = Spectrum((0.5 - 0.2j, 0.5 + 0.2j), (1, 1), True)
        assert classify_spectrum(s) is SpectralClass.ALL_POSITIVE_OR_COMPLEX

    def test_negative_even_is_degenerate(self):
        assert classify_spectrum(Spectrum((-1.0,), (2,), True)) is SpectralClass.DEGENERATE

    def test_zero(self):
        assert classify_spectrum(Spectrum((0.0, 1.0), (1, 1), True)) \
            is SpectralClass.ZERO_EIGENVALUE

    def test_similarity_invariance(self):
        rng = np.random.default_rng(11)
        mats = [
            np.diag([2.0, 3.0]),
            ROT.copy(),
            np.array([[1.0, 2.0], [-1.5, 0.5]]),
            np.diag([-1.0, 2.0]),
        ]
        for m in mats:
            ref = classify_spectrum(spectrum(m))
            done = 0
            while done < 25:
                s = rng.standard_normal((2, 2))
                if np.linalg.cond(s) >= 1e3:
                    continue
                conj = s @ m @ np.linalg.inv(s)
                assert classify_spectrum(spectrum(conj)) is ref
                done += 1


class TestRealLog:
    def test_identity_contains_zero(self):
        for mw in (0, 1, 2):
            logs = real_log_branches(np.eye(3), max_winding=mw)
            assert any(np.linalg.norm(L) < 1e-12 for L in logs)

    def test_quarter_rotation_principal(self):
        (L,) = real_log_branches(ROT, max_winding=0)
        assert np.allclose(L, (np.pi / 2) * ROT, atol=1e-12)
        assert np.linalg.norm(expm(L) - ROT) < 1e-12

    def test_winding_count_and_rates(self):
        logs = real_log_branches(ROT, max_winding=1)
        assert len(logs) == 3
        rates = sorted(L[1, 0] for L in logs)
        expected = sorted([np.pi / 2, np.pi / 2 + 2 * np.pi, np.pi / 2 - 2 * np.pi])
        assert np.allclose(rates, expected)

    def test_negative_eigenvalue_rejected(self):
        with pytest.raises(NoRealLog):
            real_log_branches(np.diag([-1.0, 2.0]))

    def test_zero_eigenvalue_rejected(self):
        with pytest.raises(ZeroEigenvalue):
            real_log_branches(np.diag([0.0, 2.0]))

    def test_jordan_rejected(self):
        with pytest.raises(DegenerateSpectrum):
            real_log_branches([[1.0, 1.0], [0.0, 1.0]])

    def test_exp_check_random(self):
        rng = np.random.default_rng(3)
        done = 0
        while done < 100:
            a = rng.standard_normal((2, 2))
            m = expm(a)  # guarantees a real log exists
            try:
                logs = real_log_branches(m, max_winding=1)
            except DegenerateSpectrum:
                continue
            for L in logs:
                assert np.linalg.norm(expm(L) - m) <= 1e-9 * np.linalg.norm(m)
            done += 1

    def test_three_dim_mixed_spectrum(self):
        # one real eigenvalue and one complex pair: 2*mw + 1 branches
        a = np.zeros((3, 3))
        a[0, 0] = 0.3
        a[1:, 1:] = 0.4 * ROT + 0.1 * np.eye(2)
        m = expm(a)
        logs = real_log_branches(m, max_winding=2)
        assert len(logs) == 5
        assert any(np.allclose(L, a, atol=1e-9) for L in logs)
