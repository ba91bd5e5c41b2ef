"""Tests for the integration engine: accuracy, sensitivities, period detection."""

import numpy as np
import pytest

from invode.errors import NotPeriodic, StateBlowup
from invode.lv import LVParams, hamiltonian, lv_field
from invode.odes import (
    VectorField,
    find_period,
    integrate,
    integrate_with_sensitivities,
)


def decay_field():
    return VectorField(
        1, 1,
        lambda x, th: -x,
        lambda x, th: np.array([[-1.0]]),
        lambda x, th: np.array([[0.0]]),
    )


def scaled_growth_field():
    # dx/dt = theta * x, so x(t) = exp(theta t)
    return VectorField(
        1, 1,
        lambda x, th: th[0] * x,
        lambda x, th: np.array([[th[0]]]),
        lambda x, th: np.array([x]),
    )


def harmonic_field():
    return VectorField(
        2, 0,
        lambda x, th: np.array([x[1], -x[0]]),
        lambda x, th: np.array([[0.0, 1.0], [-1.0, 0.0]]),
        lambda x, th: np.zeros((2, 0)),
    )


PP = LVParams(1.0, -1.0, 1.0, -1.0)


def hamiltonian_drift(params, x0, t_end, rtol, atol):
    tr = integrate(lv_field(params), x0, params.as_array(), t_end, rtol=rtol, atol=atol)
    h0 = hamiltonian(params, *x0)
    ts = np.linspace(0, t_end, 2000)
    states = tr.at(ts)
    hs = [hamiltonian(params, x, y) for x, y in states]
    return max(abs(h - h0) for h in hs)


class TestIntegrate:
    def test_scalar_decay(self):
        tr = integrate(decay_field(), [1.0], [0.0], 1.0, rtol=1e-12, atol=1e-12)
        assert tr.states[-1, 0] == pytest.approx(np.exp(-1.0), abs=1e-9)

    def test_lv_equilibrium_is_constant(self):
        tr = integrate(lv_field(PP), [1.0, 1.0], PP.as_array(), 10.0)
        assert np.allclose(tr.states, 1.0, atol=1e-9)

    def test_hamiltonian_drift_tight(self):
        drift = hamiltonian_drift(PP, (2.0, 1.0), 20.0, 1e-12, 1e-12)
        assert drift <= 1e-9

    def test_drift_scales_with_tolerance(self):
        loose = hamiltonian_drift(PP, (2.0, 1.0), 20.0, 1e-8, 1e-8)
        tight = hamiltonian_drift(PP, (2.0, 1.0), 20.0, 1e-12, 1e-12)
        assert tight <= 1e-2 * loose

    def test_tolerance_halving_never_hurts(self):
        errs = []
        for tol in (1e-6, 5e-7):
            tr = integrate(decay_field(), [1.0], [0.0], 1.0, rtol=tol, atol=tol)
            errs.append(abs(tr.states[-1, 0] - np.exp(-1.0)))
        assert errs[1] <= 2.0 * errs[0] + 1e-15

    def test_blowup_detected(self):
        # cooperative growth escalates superexponentially
        boom = LVParams(2.0, 2.0, 2.0, 2.0)
        with pytest.raises(StateBlowup):
            integrate(lv_field(boom), [1.0, 1.0], boom.as_array(), 10.0)

    def test_dense_output_queryable(self):
        tr = integrate(decay_field(), [1.0], [0.0], 2.0)
        assert tr.at(0.5)[0] == pytest.approx(np.exp(-0.5), abs=1e-8)


class TestSensitivities:
    def test_scalar_growth_at_zero(self):
        # d/dtheta exp(theta t) = t exp(theta t) -> 1 at t = 1, theta = 0
        bundle = integrate_with_sensitivities(scaled_growth_field(), [1.0], [0.0], [1.0])
        assert bundle.sensitivities[0, 0, 0] == pytest.approx(1.0, abs=1e-9)

    def test_zero_at_time_zero(self):
        bundle = integrate_with_sensitivities(lv_field(PP), [2.0, 1.0], PP.as_array(), [0.0])
        assert np.all(bundle.sensitivities[0] == 0.0)

    def test_lv_matches_finite_differences(self):
        self._check_fd(PP, np.array([2.0, 1.0]), 1.0, 1e-5)

    def test_fd_property_random_periodic_draws(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            mags = 0.5 + rng.random(4)
            signs = [(1, -1, 1, -1), (-1, 1, -1, 1)][rng.integers(0, 2)]
            params = LVParams(*(m * s for m, s in zip(mags, signs)))
            x0 = 0.5 + 2 * rng.random(2)
            t = 0.5 + 1.5 * rng.random()
            self._check_fd(params, x0, t, 1e-4)

    @staticmethod
    def _check_fd(params, x0, t, rel):
        field = lv_field(params)
        th = params.as_array()
        bundle = integrate_with_sensitivities(field, x0, th, [t], rtol=1e-12, atol=1e-12)
        sens = bundle.sensitivities[0]
        h = 1e-6
        fd = np.zeros_like(sens)
        for j in range(4):
            for sgn, w in ((1, 1.0), (-1, -1.0)):
                thp = th.copy()
                thp[j] += sgn * h
                tr = integrate(field, x0, thp, t, rtol=1e-12, atol=1e-12)
                fd[:, j] += w * tr.states[-1] / (2 * h)
        scale = max(np.abs(sens).max(), 1.0)
        assert np.abs(sens - fd).max() <= rel * scale

    def test_kernel_and_generic_paths_agree(self):
        field = lv_field(PP)
        th = PP.as_array()
        fast = integrate_with_sensitivities(field, [2.0, 1.0], th, [1.0, 2.0],
                                            rtol=1e-12, atol=1e-12)
        slow_field = VectorField(2, 4, field.f, field.jac_x, field.jac_p)
        slow = integrate_with_sensitivities(slow_field, [2.0, 1.0], th, [1.0, 2.0],
                                            rtol=1e-12, atol=1e-12)
        assert np.allclose(fast.states, slow.states, atol=1e-9)
        assert np.allclose(fast.sensitivities, slow.sensitivities, atol=1e-7)


class TestPeriod:
    def test_harmonic_oscillator(self):
        T = find_period(harmonic_field(), [1.0, 0.0], [])
        assert T == pytest.approx(2 * np.pi, abs=1e-8)

    def test_equilibrium_not_periodic(self):
        with pytest.raises(NotPeriodic):
            find_period(lv_field(PP), [1.0, 1.0], PP.as_array())

    def test_lv_orbit_closes(self):
        field = lv_field(PP)
        th = PP.as_array()
        T = find_period(field, [2.0, 1.0], th, rtol=1e-12, atol=1e-12)
        tr = integrate(field, [2.0, 1.0], th, T, rtol=1e-12, atol=1e-12)
        x0 = np.array([2.0, 1.0])
        assert np.linalg.norm(tr.at(T) - x0) <= 1e-8 * np.linalg.norm(x0)
        assert np.linalg.norm(tr.at(T / 2) - x0) > 1e-2
