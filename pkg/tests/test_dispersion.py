import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stokesbif.dispersion import dispersion_root, gamma_profile, mu_t0, rho0, sigma
from stokesbif.errors import PreconditionError
from stokesbif.vorticity import VorticityModel, stream_solution

# frozen irrotational oracle at R = 1.75 (closed form s tau coth(tau d) = 1/s)
TAU_STAR = 2.3648199248630655
LAMBDA0 = 2.6569402774054405


@pytest.fixture(scope="module")
def ss():
    return stream_solution(VorticityModel((0.0,)), 1.75)


@pytest.fixture(scope="module")
def curve(ss):
    return dispersion_root(ss)


@pytest.fixture(scope="module")
def ss_vort():
    return stream_solution(VorticityModel((0.5, -1.0)), 1.75)


def closed_sigma(s, tau):
    d = 1.0 / s
    if tau == 0.0:
        return s * s - 1.0 / s
    return s * tau / math.tanh(tau * d) - 1.0 / s


def test_gamma_profile_irrotational(ss):
    g, gp = gamma_profile(ss, 0.0)
    assert gp == pytest.approx(1.0 / ss.d, rel=1e-11)
    assert np.allclose(g, ss.pgrid, atol=1e-11)  # y / d with y = p d
    g, gp = gamma_profile(ss, 1.0)
    assert gp == pytest.approx(1.0 / math.tanh(ss.d), rel=1e-11)
    y = ss.H
    assert np.allclose(g, np.sinh(y) / np.sinh(ss.d), atol=1e-11)
    assert g[-1] == 1.0


def test_sigma_examples(ss, curve):
    assert sigma(ss, 0.0) == pytest.approx(ss.s**2 - 1.0 / ss.s, rel=1e-11)
    half = curve.tau_star / 2
    assert sigma(ss, half) == pytest.approx(closed_sigma(ss.s, half), rel=1e-11)
    assert sigma(ss, -0.8) == sigma(ss, 0.8)


def test_root_and_period(ss, curve):
    assert curve.tau_star == pytest.approx(TAU_STAR, rel=1e-10)
    assert curve.Lambda0 == pytest.approx(LAMBDA0, rel=1e-10)
    assert abs(sigma(ss, curve.tau_star)) < 1e-9
    assert curve.rho0 == pytest.approx(rho0(ss))


def test_mu_t0(ss, curve):
    assert abs(mu_t0(ss, curve, curve.tau_star, 0)) < 1e-9
    assert abs(mu_t0(ss, curve, 0.0, 1)) < 1e-9
    assert abs(mu_t0(ss, curve, 0.0, -1)) < 1e-9
    half = curve.tau_star / 2
    assert mu_t0(ss, curve, half, 0) == pytest.approx(ss.s * closed_sigma(ss.s, half), rel=1e-10)


def test_asymptotic_slope(ss, curve):
    t = 10 * curve.tau_star
    assert abs(sigma(ss, t) - ss.kappa * t) < 2.0


def test_supercritical_rejected(ss):
    # the supercritical root s > sc has sigma(0) = s^2 - 1/s > 0
    sup = replace(ss, s=1.2, kappa=1.2)
    with pytest.raises(PreconditionError):
        dispersion_root(sup)


def test_vortical_curve(ss_vort):
    c = dispersion_root(ss_vort)
    assert c.sigma0 < 0 and abs(sigma(ss_vort, c.tau_star)) < 1e-9
    assert np.all(np.diff(c.sigma_vals) > 0)


@settings(max_examples=20, deadline=None)
@given(tau=st.floats(0.0, 5.0))
def test_two_forms_agree_and_even(ss_vort, tau):
    # sigma raises if the two forms differ by more than 1e-10
    assert sigma(ss_vort, tau) == sigma(ss_vort, -tau)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.0, 4.0), b=st.floats(0.0, 4.0))
def test_sigma_increasing(ss_vort, a, b):
    if abs(a - b) < 1e-3:
        return
    lo, hi = sorted((a, b))
    assert sigma(ss_vort, lo) < sigma(ss_vort, hi)


@settings(max_examples=20, deadline=None)
@given(frac=st.floats(0.01, 0.99), n=st.integers(-3, 3))
def test_mu_sign_rule(ss, curve, frac, n):
    tau = frac * curve.tau_star
    negative = abs(tau + n * curve.tau_star) < curve.tau_star
    assert (mu_t0(ss, curve, tau, n) < 0) == negative


def test_mu_simple(ss, curve):
    tau = 0.3 * curve.tau_star
    vals = np.sort([mu_t0(ss, curve, tau, n) for n in range(-5, 6)])
    assert np.min(np.diff(vals)) > 1e-6


def test_gamma_positivity_warning(ss):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gamma_profile(ss, 3.0)
