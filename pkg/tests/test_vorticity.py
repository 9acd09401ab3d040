import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from stokesbif.errors import DomainError, PreconditionError
from stokesbif.vorticity import (
    VorticityModel,
    bernoulli_of_s,
    bernoulli_slope,
    critical_constants,
    depth_of_s,
    pressure_integral,
    solve_for_s,
    stream_solution,
)

ZERO = VorticityModel((0.0,))
# frozen from the cubic s^3 - 3.5 s + 2 = 0 (numpy.roots, independent of the package)
S_SUB = 0.6498320515110046
S_SUPER = 1.4592612996866041

coeff = st.floats(-0.6, 0.6, allow_nan=False, allow_infinity=False)


def test_pressure_integral_examples():
    assert pressure_integral(ZERO, 0.7) == 0.0
    assert pressure_integral(VorticityModel((0.3,)), 0.4) == pytest.approx(0.12, abs=1e-15)
    assert pressure_integral(VorticityModel((0.0, 1.0)), 1.0) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(DomainError):
        pressure_integral(ZERO, 1.2)


def test_depth_examples():
    assert depth_of_s(ZERO, 2.0) == pytest.approx(0.5, rel=1e-14)
    assert depth_of_s(ZERO, 0.6498) == pytest.approx(1.0 / 0.6498, rel=1e-12)
    b = 0.1
    assert depth_of_s(VorticityModel((b,)), 1.0) == pytest.approx((1.0 - math.sqrt(1.0 - 2 * b)) / b, rel=1e-11)
    with pytest.raises(DomainError):
        depth_of_s(VorticityModel((0.5,)), 0.9)


def test_bernoulli_examples():
    assert bernoulli_of_s(ZERO, 1.0) == pytest.approx(1.5, rel=1e-14)
    assert bernoulli_of_s(ZERO, 2.0) == pytest.approx(2.5, rel=1e-14)
    d = (1.0 - math.sqrt(0.8)) / 0.1
    assert bernoulli_of_s(VorticityModel((0.1,)), 1.0) == pytest.approx(0.5 + d - 0.1, rel=1e-11)


def test_critical_constants_irrotational():
    c = critical_constants(ZERO)
    assert c.s0 == 0.0
    assert c.sc == pytest.approx(1.0, abs=1e-12)
    assert c.Rc == pytest.approx(1.5, abs=1e-13)
    assert c.R0_unbounded
    assert c.to_dict()["R0"] == "unbounded"


def test_critical_constants_against_minimisation():
    # independent oracle: bounded scalar minimisation of s^2/2 + d(s) - wp(1)
    for m in (VorticityModel((0.1,)), VorticityModel((0.5, -1.0))):
        c = critical_constants(m)

        def R(s):
            d = integrate.quad(lambda t: (s * s - 2 * m.wp(t)) ** -0.5, 0, 1, epsabs=1e-13, epsrel=1e-13)[0]
            return 0.5 * s * s + d - m.wp(1.0)

        res = optimize.minimize_scalar(R, bounds=(c.s0 + 1e-3, 3.0), method="bounded", options={"xatol": 1e-10})
        assert c.sc == pytest.approx(res.x, abs=1e-6)
        assert c.Rc == pytest.approx(res.fun, abs=1e-12)
    assert critical_constants(VorticityModel((0.1,))).Rc < bernoulli_of_s(VorticityModel((0.1,)), 1.1)


def test_critical_constants_affine_frozen():
    c = critical_constants(VorticityModel((0.5, -1.0)))
    assert c.sc == pytest.approx(1.08315637, abs=2e-8)
    assert c.Rc == pytest.approx(1.58533433, abs=2e-8)


def test_R0_finite_cases():
    # constant vorticity: wp maximal at an endpoint with omega != 0
    assert critical_constants(VorticityModel((1.0,))).R0 == pytest.approx(math.sqrt(2.0), rel=1e-9)
    assert critical_constants(VorticityModel((-1.0,))).R0 == pytest.approx(1.0 + math.sqrt(2.0), rel=1e-9)


def test_solve_for_s_irrotational():
    lo, hi = solve_for_s(ZERO, 1.75)
    assert lo == pytest.approx(S_SUB, rel=1e-13)
    assert hi == pytest.approx(S_SUPER, rel=1e-13)
    assert 2.0 in [pytest.approx(x, rel=1e-12) for x in solve_for_s(ZERO, 2.5)]
    with pytest.raises(PreconditionError, match="R below critical"):
        solve_for_s(ZERO, 1.5)


def test_stream_solution_irrotational():
    ss = stream_solution(ZERO, 1.75)
    p = ss.pgrid
    assert ss.H[0] == 0.0
    assert np.max(np.abs(ss.H - p / S_SUB)) < 1e-10
    assert ss.kappa == pytest.approx(S_SUB, rel=1e-12)
    assert ss.d == pytest.approx(1.0 / S_SUB, rel=1e-12)
    assert ss.froude_integral == pytest.approx(S_SUB**-3, rel=1e-10)
    assert ss.bernoulli_residual() < 1e-12


def test_stream_solution_vortical_invariants():
    m = VorticityModel((0.5, -1.0))
    ss = stream_solution(m, 1.75)
    assert ss.H[0] == 0.0 and np.all(ss.Hp > 0)
    assert ss.H[-1] == pytest.approx(depth_of_s(m, ss.s), rel=1e-13)
    assert np.allclose(ss.Hp, 1.0 / np.sqrt(ss.s**2 - 2 * m.wp(ss.pgrid)), rtol=1e-14)
    # H_pp = H_p^3 omega(p), checked with second differences
    p, H = ss.pgrid, ss.H
    h = p[1] - p[0]
    Hpp = (H[2:] - 2 * H[1:-1] + H[:-2]) / h**2
    assert np.max(np.abs(Hpp - ss.Hp[1:-1] ** 3 * m.omega(p[1:-1]))) < 1e-3


@settings(max_examples=25, deadline=None)
@given(c0=coeff, c1=coeff, tau=st.floats(0, 1))
def test_pressure_integral_matches_quadrature(c0, c1, tau):
    m = VorticityModel((c0, c1))
    ref = integrate.quad(m.omega, 0.0, tau)[0]
    assert pressure_integral(m, tau) == pytest.approx(ref, abs=1e-14)


@settings(max_examples=15, deadline=None)
@given(c0=coeff, c1=coeff, dR=st.floats(0.05, 1.0))
def test_bernoulli_roots_straddle_sc(c0, c1, dR):
    m = VorticityModel((c0, c1))
    c = critical_constants(m)
    R = c.Rc + dR
    if R >= c.R0:
        return
    lo, hi = solve_for_s(m, R, c)
    assert c.s0 < lo < c.sc < hi
    assert bernoulli_of_s(m, lo) == pytest.approx(R, abs=1e-11)
    assert bernoulli_of_s(m, hi) == pytest.approx(R, abs=1e-11)
    # unimodal: decreasing before sc, increasing after
    assert bernoulli_slope(m, lo) < 0.0 < bernoulli_slope(m, hi)
