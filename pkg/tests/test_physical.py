import numpy as np
import pytest

from stokesbif.hodograph import BranchPoint, PeriodGrid, WaveField, discrete_bifurcation
from stokesbif.physical import physical_form_check, surface_rho
from stokesbif.spectra import default_zero_tol, dn_spectrum, full_2d_spectrum


@pytest.fixture(scope="module")
def t0(irrotational):
    ss, curve = irrotational
    grid = PeriodGrid(16, 16, curve.Lambda0)
    H, lam, _ = discrete_bifurcation(ss, curve, grid.n_p)
    bp = BranchPoint(WaveField(np.tile(H, (grid.n_rep, 1)), lam, ss.R, ss.model), 0.0, 0.0, 0.0)
    return ss, curve, grid, bp, default_zero_tol(grid, curve)


def test_rho_at_stream(t0):
    ss, curve, grid, bp, _ = t0
    rho, hp = surface_rho(bp, grid)
    # the discrete stream is exactly linear for zero vorticity
    assert np.allclose(rho, curve.rho0, rtol=1e-10)
    assert np.allclose(hp, 1.0 / ss.kappa, rtol=1e-10)


def test_t0_counts(t0):
    _, _, grid, bp, zt = t0
    c = physical_form_check(bp, grid, 1, zt)
    assert (c.n_negative, c.n_zero) == (1, 1)
    assert c.inertia_consistent
    d = c.to_dict()
    assert d["M"] == 1 and d["rho_min"] == pytest.approx(d["rho_max"])


def test_agrees_along_branch(branch16):
    for bp in branch16.points[::2]:
        for M in (1, 3):
            a = physical_form_check(bp, branch16.grid, M, branch16.zero_tol)
            b = full_2d_spectrum(bp, branch16.grid, M, branch16.zero_tol)
            c = dn_spectrum(bp, branch16.grid, None, M, branch16.zero_tol)
            assert (a.n_negative, a.n_zero) == (b.n_negative, b.n_zero) == (c.n_negative, c.n_zero)


def test_vortical_agreement(vortical_branch):
    for bp in vortical_branch.points[::5]:
        a = physical_form_check(bp, vortical_branch.grid, 3, vortical_branch.zero_tol)
        c = dn_spectrum(bp, vortical_branch.grid, None, 3, vortical_branch.zero_tol)
        assert (a.n_negative, a.n_zero) == (c.n_negative, c.n_zero)
