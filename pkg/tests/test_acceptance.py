"""Acceptance criteria, one test each.

Run alone with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""
import json
import math
import time
import warnings

import numpy as np
from scipy import optimize

from stokesbif import wedge
from stokesbif.cli import RunDir, cmd_pipeline
from stokesbif.config import RunConfig
from stokesbif.dispersion import dispersion_root, sigma
from stokesbif.hodograph import (
    BranchPoint,
    PeriodGrid,
    WaveField,
    assemble_jacobian,
    discrete_bifurcation,
    field_from_vector,
    field_vector,
    potential,
    residual,
    symmetry_defect,
)
from stokesbif.physical import physical_form_check
from stokesbif.spectra import dn_spectrum, full_2d_spectrum, translation_defect, translation_floor
from stokesbif.vorticity import VorticityModel, stream_solution

R = 1.75


def _note(record_property, text):
    record_property("detail", text)
    print(text)


# ------------------------------------------------------------------ 1


def test_criterion_01_irrotational_oracles(record_property):
    t0 = time.perf_counter()
    ss = stream_solution(VorticityModel((0.0,)), R)
    curve = dispersion_root(ss)
    elapsed = time.perf_counter() - t0
    # closed forms for a uniform current: s^2/2 + 1/s = R, d = 1/s, kappa = s,
    # sigma(tau) = s tau coth(tau / s) - 1 / s
    roots = np.roots([1.0, 0.0, -2.0 * R, 2.0])
    real = np.sort(roots[np.abs(roots.imag) < 1e-12].real)
    s_sub = real[real > 0][0]
    d = 1.0 / s_sub
    tau_star = optimize.brentq(lambda t: s_sub * t / math.tanh(t * d) - 1.0 / s_sub, 1e-6, 50.0, xtol=1e-15, rtol=1e-15)
    checks = {
        "s_sub": (ss.s, s_sub),
        "d": (ss.d, d),
        "kappa": (ss.kappa, s_sub),
        "tau_star": (curve.tau_star, tau_star),
        "Lambda0": (curve.Lambda0, 2.0 * math.pi / tau_star),
    }
    rel = {k: abs(a - b) / abs(b) for k, (a, b) in checks.items()}
    worst = max(rel.values())
    _note(record_property, f"max rel err {worst:.2e} (tol 1e-8), runtime {elapsed:.2f}s (limit 1s)")
    assert worst <= 1e-8, rel
    assert elapsed < 1.0


# ------------------------------------------------------------------ 2


def _t0_errors(ss, curve, n):
    g = PeriodGrid(n, n, curve.Lambda0)
    H, lam, _ = discrete_bifurcation(ss, curve, n)
    bp = BranchPoint(WaveField(np.tile(H, (g.n_rep, 1)), lam, ss.R, ss.model), 0.0, 0.0, 0.0)
    worst = 0.0
    for tau in (0.0, curve.tau_star / 7, curve.tau_star / 3, curve.tau_star / 2):
        got = dn_spectrum(bp, g, tau).eigs[:7]
        pred = np.sort([ss.kappa * sigma(ss, tau + k * curve.tau_star) for k in range(-3, 4)])
        scale = np.maximum(np.abs(pred), ss.kappa * abs(curve.sigma0))
        worst = max(worst, float(np.max(np.abs(got - pred) / scale)))
    return worst


def test_criterion_02_t0_spectrum_exactness(record_property, irrotational):
    ss, curve = irrotational
    t0 = time.perf_counter()
    e32 = _t0_errors(ss, curve, 32)
    e64 = _t0_errors(ss, curve, 64)
    elapsed = time.perf_counter() - t0
    ratio = e32 / e64
    _note(record_property, f"rel err 64: {e64:.2e} (tol 5e-3), 32->64 ratio {ratio:.2f} (~4), {elapsed:.1f}s (limit 30s)")
    assert e64 <= 5e-3
    assert 3.0 <= ratio <= 5.5
    assert elapsed < 30.0


# ------------------------------------------------------------------ 3


def _smooth(grid, tau, a, b):
    q = grid.q_rep[:, None]
    p = grid.p[None, :]
    return a * np.cos(tau * q) * p * (1.0 - 0.5 * p) + b * np.cos(2.0 * tau * q) * p**2 + 0.3 * a * p


def _levels(h):
    # level-major unknown vector, bottom row excluded
    return h[:, 1:].T.reshape(-1)


def test_criterion_03_variational_structure(record_property, branch64):
    g = branch64.grid
    tau = branch64.curve.tau_star
    picks = [branch64.points[i] for i in np.linspace(0, len(branch64.points) - 1, 5).astype(int)]
    worst_excess, worst_sym = 0.0, 0.0
    eps = 1e-5
    for bp in picks:
        # evaluate away from the exact solution so the pairing is not ~0
        base = field_from_vector(field_vector(bp.field) + 0.01 * _levels(_smooth(g, tau, 1.0, 0.5)), bp.field)
        x = field_vector(base)
        w = _levels(_smooth(g, tau, -0.7, 1.3))

        def fd(e):
            return (potential(field_from_vector(x + e * w, base), g) - potential(field_from_vector(x - e * w, base), g)) / (2 * e)

        pair = float(residual(base, g) @ w)
        f1, f2 = fd(eps), fd(2 * eps)
        rel = abs(f1 - pair) / abs(pair)
        # f(2e) - f(e) = 3 C e^2 estimates the truncation term at e
        trunc = abs(f2 - f1) / 3.0 / abs(pair)
        worst_excess = max(worst_excess, rel - trunc)
        worst_sym = max(worst_sym, symmetry_defect(assemble_jacobian(bp.field, g)))
    _note(record_property, f"FD rel err minus O(eps^2) estimate {worst_excess:.2e} (tol 1e-6), symmetry {worst_sym:.1e} (tol 1e-8)")
    assert worst_excess <= 1e-6
    assert worst_sym <= 1e-8


# ------------------------------------------------------------------ 4


def test_criterion_04_formulation_equivalence(record_property, branch64):
    g, zt = branch64.grid, branch64.zero_tol
    picks = branch64.points[::4]
    assert len(picks) >= 10
    mismatches = []
    for M in (1, 3):
        for bp in picks:
            a = dn_spectrum(bp, g, None, M, zt)
            b = full_2d_spectrum(bp, g, M, zt)
            c = physical_form_check(bp, g, M, zt)
            counts = {(a.n_negative, a.n_zero), (b.n_negative, b.n_zero), (c.n_negative, c.n_zero)}
            if len(counts) != 1:
                mismatches.append((M, bp.index, counts))
    _note(record_property, f"{len(picks)} points x M in (1, 3) x 3 routes, mismatches: {len(mismatches)}")
    assert not mismatches, mismatches


# ------------------------------------------------------------------ 5


def test_criterion_05_translation_mode(record_property, branch32, branch64):
    d64 = [translation_defect(bp, branch64.grid) for bp in branch64.points]
    worst = max(d64)
    # refinement: same point index along both branches (same amplitude schedule)
    rows = []
    ok = True
    for i in (10, 20, len(branch64.points) - 1):
        a = translation_defect(branch32.points[i], branch32.grid)
        b = d64[i]
        floor = translation_floor(branch64.points[i], branch64.grid)
        rows.append(f"i={i}: {a:.1e}->{b:.1e} (roundoff floor {floor:.1e})")
        ok &= b <= max(a, floor)
    _note(record_property, f"max defect at 64: {worst:.1e} (tol 1e-3); " + "; ".join(rows))
    assert worst <= 1e-3
    assert ok


# ------------------------------------------------------------------ 6


def test_criterion_06_wedge_constants(record_property):
    k = wedge.kappa_root()
    res = abs(wedge.kappa_equation(k))
    lg = wedge.log_gamma(1.0 + 1j * k)
    modulus = abs(math.exp(2.0 * lg.real) - math.pi * k / math.sinh(math.pi * k))
    t1 = wedge.tau1_root()
    m = wedge.WedgeModel(k)
    taus = wedge.ladder_tau(m, np.arange(-2, 5))
    ratio_err = float(np.max(np.abs(taus[1:] / taus[:-1] / math.exp(math.pi / k) - 1.0)))
    _note(record_property, f"kappa={k:.12f} res {res:.1e}; |Gamma|^2 err {modulus:.1e}; tau1={t1:.6f}; ladder ratio err {ratio_err:.1e}")
    assert res < 1e-12 and 1.05 < k < 1.10
    assert modulus < 1e-10
    assert 1.79 < t1 < 1.81
    assert ratio_err < 1e-14


# ------------------------------------------------------------------ 7


def test_criterion_07_bessel_accuracy(record_property):
    k = wedge.kappa_root()
    z = 1e-3
    small = abs(wedge.bessel_K_imag(k, z) - wedge.bessel_K_small(k, z))
    large = abs(wedge.bessel_K_imag(k, 20.0) / wedge.bessel_K_large(20.0) - 1.0)
    _note(record_property, f"small-z abs err {small:.1e} (tol 1e-5); large-z rel err {large:.2%} (tol 5%)")
    assert small < 1e-5
    assert large < 0.05


# ------------------------------------------------------------------ 8


def test_criterion_08_corner_form(record_property):
    m = wedge.WedgeModel.default()
    counts, dims, preds = [], [], []
    for eps in (1e-3, 1e-4, 1e-5, 1e-6):
        r = wedge.corner_form_demo(m, eps)
        counts.append(r.n_negative)
        dims.append(r.window_dim)
        preds.append(math.log(1.0 / eps) * m.kappa / math.pi)
    _note(record_property, f"n_negative {counts}, window dim {dims}, predicted {[round(p, 2) for p in preds]}")
    assert counts[-1] >= 3
    assert all(b >= a for a, b in zip(counts, counts[1:]))
    assert all(abs(d - p) <= 1.0 for d, p in zip(dims, preds))


# ------------------------------------------------------------------ 9


def test_criterion_09_detection(record_property, tmp_path):
    cfg = RunConfig.from_mapping(
        {"grid": {"n_q": 64, "n_p": 64}, "continuation": {"n_steps": 40}, "spectra": {"M": [3], "routes": ["dn"]}}
    )
    t0 = time.perf_counter()
    rep = cmd_pipeline(cfg, RunDir(tmp_path / "run"))
    elapsed = time.perf_counter() - t0
    harm = rep["events"]["harmonic"]
    sub = rep["events"]["subharmonic"]
    s3 = rep["spectra"]["M=3"]
    margin, observed = s3["t0_margin_predicted"], s3["t0_min_abs_subharmonic_eig"]
    amp_frac = rep["branch"]["amplitude_max"] / (rep["stream"]["R"] - rep["stream"]["d"])
    _note(
        record_property,
        f"harmonic {[(e['index_lo'], e['index_hi'], e['crossing']) for e in harm]}, subharmonic {len(sub)}, "
        f"t=0 k!=0 min|eig| {observed:.5f} vs predicted {margin:.5f}, amplitude {amp_frac:.2f} of gap, {elapsed:.0f}s (limit 600s)",
    )
    assert rep["branch"]["n_points"] == 41
    assert amp_frac <= 0.3 + 1e-12
    assert len(harm) == 1 and harm[0]["index_lo"] == 0 and abs(harm[0]["crossing"]) == 1
    assert harm[0]["kind"] == "harmonic" and harm[0]["k"] == 0
    assert sub == []
    assert abs(observed - margin) <= 1e-3 * margin and observed > rep["zero_tol"]
    assert rep["k0_matches_M1"]
    assert elapsed < 600.0


# ------------------------------------------------------------------ 10


def _strip(report_path):
    rep = json.loads(report_path.read_text())
    rep["provenance"].pop("timestamps")
    return rep


def test_criterion_10_determinism(record_property, tmp_path):
    cfg = RunConfig.from_mapping(
        {
            "grid": {"n_q": 16, "n_p": 16},
            "continuation": {"n_steps": 6},
            "spectra": {"M": [3, 5], "routes": ["dn", "2d", "physical"], "stride": 2},
        }
    )
    a, b = RunDir(tmp_path / "a"), RunDir(tmp_path / "b")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cmd_pipeline(cfg, a)
        cmd_pipeline(cfg, b, threads=2)
    files = sorted(p.name for p in a.path.iterdir())
    differing = [f for f in files if f != "report.json" and (a.path / f).read_bytes() != (b.path / f).read_bytes()]
    same_report = _strip(a.path / "report.json") == _strip(b.path / "report.json")
    _note(record_property, f"{len(files)} files, byte-different (excluding report): {differing}, report equal modulo timestamps: {same_report}")
    assert not differing
    assert same_report
