"""Vorticity functions, uniform stream solutions and critical Bernoulli constants.

The vorticity is a polynomial in the stream-function value ``p`` on ``[0, 1]``
so that the pressure integral ``wp(tau) = int_0^tau omega`` is exact.
A uniform stream is parametrised by its bottom slip ``s = U'(0)``; its depth is

    d(s) = int_0^1 dtau / sqrt(s^2 - 2 wp(tau))

and the Bernoulli constant is ``R(s) = s^2/2 + d(s) - wp(1)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, optimize

from .errors import DomainError, NumericalError, PreconditionError

log = logging.getLogger(__name__)

QUAD_TOL = 1e-12


@dataclass(frozen=True)
class VorticityModel:
    """Polynomial vorticity ``omega(p) = sum_k coeffs[k] p^k``."""

    coeffs: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        c = tuple(float(x) for x in np.atleast_1d(self.coeffs))
        if not c:
            c = (0.0,)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def poly(self) -> Polynomial:
        return Polynomial(self.coeffs)

    def omega(self, p):
        return self.poly(p)

    def domega(self, p):
        return self.poly.deriv()(p)

    def wp(self, tau):
        """Exact antiderivative of omega with ``wp(0) = 0``."""
        return self.poly.integ(lbnd=0.0)(tau)

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.coeffs)

    def _critical_points(self) -> np.ndarray:
        pts = [0.0, 1.0]
        if not self.is_zero and self.degree >= 1:
            for r in self.poly.roots():
                if abs(r.imag) < 1e-12 and 0.0 < r.real < 1.0:
                    pts.append(float(r.real))
        return np.array(sorted(pts))

    def max_wp(self) -> tuple[float, np.ndarray]:
        """Maximum of ``wp`` on [0, 1] and all points where it is attained."""
        pts = self._critical_points()
        vals = self.wp(pts)
        vmax = float(np.max(vals))
        return vmax, pts[np.abs(vals - vmax) <= 1e-14 * max(1.0, abs(vmax))]

    @property
    def omega0(self) -> float:
        grid = np.linspace(0.0, 1.0, 2001)
        return float(np.max(self.omega(grid)))

    @property
    def omega1(self) -> float:
        grid = np.linspace(0.0, 1.0, 2001)
        return float(np.max(np.abs(self.omega(grid)) + np.abs(self.domega(grid))))

    def to_dict(self) -> dict:
        return {"omega": list(self.coeffs)}


def pressure_integral(model: VorticityModel, tau: float) -> float:
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau={tau} outside [0, 1]")
    return float(model.wp(tau))


def slip_threshold(model: VorticityModel) -> float:
    """Smallest admissible slip: ``s0 = sqrt(2 max wp)``."""
    vmax, _ = model.max_wp()
    return math.sqrt(2.0 * max(vmax, 0.0))


def depth_diverges_at_threshold(model: VorticityModel) -> bool:
    """True when ``d(s0)`` is infinite.

    The integrand blows up like ``|tau - tau_m|^{-1}`` exactly when omega
    vanishes at a maximiser ``tau_m`` of ``wp``; otherwise the singularity is
    of inverse square-root type and integrable.
    """
    _, argmax = model.max_wp()
    scale = max(1.0, max(abs(c) for c in model.coeffs))
    return bool(np.any(np.abs(model.omega(argmax)) <= 1e-13 * scale))


def _depth_integrand(model, s):
    s2 = s * s

    def f(tau):
        return 1.0 / math.sqrt(s2 - 2.0 * model.wp(tau))

    return f


def depth_of_s(model: VorticityModel, s: float) -> float:
    vmax, argmax = model.max_wp()
    if s <= 0.0 or s * s <= 2.0 * vmax:
        raise DomainError(f"s={s} does not exceed the threshold s0={slip_threshold(model)}: singular depth integrand")
    inner = [float(t) for t in argmax if 0.0 < t < 1.0]
    val, _ = integrate.quad(
        _depth_integrand(model, s), 0.0, 1.0, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400, points=inner or None
    )
    return float(val)


def _depth_at_threshold(model: VorticityModel) -> float:
    if depth_diverges_at_threshold(model):
        return math.inf
    s0 = slip_threshold(model)
    s2 = s0 * s0

    def f(tau):
        return 1.0 / math.sqrt(max(s2 - 2.0 * model.wp(tau), 1e-300))

    val, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-11, epsrel=1e-11, limit=400)
    return float(val)


def bernoulli_of_s(model: VorticityModel, s: float) -> float:
    return 0.5 * s * s + depth_of_s(model, s) - float(model.wp(1.0))


def bernoulli_slope(model: VorticityModel, s: float) -> float:
    """Derivative ``dR/ds = s (1 - int_0^1 (s^2 - 2 wp)^{-3/2} dp)``."""
    vmax, argmax = model.max_wp()
    if s <= 0.0 or s * s <= 2.0 * vmax:
        raise DomainError(f"s={s} not above the slip threshold")
    inner = [float(t) for t in argmax if 0.0 < t < 1.0]
    val, _ = integrate.quad(
        lambda t: (s * s - 2.0 * model.wp(t)) ** -1.5, 0.0, 1.0, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400,
        points=inner or None,
    )
    return s * (1.0 - val)


@dataclass(frozen=True)
class CriticalConstants:
    s0: float
    sc: float
    Rc: float
    R0: float  # math.inf when d(s0) diverges

    @property
    def R0_unbounded(self) -> bool:
        return math.isinf(self.R0)

    def to_dict(self) -> dict:
        return {
            "s0": self.s0,
            "sc": self.sc,
            "Rc": self.Rc,
            "R0": "unbounded" if self.R0_unbounded else self.R0,
        }


def _froude_excess(model: VorticityModel, s: float) -> float:
    """``F(s) - 1``, positive below the critical slip."""
    return -bernoulli_slope(model, s) / s


def critical_constants(model: VorticityModel) -> CriticalConstants:
    """Threshold slip, minimiser ``sc`` of R(s) and the limits ``Rc``, ``R0``.

    ``dR/ds = s (1 - F(s))`` with ``F(s) = int (s^2 - 2 wp)^{-3/2}`` strictly
    decreasing from infinity to zero, so R(s) is unimodal and ``sc`` is the
    unique root of ``F(s) = 1``.
    """
    s0 = slip_threshold(model)
    R0 = _depth_at_threshold(model)
    if not math.isinf(R0):
        R0 = 0.5 * s0 * s0 + R0 - float(model.wp(1.0))

    def g(s):
        return _froude_excess(model, s)

    hi = s0 + 1.0
    while g(hi) > 0.0:
        hi = s0 + 2.0 * (hi - s0)
    delta = hi - s0
    lo = hi
    for _ in range(200):
        delta *= 0.5
        lo = s0 + delta
        if g(lo) > 0.0:
            break
    else:
        raise NumericalError("could not bracket the critical slip")
    sc = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    Rc = bernoulli_of_s(model, sc)
    return CriticalConstants(s0=s0, sc=float(sc), Rc=float(Rc), R0=float(R0))


def solve_for_s(model: VorticityModel, R: float, crit: CriticalConstants | None = None) -> tuple[float, float]:
    """Both roots of ``bernoulli_of_s(s) = R``; the first is subcritical."""
    crit = crit or critical_constants(model)
    if not R > crit.Rc:
        raise PreconditionError(f"R below critical: R={R} <= Rc={crit.Rc}")
    if not R < crit.R0:
        raise PreconditionError(f"R={R} >= R0={crit.R0}: no two roots")

    def g(s):
        return bernoulli_of_s(model, s) - R

    # lower bracket: approach s0 until the objective exceeds R
    delta = crit.sc - crit.s0
    lo = crit.s0 + delta
    for _ in range(200):
        delta *= 0.5
        lo = crit.s0 + delta
        if g(lo) > 0.0:
            break
    else:
        raise NumericalError("could not bracket the subcritical root")
    s_sub = optimize.brentq(g, lo, crit.sc, xtol=1e-15, rtol=1e-15, maxiter=500)
    hi = math.sqrt(2.0 * (R + float(model.wp(1.0))) + 1.0) + 1.0
    while g(hi) <= 0.0:
        hi *= 2.0
    s_super = optimize.brentq(g, crit.sc, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return float(s_sub), float(s_super)


def uniform_grid(n_p: int = 65) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_p)


@dataclass(frozen=True)
class StreamSolution:
    model: VorticityModel
    s: float
    d: float
    R: float
    pgrid: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    Hp: np.ndarray = field(repr=False)
    kappa: float
    crit: CriticalConstants
    froude_integral: float

    @property
    def s0(self):
        return self.crit.s0

    @property
    def sc(self):
        return self.crit.sc

    @property
    def Rc(self):
        return self.crit.Rc

    @property
    def R0(self):
        return self.crit.R0

    def Hp_at(self, p):
        """Exact ``H_p(p) = (s^2 - 2 wp(p))^{-1/2}``."""
        return 1.0 / np.sqrt(self.s**2 - 2.0 * self.model.wp(np.asarray(p, dtype=float)))

    def H_at(self, p) -> np.ndarray:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        f = _depth_integrand(self.model, self.s)
        return np.array([integrate.quad(f, 0.0, float(x), epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)[0] for x in p])

    def bernoulli_residual(self) -> float:
        return abs(0.5 / self.Hp[-1] ** 2 + self.H[-1] - self.R)

    def to_dict(self) -> dict:
        return {
            "omega": list(self.model.coeffs),
            "R": self.R,
            "s": self.s,
            "d": self.d,
            "kappa": self.kappa,
            **self.crit.to_dict(),
            "froude_integral": self.froude_integral,
            "pgrid": self.pgrid.tolist(),
            "H": self.H.tolist(),
            "Hp": self.Hp.tolist(),
        }


def stream_solution(model: VorticityModel, R: float, pgrid=None) -> StreamSolution:
    pgrid = uniform_grid() if pgrid is None else np.asarray(pgrid, dtype=float)
    if pgrid[0] != 0.0 or pgrid[-1] != 1.0 or np.any(np.diff(pgrid) <= 0):
        raise DomainError("p-grid must increase from 0 to 1")
    crit = critical_constants(model)
    s, _ = solve_for_s(model, R, crit)
    f = _depth_integrand(model, s)
    pieces = [
        integrate.quad(f, a, b, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)[0] for a, b in zip(pgrid[:-1], pgrid[1:])
    ]
    H = np.concatenate([[0.0], np.cumsum(pieces)])
    Hp = 1.0 / np.sqrt(s * s - 2.0 * model.wp(pgrid))
    d = depth_of_s(model, s)
    H[-1] = d
    kappa = float(1.0 / Hp[-1])
    # int_0^d dy / U'(y)^2 = int_0^1 H_p^3 dp
    froude, _ = integrate.quad(lambda p: (s * s - 2.0 * model.wp(p)) ** -1.5, 0.0, 1.0, epsabs=QUAD_TOL, epsrel=QUAD_TOL)
    if not froude > 1.0:
        raise PreconditionError(f"Froude condition fails (int dy/U'^2 = {froude} <= 1): no small-amplitude waves")
    ss = StreamSolution(
        model=model, s=s, d=d, R=float(R), pgrid=pgrid, H=H, Hp=Hp, kappa=kappa, crit=crit, froude_integral=float(froude)
    )
    if ss.bernoulli_residual() > 1e-9:
        raise NumericalError(f"Bernoulli residual {ss.bernoulli_residual()} too large")
    log.debug("stream solution s=%.12g d=%.12g kappa=%.12g", s, d, kappa)
    return ss
