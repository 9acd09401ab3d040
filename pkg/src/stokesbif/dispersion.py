"""Linearised vertical problem about a uniform stream and the dispersion function.

For a Floquet exponent ``tau`` the vertical profile solves

    gamma'' + omega'(U) gamma - tau^2 gamma = 0,  gamma(0) = 0,  gamma(d) = 1.

We integrate in the stream variable ``p`` where ``y = H(p)`` and
``d/dy = H_p^{-1} d/dp``; the system for ``g = gamma(H(p))`` and
``v = gamma'`` reads ``g_p = H_p v``, ``v_p = H_p (tau^2 - omega'(p)) g``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import NumericalError, PreconditionError
from .vorticity import StreamSolution

ODE_RTOL = 1e-12
ODE_ATOL = 1e-14


def _shoot(ss: StreamSolution, tau: float, p_eval=None):
    # scalar Horner evaluation keeps the right-hand side cheap
    wp_c = ss.model.poly.integ(lbnd=0.0).coef[::-1].tolist()
    dw_c = ss.model.poly.deriv().coef[::-1].tolist()
    s2 = float(ss.s) ** 2
    t2 = tau * tau

    def horner(c, x):
        acc = 0.0
        for a in c:
            acc = acc * x + a
        return acc

    def rhs(p, y):
        hp = 1.0 / math.sqrt(s2 - 2.0 * horner(wp_c, p))
        return [hp * y[1], hp * (t2 - horner(dw_c, p)) * y[0]]

    sol = integrate.solve_ivp(
        rhs, (0.0, 1.0), [0.0, 1.0], method="DOP853", rtol=ODE_RTOL, atol=ODE_ATOL, t_eval=p_eval
    )
    if not sol.success:
        raise NumericalError(f"vertical ODE failed at tau={tau}: {sol.message}")
    return sol


def gamma_profile(ss: StreamSolution, tau: float, pgrid=None) -> tuple[np.ndarray, float]:
    """Samples of gamma at ``y = H(p)`` for p on ``pgrid`` and ``gamma'(d)``.

    One homogeneous solve with ``gamma(0) = 0, gamma'(0) = 1`` is rescaled to
    meet ``gamma(d) = 1``.
    """
    pgrid = ss.pgrid if pgrid is None else np.asarray(pgrid, dtype=float)
    sol = _shoot(ss, abs(float(tau)), pgrid)
    g1, v1 = sol.y[0, -1], sol.y[1, -1]
    if not abs(g1) > 1e-300 or not np.isfinite(g1):
        raise NumericalError(f"shooting denominator vanished at tau={tau}")
    gamma = sol.y[0] / g1
    gamma[-1] = 1.0
    if np.any(gamma[1:] <= 0.0):
        warnings.warn(f"gamma(y, {tau}) is not positive on (0, d]", RuntimeWarning)
    return gamma, float(v1 / g1)


def gamma_prime_at_d(ss: StreamSolution, tau: float) -> float:
    sol = _shoot(ss, abs(float(tau)), None)
    g1, v1 = sol.y[0, -1], sol.y[1, -1]
    if not abs(g1) > 1e-300 or not np.isfinite(g1):
        raise NumericalError(f"shooting denominator vanished at tau={tau}")
    return float(v1 / g1)


def rho0(ss: StreamSolution) -> float:
    kappa = float(ss.kappa)
    return kappa**-2 - float(ss.model.omega(1.0)) / kappa


def sigma(ss: StreamSolution, tau: float) -> float:
    gp = gamma_prime_at_d(ss, tau)
    direct = ss.kappa * gp - 1.0 / ss.kappa + float(ss.model.omega(1.0))
    via_rho = ss.kappa * gp - ss.kappa * rho0(ss)
    if abs(direct - via_rho) > 1e-10 * max(1.0, abs(direct)):
        raise NumericalError(f"sigma forms disagree at tau={tau}: {direct} vs {via_rho}")
    return direct


@dataclass(frozen=True)
class DispersionCurve:
    tau_star: float
    kappa: float
    rho0: float
    Lambda0: float
    sigma0: float
    tau_grid: np.ndarray = field(repr=False)
    sigma_vals: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "tau_star": self.tau_star,
            "Lambda0": self.Lambda0,
            "kappa": self.kappa,
            "rho0": self.rho0,
            "sigma0": self.sigma0,
        }


def dispersion_root(ss: StreamSolution, n_samples: int = 25, tau_max_factor: float = 3.0) -> DispersionCurve:
    s0 = sigma(ss, 0.0)
    if not s0 < 0.0:
        raise PreconditionError(f"sigma(0) = {s0} >= 0: supercritical stream, no small-amplitude bifurcation")
    hi = abs(s0) / ss.kappa
    lo = 0.0
    f_hi = sigma(ss, hi)
    while f_hi < 0.0:
        lo, hi = hi, 2.0 * hi
        f_hi = sigma(ss, hi)
        if hi > 1e6:
            raise NumericalError("no sign change of sigma found")
    tau_star = optimize.brentq(lambda t: sigma(ss, t), lo, hi, xtol=1e-14, rtol=1e-14, maxiter=200)
    tau_grid = np.linspace(0.0, tau_max_factor * tau_star, n_samples)
    sig = np.array([sigma(ss, t) for t in tau_grid])
    return DispersionCurve(
        tau_star=float(tau_star),
        kappa=float(ss.kappa),
        rho0=float(rho0(ss)),
        Lambda0=2.0 * math.pi / tau_star,
        sigma0=float(s0),
        tau_grid=tau_grid,
        sigma_vals=sig,
    )


def mu_t0(ss: StreamSolution, curve: DispersionCurve, tau: float, n: int) -> float:
    """Boundary eigenvalue ``kappa sigma(tau + n tau_*)`` of the stream."""
    return ss.kappa * sigma(ss, tau + n * curve.tau_star)
