"""Corner model of the extreme wave.

Near a 120 degree corner the linearised problem reduces to the wedge
``|theta| < pi/3`` (theta measured from the downward vertical) with the Robin
condition ``d_theta u = (sqrt(3)/2) u`` on both sides.  Separable solutions
``K_{i kappa}(tau r) cosh(kappa theta)`` exist when ``kappa tanh(kappa pi/3)
= sqrt(3)/2`` and form a geometric ladder in ``tau`` with ratio
``exp(pi/kappa)``.
"""
from __future__ import annotations

import cmath
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import DomainError, PreconditionError

log = logging.getLogger(__name__)

SQRT3_2 = math.sqrt(3.0) / 2.0
WEDGE_HALF_ANGLE = math.pi / 3.0
SLOPE_COEFF = 2.0**1.5 / 3.0**1.25

# Bernoulli numbers B_2, B_4, ... for the Stirling series
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
)


def log_gamma(z: complex) -> complex:
    """Principal log-gamma for ``Re z > 0`` (Stirling series after upward recurrence)."""
    z = complex(z)
    if z.real <= 0.0:
        raise DomainError("log_gamma implemented for Re z > 0 only")
    shift = 0j
    while abs(z) < 15.0:
        shift += cmath.log(z)
        z += 1.0
    s = (z - 0.5) * cmath.log(z) - z + 0.5 * math.log(2.0 * math.pi)
    zinv = 1.0 / z
    z2 = zinv * zinv
    term = zinv
    for n, b in enumerate(_BERNOULLI, start=1):
        s += b / (2 * n * (2 * n - 1)) * term
        term *= z2
    return s - shift


def kappa_equation(kappa: float) -> float:
    return kappa * math.tanh(kappa * math.pi / 3.0) - SQRT3_2


def kappa_root() -> float:
    """Positive root of ``kappa tanh(kappa pi/3) = sqrt(3)/2``."""
    k = optimize.bisect(kappa_equation, 0.5, 2.0, xtol=1e-6)
    for _ in range(20):
        th = math.tanh(k * math.pi / 3.0)
        df = th + k * (math.pi / 3.0) * (1.0 - th * th)
        step = kappa_equation(k) / df
        k -= step
        if abs(step) < 1e-16:
            break
    return k


def gamma_kappa(kappa: float) -> float:
    """Phase ``gamma_kappa`` of ``Gamma(1 + i kappa)``, continuous from 0 at ``kappa = 0``."""
    if kappa <= 0.0:
        raise DomainError("kappa must be positive")
    return log_gamma(1.0 + 1j * kappa).imag


@dataclass(frozen=True)
class WedgeModel:
    kappa: float
    gamma_phase: float = math.pi / 2.0
    gamma_kappa: float = field(default=float("nan"))

    def __post_init__(self):
        if not (0.0 < self.gamma_phase <= math.pi):
            raise DomainError("gamma_phase must lie in (0, pi]")
        if math.isnan(self.gamma_kappa):
            object.__setattr__(self, "gamma_kappa", gamma_kappa(self.kappa))

    @classmethod
    def default(cls, gamma_phase: float = math.pi / 2.0) -> "WedgeModel":
        return cls(kappa=kappa_root(), gamma_phase=gamma_phase)

    @property
    def ladder_ratio(self) -> float:
        return math.exp(math.pi / self.kappa)

    def rho_hat(self, r):
        """Leading-order boundary coefficient ``(sqrt(3)/2) / r``."""
        return SQRT3_2 / np.asarray(r, dtype=float)

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "gamma_phase": self.gamma_phase, "gamma_kappa": self.gamma_kappa}


# ------------------------------------------------------------- K_{i kappa}

_U_STEP = 0.02
_TAIL = -math.log(1e-18)


def _u_grid(z: float) -> np.ndarray:
    u_max = math.acosh(max(_TAIL / z, 1.0)) + 1.0
    n = int(math.ceil(u_max / _U_STEP))
    return np.linspace(0.0, u_max, n + 1)


def _trapezoid_even(f: np.ndarray, u: np.ndarray) -> float:
    # the integrand is even in u, so the trapezoid rule converges geometrically
    h = u[1] - u[0]
    return float(h * (np.sum(f) - 0.5 * f[0] - 0.5 * f[-1]))


def bessel_K_imag(kappa: float, z, derivative: bool = False):
    """``K_{i kappa}(z) = int_0^inf exp(-z cosh u) cos(kappa u) du`` (or its z-derivative)."""
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(zs <= 0.0):
        raise DomainError("K_{i kappa}(z) requires z > 0")
    if np.any(zs < 1e-8):
        warnings.warn("z < 1e-8: K_{i kappa} is in its oscillatory log regime", RuntimeWarning)
    out = np.empty_like(zs)
    for i, zz in enumerate(zs):
        u = _u_grid(zz)
        ch = np.cosh(u)
        f = np.exp(-zz * ch) * np.cos(kappa * u)
        if derivative:
            f = -ch * f
        out[i] = _trapezoid_even(f, u)
    return out if np.ndim(z) else float(out[0])


def bessel_K_small(kappa: float, z, g_kappa: float | None = None):
    """Leading small-argument form ``-(pi/(kappa sinh pi kappa))^{1/2} sin(kappa ln(z/2) - gamma_kappa)``."""
    gk = gamma_kappa(kappa) if g_kappa is None else g_kappa
    amp = math.sqrt(math.pi / (kappa * math.sinh(math.pi * kappa)))
    return -amp * np.sin(kappa * np.log(np.asarray(z, dtype=float) / 2.0) - gk)


def bessel_K_large(z):
    z = np.asarray(z, dtype=float)
    return np.sqrt(np.pi / (2.0 * z)) * np.exp(-z)


def root_guess(kappa: float, j: int, g_kappa: float | None = None) -> float:
    gk = gamma_kappa(kappa) if g_kappa is None else g_kappa
    return 2.0 * math.exp(-(j * math.pi - gk) / kappa)


def bessel_small_roots(kappa: float, j_range: Sequence[int] = range(1, 8), floor: float = 1e-9) -> list[float]:
    """Small zeros of ``K_{i kappa}``, largest first, refined by Newton from the asymptotic guess."""
    gk = gamma_kappa(kappa)
    roots = []
    for j in j_range:
        if j < 1:
            raise DomainError("root index must be >= 1")
        z = root_guess(kappa, j, gk)
        if z < floor:
            warnings.warn(f"root {j} below precision floor {floor}; list truncated", RuntimeWarning)
            break
        for _ in range(50):
            f = bessel_K_imag(kappa, z)
            df = bessel_K_imag(kappa, z, derivative=True)
            step = f / df
            # keep the iterate inside the same oscillation
            z_new = z - step
            if z_new <= 0.0:
                z_new = 0.5 * z
            if abs(z_new - z) < 1e-15 * z:
                z = z_new
                break
            z = z_new
        roots.append(z)
    return roots


# ----------------------------------------------------------------- ladder


def ladder_tau(model: WedgeModel, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return 2.0 * math.exp((model.gamma_kappa + model.gamma_phase) / model.kappa) * np.exp(k * math.pi / model.kappa)


@dataclass(frozen=True)
class LadderMember:
    k: int
    tau: float
    u: Callable = field(repr=False)


def model_eigen_ladder(model: WedgeModel, k_range: Sequence[int]) -> list[LadderMember]:
    """Geometric ladder ``tau_k`` and evaluators ``u_k(r, theta)``."""
    out = []
    for k in k_range:
        tau = float(ladder_tau(model, k))

        def u(r, theta, tau=tau):
            r = np.asarray(r, dtype=float)
            shape = np.broadcast(r, np.asarray(theta)).shape
            rad = bessel_K_imag(model.kappa, tau * np.broadcast_to(r, shape).ravel()).reshape(shape)
            return rad * np.cosh(model.kappa * np.asarray(theta))

        out.append(LadderMember(k=int(k), tau=tau, u=u))
    return out


# ---------------------------------------------------------- corner form


def cutoff(r, delta: float):
    """C^2 cutoff: 1 for ``r <= delta``, 0 for ``r >= 2 delta`` (quintic smoothstep)."""
    s = np.clip((np.asarray(r, dtype=float) - delta) / delta, 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def cutoff_prime(r, delta: float):
    s = np.clip((np.asarray(r, dtype=float) - delta) / delta, 0.0, 1.0)
    return -(30.0 * s * s * (1.0 - s) ** 2) / delta


@dataclass
class CornerFormResult:
    eps: float
    window: list[int]
    admissible: list[int]
    taus: np.ndarray
    radii: np.ndarray
    gram: np.ndarray = field(repr=False)
    n_negative: int = 0

    @property
    def window_dim(self) -> int:
        return len(self.window)

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "window": self.window,
            "admissible": self.admissible,
            "window_dim": self.window_dim,
            "n_negative": self.n_negative,
            "tau": [float(t) for t in self.taus],
            "truncation_radius": [float(r) for r in self.radii],
        }


def window_indices(model: WedgeModel, eps: float, sigma: float) -> list[int]:
    """Ladder indices with ``1/sigma <= tau_k <= sigma/eps``."""
    if not (0.0 < eps < 1.0) or sigma <= 0.0:
        raise DomainError("need 0 < eps < 1 and sigma > 0")
    base = float(ladder_tau(model, 0))
    step = math.pi / model.kappa
    k_lo = math.ceil((math.log(1.0 / sigma) - math.log(base)) / step - 1e-12)
    k_hi = math.floor((math.log(sigma / eps) - math.log(base)) / step + 1e-12)
    return list(range(k_lo, k_hi + 1))


def _radial_nodes(breaks: Sequence[float], per_decade: int = 12, order: int = 8):
    """Composite Gauss-Legendre nodes on log-spaced panels between sorted breakpoints."""
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        n_pan = max(1, int(math.ceil(per_decade * math.log10(b / a))))
        edges = np.geomspace(a, b, n_pan + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
            weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _radial_profiles(model, taus, radii, r, delta):
    """Values and r-derivatives of ``zeta(r) K(tau r)`` truncated inside the radii."""
    R = np.zeros((len(taus), r.size))
    dR = np.zeros_like(R)
    z = cutoff(r, delta)
    dz = cutoff_prime(r, delta)
    for i, (tau, rk) in enumerate(zip(taus, radii)):
        m = (r > rk) & (z > 0.0)
        arg = tau * r[m]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            K = bessel_K_imag(model.kappa, arg)
            dK = bessel_K_imag(model.kappa, arg, derivative=True)
        R[i, m] = z[m] * K
        dR[i, m] = dz[m] * K + z[m] * tau * dK
    return R, dR


def corner_form_demo(
    model: WedgeModel,
    eps: float,
    sigma: float = 1.0,
    delta: float = 10.0,
    n_theta: int = 24,
    per_decade: int = 12,
    roots: Sequence[float] | None = None,
) -> CornerFormResult:
    """Gram matrix of ``int |grad w|^2 - int_sides rho_hat w^2`` over truncated ladder functions.

    Each window member ``k`` is cut off at ``r_k = z_n / tau_k`` with ``z_n``
    the smallest tabulated zero of ``K_{i kappa}`` above ``eps tau_k``;
    members with no such zero are not admissible and are dropped.
    The form is integrated on a polar tensor grid over the wedge.
    """
    window = window_indices(model, eps, sigma)
    if not window:
        raise PreconditionError(f"frequency window is empty for eps={eps}, sigma={sigma}")
    if roots is None:
        with warnings.catch_warnings():
            # the list is cut at a floor well below eps * tau_k on purpose
            warnings.simplefilter("ignore", RuntimeWarning)
            roots = bessel_small_roots(model.kappa, range(1, 64), floor=eps * 1e-3 / sigma)
    roots = np.sort(np.asarray(roots))
    taus_all = ladder_tau(model, window)
    adm, taus, radii = [], [], []
    for k, tau in zip(window, taus_all):
        above = roots[roots > eps * tau]
        if above.size == 0:
            log.info("ladder member k=%d (tau=%.4g) has no zero above eps*tau: dropped", k, tau)
            continue
        adm.append(k)
        taus.append(tau)
        radii.append(above[0] / tau)
    taus = np.array(taus)
    radii = np.array(radii)
    if not adm:
        raise PreconditionError("no admissible test functions in the window")
    breaks = sorted(set(radii.tolist() + [delta, 2.0 * delta]))
    r, wr = _radial_nodes(breaks, per_decade)
    R, dR = _radial_profiles(model, taus, radii, r, delta)
    # tensor grid in theta
    xt, wt = np.polynomial.legendre.leggauss(n_theta)
    th = WEDGE_HALF_ANGLE * xt
    wth = WEDGE_HALF_ANGLE * wt
    A = np.cosh(model.kappa * th)
    dA = model.kappa * np.sinh(model.kappa * th)
    # int int (w_r^2 + w_theta^2 / r^2) r dr dtheta over the wedge
    grad_rr = np.einsum("t,kr,lr,r->kl", wth * A * A, dR, dR, wr * r)
    grad_tt = np.einsum("t,kr,lr,r->kl", wth * dA * dA, R, R, wr / r)
    side = 2.0 * np.cosh(model.kappa * WEDGE_HALF_ANGLE) ** 2
    bdry = side * np.einsum("kr,lr,r->kl", R, R, wr * model.rho_hat(r))
    G = grad_rr + grad_tt - bdry
    G = 0.5 * (G + G.T)
    n_neg = int(np.sum(np.linalg.eigvalsh(G) < 0.0))
    return CornerFormResult(eps=eps, window=window, admissible=adm, taus=taus, radii=radii, gram=G, n_negative=n_neg)


def radial_form(model: WedgeModel, res: CornerFormResult, delta: float = 10.0, per_decade: int = 12) -> np.ndarray:
    """Separated form ``C [int R_k' R_l' r dr - kappa^2 int R_k R_l / r dr]`` for the same functions."""
    breaks = sorted(set(res.radii.tolist() + [delta, 2.0 * delta]))
    r, wr = _radial_nodes(breaks, per_decade)
    R, dR = _radial_profiles(model, res.taus, res.radii, r, delta)
    k = model.kappa
    a = WEDGE_HALF_ANGLE
    C = a + math.sinh(2.0 * k * a) / (2.0 * k)
    return C * (np.einsum("kr,lr,r->kl", dR, dR, wr * r) - k * k * np.einsum("kr,lr,r->kl", R, R, wr / r))


# ------------------------------------------------------- slope asymptotics


def tau1_equation(tau: float) -> float:
    return -math.cos(math.pi * tau / 2.0) / (math.sqrt(3.0) * math.sin(math.pi * tau / 2.0)) - tau


def tau1_root() -> float:
    """Root in (1, 2) of ``tau = -(1/sqrt 3) cot(pi tau / 2)``."""
    t = optimize.brentq(tau1_equation, 1.0 + 1e-9, 2.0 - 1e-9, xtol=1e-15, rtol=1e-15)
    for _ in range(5):
        s = math.sin(math.pi * t / 2.0)
        d = (math.pi / 2.0) / (math.sqrt(3.0) * s * s) - 1.0
        t -= tau1_equation(t) / d
    return t


def extreme_slope(X, omega1: float):
    """Two-term expansion ``-1/sqrt 3 + (2^{3/2}/3^{5/4}) omega(1) sqrt X`` of the surface slope."""
    X = np.asarray(X, dtype=float)
    if np.any(X <= 0.0):
        raise DomainError("X must be positive")
    val = -1.0 / math.sqrt(3.0) + SLOPE_COEFF * omega1 * np.sqrt(X)
    return val if val.ndim else float(val)
