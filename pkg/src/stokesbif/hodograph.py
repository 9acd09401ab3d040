"""Discrete hodograph system, Newton solver and branch continuation.

The unknown height ``h(q, p)`` lives on a grid that is Fourier-spectral in
``q`` and uniform in ``p``.  A period ``M * Lambda0`` carries an odd number
``N = M (2 n_q - 1)`` of nodes; even functions are stored by their values at
the first ``(N + 1) / 2`` nodes.  The discrete problem is the exact gradient
of a midpoint-in-``p`` quadrature of the potential

    f(h; lam) = int int (1 + lam^2 h_q^2) / (2 h_p) + (R - h - wp(p) + wp(1)) h_p dq dp

so the Jacobian is an exact (symmetric) Hessian.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import linalg, optimize

from .blocks import BlockLU, BlockTridiag, schur_to_top
from .dispersion import DispersionCurve
from .errors import ConvergenceError, DegeneracyError, DomainError, NumericalError, PreconditionError
from .vorticity import StreamSolution, VorticityModel

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
MAX_ITER = 25


def spectral_derivative_matrix(n: int, period: float) -> np.ndarray:
    """Fourier differentiation matrix on ``n`` (odd) equispaced periodic nodes."""
    if n % 2 == 0:
        raise DomainError("spectral grid needs an odd node count")
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=period / n)
    D = np.fft.ifft(1j * k[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0).real
    return D


@dataclass(frozen=True)
class PeriodGrid:
    n_q: int
    n_p: int
    Lambda0: float
    M: int = 1

    def __post_init__(self):
        if self.n_q < 8 or self.n_p < 8:
            raise DomainError(f"grid too small: n_q={self.n_q}, n_p={self.n_p} (both must be >= 8)")
        if self.M < 1:
            raise DomainError("period multiplier must be positive")

    @property
    def n_base(self) -> int:
        return 2 * self.n_q - 1

    @property
    def n_full(self) -> int:
        return self.M * self.n_base

    @property
    def n_rep(self) -> int:
        return (self.n_full + 1) // 2

    @property
    def period(self) -> float:
        return self.M * self.Lambda0

    @property
    def dq(self) -> float:
        return self.Lambda0 / self.n_base

    @property
    def dp(self) -> float:
        return 1.0 / (self.n_p - 1)

    @property
    def q(self) -> np.ndarray:
        return np.arange(self.n_full) * self.dq

    @property
    def q_rep(self) -> np.ndarray:
        return self.q[: self.n_rep]

    @property
    def p(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_p)

    @cached_property
    def E(self) -> np.ndarray:
        """Even extension: full-period values from representative values."""
        l = np.arange(self.n_full)
        E = np.zeros((self.n_full, self.n_rep))
        E[l, np.minimum(l, self.n_full - l)] = 1.0
        return E

    @cached_property
    def fold(self) -> np.ndarray:
        return self.E.sum(axis=0)

    @cached_property
    def Dq(self) -> np.ndarray:
        return spectral_derivative_matrix(self.n_full, self.period)

    @cached_property
    def Dv_even(self) -> np.ndarray:
        return self.Dq @ self.E

    @cached_property
    def trough_weights(self) -> np.ndarray:
        """Trigonometric interpolation weights at ``q = Lambda0 / 2`` on representative nodes."""
        n = self.n_full
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=self.dq)
        x = 0.5 * self.Lambda0 - self.q
        w = np.real(np.exp(1j * np.outer(x, k)).sum(axis=1)) / n
        return w @ self.E

    def to_dict(self) -> dict:
        return {"n_q": self.n_q, "n_p": self.n_p, "Lambda0": self.Lambda0, "M": self.M}


@dataclass(frozen=True)
class WaveField:
    """Heights at representative nodes, shape ``(n_rep, n_p)``; column 0 is the bottom."""

    h: np.ndarray = field(repr=False)
    lam: float
    R: float
    model: VorticityModel

    def surface(self) -> np.ndarray:
        return self.h[:, -1]


@dataclass(frozen=True)
class BranchPoint:
    field: WaveField
    t: float
    amplitude: float
    residual_norm: float
    index: int = 0
    flags: tuple[str, ...] = ()

    @property
    def lam(self) -> float:
        return self.field.lam


# ---------------------------------------------------------------- cell terms


@dataclass
class _Cells:
    hq: np.ndarray
    hp: np.ndarray
    hm: np.ndarray
    c: np.ndarray  # R - wp(p_mid) + wp(1)


def _cells(Hf: np.ndarray, DH: np.ndarray, R: float, model: VorticityModel, dp: float) -> _Cells:
    hp = np.diff(Hf, axis=1) / dp
    if np.any(hp <= 0.0):
        l, j = np.argwhere(hp <= 0.0)[0]
        raise DegeneracyError(f"h_p <= 0 at node {l}, cell {j}", location=(int(l), int(j)))
    pm = (np.arange(Hf.shape[1] - 1) + 0.5) * dp
    c = R - model.wp(pm) + model.wp(1.0)
    return _Cells(
        hq=0.5 * (DH[:, :-1] + DH[:, 1:]),
        hp=hp,
        hm=0.5 * (Hf[:, :-1] + Hf[:, 1:]),
        c=np.broadcast_to(c, hp.shape),
    )


def _lagrangian(cl: _Cells, lam: float) -> np.ndarray:
    return (1.0 + lam**2 * cl.hq**2) / (2.0 * cl.hp) + (cl.c - cl.hm) * cl.hp


def _first(cl: _Cells, lam: float):
    Lq = lam**2 * cl.hq / cl.hp
    Lp = -(1.0 + lam**2 * cl.hq**2) / (2.0 * cl.hp**2) + (cl.c - cl.hm)
    Lh = -cl.hp
    return Lq, Lp, Lh


def _second(cl: _Cells, lam: float):
    Lqq = lam**2 / cl.hp
    Lqp = -(lam**2) * cl.hq / cl.hp**2
    Lpp = (1.0 + lam**2 * cl.hq**2) / cl.hp**3
    return Lqq, Lqp, Lpp


def _scatter_gradient(Lq, Lp, Lh, Dq, dq, dp) -> np.ndarray:
    """Gradient of ``dq dp sum L`` with respect to full nodal heights."""
    A = Dq.T @ (0.5 * Lq)
    G = np.zeros((Lq.shape[0], Lq.shape[1] + 1))
    G[:, :-1] += A - Lp / dp + 0.5 * Lh
    G[:, 1:] += A + Lp / dp + 0.5 * Lh
    return dq * dp * G


def assemble_blocks(Lqq, Lqp, Lpp, Dv, Ev, dq, dp) -> BlockTridiag:
    """Hessian of the cell sum in block form over unknown levels ``1..n_p-1``.

    ``Dv`` and ``Ev`` map the unknowns of one level to ``h_q`` and ``h`` at
    the quadrature nodes.  With complex ``Dv`` (Floquet conjugation) the
    result is Hermitian.
    """
    n_cells = Lqq.shape[1]
    n = Ev.shape[1]
    dtype = np.result_type(Dv, Ev, float)
    diag = [np.zeros((n, n), dtype=dtype) for _ in range(n_cells)]
    up = [np.zeros((n, n), dtype=dtype) for _ in range(n_cells - 1)]
    Q = 0.5 * Dv
    EE = Ev.conj().T @ Ev
    for j in range(n_cells):
        X = Q.conj().T @ (Lqq[:, j, None] * Q)
        Y = Q.conj().T @ (Lqp[:, j, None] * Ev)
        Z = Ev.conj().T @ (Lpp[:, j, None] * Ev)

        def block(sa, sb):
            return (dq * dp) * (
                X + (sb / dp) * Y + (sa / dp) * Y.conj().T + (sa * sb / dp**2) * Z - ((sa + sb) / (2.0 * dp)) * EE
            )

        diag[j] += block(1, 1)
        if j > 0:
            diag[j - 1] += block(-1, -1)
            up[j - 1] += block(-1, 1)
    return BlockTridiag(diag, up)


# ------------------------------------------------------- discrete operators


def _full(field: WaveField, grid: PeriodGrid):
    Hf = grid.E @ field.h
    return Hf, grid.Dq @ Hf


def _check_shape(field: WaveField, grid: PeriodGrid):
    if field.h.shape != (grid.n_rep, grid.n_p):
        raise DomainError(f"field shape {field.h.shape} does not match grid {(grid.n_rep, grid.n_p)}")


def potential(field: WaveField, grid: PeriodGrid) -> float:
    _check_shape(field, grid)
    Hf, DH = _full(field, grid)
    cl = _cells(Hf, DH, field.R, field.model, grid.dp)
    return float(grid.dq * grid.dp * np.sum(_lagrangian(cl, field.lam)))


def residual(field: WaveField, grid: PeriodGrid) -> np.ndarray:
    """Gradient of the discrete potential with respect to the unknown heights.

    Ordered level-major: entry ``(j - 1) * n_rep + l`` belongs to node ``l``
    on level ``j``; the last level is the free surface.
    """
    _check_shape(field, grid)
    Hf, DH = _full(field, grid)
    cl = _cells(Hf, DH, field.R, field.model, grid.dp)
    G = _scatter_gradient(*_first(cl, field.lam), grid.Dq, grid.dq, grid.dp)
    return (grid.E.T @ G)[:, 1:].T.reshape(-1)


def residual_lambda(field: WaveField, grid: PeriodGrid) -> np.ndarray:
    """Derivative of the residual with respect to lambda."""
    Hf, DH = _full(field, grid)
    cl = _cells(Hf, DH, field.R, field.model, grid.dp)
    lam = field.lam
    Lq = 2.0 * lam * cl.hq / cl.hp
    Lp = -lam * cl.hq**2 / cl.hp**2
    G = _scatter_gradient(Lq, Lp, np.zeros_like(Lq), grid.Dq, grid.dq, grid.dp)
    return (grid.E.T @ G)[:, 1:].T.reshape(-1)


def residual_scale(grid: PeriodGrid) -> np.ndarray:
    """Per-equation weights turning the gradient into pointwise equation residuals."""
    w = np.tile(grid.fold * grid.dq * grid.dp, (grid.n_p - 1, 1))
    w[-1] = grid.fold * grid.dq
    return w.reshape(-1)


def residual_norm(field: WaveField, grid: PeriodGrid) -> float:
    return float(np.max(np.abs(residual(field, grid) / residual_scale(grid))))


def assemble_jacobian(field: WaveField, grid: PeriodGrid) -> BlockTridiag:
    _check_shape(field, grid)
    Hf, DH = _full(field, grid)
    cl = _cells(Hf, DH, field.R, field.model, grid.dp)
    return assemble_blocks(*_second(cl, field.lam), grid.Dv_even, grid.E, grid.dq, grid.dp)


def symmetry_defect(J: BlockTridiag) -> float:
    """``max |J - J^T| / max |J|`` over the assembled matrix."""
    A = J.to_sparse()
    return float(abs(A - A.conj().T).max() / max(abs(A).max(), 1e-300))


def field_from_vector(x: np.ndarray, template: WaveField, lam: float | None = None) -> WaveField:
    n_rep = template.h.shape[0]
    h = np.zeros_like(template.h)
    h[:, 1:] = x.reshape(-1, n_rep).T
    return replace(template, h=h, lam=template.lam if lam is None else lam)


def field_vector(field: WaveField) -> np.ndarray:
    return field.h[:, 1:].T.reshape(-1).copy()


def periodize(field: WaveField, base: PeriodGrid, M: int) -> tuple[WaveField, PeriodGrid]:
    """Exact M-fold periodisation of an even base-period field."""
    grid = PeriodGrid(base.n_q, base.n_p, base.Lambda0, M)
    Hf = np.tile(base.E @ field.h, (M, 1))
    return replace(field, h=Hf[: grid.n_rep].copy()), grid


# -------------------------------------------------------- stream column


def _column_cells(H: np.ndarray, R: float, model: VorticityModel, dp: float) -> _Cells:
    Hf = H[None, :]
    return _cells(Hf, np.zeros_like(Hf), R, model, dp)


def discrete_stream(ss: StreamSolution, n_p: int) -> np.ndarray:
    """q-independent discrete solution closest to the sampled stream profile.

    The column problem is solved by Newton from the exact profile sampled on
    the p-grid.
    """
    p = np.linspace(0.0, 1.0, n_p)
    dp = p[1]
    H = ss.H_at(p) if n_p != len(ss.pgrid) or not np.allclose(p, ss.pgrid) else ss.H.copy()
    H[0] = 0.0
    one = np.ones((1, 1))
    zero = np.zeros((1, 1))
    for it in range(MAX_ITER):
        cl = _column_cells(H, ss.R, ss.model, dp)
        G = _scatter_gradient(*_first(cl, 1.0), zero, 1.0, dp)[0, 1:]
        J = assemble_blocks(*_second(cl, 1.0), zero, one, 1.0, dp)
        dH = BlockLU(J).solve(G)
        H[1:] -= dH
        if np.max(np.abs(dH)) < 1e-14 * H[-1]:
            break
    else:
        raise ConvergenceError("discrete stream column did not converge")
    return H


def mode_operator(H: np.ndarray, model: VorticityModel, R: float, lam: float, tau: float) -> BlockTridiag:
    """Linearisation at a q-independent column on the Fourier mode ``exp(i tau q)``."""
    dp = 1.0 / (len(H) - 1)
    cl = _column_cells(H, R, model, dp)
    Lqq, Lqp, Lpp = _second(cl, lam)
    return assemble_blocks(Lqq, Lqp, Lpp, np.array([[1j * tau]]), np.ones((1, 1)), 1.0, dp)


def mode_dn_value(H, model, R, lam, tau) -> float:
    """Surface Schur complement of one Fourier mode (scaled by 1/(dq))."""
    return float(schur_to_top(mode_operator(H, model, R, lam, tau))[0, 0].real)


def discrete_bifurcation(ss: StreamSolution, curve: DispersionCurve, n_p: int):
    """Discrete stream, bifurcation value of lambda and the kernel profile in p."""
    H = discrete_stream(ss, n_p)
    tau = curve.tau_star

    def f(lam):
        return mode_dn_value(H, ss.model, ss.R, lam, tau)

    lo, hi = 0.8, 1.25
    while f(lo) > 0.0:
        lo *= 0.8
    while f(hi) < 0.0:
        hi *= 1.25
    lam_b = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-15)
    op = mode_operator(H, ss.model, ss.R, lam_b, tau)
    K = op.to_dense().real
    g = np.zeros(n_p)
    g[-1] = 1.0
    g[1:-1] = -linalg.solve(K[:-1, :-1], K[:-1, -1], assume_a="pos")
    return H, float(lam_b), g


# --------------------------------------------------------------- Newton


@dataclass
class LinearConstraint:
    """``<ch, h> + cl * lam = target`` in unknown-vector coordinates."""

    ch: np.ndarray
    cl: float
    target: float

    def value(self, x: np.ndarray, lam: float) -> float:
        return float(self.ch @ x + self.cl * lam - self.target)


def _bordered_solve(J: BlockTridiag, F: np.ndarray, Fl: np.ndarray, con: LinearConstraint, g: float):
    lu = BlockLU(J)
    X = lu.solve(np.column_stack([-F, Fl]))
    # one step of refinement against the assembled operator
    X += lu.solve(np.column_stack([-F, Fl]) - np.column_stack([J.matvec(X[:, 0]), J.matvec(X[:, 1])]))
    x1, x2 = X[:, 0], X[:, 1]
    denom = con.cl - con.ch @ x2
    if abs(denom) < 1e-14 * (abs(con.cl) + np.linalg.norm(con.ch) * np.linalg.norm(x2) + 1e-300):
        raise NumericalError("bordered system is singular")
    dlam = (-g - con.ch @ x1) / denom
    return x1 - dlam * x2, float(dlam)


def newton_solve(
    initial: WaveField,
    grid: PeriodGrid,
    constraint: LinearConstraint | None = None,
    tol: float = NEWTON_TOL,
    max_iter: int = MAX_ITER,
) -> tuple[WaveField, float, int]:
    """Newton iteration for the discrete system, optionally with lambda free.

    Without a constraint lambda is held fixed.  Returns the solution, its
    scaled residual norm and the iteration count.
    """
    field = initial
    scale = residual_scale(grid)
    x = field_vector(field)
    lam = field.lam
    prev = None
    for it in range(max_iter + 1):
        field = field_from_vector(x, initial, lam)
        F = residual(field, grid)
        rn = float(np.max(np.abs(F / scale)))
        g = constraint.value(x, lam) if constraint is not None else 0.0
        log.debug("newton it=%d residual=%.3e constraint=%.3e", it, rn, g)
        if prev is not None and prev < 1e-2 and rn > 1e-300:
            log.debug("newton convergence ratio %.3e", math.log(rn) / math.log(prev) if prev < 1 else float("nan"))
        if rn < tol and abs(g) < tol:
            return field, rn, it
        if it == max_iter or not np.isfinite(rn):
            break
        J = assemble_jacobian(field, grid)
        if constraint is None:
            dx = BlockLU(J).solve(-F)
            dlam = 0.0
        else:
            dx, dlam = _bordered_solve(J, F, residual_lambda(field, grid), constraint, g)
        x = x + dx
        lam = lam + dlam
        prev = rn
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {rn:.3e})")


# --------------------------------------------------------- continuation


def amplitude_functional(grid: PeriodGrid) -> np.ndarray:
    """Linear functional on unknown vectors: crest height minus trough height."""
    w = -grid.trough_weights.copy()
    w[0] += 1.0
    a = np.zeros((grid.n_p - 1, grid.n_rep))
    a[-1] = w
    return a.reshape(-1)


def amplitude(field: WaveField, grid: PeriodGrid) -> float:
    return float(amplitude_functional(grid) @ field_vector(field))


def _weights(grid: PeriodGrid) -> np.ndarray:
    w = np.tile(grid.fold, (grid.n_p - 1, 1)).reshape(-1)
    return w / (grid.n_full * (grid.n_p - 1))


def _wnorm(dx, dlam, w) -> float:
    return float(math.sqrt(np.sum(w * dx * dx) + dlam * dlam))


@dataclass
class StopRules:
    amplitude_cap: float = math.inf
    stagnation_fraction: float = 0.05
    slope_bound: float = 10.0
    lam_bounds: tuple[float, float] = (0.2, 5.0)


def stagnation_gap(ss: StreamSolution) -> float:
    """Distance ``R - d`` from the flat surface to the stagnation level."""
    return float(ss.R - ss.d)


def gap_stop_rules(
    ss: StreamSolution, amplitude_fraction: float, stagnation_fraction: float = 0.05, slope_bound: float = 10.0
) -> StopRules:
    return StopRules(
        amplitude_cap=amplitude_fraction * stagnation_gap(ss),
        stagnation_fraction=stagnation_fraction,
        slope_bound=slope_bound,
    )


def default_step_size(ss: StreamSolution, amplitude_fraction: float, n_steps: int) -> float:
    """Even split of the amplitude budget over ``n_steps``."""
    return amplitude_fraction * stagnation_gap(ss) / max(n_steps, 1)


def surface_slope(field: WaveField, grid: PeriodGrid) -> float:
    return float(np.max(np.abs(grid.Dv_even @ field.surface())))


def profile_flags(field: WaveField, grid: PeriodGrid) -> tuple[str, ...]:
    flags = []
    eta = field.surface()
    if np.argmax(eta) != 0:
        flags.append("crest-not-at-zero")
    half = grid.n_q if grid.M == 1 else grid.n_rep
    if grid.M == 1 and np.any(np.diff(eta[:half]) >= 0.0):
        flags.append("profile-not-monotone")
    if np.any(eta >= field.R):
        flags.append("surface-above-stagnation")
    if not (0.2 < field.lam < 5.0):
        flags.append("lambda-outside-sanity-range")
    return tuple(flags)


@dataclass
class BranchResult:
    points: list[BranchPoint]
    grid: PeriodGrid
    lam_b: float
    stop_reason: str
    kernel: np.ndarray = field(repr=False)


def _accept(points, fld, grid, t, rn, flags=()):
    bp = BranchPoint(field=fld, t=t, amplitude=amplitude(fld, grid), residual_norm=rn, index=len(points), flags=flags)
    points.append(bp)
    return bp


def continue_branch(
    ss: StreamSolution,
    curve: DispersionCurve,
    grid: PeriodGrid,
    n_steps: int,
    step_size: float,
    stop: StopRules | None = None,
    restart: list[BranchPoint] | None = None,
    max_halvings: int = 6,
) -> BranchResult:
    """Follow the Stokes branch bifurcating from the uniform stream.

    The first step fixes the amplitude at ``step_size``; later steps use a
    secant predictor and pseudo-arclength corrector in ``(h, lam)``.
    """
    stop = stop or StopRules()
    if grid.M != 1:
        raise DomainError("continuation runs on the base period (M = 1)")
    if abs(grid.Lambda0 - curve.Lambda0) > 1e-12 * curve.Lambda0:
        raise PreconditionError("grid period does not match the dispersion root")
    H, lam_b, g = discrete_bifurcation(ss, curve, grid.n_p)
    h0 = np.tile(H, (grid.n_rep, 1))
    kernel = np.cos(curve.tau_star * grid.q_rep)[:, None] * g[None, :]
    base = WaveField(h=h0, lam=lam_b, R=ss.R, model=ss.model)
    w = _weights(grid)
    afun = amplitude_functional(grid)
    points: list[BranchPoint] = []
    if restart:
        points = list(restart)
    else:
        _accept(points, base, grid, 0.0, residual_norm(base, grid))
    gap = ss.R - ss.d
    reason = "n_steps"
    ds_nominal = None
    ds = None
    if len(points) >= 2:
        # resume with the arclength of the last stored step
        a, b = points[-2], points[-1]
        ds_nominal = ds = _wnorm(field_vector(b.field) - field_vector(a.field), b.lam - a.lam, w)
    while len(points) <= n_steps:
        last = points[-1]
        x_last = field_vector(last.field)
        try_size = step_size if len(points) == 1 else ds
        new = None
        for attempt in range(max_halvings + 1):
            try:
                if len(points) == 1:
                    kamp = afun @ field_vector(replace(base, h=kernel))
                    seed = replace(base, h=base.h + (try_size / kamp) * kernel)
                    con = LinearConstraint(afun, 0.0, try_size)
                    new, rn, _ = newton_solve(seed, grid, con)
                else:
                    prev = points[-2]
                    dx = x_last - field_vector(prev.field)
                    dl = last.lam - prev.lam
                    nrm = _wnorm(dx, dl, w)
                    tx, tl = dx / nrm, dl / nrm
                    pred = field_from_vector(x_last + try_size * tx, last.field, last.lam + try_size * tl)
                    ch = w * tx
                    con = LinearConstraint(ch, tl, float(ch @ x_last + tl * last.lam + try_size))
                    new, rn, _ = newton_solve(pred, grid, con)
                if amplitude(new, grid) <= last.amplitude:
                    raise NumericalError("amplitude did not increase")
                break
            except (ConvergenceError, DegeneracyError, NumericalError) as exc:
                log.info("step %d attempt %d failed: %s", len(points), attempt, exc)
                new = None
                try_size *= 0.5
        if new is None:
            reason = "step-failure"
            break
        step = _wnorm(field_vector(new) - x_last, new.lam - last.lam, w)
        if ds_nominal is None:
            ds_nominal = step
            ds = step
        else:
            ds = min(ds_nominal, 1.5 * try_size)
        bp = _accept(points, new, grid, last.t + step, rn, profile_flags(new, grid))
        crest = new.h[0, -1]
        if bp.amplitude >= stop.amplitude_cap:
            reason = "amplitude-cap"
            break
        if ss.R - crest < stop.stagnation_fraction * ss.R:
            reason = "stagnation-proximity"
            break
        if surface_slope(new, grid) >= stop.slope_bound:
            reason = "slope-bound"
            break
        if not (stop.lam_bounds[0] < new.lam < stop.lam_bounds[1]):
            log.warning("lambda=%.4f outside sanity range %s", new.lam, stop.lam_bounds)
    else:
        reason = "n_steps"
    log.info("branch stopped after %d points: %s (gap %.4g)", len(points), reason, gap)
    return BranchResult(points=points, grid=grid, lam_b=lam_b, stop_reason=reason, kernel=kernel)


# ------------------------------------------------------------ persistence


def save_branch(path, result: BranchResult, ss: StreamSolution) -> None:
    header = {
        "kind": "header",
        "grid": result.grid.to_dict(),
        "omega": list(ss.model.coeffs),
        "R": ss.R,
        "lam_b": result.lam_b,
        "stop_reason": result.stop_reason,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for bp in result.points:
            rec = {
                "kind": "point",
                "index": bp.index,
                "t": bp.t,
                "lam": bp.lam,
                "amplitude": bp.amplitude,
                "residual_norm": bp.residual_norm,
                "flags": list(bp.flags),
                "h": bp.field.h.tolist(),
            }
            fh.write(json.dumps(rec) + "\n")


def load_branch(path) -> tuple[dict, list[BranchPoint]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0])
    if header.get("kind") != "header":
        raise DomainError(f"{path}: first record is not a header")
    model = VorticityModel(tuple(header["omega"]))
    points = []
    for line in lines[1:]:
        rec = json.loads(line)
        fld = WaveField(h=np.array(rec["h"], dtype=float), lam=rec["lam"], R=header["R"], model=model)
        points.append(
            BranchPoint(
                field=fld,
                t=rec["t"],
                amplitude=rec["amplitude"],
                residual_norm=rec["residual_norm"],
                index=rec["index"],
                flags=tuple(rec["flags"]),
            )
        )
    return header, points
