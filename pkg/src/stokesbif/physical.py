"""The second variation in physical variables on the fluid domain.

With ``x = q`` and ``y = h(q, p)`` a hodograph variation ``w`` corresponds to
``Gamma = w / h_p`` and the quadratic form becomes

    a(Gamma) = int_D lam^2 Gamma_x^2 + Gamma_y^2 - omega'(psi) Gamma^2 dx dy
               - int_top rho Gamma^2 dx,

    rho = h_p^2 + lam^2 h_q h_qp / h_p - (1 + lam^2 h_q^2) h_pp / h_p^2.

It is discretised with linear triangles on the mapped mesh ``(q_l, h_lj)``,
averaging the two diagonal splittings of every cell.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse

from .blocks import BlockTridiag, inertia_top_down, schur_to_top
from .errors import DegeneracyError
from .hodograph import BranchPoint, PeriodGrid, periodize
from .spectra import classify

log = logging.getLogger(__name__)


def surface_rho(point: BranchPoint, grid: PeriodGrid) -> np.ndarray:
    """Boundary coefficient on the full period, one-sided second-order in ``p``."""
    Hf = grid.E @ point.field.h
    dp = grid.dp
    hp = (3.0 * Hf[:, -1] - 4.0 * Hf[:, -2] + Hf[:, -3]) / (2.0 * dp)
    hpp = (2.0 * Hf[:, -1] - 5.0 * Hf[:, -2] + 4.0 * Hf[:, -3] - Hf[:, -4]) / dp**2
    hq = grid.Dq @ Hf[:, -1]
    hqp = grid.Dq @ hp
    lam2 = point.field.lam**2
    return hp**2 + lam2 * hq * hqp / hp - (1.0 + lam2 * hq**2) * hpp / hp**2, hp


def _p1(xa, ya, xb, yb, xc, yc, lam2):
    """Element stiffness of ``lam^2 u_x^2 + u_y^2`` for vectorised triangles."""
    det = (xb - xa) * (yc - ya) - (xc - xa) * (yb - ya)
    area = 0.5 * np.abs(det)
    if np.any(area <= 0.0):
        raise DegeneracyError("degenerate triangle in the physical mesh")
    # gradients of barycentric coordinates
    bx = np.stack([yb - yc, yc - ya, ya - yb]) / det
    by = np.stack([xc - xb, xa - xc, xb - xa]) / det
    Ke = area * (lam2 * bx[:, None] * bx[None, :] + by[:, None] * by[None, :])
    return Ke, area


@dataclass
class PhysicalCheck:
    n_negative: int
    n_zero: int
    eigs: np.ndarray
    rho: np.ndarray
    dirichlet_ok: bool
    M: int
    inertia_consistent: bool = True

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "n_negative": self.n_negative,
            "n_zero": self.n_zero,
            "dirichlet_ok": self.dirichlet_ok,
            "inertia_consistent": self.inertia_consistent,
            "eigs": [float(x) for x in self.eigs[:8]],
            "rho_min": float(np.min(self.rho)),
            "rho_max": float(np.max(self.rho)),
        }


def physical_operator(point: BranchPoint, grid: PeriodGrid) -> tuple[BlockTridiag, np.ndarray, np.ndarray]:
    """Even-folded block form of the physical quadratic form on ``grid``.

    Returns the operator, the surface coefficient ``rho`` and ``h_p`` on the
    surface (full period).
    """
    fld = point.field
    Hf = grid.E @ fld.h
    N, n_p = Hf.shape
    lam2 = fld.lam**2
    x = grid.q
    p = grid.p
    rho, hp_top = surface_rho(point, grid)
    l = np.arange(N)
    l1 = (l + 1) % N
    # cell corners, x of the right column unwrapped
    rows, cols, vals = [], [], []
    lumped = np.zeros((N, n_p))
    wprime = fld.model.domega(p)

    def add(tri, Ke, area):
        for a in range(3):
            la, ja = tri[a]
            lumped_idx = (la, ja)
            np.add.at(lumped, lumped_idx, 0.5 * area / 3.0)
            for b in range(3):
                lb, jb = tri[b]
                rows.append(la * n_p + ja)
                cols.append(lb * n_p + jb)
                vals.append(0.5 * Ke[a, b])

    for j in range(n_p - 1):
        j1 = j + 1
        X0, X1 = x, x + grid.dq
        c00 = (X0, Hf[l, j])
        c10 = (X1, Hf[l1, j])
        c11 = (X1, Hf[l1, j1])
        c01 = (X0, Hf[l, j1])
        idx = {"00": (l, np.full(N, j)), "10": (l1, np.full(N, j)), "11": (l1, np.full(N, j1)), "01": (l, np.full(N, j1))}
        coords = {"00": c00, "10": c10, "11": c11, "01": c01}
        for tri in (("00", "10", "11"), ("00", "11", "01"), ("00", "10", "01"), ("10", "11", "01")):
            (xa, ya), (xb, yb), (xc, yc) = (coords[v] for v in tri)
            Ke, area = _p1(xa, ya, xb, yb, xc, yc, lam2)
            add([idx[v] for v in tri], Ke, area)
    K = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N * n_p, N * n_p)
    ).tocsr()
    lower = -(wprime[None, :] * lumped)
    lower[:, -1] -= rho * grid.dq
    K = K + sparse.diags(lower.reshape(-1))
    # fold to even functions and drop the bottom level
    fold_idx = np.minimum(l, N - l)
    keep = np.arange(N * n_p).reshape(N, n_p)[:, 1:]
    n_rep = grid.n_rep
    new_index = (np.arange(1, n_p)[None, :] - 1) * n_rep + fold_idx[:, None]
    P = sparse.csr_matrix(
        (np.ones(keep.size), (keep.reshape(-1), new_index.reshape(-1))), shape=(N * n_p, (n_p - 1) * n_rep)
    )
    Ke = (P.T @ K @ P).tocsr()
    diag, up = [], []
    for i in range(n_p - 1):
        s = slice(i * n_rep, (i + 1) * n_rep)
        diag.append(Ke[s, s].toarray())
        if i < n_p - 2:
            up.append(Ke[s, slice((i + 1) * n_rep, (i + 2) * n_rep)].toarray())
    return BlockTridiag(diag, up), rho, hp_top


def physical_form_check(point: BranchPoint, grid: PeriodGrid, M: int = 1, zero_tol: float = 1e-3) -> PhysicalCheck:
    """Negative and zero counts of the physical-variable form on even ``M``-periodic functions."""
    fld, g = (point.field, grid) if M == 1 else periodize(point.field, grid, M)
    bp = BranchPoint(field=fld, t=point.t, amplitude=point.amplitude, residual_norm=point.residual_norm)
    try:
        op, rho, hp_top = physical_operator(bp, g)
    except DegeneracyError as exc:
        log.warning("physical mesh failed at t=%.4g: %s", point.t, exc)
        raise
    n_raw, _ = inertia_top_down(op)
    S = schur_to_top(op)
    ok = True
    w_top = (g.fold * g.dq) * hp_top[: g.n_rep] ** 2
    r = 1.0 / np.sqrt(w_top)
    nu = linalg.eigvalsh(r[:, None] * S * r[None, :])
    n_neg, n_zero = classify(nu, zero_tol)
    consistent = int(np.sum(nu < 0.0)) == n_raw
    if not consistent:
        log.warning("physical inertia %d differs from its surface reduction %d", n_raw, int(np.sum(nu < 0.0)))
    return PhysicalCheck(
        n_negative=n_neg, n_zero=n_zero, eigs=nu, rho=rho, dirichlet_ok=ok, M=M, inertia_consistent=consistent
    )
