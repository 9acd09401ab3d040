"""Linearised operators along the branch, their spectra and crossing detection.

Three routes to the negative and zero counts of the second variation:

* ``dn_spectrum``: Schur complement onto the free surface (bottom-up block
  elimination) and a dense generalised eigenproblem there;
* ``full_2d_spectrum``: the whole two-dimensional operator, counting
  negative eigenvalues by block LDL inertia (top-down elimination) and the
  zero band by shift-invert Lanczos;
* the physical-variable form in :mod:`stokesbif.physical`.

Zero-band membership is decided on the boundary-normalised Rayleigh value
``a(u, u) / |u_top|^2`` so that all routes share the same scale as the
surface eigenvalues.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as splinalg

from .blocks import BlockTridiag, inertia_top_down, schur_to_top
from .dispersion import DispersionCurve
from .errors import DomainError, NumericalError
from .hodograph import (
    BranchPoint,
    PeriodGrid,
    _cells,
    _full,
    _second,
    assemble_blocks,
    assemble_jacobian,
    periodize,
)
from .vorticity import StreamSolution

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectrumSlice:
    t: float
    tau: float | None
    M: int
    eigs: np.ndarray = field(repr=False)
    n_negative: int
    n_zero: int
    zero_tol: float
    route: str = "dn"
    k: int | None = None

    def to_dict(self, n_eigs: int = 8) -> dict:
        return {
            "t": self.t,
            "tau": self.tau,
            "M": self.M,
            "k": self.k,
            "route": self.route,
            "n_negative": self.n_negative,
            "n_zero": self.n_zero,
            "zero_tol": self.zero_tol,
            "eigs": [float(x) for x in self.eigs[:n_eigs]],
        }


def default_zero_tol(grid: PeriodGrid, curve: DispersionCurve) -> float:
    """Ten times the second-order error scale relative to ``kappa |sigma(0)|``."""
    h = max(grid.dp, grid.dq / grid.Lambda0)
    return 10.0 * h * h * curve.kappa * abs(curve.sigma0)


def classify(values: np.ndarray, zero_tol: float) -> tuple[int, int]:
    """Counts below the zero band and inside it."""
    values = np.asarray(values)
    return int(np.sum(values < -zero_tol)), int(np.sum(np.abs(values) <= zero_tol))


def _check_prime(M: int):
    if M < 1 or (M > 1 and (M % 2 == 0 or any(M % d == 0 for d in range(3, int(math.isqrt(M)) + 1, 2)))):
        raise DomainError(f"M={M} must be 1 or an odd prime")


# ------------------------------------------------------------- assembly


def assemble_floquet(point: BranchPoint, grid: PeriodGrid, tau: float) -> BlockTridiag:
    """Hermitian operator ``exp(-i tau q) A exp(i tau q)`` on one full base period.

    The surface level carries the boundary operator, so the pair (interior A,
    boundary N - I) is the interior and last block rows of the result.
    """
    if grid.M != 1:
        raise DomainError("Floquet operators act on the base period grid")
    fld = point.field
    Hf, DH = _full(fld, grid)
    cl = _cells(Hf, DH, fld.R, fld.model, grid.dp)
    Dv = grid.Dq + 1j * tau * np.eye(grid.n_full)
    return assemble_blocks(*_second(cl, fld.lam), Dv, np.eye(grid.n_full), grid.dq, grid.dp)


def assemble_periodic(point: BranchPoint, grid: PeriodGrid) -> BlockTridiag:
    """Real operator on all (not only even) periodic functions of the base period."""
    fld = point.field
    Hf, DH = _full(fld, grid)
    cl = _cells(Hf, DH, fld.R, fld.model, grid.dp)
    return assemble_blocks(*_second(cl, fld.lam), grid.Dq, np.eye(grid.n_full), grid.dq, grid.dp)


def _even_operator(point: BranchPoint, grid: PeriodGrid, M: int):
    if M == 1:
        return assemble_jacobian(point.field, grid), grid
    fld, gM = periodize(point.field, grid, M)
    return assemble_jacobian(fld, gM), gM


# ------------------------------------------------------------ DN route


def _dn_eigs(op: BlockTridiag, weight: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    S = schur_to_top(op)
    # symmetric scaling keeps eigh on a standard problem
    r = 1.0 / np.sqrt(weight)
    w, V = linalg.eigh(r[:, None] * S * r[None, :])
    return w, r[:, None] * V


def dn_spectrum(
    point: BranchPoint,
    grid: PeriodGrid,
    tau: float | None = None,
    M: int = 1,
    zero_tol: float = 1e-3,
) -> SpectrumSlice:
    """Surface (Dirichlet-to-Neumann) spectrum ``S g = mu g``.

    With ``tau`` given the Floquet operator on the full base period is used;
    otherwise even ``M Lambda0``-periodic functions.
    """
    if tau is None:
        op, g = _even_operator(point, grid, M)
        w, _ = _dn_eigs(op, g.fold * g.dq)
    else:
        op = assemble_floquet(point, grid, tau)
        w, _ = _dn_eigs(op, np.full(grid.n_full, grid.dq))
    n_neg, n_zero = classify(w, zero_tol)
    return SpectrumSlice(t=point.t, tau=tau, M=M, eigs=w, n_negative=n_neg, n_zero=n_zero, zero_tol=zero_tol)


def dirichlet_min_eig(point: BranchPoint, grid: PeriodGrid, M: int = 1) -> float:
    """Smallest eigenvalue of the interior block with the surface held at zero."""
    op, _ = _even_operator(point, grid, M)
    inner = BlockTridiag(op.diag[:-1], op.up[:-1]).to_sparse().tocsc()
    val = splinalg.eigsh(inner, k=1, sigma=0.0, which="LM", return_eigenvectors=False)
    return float(val[0])


# ------------------------------------------------------------ 2D route


def _lumped_mass(grid: PeriodGrid, n_levels: int, fold: np.ndarray) -> np.ndarray:
    m = np.tile(fold * grid.dq * grid.dp, (n_levels, 1))
    m[-1] *= 0.5
    return m.reshape(-1)


def near_zero_band(
    K: sparse.spmatrix, mass: np.ndarray, top: slice, top_weight: np.ndarray, zero_tol: float, k0: int = 6
) -> tuple[np.ndarray, np.ndarray, float]:
    """Eigenvalues of ``K u = theta M u`` nearest zero and their boundary-normalised values.

    Returns ``(theta, nu, radius)`` with ``nu = theta |u|_M^2 / |u_top|_W^2``;
    every eigenvalue within ``radius`` of the shift is among those returned.
    The request grows until the farthest returned pair lies outside the band.
    """
    n = K.shape[0]
    scale = abs(K).max() / mass.max()
    shift = -1e-9 * scale
    Mm = sparse.diags(mass).tocsc()
    Kc = K.tocsc()
    k = min(k0, n - 2)
    while True:
        theta, U = splinalg.eigsh(Kc, k=k, M=Mm, sigma=shift, which="LM")
        mnorm = np.einsum("ij,i,ij->j", U.conj(), mass, U).real
        tnorm = np.einsum("ij,i,ij->j", U[top].conj(), top_weight, U[top]).real
        nu = theta * mnorm / np.maximum(tnorm, 1e-300)
        far = np.argmax(np.abs(theta - shift))
        if abs(nu[far]) > zero_tol or k >= n - 2:
            order = np.argsort(theta)
            return theta[order], nu[order], float(abs(theta[far] - shift))
        k = min(2 * k, n - 2)


def _count_below_band(op: BlockTridiag, K, mass, theta, nu, radius, zero_tol) -> int:
    """Number of eigenvalues below the zero band, by inertia of a shifted matrix."""
    band = np.abs(nu) <= zero_tol
    if not np.any(band):
        return inertia_top_down(op)[0]
    lo = float(np.min(theta[band]))
    below = theta[(theta < lo) & ~band]
    if np.any(~band & (theta > lo) & (theta < np.max(theta[band]))):
        log.warning("zero band is not contiguous in theta; counts may be ambiguous")
    floor = below.max() if below.size else -radius
    shift = 0.5 * (lo + floor)
    n = op.block_size
    diag = [D - shift * np.diag(mass[i * n : (i + 1) * n]) for i, D in enumerate(op.diag)]
    return inertia_top_down(BlockTridiag(diag, op.up))[0]


def full_2d_spectrum(point: BranchPoint, grid: PeriodGrid, M: int = 1, zero_tol: float = 1e-3) -> SpectrumSlice:
    """Two-dimensional problem ``A w = theta w`` in Q, ``N w - w = theta w`` on top.

    Negative inertia comes from a block LDL factorisation eliminating from
    the surface downwards; the zero band is resolved by shift-invert Lanczos.
    """
    op, g = _even_operator(point, grid, M)
    K = op.to_sparse()
    mass = _lumped_mass(g, op.n_levels, g.fold)
    n = g.n_rep
    top = slice((op.n_levels - 1) * n, op.n_levels * n)
    theta, nu, radius = near_zero_band(K, mass, top, g.fold * g.dq, zero_tol)
    n_zero = int(np.sum(np.abs(nu) <= zero_tol))
    n_neg = _count_below_band(op, K, mass, theta, nu, radius, zero_tol)
    return SpectrumSlice(
        t=point.t, tau=None, M=M, eigs=nu, n_negative=n_neg, n_zero=n_zero, zero_tol=zero_tol, route="2d"
    )


# ------------------------------------------------------ period M splitting


def subharmonic_spectrum(
    point: BranchPoint, grid: PeriodGrid, curve: DispersionCurve, M: int, zero_tol: float = 1e-3
) -> dict[int, SpectrumSlice]:
    """Spectrum of the ``M Lambda0``-periodic even problem split by Floquet index.

    ``k = 0`` is the even base-period problem; ``k = 1..(M-1)/2`` are full
    Floquet problems at ``tau = k tau_* / M`` (each carrying the even
    combination of the exponents ``+-tau``).
    """
    _check_prime(M)
    out = {0: replace_k(dn_spectrum(point, grid, None, 1, zero_tol), 0, M)}
    for k in range(1, (M - 1) // 2 + 1):
        s = dn_spectrum(point, grid, k * curve.tau_star / M, 1, zero_tol)
        out[k] = replace_k(s, k, M)
    return out


def replace_k(s: SpectrumSlice, k: int, M: int) -> SpectrumSlice:
    return SpectrumSlice(
        t=s.t, tau=s.tau, M=M, eigs=s.eigs, n_negative=s.n_negative, n_zero=s.n_zero, zero_tol=s.zero_tol,
        route=s.route, k=k,
    )


def union_eigs(parts: dict[int, SpectrumSlice]) -> np.ndarray:
    return np.sort(np.concatenate([p.eigs for p in parts.values()]))


# ------------------------------------------------------- translation mode


def translation_defect(point: BranchPoint, grid: PeriodGrid) -> float:
    """``|A h_q| / |h_q|`` on all periodic functions, equations scaled pointwise."""
    op = assemble_periodic(point, grid)
    Hf, DH = _full(point.field, grid)
    v = DH[:, 1:].T.reshape(-1)
    nv = np.linalg.norm(v)
    if nv <= 1e-12 * np.linalg.norm(Hf):
        # q-independent field: h_q vanishes identically
        return 0.0
    r = op.matvec(v).real
    scale = np.tile(np.full(grid.n_full, grid.dq * grid.dp), (grid.n_p - 1, 1))
    scale[-1] = grid.dq
    return float(np.linalg.norm(r / scale.reshape(-1)) / nv)


def translation_floor(point: BranchPoint, grid: PeriodGrid) -> float:
    """Round-off level of :func:`translation_defect`.

    ``h_q`` carries spectral-differentiation noise of size ``eps k_max |h|``
    per level; the floor is that noise pushed through ``|A|`` with the same
    scaling as the defect.
    """
    op = assemble_periodic(point, grid)
    Hf, DH = _full(point.field, grid)
    v = DH[:, 1:].T.reshape(-1)
    nv = max(np.linalg.norm(v), 1e-300)
    k_max = math.pi * grid.n_full / grid.period
    noise = np.finfo(float).eps * k_max * np.abs(Hf[:, 1:]).max(axis=0)
    absop = BlockTridiag([np.abs(D) for D in op.diag], [np.abs(U) for U in op.up])
    r = absop.matvec(np.repeat(noise, grid.n_full))
    scale = np.tile(np.full(grid.n_full, grid.dq * grid.dp), (grid.n_p - 1, 1))
    scale[-1] = grid.dq
    return float(np.linalg.norm(r / scale.reshape(-1)) / nv)


# --------------------------------------------------------- crossings


@dataclass(frozen=True)
class BifurcationEvent:
    t_lo: float
    t_hi: float
    M: int
    k: int
    crossing: int
    kind: str
    index_lo: int
    index_hi: int
    overlap: bool = False

    def to_dict(self) -> dict:
        return {
            "t_lo": self.t_lo,
            "t_hi": self.t_hi,
            "M": self.M,
            "k": self.k,
            "crossing": self.crossing,
            "kind": self.kind,
            "index_lo": self.index_lo,
            "index_hi": self.index_hi,
            "overlap": self.overlap,
        }


def _kind(k: int, M: int) -> str:
    return "harmonic" if k % M == 0 else "subharmonic"


def crossings_from_counts(
    ts: Sequence[float],
    counts: dict[int, Sequence[tuple[int, int]]],
    M: int,
    indices: Sequence[int] | None = None,
) -> list[BifurcationEvent]:
    """Events from per-component ``(n_negative, n_zero)`` sequences along ``t``.

    Counts are compared only between points whose zero band is empty, so an
    eigenvalue lingering near zero is not reported twice.  A component that
    starts at ``t = 0`` with ``z`` zero-band eigenvalues, ``a`` of which are
    negative at the first clean point, yields ``chi = 2 a - z`` there.
    """
    indices = list(range(len(ts))) if indices is None else list(indices)
    events = []
    k0 = counts.get(0)

    def overlapping(k, i, j):
        if k % M == 0 or k0 is None:
            return False
        return any(k0[m][1] > 0 for m in range(i, j + 1))

    for k, seq in sorted(counts.items()):
        clean = [i for i, (_, z) in enumerate(seq) if z == 0]
        segments = []
        if seq[0][1] > 0 and ts[0] == 0.0:
            if clean:
                c = clean[0]
                a = seq[c][0] - seq[0][0]
                segments.append((0, c, 2 * a - seq[0][1]))
            else:
                log.info("component k=%d never leaves the zero band; primary event unresolved", k)
        for i, j in zip(clean[:-1], clean[1:]):
            segments.append((i, j, seq[j][0] - seq[i][0]))
        if clean and clean[-1] != len(seq) - 1:
            log.info("component k=%d ends inside the zero band", k)
        for i, j, chi in segments:
            if chi == 0:
                continue
            events.append(
                BifurcationEvent(
                    t_lo=float(ts[i]),
                    t_hi=float(ts[j]),
                    M=M,
                    k=k,
                    crossing=int(chi),
                    kind=_kind(k, M),
                    index_lo=indices[i],
                    index_hi=indices[j],
                    overlap=overlapping(k, i, j),
                )
            )
    return events


def component_counts(
    point: BranchPoint, grid: PeriodGrid, curve: DispersionCurve, M: int, zero_tol: float
) -> dict[int, SpectrumSlice]:
    if M == 1:
        return {0: replace_k(dn_spectrum(point, grid, None, 1, zero_tol), 0, 1)}
    return subharmonic_spectrum(point, grid, curve, M, zero_tol)


def detect_crossings(
    branch: Sequence[BranchPoint],
    grid: PeriodGrid,
    curve: DispersionCurve,
    M: int,
    zero_tol: float,
    refine: Callable[[BranchPoint, BranchPoint], BranchPoint] | None = None,
    max_depth: int = 8,
    slices: list[dict[int, SpectrumSlice]] | None = None,
) -> tuple[list[BifurcationEvent], list[dict[int, SpectrumSlice]]]:
    """Crossing events along a branch for period multiplier ``M``.

    ``refine(a, b)`` may return an intermediate branch point; it is used to
    split steps where a component's negative count jumps by more than one.
    """
    _check_prime(M)
    if len(branch) < 2:
        raise DomainError("need at least two branch points")
    pts = list(branch)
    if slices is None:
        slices = [component_counts(bp, grid, curve, M, zero_tol) for bp in pts]
    else:
        slices = list(slices)
    if refine is not None:
        i = 0
        depth = {}
        while i < len(pts) - 1:
            jump = max(abs(slices[i + 1][k].n_negative - slices[i][k].n_negative) for k in slices[i])
            d = depth.get(i, 0)
            if jump > 1 and d < max_depth:
                mid = refine(pts[i], pts[i + 1])
                pts.insert(i + 1, mid)
                slices.insert(i + 1, component_counts(mid, grid, curve, M, zero_tol))
                depth = {j + (1 if j > i else 0): v for j, v in depth.items()}
                depth[i] = d + 1
                depth[i + 1] = d + 1
                continue
            i += 1
    ts = [bp.t for bp in pts]
    counts = {k: [(s[k].n_negative, s[k].n_zero) for s in slices] for k in slices[0]}
    events = crossings_from_counts(ts, counts, M, [bp.index for bp in pts])
    return events, slices


def t0_margin(ss: StreamSolution, curve: DispersionCurve, M: int, n_range: int = 3) -> float:
    """Smallest predicted ``|kappa sigma(k tau_*/M + n tau_*)|`` over ``k != 0 mod M``."""
    from .dispersion import sigma

    vals = [
        abs(ss.kappa * sigma(ss, k * curve.tau_star / M + n * curve.tau_star))
        for k in range(1, (M - 1) // 2 + 1)
        for n in range(-n_range, n_range + 1)
    ]
    return min(vals) if vals else math.inf
