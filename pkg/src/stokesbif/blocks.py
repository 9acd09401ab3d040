"""Hermitian block-tridiagonal matrices over p-levels.

Level ``i`` couples only to ``i - 1`` and ``i + 1``.  ``diag[i]`` is the
diagonal block and ``up[i]`` the block in row ``i``, column ``i + 1``; the
block below the diagonal is its conjugate transpose.  The last level is the
free surface.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse

from .errors import NumericalError, SingularInteriorError


@dataclass
class BlockTridiag:
    diag: list[np.ndarray]
    up: list[np.ndarray]

    @property
    def n_levels(self) -> int:
        return len(self.diag)

    @property
    def block_size(self) -> int:
        return self.diag[0].shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        n = self.n_levels * self.block_size
        return n, n

    @property
    def dtype(self):
        return np.result_type(*self.diag, *self.up)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        b = self.block_size
        X = np.asarray(x).reshape(self.n_levels, b)
        Y = np.empty_like(X, dtype=np.result_type(X, self.dtype))
        for i, D in enumerate(self.diag):
            Y[i] = D @ X[i]
        for i, U in enumerate(self.up):
            Y[i] += U @ X[i + 1]
            Y[i + 1] += U.conj().T @ X[i]
        return Y.reshape(-1)

    def to_sparse(self) -> sparse.csr_matrix:
        L = self.n_levels
        rows = [[None] * L for _ in range(L)]
        for i, D in enumerate(self.diag):
            rows[i][i] = sparse.csr_matrix(D)
        for i, U in enumerate(self.up):
            rows[i][i + 1] = sparse.csr_matrix(U)
            rows[i + 1][i] = sparse.csr_matrix(U.conj().T)
        return sparse.bmat(rows, format="csr")

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def hermitian_defect(self) -> float:
        """Relative size of the antihermitian part of the diagonal blocks."""
        num = max(np.max(np.abs(D - D.conj().T)) for D in self.diag)
        return float(num / max(self.norm(), 1e-300))

    def norm(self) -> float:
        return float(max(np.max(np.abs(D)) for D in self.diag + self.up))


def _inertia(eigs: np.ndarray) -> tuple[int, int]:
    return int(np.sum(eigs < 0.0)), int(np.sum(eigs == 0.0))


def schur_to_top(bt: BlockTridiag) -> np.ndarray:
    """Eliminate levels bottom-up and return the surface Schur complement.

    Every interior pivot must be positive definite; a failed Cholesky
    factorisation means the Dirichlet interior problem is singular or
    indefinite.
    """
    S = bt.diag[0]
    for i in range(1, bt.n_levels):
        try:
            c = linalg.cho_factor(S, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise SingularInteriorError(f"interior pivot at level {i} is not positive definite") from exc
        U = bt.up[i - 1]
        S = bt.diag[i] - U.conj().T @ linalg.cho_solve(c, U, check_finite=False)
    return 0.5 * (S + S.conj().T)


def inertia_top_down(bt: BlockTridiag) -> tuple[int, np.ndarray]:
    """Negative inertia of the full matrix by block LDL from the surface down.

    Returns the negative count and the eigenvalues of the final (bottom)
    pivot, whose small members flag near-singularity.
    """
    T = bt.diag[-1]
    n_neg = 0
    for i in range(bt.n_levels - 2, -1, -1):
        T = 0.5 * (T + T.conj().T)
        w, V = linalg.eigh(T, check_finite=False)
        if np.min(np.abs(w)) == 0.0:
            raise NumericalError(f"exactly singular pivot at level {i + 1}")
        n_neg += int(np.sum(w < 0.0))
        U = bt.up[i]
        # T^{-1} via its eigendecomposition, reused for the inertia count
        W = (V.conj().T @ U.conj().T) / w[:, None]
        T = bt.diag[i] - U @ (V @ W)
    T = 0.5 * (T + T.conj().T)
    w = linalg.eigvalsh(T, check_finite=False)
    n_neg += int(np.sum(w < 0.0))
    return n_neg, w


class BlockLU:
    """Block LU factorisation (no pivoting across levels) for repeated solves."""

    def __init__(self, bt: BlockTridiag):
        self.bt = bt
        self._piv = []
        self._G = []
        P = bt.diag[0]
        for i in range(bt.n_levels):
            if i > 0:
                L = bt.up[i - 1].conj().T
                P = bt.diag[i] - L @ self._G[i - 1]
            try:
                f = linalg.lu_factor(P, check_finite=False)
            except (linalg.LinAlgError, ValueError) as exc:
                raise NumericalError(f"singular pivot at level {i}") from exc
            if np.any(np.diag(f[0]) == 0.0):
                raise NumericalError(f"singular pivot at level {i}")
            self._piv.append(f)
            if i < bt.n_levels - 1:
                self._G.append(linalg.lu_solve(f, bt.up[i], check_finite=False))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        bt = self.bt
        b = bt.block_size
        multi = rhs.ndim == 2
        R = rhs.reshape(bt.n_levels, b, -1) if multi else rhs.reshape(bt.n_levels, b)
        Y = []
        for i in range(bt.n_levels):
            r = R[i] if i == 0 else R[i] - bt.up[i - 1].conj().T @ Y[i - 1]
            Y.append(linalg.lu_solve(self._piv[i], r, check_finite=False))
        X = [None] * bt.n_levels
        X[-1] = Y[-1]
        for i in range(bt.n_levels - 2, -1, -1):
            X[i] = Y[i] - self._G[i] @ X[i + 1]
        out = np.stack(X)
        return out.reshape(rhs.shape)
