"""Sparse direct solvers: symmetric positive definite and bordered systems.

The symmetric factorization is SuperLU run in symmetric mode without
off-diagonal pivoting, which makes U = D L^T; the diagonal of U then carries
the LDL^T pivots and their signs certify (in)definiteness.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NotCoercive, NotPositiveDefinite, SingularSaddle

log = logging.getLogger(__name__)

SPD_RTOL = 1e-10


class LDLFactor:
    """Symmetric factorization with fill-reducing ordering and pivot inertia."""

    def __init__(self, A):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        self.n = A.shape[0]
        if self.n == 0:
            self.pivots = np.zeros(0)
            self._lu = None
            return
        try:
            lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError as exc:  # exactly singular
            raise NotPositiveDefinite(f"factorization failed: {exc}") from exc
        if not np.array_equal(lu.perm_r, lu.perm_c):
            # SuperLU left the diagonal; treat as a breakdown of LDL^T
            raise NotPositiveDefinite("symmetric factorization needed off-diagonal pivots")
        self._lu = lu
        self.pivots = lu.U.diagonal()

    @property
    def inertia(self) -> tuple:
        """(positive, negative, zero) pivot counts."""
        scale = np.abs(self.pivots).max(initial=0.0)
        tiny = np.abs(self.pivots) <= 1e-14 * scale
        return (int(np.sum((self.pivots > 0) & ~tiny)), int(np.sum((self.pivots < 0) & ~tiny)),
                int(np.sum(tiny)))

    @property
    def positive_definite(self) -> bool:
        pos, _, _ = self.inertia
        return pos == self.n

    def solve(self, b):
        if self._lu is None:
            return np.zeros_like(b, dtype=float)
        return self._lu.solve(np.asarray(b, dtype=float))


def solve_spd(A, b, check: bool = True) -> np.ndarray:
    """Solve A x = b for symmetric positive definite sparse A.

    Raises :class:`NotPositiveDefinite` when a nonpositive pivot appears.
    One step of iterative refinement is applied if the relative residual
    exceeds ``SPD_RTOL``.
    """
    b = np.asarray(b, dtype=float)
    fac = LDLFactor(A)
    if check and not fac.positive_definite:
        pos, neg, zero = fac.inertia
        raise NotPositiveDefinite(f"pivot inertia (+{pos}, -{neg}, 0x{zero})")
    x = fac.solve(b)
    nb = np.linalg.norm(b)
    if nb > 0:
        r = b - A @ x
        if np.linalg.norm(r) > SPD_RTOL * nb:
            x = x + fac.solve(r)
    return x


# ---------------------------------------------------------------------------
# Dirichlet elimination


def eliminate_dirichlet(A, b, fixed, values=None):
    """Restrict ``A x = b`` to free DOFs with the known values moved to the rhs.

    Returns ``(A_ff, b_f, free)``; rows and columns are removed together so
    symmetry is preserved.
    """
    n = A.shape[0]
    fixed = np.asarray(fixed, dtype=np.int64)
    mask = np.ones(n, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    A = sp.csr_matrix(A)
    b_f = np.asarray(b, dtype=float)[free].copy()
    if values is not None:
        g = np.zeros(n)
        g[fixed] = values
        b_f -= (A @ g)[free]
    A_ff = A[free][:, free].tocsr()
    return A_ff, b_f, free


def solve_dirichlet(A, b, fixed, values=None) -> np.ndarray:
    """Solve an SPD system with essential conditions by elimination."""
    A_ff, b_f, free = eliminate_dirichlet(A, b, fixed, values)
    x = np.zeros(A.shape[0])
    if values is not None:
        x[np.asarray(fixed)] = values
    x[free] = solve_spd(A_ff, b_f)
    return x


def solve_penalty(A, b, fixed, values=None, penalty=1e10) -> np.ndarray:
    """Reference solve with essential conditions imposed by a large diagonal penalty."""
    fixed = np.asarray(fixed, dtype=np.int64)
    vals = np.zeros(len(fixed)) if values is None else np.asarray(values, dtype=float)
    scale = penalty * abs(A.diagonal()).max()
    P = sp.csr_matrix((np.full(len(fixed), scale), (fixed, fixed)), shape=A.shape)
    rhs = np.asarray(b, dtype=float).copy()
    rhs[fixed] += scale * vals
    return spla.spsolve(sp.csc_matrix(A + P), rhs)


# ---------------------------------------------------------------------------
# bordered systems


@dataclass
class BorderedSystem:
    """[A B; B^T 0] [x; y] = [rhs; 0] with a thin dense constraint block B.

    ``kernel`` optionally spans the null space of the symmetric matrix A
    (A @ kernel = 0); it enables the definiteness-checking solve path.
    """

    A: sp.spmatrix
    B: np.ndarray
    rhs: np.ndarray
    kernel: np.ndarray | None = None

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        if self.B.ndim == 1:
            self.B = self.B[:, None]
        n = self.A.shape[0]
        if self.B.shape[0] != n or len(self.rhs) != n:
            raise ValueError("inconsistent bordered system sizes")

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def residuals(self, x, y) -> tuple:
        r1 = self.A @ x + self.B @ y - self.rhs
        r2 = self.B.T @ x
        scale1 = max(np.linalg.norm(self.rhs), np.linalg.norm(self.A @ x), 1e-300)
        scale2 = max(np.linalg.norm(self.B) * np.linalg.norm(x), 1e-300)
        return np.linalg.norm(r1) / scale1, np.linalg.norm(r2) / scale2


def _pin_dofs(K: np.ndarray) -> np.ndarray:
    _, _, piv = scipy.linalg.qr(K.T, pivoting=True, mode="economic")
    return np.sort(piv[: K.shape[1]])


def solve_bordered(system: BorderedSystem):
    """Solve the bordered system, returning ``(x, multipliers)``.

    Without a kernel the full saddle matrix is factored with pivoting
    (:class:`SingularSaddle` on breakdown).  With a kernel K of A, as many DOFs
    as K has columns are pinned so that the remaining block is symmetric
    positive definite exactly when A is coercive on ker B^T; a nonpositive
    pivot raises :class:`NotCoercive`.  The pinned solution is then shifted
    along K to satisfy the constraint.
    """
    A = sp.csr_matrix(system.A)
    B, f = system.B, np.asarray(system.rhs, dtype=float)
    n, m = B.shape

    if system.kernel is None:
        K = sp.bmat([[A, sp.csr_matrix(B)], [sp.csr_matrix(B.T), None]], format="csc")
        try:
            lu = spla.splu(K)
        except RuntimeError as exc:
            raise SingularSaddle(f"bordered factorization failed: {exc}") from exc
        rhs = np.concatenate([f, np.zeros(m)])
        sol = lu.solve(rhs)
        sol = sol + lu.solve(rhs - K @ sol)
        if not np.all(np.isfinite(sol)):
            raise SingularSaddle("bordered solve produced non-finite values")
        x, y = sol[:n], sol[n:]
    else:
        Z = np.asarray(system.kernel, dtype=float)
        BtZ = B.T @ Z
        try:
            # multipliers from Z^T (A x + B y) = Z^T f with A Z = 0
            y = np.linalg.solve(Z.T @ B, Z.T @ f)
        except np.linalg.LinAlgError as exc:
            raise SingularSaddle("constraints do not control the kernel") from exc
        g = f - B @ y
        J = _pin_dofs(Z)
        mask = np.ones(n, dtype=bool)
        mask[J] = False
        free = np.flatnonzero(mask)
        A_ff = A[free][:, free]
        try:
            fac = LDLFactor(A_ff)
        except NotPositiveDefinite as exc:
            raise NotCoercive(str(exc)) from exc
        if not fac.positive_definite:
            pos, neg, zero = fac.inertia
            raise NotCoercive(f"form is not coercive on the quotient: pivot inertia (+{pos}, -{neg}, 0x{zero})")
        xp = np.zeros(n)
        xp[free] = fac.solve(g[free])
        r = g - A @ xp
        xp[free] += fac.solve(r[free])
        x = xp - Z @ np.linalg.solve(BtZ, B.T @ xp)

    r1, r2 = system.residuals(x, y)
    if not (r1 < 1e-9 and r2 < 1e-9):
        log.warning("bordered solve residuals %.2e, %.2e", r1, r2)
    return x, y


def export_matrix_market(path, A, comment: str = "") -> None:
    """Write a sparse matrix in Matrix Market format for external checks."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment)
