"""The three consecutive second-order solves and the moment reconstruction."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .boundary import BoundaryOperators
from .errors import NotPositiveDefinite
from .fem.assembly import assemble
from .fem.material import MaterialTensor
from .fem.space import FeSpace, sym_to_matrix, symcurl_from_gradient
from .linalg import BorderedSystem, LDLFactor, _pin_dofs, export_matrix_market, solve_bordered, solve_dirichlet
from .mesh import BoundaryPartition, Mesh

log = logging.getLogger(__name__)


def default_eta(degree: int) -> float:
    return 10.0 * degree ** 2


def dirichlet_dofs(space: FeSpace, partition: BoundaryPartition) -> np.ndarray:
    """DOFs on the closure of Gamma_c and Gamma_s, where p and w vanish."""
    return space.boundary_dofs(partition, "cs")


# ---------------------------------------------------------------------------
# stage 1: p


def solve_p(space: FeSpace, partition: BoundaryPartition, f, stiffness=None) -> np.ndarray:
    """Galerkin solution of (grad p, grad v) = (f, v) in S_{h,0}."""
    K = assemble(space, "stiffness") if stiffness is None else stiffness
    b = assemble(space, "load", f=f)
    return solve_dirichlet(K, b, dirichlet_dofs(space, partition))


# ---------------------------------------------------------------------------
# stage 2: phi


@dataclass
class PhiSystem:
    """Assembled phi-problem: matrix, rhs, RT0 kernel and constraint block."""

    A: sp.csr_matrix
    rhs: np.ndarray
    kernel: np.ndarray
    B: np.ndarray
    A_vol: sp.csr_matrix
    xi_p: np.ndarray  # psi_Gamma[p_h] at the boundary quadrature points

    def bordered(self) -> BorderedSystem:
        return BorderedSystem(self.A, self.B, self.rhs, kernel=self.kernel)


def phi_system(p, ops: BoundaryOperators, eta: float, A_vol=None, B_pI=None) -> PhiSystem:
    """Assemble a_{phi,h} and F_{phi,h} for given p_h."""
    V, S = ops.vspace, ops.sspace
    mat = ops.material
    A_vol = assemble(V, "symcurl", material=mat) if A_vol is None else A_vol
    B_pI = assemble(V, "trace_symcurl", S, material=mat) if B_pI is None else B_pI
    A = sp.csr_matrix(A_vol + ops.nitsche_matrix(eta))

    xi = ops.extension(p)
    fxi = ops.filter(xi).reshape(-1)
    FT = ops.filtered_trace_matrix()
    rhs = -(B_pI @ p) - FT.T @ ops.c_flux(p) + ops.X.T @ (ops.W @ fxi)
    if eta > 0:
        rhs = rhs + eta * (FT.T @ (ops.W_pen @ fxi))

    R = V.rt0_basis()
    M = assemble(V, "mass")
    return PhiSystem(A, np.asarray(rhs).ravel(), R, M @ R, A_vol, xi)


def solve_phi(p, ops: BoundaryOperators, eta: float, system: PhiSystem | None = None) -> np.ndarray:
    """phi_h in (S_h)^2 / RT0 from the bordered Nitsche system.

    Raises :class:`~kirchplate.errors.NotCoercive` when a_{phi,h} is not
    positive definite on the quotient (eta too small).
    """
    system = system or phi_system(p, ops, eta)
    phi, _ = solve_bordered(system.bordered())
    return phi


# ---------------------------------------------------------------------------
# moments


class MomentField:
    """M_h = p_h I + symCurl phi_h, evaluated elementwise."""

    def __init__(self, space: FeSpace, p, phi):
        self.sspace = space.scalar()
        self.vspace = space.vector()
        self.p = np.asarray(p)
        self.phi = np.asarray(phi)

    def at(self, ref_pts, elements=None) -> np.ndarray:
        """Components (11, 22, 12) at reference points: (ne, nq, 3)."""
        pv = self.sspace.evaluate(self.p, ref_pts, elements)
        S = symcurl_from_gradient(self.vspace.evaluate_gradient(self.phi, ref_pts, elements))
        S[..., 0] += pv
        S[..., 1] += pv
        return S

    def __call__(self, element: int, point) -> np.ndarray:
        ref = self.sspace.to_reference(element, point)
        return sym_to_matrix(self.at(ref, [element])[0, 0])


def reconstruct_moments(space: FeSpace, p, phi) -> MomentField:
    return MomentField(space, p, phi)


# ---------------------------------------------------------------------------
# stage 3: w


def w_rhs(p, phi, ops: BoundaryOperators, eta: float, B_pI=None, mass=None, xi_p=None):
    """F_{w,h} as (volume part, boundary part) vectors on the scalar space."""
    S, V = ops.sspace, ops.vspace
    mat = ops.material
    B_pI = assemble(V, "trace_symcurl", S, material=mat) if B_pI is None else B_pI
    mass = assemble(S, "mass") if mass is None else mass
    vol = 2.0 * mat.trace_factor * (mass @ p) + B_pI.T @ phi

    xi_p = ops.extension(p) if xi_p is None else xi_p
    g = ops.W @ (ops.X @ phi) + ops.c_flux(p)
    if eta > 0:
        g = g + eta * (ops.W_pen @ ops.filter(ops.trace(phi) - xi_p).reshape(-1))
    Psi_f = ops.proj.filter(ops.Psi.T.reshape(-1, ops.geometry.n_edges, ops.geometry.nq, 2))
    bnd = np.zeros(S.ndofs)
    bnd[ops.ext_dofs] = -(Psi_f.reshape(len(ops.ext_dofs), -1) @ g)
    return vol, bnd


def solve_w(p, phi, ops: BoundaryOperators, eta: float, stiffness=None, **kw) -> np.ndarray:
    """Galerkin solution of (grad w, grad q) = F_{w,h}(q) in S_{h,0}."""
    S = ops.sspace
    K = assemble(S, "stiffness") if stiffness is None else stiffness
    vol, bnd = w_rhs(p, phi, ops, eta, **kw)
    return solve_dirichlet(K, vol + bnd, dirichlet_dofs(S, ops.partition))


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class PlateSolution:
    """Coefficients of p_h, phi_h, w_h with the data that produced them."""

    space: FeSpace
    partition: BoundaryPartition
    p_coeffs: np.ndarray
    phi_coeffs: np.ndarray
    w_coeffs: np.ndarray
    eta: float
    material: MaterialTensor
    ops: BoundaryOperators = field(repr=False, default=None)
    w_boundary_rhs: np.ndarray = field(repr=False, default=None)

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh

    @property
    def vspace(self) -> FeSpace:
        return self.space.vector()

    def moments(self) -> MomentField:
        return MomentField(self.space, self.p_coeffs, self.phi_coeffs)


def solve_plate(mesh: Mesh, partition: BoundaryPartition, degree: int, f, eta: float | None = None,
                material: MaterialTensor | None = None, export_dir=None) -> PlateSolution:
    """Run the p, phi and w stages once each, in that order."""
    material = material or MaterialTensor()
    eta = default_eta(degree) if eta is None else float(eta)
    S = FeSpace(mesh, degree)
    ops = BoundaryOperators(S, partition, material)
    K = assemble(S, "stiffness")
    p = solve_p(S, partition, f, stiffness=K)
    B_pI = assemble(ops.vspace, "trace_symcurl", S, material=material)
    system = phi_system(p, ops, eta, B_pI=B_pI)
    if export_dir is not None:
        export_matrix_market(f"{export_dir}/stiffness.mtx", K, "scalar stiffness")
        export_matrix_market(f"{export_dir}/phi_matrix.mtx", system.A, "a_phi_h")
    phi = solve_phi(p, ops, eta, system=system)
    vol, bnd = w_rhs(p, phi, ops, eta, B_pI=B_pI, xi_p=system.xi_p)
    w = solve_dirichlet(K, vol + bnd, dirichlet_dofs(S, partition))
    return PlateSolution(S, partition, p, phi, w, eta, material, ops, bnd)


# ---------------------------------------------------------------------------
# diagnostics


def moment_nn_norm(solution: PlateSolution) -> float:
    """||(M_h)_nn||_{0, Gamma_s u Gamma_f}, which vanishes for the exact moments."""
    ops = solution.ops
    g = ops.geometry
    G, owners = ops.owner_gradients()
    lc = solution.phi_coeffs.reshape(-1, 2)[ops.vspace.scalar_elem_dofs[owners]]
    S = symcurl_from_gradient(np.einsum("eqai,eac->eqci", G, lc))
    pv = ops.scalar_trace(solution.p_coeffs)
    n = g.normal[:, None, :]
    mnn = S[..., 0] * n[..., 0] ** 2 + S[..., 1] * n[..., 1] ** 2 + 2 * S[..., 2] * n[..., 0] * n[..., 1] + pv
    sel = g.mask("sf")
    return float(np.sqrt(np.sum(g.weights[sel] * mnn[sel] ** 2)))


def coercivity_diagnostic(space: FeSpace, partition: BoundaryPartition, eta: float,
                          material: MaterialTensor | None = None, tol: float = 1e-8) -> float:
    """Smallest generalized Rayleigh quotient a_{phi,h}(psi, psi) / ||psi||_h^2 on the quotient.

    Both forms vanish on RT0, so the quotient is evaluated on the subspace with
    three pinned DOFs.  A positive definite pinned matrix is handled by
    inverse iteration; otherwise the most negative quotient is estimated with
    Lanczos (dense fallback for small systems).
    """
    material = material or MaterialTensor()
    ops = BoundaryOperators(space, partition, material)
    V = ops.vspace
    A_vol = assemble(V, "symcurl", material=material)
    A = sp.csr_matrix(A_vol + ops.nitsche_matrix(eta))
    H = sp.csr_matrix(A_vol + ops.penalty_norm_matrix())
    J = _pin_dofs(V.rt0_basis())
    free = np.setdiff1d(np.arange(V.ndofs), J)
    Ap = A[free][:, free].tocsc()
    Hp = H[free][:, free].tocsc()
    n = Ap.shape[0]

    try:
        fac = LDLFactor(Ap)
        definite = fac.positive_definite
    except NotPositiveDefinite:
        fac, definite = None, False

    if definite:
        x = np.random.default_rng(0).standard_normal(n)
        lam = np.inf
        for _ in range(500):
            y = fac.solve(Hp @ x)
            y /= np.sqrt(y @ (Hp @ y))
            new = y @ (Ap @ y)
            x = y
            if abs(new - lam) <= tol * abs(new):
                lam = new
                break
            lam = new
        return float(lam)

    if n <= 3000:
        vals = scipy.linalg.eigh(Ap.toarray(), Hp.toarray(), eigvals_only=True, subset_by_index=[0, 0])
        return float(vals[0])
    try:
        vals = spla.eigsh(Ap, k=1, M=Hp, which="SA", tol=1e-6, maxiter=20 * n, return_eigenvectors=False)
        return float(min(vals[0], 0.0))
    except spla.ArpackNoConvergence as exc:
        if len(exc.eigenvalues):
            return float(min(np.min(exc.eigenvalues), 0.0))
        log.warning("Lanczos did not converge; reporting the indefinite pivot certificate only")
        return -np.inf


# ---------------------------------------------------------------------------
# output


def centroid_ref(kind: str) -> np.ndarray:
    return np.array([[1.0 / 3.0, 1.0 / 3.0]]) if kind == "triangle" else np.array([[0.5, 0.5]])


def solution_table(solution: PlateSolution) -> np.ndarray:
    """Rows (x, y, w, p, M11, M12, M22) at element centroids."""
    S = solution.space
    ref = centroid_ref(S.mesh.kind)
    X, _, _ = S.geometry(ref)
    w = S.evaluate(solution.w_coeffs, ref)[:, 0]
    p = S.evaluate(solution.p_coeffs, ref)[:, 0]
    M = solution.moments().at(ref)[:, 0]
    return np.column_stack([X[:, 0, 0], X[:, 0, 1], w, p, M[:, 0], M[:, 2], M[:, 1]])


def write_solution_csv(path, solution: PlateSolution) -> None:
    rows = solution_table(solution)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "w", "p", "M11", "M12", "M22"])
        for r in rows:
            wr.writerow([f"{v:.6g}" for v in r])
