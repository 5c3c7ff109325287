"""Boundary machinery of the decoupled method.

Boundary fields are handled in two representations:

* :class:`BoundaryPolyField`, exact per-edge polynomials in the local edge
  coordinate ``t`` in [0, 1] (monomial coefficients), used for the extension
  trace psi_Gamma[q];
* arrays of values at the edge quadrature points, shape ``(..., n_be, nq, 2)``,
  on which the Clement-type projection, the filter and the boundary forms act.

All boundary mesh edges are taken in the counterclockwise order of the
:class:`~kirchplate.mesh.BoundaryPartition`, which starts at x_B and ends with
the fixed clamped edge E.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AmbiguousCompatibility, DegenerateComponent, NonpositivePenalty
from .fem.elements import interval_lagrange, interval_monomial_coef
from .fem.assembly import vector_symcurl_basis
from .fem.material import MaterialTensor
from .fem.quadrature import gauss_interval
from .fem.space import FeSpace
from .mesh import BoundaryPartition

GRAM_RCOND = 1e-12


class BoundaryGeometry:
    """Ordered boundary edges with their Gauss rule (``degree + 2`` points)."""

    def __init__(self, partition: BoundaryPartition, degree: int, n_points: int | None = None):
        self.partition = partition
        self.degree = degree
        rule = gauss_interval(n_points or degree + 2)
        self.t = rule.points
        self.w = rule.weights
        P = partition.mesh.nodes[partition.edges()]
        self.a, self.b = P[:, 0], P[:, 1]
        d = self.b - self.a
        self.h = np.linalg.norm(d, axis=1)
        self.tangent = d / self.h[:, None]
        self.normal = np.column_stack([self.tangent[:, 1], -self.tangent[:, 0]])
        self.sigma0 = partition.sigma[:-1]
        self.points = self.a[:, None] + self.t[None, :, None] * d[:, None]
        self.sigma_q = self.sigma0[:, None] + self.t[None] * self.h[:, None]
        self.weights = self.h[:, None] * self.w[None]
        self.domain_edge = np.asarray(partition.domain_edge_of)
        self.tags = np.asarray(partition.mesh_edge_tags, dtype="<U1")
        self.on_E = self.domain_edge == partition.fixed_edge % len(partition.domain_edges)

    @property
    def n_edges(self) -> int:
        return len(self.h)

    @property
    def nq(self) -> int:
        return len(self.t)

    @property
    def size(self) -> int:
        """Length of a flattened quadrature-point vector field."""
        return self.n_edges * self.nq * 2

    def mask(self, tags: str) -> np.ndarray:
        return np.isin(self.tags, list(tags))

    def integrate(self, values) -> np.ndarray:
        """Boundary integral of scalar quadrature values (..., n_be, nq)."""
        return np.einsum("...eq,eq->...", values, self.weights)


@dataclass
class BoundaryPolyField:
    """R^2-valued piecewise polynomial on the ordered boundary edges.

    ``coeffs`` has shape ``(..., n_be, deg + 1, 2)``; the value on edge ``e``
    at local coordinate ``t`` is ``sum_j coeffs[e, j] t**j``.  Leading axes
    batch several fields.
    """

    geometry: BoundaryGeometry
    coeffs: np.ndarray
    continuous: bool = True

    @property
    def degree(self) -> int:
        return self.coeffs.shape[-2] - 1

    def evaluate(self, t=None) -> np.ndarray:
        """Values at local coordinates ``t`` (default: the quadrature points)."""
        t = self.geometry.t if t is None else np.atleast_1d(np.asarray(t, dtype=float))
        V = np.vander(t, self.degree + 1, increasing=True)
        return np.einsum("...ejc,qj->...eqc", self.coeffs, V)

    def derivative(self) -> "BoundaryPolyField":
        """Tangential derivative d/dsigma, edgewise."""
        j = np.arange(1, self.degree + 1)
        c = self.coeffs[..., 1:, :] * j[:, None] / self.geometry.h[:, None, None]
        if c.shape[-2] == 0:
            c = np.zeros_like(self.coeffs)
        return BoundaryPolyField(self.geometry, c, continuous=False)

    def endpoint_jumps(self) -> np.ndarray:
        """Value at the start of each edge minus the value at the end of the previous one."""
        start = self.coeffs[..., 0, :]
        end = self.coeffs.sum(axis=-2)
        return start - np.roll(end, 1, axis=-2)

    def __add__(self, other):
        return BoundaryPolyField(self.geometry, _pad_add(self.coeffs, other.coeffs),
                                 self.continuous and other.continuous)

    def __mul__(self, alpha):
        return BoundaryPolyField(self.geometry, alpha * self.coeffs, self.continuous)

    __rmul__ = __mul__

    @classmethod
    def from_trace(cls, geometry: BoundaryGeometry, space: FeSpace, coeffs) -> "BoundaryPolyField":
        """Exact trace of a vector finite element field."""
        if space.components != 2:
            raise ValueError("from_trace needs a vector space")
        bed = space.boundary_edge_dofs(geometry.partition)
        nodal = np.asarray(coeffs).reshape(-1, 2)[bed]  # (n_be, k+1, 2)
        C = interval_monomial_coef(space.degree)
        return cls(geometry, np.einsum("ij,ejc->eic", C, nodal))


def _pad_add(a, b):
    n = max(a.shape[-2], b.shape[-2])
    out = np.zeros(np.broadcast_shapes(a.shape[:-2], b.shape[:-2]) + (n, 2))
    out[..., : a.shape[-2], :] += a
    out[..., : b.shape[-2], :] += b
    return out


def scalar_trace_nodes(space: FeSpace, partition: BoundaryPartition, coeffs) -> np.ndarray:
    """Nodal values of a scalar field along each ordered boundary edge: (n_be, k+1)."""
    return np.asarray(coeffs)[space.boundary_edge_dofs(partition)]


def extension_trace(geometry: BoundaryGeometry, q_nodes) -> BoundaryPolyField:
    """Extension trace psi_Gamma[q] from nodal values of q on the boundary edges.

    ``q_nodes`` has shape ``(..., n_be, m + 1)`` with equispaced nodal values
    of a degree-m trace on every edge.  On Gamma \\ E the result is the exact
    antiderivative of -q n from x_B; on E it falls linearly from its value
    at x_A to zero at x_B.
    """
    q_nodes = np.asarray(q_nodes, dtype=float)
    m = q_nodes.shape[-1] - 1
    g = geometry
    cq = q_nodes @ interval_monomial_coef(m).T
    j = np.arange(m + 1)
    integral = np.zeros(q_nodes.shape[:-1] + (m + 2,))
    integral[..., 1:] = cq / (j + 1)
    # -h_e n_e int_0^t q  on every edge, plus the offset accumulated so far
    coeffs = -(g.h[:, None] * integral)[..., None] * g.normal[:, None, :]
    inc = coeffs.sum(axis=-2)
    inc[..., g.on_E, :] = 0.0
    offset = np.cumsum(inc, axis=-2) - inc
    coeffs[..., 0, :] += offset
    E = np.flatnonzero(g.on_E)
    if len(E):
        psi_A = inc.sum(axis=-2)
        dom = g.partition.domain_edges[g.partition.fixed_edge]
        lam0 = 1.0 - (g.sigma0[E] - dom.sigma_start) / dom.length
        slope = -g.h[E] / dom.length
        coeffs[..., E, :, :] = 0.0
        coeffs[..., E, 0, :] = lam0[:, None] * psi_A[..., None, :]
        coeffs[..., E, 1, :] = slope[:, None] * psi_A[..., None, :]
    return BoundaryPolyField(geometry, coeffs)


class ClementProjection:
    """Clement-type projection onto edgewise P1 fields encoding the admissible traces.

    The projection is linear and of low rank: ``Pi xi = U (V xi)`` where ``V``
    extracts the corner values from flattened quadrature values and ``U``
    interpolates them linearly along each domain edge.
    """

    def __init__(self, geometry: BoundaryGeometry):
        self.geometry = g = geometry
        part = g.partition
        self.n_corners = m = len(part.domain_edges)
        W = g.weights[..., None]
        N = g.size
        self.centroids = {}
        self.alpha_rows = {}

        def rows_on(edges_mask, vec):  # (n_be, nq, 2) functional -> (N,)
            r = np.where(edges_mask[:, None, None], W * vec, 0.0)
            return r.reshape(N)

        # RT0 projection per free component: alpha = G^-1 (int xi . b_i)
        for ci, comp in enumerate(part.free_components):
            sel = np.isin(g.domain_edge, comp)
            wq = np.where(sel[:, None], g.weights, 0.0)
            L = wq.sum()
            xbar = np.einsum("eq,eqi->i", wq, g.points) / L
            y = g.points - xbar
            basis = [np.broadcast_to([1.0, 0.0], y.shape), np.broadcast_to([0.0, 1.0], y.shape), y]
            G = np.array([[np.sum(wq * np.einsum("eqi,eqi->eq", bi, bj)) for bj in basis] for bi in basis])
            if np.linalg.cond(G) * GRAM_RCOND > 1.0 or L <= 0:
                raise DegenerateComponent(f"free component {ci} has a singular RT0 Gram matrix")
            R = np.stack([rows_on(sel, bi) for bi in basis])
            self.centroids[ci] = xbar
            self.alpha_rows[ci] = np.linalg.solve(G, R)  # (3, N)

        # mean normal component per simply supported edge, with the compatibility override
        self.c_rows = {}
        self.anchors = {}
        for di, dom in enumerate(part.domain_edges):
            if dom.tag != "s":
                continue
            comps = set()
            anchor = None
            for corner, other in ((di, (di - 1) % m), ((di + 1) % m, (di + 1) % m)):
                ci = part.component_of(other) if part.domain_edges[other].tag == "f" else None
                if ci is not None:
                    comps.add(ci)
                    anchor = (ci, part.corners[corner].point)
            if len(comps) > 1:
                raise AmbiguousCompatibility(
                    f"simply supported edge {di} touches two free components {sorted(comps)}")
            if anchor is not None:
                self.anchors[di] = anchor
                self.c_rows[di] = dom.normal @ self.r_rows(*anchor)
            else:
                self.c_rows[di] = rows_on(g.domain_edge == di, dom.normal) / dom.length

        # corner values
        V = np.zeros((m, 2, N))
        self.corner_kinds = []
        for i, corner in enumerate(part.corners):
            din, dout = corner.incoming, corner.outgoing
            tin, tout = part.domain_edges[din].tag, part.domain_edges[dout].tag
            if "f" in (tin, tout):
                ci = part.component_of(din if tin == "f" else dout)
                V[i] = self.r_rows(ci, corner.point)
                self.corner_kinds.append("f")
            elif tin == "s" and tout == "s":
                Nm = np.array([part.domain_edges[din].normal, part.domain_edges[dout].normal])
                V[i] = np.linalg.solve(Nm, np.stack([self.c_rows[din], self.c_rows[dout]]))
                self.corner_kinds.append("s")
            elif "s" in (tin, tout):
                ds = din if tin == "s" else dout
                V[i] = np.outer(part.domain_edges[ds].normal, self.c_rows[ds])
                self.corner_kinds.append("sc")
            else:
                self.corner_kinds.append("c")
        self.V = V.reshape(2 * m, N)

        # linear interpolation of corner values along each domain edge
        sig0 = np.array([d.sigma_start for d in part.domain_edges])
        lens = np.array([d.length for d in part.domain_edges])
        lam = (g.sigma_q - sig0[g.domain_edge][:, None]) / lens[g.domain_edge][:, None]
        U = np.zeros((g.n_edges, g.nq, 2, m, 2))
        e_idx = np.arange(g.n_edges)
        for c in range(2):
            U[e_idx, :, c, g.domain_edge, c] += 1.0 - lam
            U[e_idx, :, c, (g.domain_edge + 1) % m, c] += lam
        self.U = U.reshape(N, 2 * m)

    def r_rows(self, component: int, x) -> np.ndarray:
        """Rows (2, N) evaluating r_C(xi) at the point ``x``."""
        y = np.asarray(x, dtype=float) - self.centroids[component]
        B = np.array([[1.0, 0.0, y[0]], [0.0, 1.0, y[1]]])
        return B @ self.alpha_rows[component]

    def _flat(self, xi):
        xi = np.asarray(xi, dtype=float)
        return xi.reshape(xi.shape[:-3] + (-1,))

    def corner_values(self, xi) -> np.ndarray:
        """Corner values (..., m, 2) of Pi xi."""
        return (self._flat(xi) @ self.V.T).reshape(np.shape(xi)[:-3] + (self.n_corners, 2))

    def c_value(self, edge: int, xi) -> np.ndarray:
        """c_E; next to a free component this is r_C(x) . n_E, evaluated in that order."""
        if edge in self.anchors:
            ci, x = self.anchors[edge]
            return self.r_value(ci, xi, x) @ self.geometry.partition.domain_edges[edge].normal
        return self._flat(xi) @ self.c_rows[edge]

    def r_value(self, component: int, xi, x) -> np.ndarray:
        return self._flat(xi) @ self.r_rows(component, x).T

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return ((self._flat(xi) @ self.V.T) @ self.U.T).reshape(xi.shape)

    def filter(self, xi) -> np.ndarray:
        """(I - Pi) xi at the quadrature points."""
        return np.asarray(xi, dtype=float) - self(xi)


def clement_project(geometry: BoundaryGeometry, xi) -> np.ndarray:
    """Pi_Gamma applied to quadrature values or a :class:`BoundaryPolyField`."""
    if isinstance(xi, BoundaryPolyField):
        xi = xi.evaluate()
    return ClementProjection(geometry)(xi)


def filter_field(geometry: BoundaryGeometry, xi, projection: ClementProjection | None = None) -> np.ndarray:
    """The filter (I - Pi_Gamma) at the quadrature points."""
    if isinstance(xi, BoundaryPolyField):
        xi = xi.evaluate()
    return (projection or ClementProjection(geometry)).filter(xi)


# ---------------------------------------------------------------------------
# boundary forms on quadrature values


def sf_weights(geometry: BoundaryGeometry, scale=None) -> np.ndarray:
    """2x2 weight blocks (n_be, nq, 2, 2): w n n^T on Gamma_s, w I on Gamma_f, 0 on Gamma_c."""
    g = geometry
    w = g.weights if scale is None else g.weights * np.asarray(scale)[:, None]
    blocks = np.zeros((g.n_edges, g.nq, 2, 2))
    s = g.tags == "s"
    f = g.tags == "f"
    nn = np.einsum("ei,ej->eij", g.normal, g.normal)
    blocks[s] = w[s][..., None, None] * nn[s][:, None]
    blocks[f] = w[f][..., None, None] * np.eye(2)
    return blocks


def _pair(blocks, a, b) -> np.ndarray:
    return np.einsum("...eqi,eqij,...eqj->...", a, blocks, b)


def form_s(geometry: BoundaryGeometry, chi, target, projection: ClementProjection | None = None):
    """s = (chi . n, filter(target) . n)_{Gamma_s} + (chi, filter(target))_{Gamma_f}."""
    proj = projection or ClementProjection(geometry)
    return _pair(sf_weights(geometry), np.asarray(chi, dtype=float), proj.filter(target))


def form_c(geometry: BoundaryGeometry, q_values, target, material: MaterialTensor | None = None,
           projection: ClementProjection | None = None):
    """c(q, psi) = ((C^-1 q I) t, filter(psi))_Gamma from scalar quadrature values of q."""
    mat = material or MaterialTensor()
    proj = projection or ClementProjection(geometry)
    flux = mat.trace_factor * np.asarray(q_values)[..., None] * geometry.tangent[:, None, :]
    return np.einsum("eq,...eqi,...eqi->...", geometry.weights, flux, proj.filter(target))


def form_r(geometry: BoundaryGeometry, a, b, eta: float, projection: ClementProjection | None = None):
    """Penalty r_h(a, b) with per-edge weight eta / h_e, both arguments filtered."""
    if not eta > 0:
        raise NonpositivePenalty(f"penalty parameter must be positive, got {eta}")
    proj = projection or ClementProjection(geometry)
    blocks = sf_weights(geometry, eta / geometry.h)
    return _pair(blocks, proj.filter(a), proj.filter(b))


def dump_csv(path, geometry: BoundaryGeometry, values) -> None:
    """Write (sigma, value_x, value_y) at all boundary quadrature points."""
    vals = np.asarray(values).reshape(geometry.n_edges * geometry.nq, 2)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["sigma", "value_x", "value_y"])
        for s, (vx, vy) in zip(geometry.sigma_q.ravel(), vals):
            wr.writerow([f"{s:.6g}", f"{vx:.6g}", f"{vy:.6g}"])


# ---------------------------------------------------------------------------
# assembled operators


def _block_diag(blocks) -> sp.csr_matrix:
    nb = blocks.shape[0] * blocks.shape[1]
    i = np.arange(nb)
    rows = (2 * i[:, None, None] + np.arange(2)[None, :, None]).repeat(2, axis=2)
    cols = (2 * i[:, None, None] + np.arange(2)[None, None, :]).repeat(2, axis=1)
    return sp.csr_matrix((blocks.reshape(-1), (rows.ravel(), cols.ravel())), shape=(2 * nb, 2 * nb))


class BoundaryOperators:
    """Sparse and low-rank boundary matrices for one (space, partition, material).

    Quadrature-point vectors are flattened with index ``((e * nq) + q) * 2 + c``.

    * ``T``: trace of a vector field, ``X``: chi = (C^-1 symCurl phi) t from the
      owning element, ``Ts``: scalar trace (n_be * nq rows);
    * ``W``: the s/f weight blocks; ``W_pen`` the same scaled by 1 / h_e;
    * ``Psi``: dense extension map from scalar boundary DOFs ``ext_dofs`` to
      flattened psi_Gamma values.
    """

    def __init__(self, space: FeSpace, partition: BoundaryPartition,
                 material: MaterialTensor | None = None):
        self.vspace = space.vector()
        self.sspace = space.scalar()
        self.partition = partition
        self.material = material or MaterialTensor()
        self.geometry = g = BoundaryGeometry(partition, space.degree)
        self.proj = ClementProjection(g)
        self.W_blocks = sf_weights(g)
        self.W = _block_diag(self.W_blocks)
        self.W_pen = _block_diag(sf_weights(g, 1.0 / g.h))
        self._build_traces()
        self._build_chi()
        self._build_extension()

    # -- construction -----------------------------------------------------

    def _build_traces(self):
        g, k = self.geometry, self.sspace.degree
        bed = self.sspace.boundary_edge_dofs(self.partition)  # (n_be, k+1)
        L = interval_lagrange(k, g.t)  # (nq, k+1)
        ne, nq = g.n_edges, g.nq
        rows = np.arange(ne * nq).reshape(ne, nq)
        vals = np.broadcast_to(L, (ne, nq, k + 1))
        r = np.broadcast_to(rows[..., None], vals.shape)
        c = np.broadcast_to(bed[:, None, :], vals.shape)
        self.Ts = sp.csr_matrix((vals.ravel(), (r.ravel(), c.ravel())), shape=(ne * nq, self.sspace.ndofs))
        vr = np.concatenate([2 * r.ravel(), 2 * r.ravel() + 1])
        vc = np.concatenate([2 * c.ravel(), 2 * c.ravel() + 1])
        self.T = sp.csr_matrix((np.tile(vals.ravel(), 2), (vr, vc)), shape=(g.size, self.vspace.ndofs))
        self.boundary_edge_dofs = bed

    def owner_gradients(self):
        """Scalar basis gradients at boundary quadrature points of the owning elements.

        Returns (grads (n_be, nq, nloc, 2), owners (n_be,)).
        """
        g, space = self.geometry, self.vspace
        mesh = self.partition.mesh
        order = self.partition.order
        owners = mesh.boundary_owner[order]
        local = mesh.boundary_local[order]
        el = space.element
        G = np.empty((g.n_edges, g.nq, el.n_local, 2))
        for l, (a, b) in enumerate(el.local_edges):
            sel = np.flatnonzero(local == l)
            if len(sel) == 0:
                continue
            va, vb = el.vertices[a], el.vertices[b]
            ref = va[None] + g.t[:, None] * (vb - va)[None]
            G[sel], _ = space.physical_gradients(ref, owners[sel])
        return G, owners

    def _build_chi(self):
        g, mat = self.geometry, self.material
        G, owners = self.owner_gradients()
        S = vector_symcurl_basis(G)  # (n_be, nq, 2nloc, 3)
        tr = S[..., 0] + S[..., 1]
        Ci = S.copy()
        Ci[..., 0] -= mat.nu / (1.0 + mat.nu) * tr
        Ci[..., 1] -= mat.nu / (1.0 + mat.nu) * tr
        Ci /= mat.D * (1.0 - mat.nu)
        t = g.tangent[:, None, None, :]
        chi = np.stack([Ci[..., 0] * t[..., 0] + Ci[..., 2] * t[..., 1],
                        Ci[..., 2] * t[..., 0] + Ci[..., 1] * t[..., 1]], axis=-1)  # (n_be,nq,2nloc,2)
        dofs = self.vspace.elem_dofs[owners]  # (n_be, 2nloc)
        rows = (np.arange(g.n_edges * g.nq).reshape(g.n_edges, g.nq)[:, :, None, None] * 2
                + np.arange(2)[None, None, None, :])
        rows = np.broadcast_to(rows, chi.shape)
        cols = np.broadcast_to(dofs[:, None, :, None], chi.shape)
        X = sp.coo_matrix((chi.ravel(), (rows.ravel(), cols.ravel())), shape=(g.size, self.vspace.ndofs))
        self.X = X.tocsr()
        self.X.sum_duplicates()

    def _build_extension(self):
        g = self.geometry
        bed = self.boundary_edge_dofs
        self.ext_dofs = np.unique(bed)
        idx = np.searchsorted(self.ext_dofs, bed)
        nb = len(self.ext_dofs)
        unit = np.zeros((nb,) + bed.shape)
        e, j = np.meshgrid(np.arange(bed.shape[0]), np.arange(bed.shape[1]), indexing="ij")
        unit[idx, e, j] = 1.0
        vals = extension_trace(g, unit).evaluate()  # (nb, n_be, nq, 2)
        self.Psi = vals.reshape(nb, g.size).T.copy()

    # -- field evaluation -------------------------------------------------

    def shape_q(self, flat) -> np.ndarray:
        g = self.geometry
        return np.asarray(flat).reshape(np.shape(flat)[:-1] + (g.n_edges, g.nq, 2))

    def trace(self, phi) -> np.ndarray:
        return self.shape_q(self.T @ phi)

    def chi(self, phi) -> np.ndarray:
        return self.shape_q(self.X @ phi)

    def scalar_trace(self, q) -> np.ndarray:
        g = self.geometry
        return (self.Ts @ q).reshape(g.n_edges, g.nq)

    def extension(self, q) -> np.ndarray:
        """psi_Gamma[q] at the quadrature points for a scalar DOF vector ``q``."""
        return self.shape_q(self.Psi @ np.asarray(q)[self.ext_dofs])

    def filter(self, xi) -> np.ndarray:
        return self.proj.filter(xi)

    def c_flux(self, q) -> np.ndarray:
        """Weighted flux w (C^-1 q I) t at the quadrature points, flattened."""
        g = self.geometry
        qv = self.scalar_trace(q)
        flux = self.material.trace_factor * (g.weights * qv)[..., None] * g.tangent[:, None, :]
        return flux.reshape(-1)

    # -- assembled matrices -----------------------------------------------

    def filtered_trace_parts(self):
        """(T, P, U) with the filtered trace FT = T - U P, P = V T (sparse)."""
        P = sp.csr_matrix(self.proj.V @ self.T)
        P.eliminate_zeros()
        return self.T, P, sp.csr_matrix(self.proj.U)

    def nitsche_matrix(self, eta: float) -> sp.csr_matrix:
        """s(phi, psi) + s(psi, phi) + r_h(phi, psi) as a sparse matrix (rows: psi)."""
        if eta < 0:
            raise NonpositivePenalty(f"penalty parameter must be nonnegative, got {eta}")
        T, P, U = self.filtered_trace_parts()
        X = self.X
        WX = self.W @ X
        # FT^T W X with FT = T - U P
        S = T.T @ WX - P.T @ (U.T @ WX)
        A = S + S.T
        if eta > 0:
            Wp = eta * self.W_pen
            WT = Wp @ T
            WU = Wp @ U
            UWT = U.T @ WT
            A = A + T.T @ WT - P.T @ UWT - UWT.T @ P + P.T @ ((U.T @ WU) @ P)
        A = sp.csr_matrix(A)
        A.sum_duplicates()
        A.sort_indices()
        return A

    def filtered_trace_matrix(self) -> sp.csr_matrix:
        T, P, U = self.filtered_trace_parts()
        return sp.csr_matrix(T - U @ P)

    def penalty_norm_matrix(self) -> sp.csr_matrix:
        """FT^T W_{1/h} FT, the boundary part of the discrete norm ||.||_h^2."""
        FT = self.filtered_trace_matrix()
        return sp.csr_matrix(FT.T @ (self.W_pen @ FT))
