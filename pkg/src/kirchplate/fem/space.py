"""Continuous Lagrange spaces, scalar or 2-vector valued."""
from __future__ import annotations

import numpy as np

from ..errors import PointOutsideElement
from ..mesh import BoundaryPartition, Mesh
from .elements import MAX_DEGREE, reference_element


class FeSpace:
    """Degree-k Lagrange space on a mesh.

    Vector spaces interleave components: DOF ``2 * i + c`` is component ``c``
    of scalar node ``i``.
    """

    def __init__(self, mesh: Mesh, degree: int = 1, components: int = 1):
        if degree < 1 or degree > MAX_DEGREE:
            raise ValueError(f"degree must be in 1..{MAX_DEGREE}, got {degree}")
        if components not in (1, 2):
            raise ValueError("components must be 1 or 2")
        self.mesh = mesh
        self.degree = degree
        self.components = components
        self.element = reference_element(mesh.kind, degree)
        self._number_dofs()

    def _number_dofs(self):
        mesh, el, k = self.mesh, self.element, self.degree
        ne = mesh.n_elements
        nv = mesh.elements.shape[1]
        dofs = np.empty((ne, el.n_local), dtype=np.int64)
        dofs[:, :nv] = mesh.elements
        n = mesh.n_nodes
        if k > 1:
            ga = mesh.elements
            gb = np.roll(mesh.elements, -1, axis=1)
            key = np.sort(np.stack([ga, gb], axis=2).reshape(-1, 2), axis=1)
            edges, eid = np.unique(key, axis=0, return_inverse=True)
            eid = eid.reshape(ne, nv)
            forward = ga < gb
            for e in range(nv):
                for j in range(k - 1):
                    jj = np.where(forward[:, e], j, k - 2 - j)
                    dofs[:, nv + e * (k - 1) + j] = n + eid[:, e] * (k - 1) + jj
            n += len(edges) * (k - 1)
            n_int = el.n_local - nv - nv * (k - 1)
            for j in range(n_int):
                dofs[:, nv + nv * (k - 1) + j] = n + np.arange(ne) * n_int + j
            n += ne * n_int
        self.scalar_elem_dofs = dofs
        self.n_scalar = n
        X, _, _ = self.geometry(el.nodes)
        coords = np.empty((n, 2))
        coords[dofs.ravel()] = X.reshape(-1, 2)
        self.scalar_dof_coords = coords

    # -- sizes and maps ---------------------------------------------------

    @property
    def ndofs(self) -> int:
        return self.n_scalar * self.components

    @property
    def elem_dofs(self) -> np.ndarray:
        if self.components == 1:
            return self.scalar_elem_dofs
        d = self.scalar_elem_dofs
        return np.stack([2 * d, 2 * d + 1], axis=2).reshape(len(d), -1)

    @property
    def dof_coords(self) -> np.ndarray:
        if self.components == 1:
            return self.scalar_dof_coords
        return np.repeat(self.scalar_dof_coords, 2, axis=0)

    def scalar(self) -> "FeSpace":
        return self if self.components == 1 else FeSpace(self.mesh, self.degree, 1)

    def vector(self) -> "FeSpace":
        return self if self.components == 2 else FeSpace(self.mesh, self.degree, 2)

    # -- geometry ---------------------------------------------------------

    def geometry(self, ref_pts, elements=None):
        """Physical points, Jacobians dx/dxi and determinants at reference points.

        Returns arrays of shapes (ne, nq, 2), (ne, nq, 2, 2), (ne, nq).
        """
        mesh = self.mesh
        ref_pts = np.atleast_2d(ref_pts)
        els = mesh.elements if elements is None else mesh.elements[elements]
        V = mesh.nodes[els]  # (ne, nv, 2)
        if mesh.kind == "triangle":
            J = np.stack([V[:, 1] - V[:, 0], V[:, 2] - V[:, 0]], axis=2)  # columns
            X = V[:, None, 0, :] + np.einsum("eij,qj->eqi", J, ref_pts)
            J = np.broadcast_to(J[:, None], (len(V), len(ref_pts), 2, 2))
        else:
            geo = reference_element("quad", 1)
            N = geo.values(ref_pts)
            dN = geo.gradients(ref_pts)
            X = np.einsum("qa,eai->eqi", N, V)
            J = np.einsum("qaj,eai->eqij", dN, V)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        return X, J, det

    def physical_gradients(self, ref_pts, elements=None):
        """Basis gradients in physical coordinates: (ne, nq, nloc, 2), plus det J."""
        _, J, det = self.geometry(ref_pts, elements)
        inv = np.empty_like(J)
        inv[..., 0, 0] = J[..., 1, 1]
        inv[..., 1, 1] = J[..., 0, 0]
        inv[..., 0, 1] = -J[..., 0, 1]
        inv[..., 1, 0] = -J[..., 1, 0]
        inv /= det[..., None, None]
        dref = self.element.gradients(ref_pts)  # (nq, nloc, 2)
        # grad_x = J^{-T} grad_xi
        return np.einsum("eqji,qaj->eqai", inv, dref), det

    def to_reference(self, element: int, point, tol=1e-10) -> np.ndarray:
        """Reference coordinates of a physical point inside ``element``."""
        point = np.asarray(point, dtype=float)
        V = self.mesh.nodes[self.mesh.elements[element]]
        if self.mesh.kind == "triangle":
            J = np.column_stack([V[1] - V[0], V[2] - V[0]])
            ref = np.linalg.solve(J, point - V[0])
        else:
            ref = np.array([0.5, 0.5])
            for _ in range(50):
                X, J, _ = self.geometry(ref, elements=[element])
                step = np.linalg.solve(J[0, 0], point - X[0, 0])
                ref = ref + step
                if np.linalg.norm(step) < 1e-14:
                    break
        if not self.element.contains(ref, tol)[0]:
            raise PointOutsideElement(f"point {point} is not in element {element}")
        return ref

    # -- boundary ---------------------------------------------------------

    def edge_dofs(self, owner, local) -> np.ndarray:
        """Scalar DOFs along element edges, ordered from the edge's first vertex."""
        owner = np.asarray(owner)
        local = np.asarray(local)
        table = np.array([self.element.edge_nodes(e) for e in range(len(self.element.local_edges))])
        return self.scalar_elem_dofs[owner[:, None], table[local]]

    def boundary_edge_dofs(self, partition: BoundaryPartition) -> np.ndarray:
        """Scalar DOFs of the ordered boundary edges, (n_edges, k + 1)."""
        mesh = self.mesh
        o = partition.order
        return self.edge_dofs(mesh.boundary_owner[o], mesh.boundary_local[o])

    def boundary_dofs(self, partition: BoundaryPartition, tags="csf") -> np.ndarray:
        """Sorted DOF indices on the closure of all boundary edges with the given tags."""
        sel = np.isin(partition.mesh_edge_tags, list(tags))
        d = np.unique(self.boundary_edge_dofs(partition)[sel])
        if self.components == 2:
            d = np.sort(np.concatenate([2 * d, 2 * d + 1]))
        return d

    # -- fields -----------------------------------------------------------

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of ``func(points) -> (n,)`` or ``(n, 2)``."""
        vals = np.asarray(func(self.scalar_dof_coords), dtype=float)
        if self.components == 1:
            return vals.reshape(self.n_scalar)
        return vals.reshape(self.n_scalar, 2).ravel()

    def rt0_basis(self) -> np.ndarray:
        """Interpolants of (1, 0), (0, 1) and (x1, x2): (ndofs, 3)."""
        if self.components != 2:
            raise ValueError("RT0 fields live in the vector space")
        x = self.scalar_dof_coords
        one, zero = np.ones(len(x)), np.zeros(len(x))
        cols = [np.column_stack([one, zero]), np.column_stack([zero, one]), x]
        return np.column_stack([c.ravel() for c in cols])

    def _local_coeffs(self, coeffs, elements):
        coeffs = np.asarray(coeffs)
        d = self.scalar_elem_dofs[elements]
        if self.components == 1:
            return coeffs[d]
        c = coeffs.reshape(-1, 2)
        return c[d]  # (ne, nloc, 2)

    def evaluate(self, coeffs, ref_pts, elements=None) -> np.ndarray:
        """Field values at reference points of each element: (ne, nq) or (ne, nq, 2)."""
        if elements is None:
            elements = np.arange(self.mesh.n_elements)
        N = self.element.values(ref_pts)
        lc = self._local_coeffs(coeffs, elements)
        if self.components == 1:
            return np.einsum("qa,ea->eq", N, lc)
        return np.einsum("qa,eac->eqc", N, lc)

    def evaluate_gradient(self, coeffs, ref_pts, elements=None) -> np.ndarray:
        """Gradients: (ne, nq, 2) for scalars, (ne, nq, 2, 2) [component, derivative] for vectors."""
        if elements is None:
            elements = np.arange(self.mesh.n_elements)
        G, _ = self.physical_gradients(ref_pts, elements)
        lc = self._local_coeffs(coeffs, elements)
        if self.components == 1:
            return np.einsum("eqai,ea->eqi", G, lc)
        return np.einsum("eqai,eac->eqci", G, lc)


def symcurl_from_gradient(grad) -> np.ndarray:
    """symCurl of a vector field from its gradient (..., 2, 2) [component, derivative].

    Curl psi has rows (d2 psi_i, -d1 psi_i).  Returned as (..., 3) = (11, 22, 12).
    """
    g = np.asarray(grad)
    s11 = g[..., 0, 1]
    s22 = -g[..., 1, 0]
    s12 = 0.5 * (g[..., 1, 1] - g[..., 0, 0])
    return np.stack([s11, s22, s12], axis=-1)


def sym_to_matrix(S) -> np.ndarray:
    S = np.asarray(S)
    return np.stack([np.stack([S[..., 0], S[..., 2]], -1), np.stack([S[..., 2], S[..., 1]], -1)], -2)


def eval_symcurl(space: FeSpace, coeffs, element: int, point) -> np.ndarray:
    """Exact symCurl of a discrete vector field at a physical point of one element."""
    if space.components != 2:
        raise ValueError("symCurl needs a vector space")
    ref = space.to_reference(element, point)
    g = space.evaluate_gradient(coeffs, ref, elements=[element])[0, 0]
    return sym_to_matrix(symcurl_from_gradient(g))
