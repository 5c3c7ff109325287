"""Reference Lagrange elements: P1-P3 triangles and the bilinear square."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

MAX_DEGREE = 3


class LagrangeTriangle:
    """Equispaced nodal basis of degree k on the reference triangle.

    Local node order: the three vertices, then k - 1 nodes on each local edge
    (0->1, 1->2, 2->0) listed from the first vertex to the second, then the
    interior nodes.
    """

    kind = "triangle"
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

    def __init__(self, degree: int):
        if degree not in (1, 2, 3):
            raise ValueError(f"triangle degree must be 1, 2 or 3, got {degree}")
        k = self.degree = degree
        nodes = list(self.vertices)
        for a, b in ((0, 1), (1, 2), (2, 0)):
            for j in range(1, k):
                nodes.append(self.vertices[a] + j / k * (self.vertices[b] - self.vertices[a]))
        for j in range(1, k):
            for i in range(1, k - j):
                nodes.append(np.array([i / k, j / k]))
        self.nodes = np.array(nodes)
        self.n_local = len(self.nodes)
        self.exponents = [(a, b) for a in range(k + 1) for b in range(k + 1 - a)]
        self._coef = np.linalg.inv(self._monomials(self.nodes))

    @property
    def local_edges(self):
        return ((0, 1), (1, 2), (2, 0))

    def edge_nodes(self, edge: int) -> list:
        """Local node indices along a local edge, first vertex to second."""
        k = self.degree
        a, b = self.local_edges[edge]
        return [a] + [3 + edge * (k - 1) + j for j in range(k - 1)] + [b]

    def _monomials(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([x ** a * y ** b for a, b in self.exponents])

    def values(self, pts) -> np.ndarray:
        return self._monomials(np.atleast_2d(pts)) @ self._coef

    def gradients(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        dx = np.column_stack([a * x ** max(a - 1, 0) * y ** b for a, b in self.exponents])
        dy = np.column_stack([b * x ** a * y ** max(b - 1, 0) for a, b in self.exponents])
        return np.stack([dx @ self._coef, dy @ self._coef], axis=2)

    def contains(self, ref, tol=1e-10) -> np.ndarray:
        ref = np.atleast_2d(ref)
        return (ref[:, 0] >= -tol) & (ref[:, 1] >= -tol) & (ref.sum(axis=1) <= 1 + tol)


class BilinearSquare:
    """Q1 on [0, 1]^2, nodes counterclockwise from the origin."""

    kind = "quad"
    degree = 1
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    nodes = vertices
    n_local = 4

    @property
    def local_edges(self):
        return ((0, 1), (1, 2), (2, 3), (3, 0))

    def edge_nodes(self, edge: int) -> list:
        return list(self.local_edges[edge])

    def values(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([(1 - x) * (1 - y), x * (1 - y), x * y, (1 - x) * y])

    def gradients(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        dx = np.column_stack([-(1 - y), 1 - y, y, -y])
        dy = np.column_stack([-(1 - x), -x, x, 1 - x])
        return np.stack([dx, dy], axis=2)

    def contains(self, ref, tol=1e-10) -> np.ndarray:
        ref = np.atleast_2d(ref)
        return np.all((ref >= -tol) & (ref <= 1 + tol), axis=1)


@lru_cache(maxsize=None)
def reference_element(kind: str, degree: int):
    if kind == "triangle":
        return LagrangeTriangle(degree)
    if kind == "quad":
        if degree != 1:
            raise ValueError("quadrilateral meshes support degree 1 only")
        return BilinearSquare()
    raise ValueError(f"unknown element kind {kind!r}")


@lru_cache(maxsize=None)
def _interval_coef(degree: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, degree + 1)
    return np.linalg.inv(np.vander(t, increasing=True))


def interval_lagrange(degree: int, t) -> np.ndarray:
    """Equispaced 1D Lagrange basis on [0, 1] evaluated at ``t``: (len(t), degree + 1)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.vander(t, degree + 1, increasing=True) @ _interval_coef(degree)


def interval_monomial_coef(degree: int) -> np.ndarray:
    """Map from nodal values to monomial coefficients in t on [0, 1]."""
    return _interval_coef(degree)
