"""Vectorized element-loop assembly of the volume forms."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import ShapeMismatch
from .material import MaterialTensor, cinv_inner
from .quadrature import QuadRule, element_rule

FORMS = ("stiffness", "mass", "symcurl", "trace_symcurl", "load")


def default_rule(space, extra: int = 0) -> QuadRule:
    deg = 2 * space.degree + extra
    if space.mesh.kind == "quad":
        deg += 2
    return element_rule(space.mesh.kind, deg)


def vector_symcurl_basis(G) -> np.ndarray:
    """symCurl (11, 22, 12) of interleaved vector basis functions.

    ``G`` holds scalar basis gradients (ne, nq, nloc, 2); result is
    (ne, nq, 2 * nloc, 3).
    """
    ne, nq, nloc, _ = G.shape
    S = np.zeros((ne, nq, nloc, 2, 3))
    S[..., 0, 0] = G[..., 1]         # phi e1: d2 phi
    S[..., 0, 2] = -0.5 * G[..., 0]  #         -d1 phi / 2
    S[..., 1, 1] = -G[..., 0]        # phi e2: -d1 phi
    S[..., 1, 2] = 0.5 * G[..., 1]   #          d2 phi / 2
    return S.reshape(ne, nq, 2 * nloc, 3)


def _scatter(rows, cols, vals, shape):
    r = np.broadcast_to(rows[:, :, None], vals.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], vals.shape).ravel()
    A = sp.coo_matrix((vals.ravel(), (r, c)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble(space, form: str, trial_space=None, material: MaterialTensor | None = None,
             rule: QuadRule | None = None, f=None):
    """Assemble a registered volume form.

    Bilinear forms return a CSR matrix with rows indexed by ``space`` (test)
    and columns by ``trial_space`` (defaults to ``space``):

    * ``stiffness``: (grad u, grad v), scalar spaces
    * ``mass``: (u, v), scalar or vector
    * ``symcurl``: (symCurl phi, symCurl psi)_{C^-1}, vector spaces
    * ``trace_symcurl``: (p I, symCurl psi)_{C^-1}, vector test, scalar trial
    * ``load``: (f, v) with ``f(points) -> values``; returns a dense vector
    """
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")
    trial = space if trial_space is None else trial_space
    material = material or MaterialTensor()
    if trial.mesh is not space.mesh or trial.degree != space.degree:
        raise ShapeMismatch("test and trial spaces must share mesh and degree")
    needs = {"stiffness": (1, 1), "symcurl": (2, 2), "trace_symcurl": (2, 1)}
    if form in needs and (space.components, trial.components) != needs[form]:
        raise ShapeMismatch(f"{form} needs (test, trial) components {needs[form]}")
    if form == "mass" and space.components != trial.components:
        raise ShapeMismatch("mass needs equal component counts")

    rule = rule or default_rule(space, extra=2 if form == "load" else 0)
    G, det = space.physical_gradients(rule.points)
    wdet = np.abs(det) * rule.weights[None, :]
    N = space.element.values(rule.points)  # (nq, nloc)

    if form == "load":
        X, _, _ = space.geometry(rule.points)
        fv = np.asarray(f(X.reshape(-1, 2)), dtype=float).reshape(X.shape[:2] + (-1,))
        if space.components == 1:
            loc = np.einsum("eq,qa->ea", wdet * fv[..., 0], N)
        else:
            loc = np.einsum("eq,eqc,qa->eac", wdet, fv, N).reshape(len(wdet), -1)
        return np.bincount(space.elem_dofs.ravel(), loc.ravel(), minlength=space.ndofs)

    if form == "stiffness":
        loc = np.einsum("eq,eqai,eqbi->eab", wdet, G, G)
    elif form == "mass":
        loc = np.einsum("eq,qa,qb->eab", wdet, N, N)
        if space.components == 2:
            ne, n = loc.shape[:2]
            full = np.zeros((ne, n, 2, n, 2))
            full[:, :, 0, :, 0] = loc
            full[:, :, 1, :, 1] = loc
            loc = full.reshape(ne, 2 * n, 2 * n)
    elif form == "symcurl":
        S = vector_symcurl_basis(G)
        CS = cinv_inner(material, S[:, :, :, None, :], S[:, :, None, :, :])
        loc = np.einsum("eq,eqab->eab", wdet, CS)
    else:  # trace_symcurl
        S = vector_symcurl_basis(G)
        trS = S[..., 0] + S[..., 1]
        loc = material.trace_factor * np.einsum("eq,eqa,qb->eab", wdet, trS, N)
    return _scatter(space.elem_dofs, trial.elem_dofs, loc, (space.ndofs, trial.ndofs))
