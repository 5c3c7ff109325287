import dataclasses

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from kirchplate import FeSpace, MaterialTensor, apply_C, apply_Cinv, assemble, build_square_mesh, eval_symcurl
from kirchplate.errors import PointOutsideElement, ShapeMismatch, SingularMaterial
from kirchplate.fem.quadrature import element_rule, gauss_interval, triangle_rule

PI = np.pi


# -- quadrature ---------------------------------------------------------------

@pytest.mark.parametrize("degree", range(0, 11))
def test_triangle_rule_exact(degree):
    rule = triangle_rule(degree)
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-15)
    x, y = rule.points.T
    assert np.all(x > 0) and np.all(y > 0) and np.all(x + y < 1)
    # int x^a y^b over the reference triangle = a! b! / (a + b + 2)!
    from math import factorial
    for a in range(degree + 1):
        b = degree - a
        exact = factorial(a) * factorial(b) / factorial(a + b + 2)
        assert rule.weights @ (x ** a * y ** b) == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("n", range(1, 7))
def test_gauss_interval_exact(n):
    rule = gauss_interval(n)
    assert np.all(rule.weights > 0) and rule.weights.sum() == pytest.approx(1.0)
    for p in range(2 * n):
        assert rule.weights @ rule.points ** p == pytest.approx(1.0 / (p + 1), rel=1e-13)


# -- material -----------------------------------------------------------------

def _sym(rng, n):
    A = rng.standard_normal((n, 2, 2))
    return 0.5 * (A + A.transpose(0, 2, 1))


def test_apply_C_examples():
    N = np.array([[1.0, 2.0], [2.0, -3.0]])
    assert np.array_equal(apply_C(MaterialTensor(), N), N)
    assert np.allclose(apply_C(MaterialTensor(1.0, 1.0 / 3.0), np.eye(2)), 4.0 / 3.0 * np.eye(2), atol=1e-15)
    assert np.array_equal(apply_Cinv(MaterialTensor(), N), N)


@pytest.mark.parametrize("nu", [-0.4, 0.0, 0.3, 0.45])
def test_Cinv_identity_closed_form(nu):
    assert np.allclose(apply_Cinv(MaterialTensor(1.0, nu), np.eye(2)), np.eye(2) / (1 + nu), atol=1e-15)


@pytest.mark.parametrize("D,nu", [(1.0, 0.0), (2.5, 0.3), (0.7, -0.4), (3.0, 0.45)])
def test_Cinv_against_brute_force_inverse(D, nu):
    mat = MaterialTensor(D, nu)
    basis = [np.array([[1.0, 0], [0, 0]]), np.array([[0, 0], [0, 1.0]]), np.array([[0, 0.5], [0.5, 0]])]

    def coords(M):  # coordinates in the basis above
        return np.array([M[0, 0], M[1, 1], 2 * M[0, 1]])

    C = np.column_stack([coords(apply_C(mat, b)) for b in basis])
    Cinv = np.linalg.inv(C)
    rng = np.random.default_rng(0)
    for M in _sym(rng, 20):
        expect = sum(c * b for c, b in zip(Cinv @ coords(M), basis))
        assert np.allclose(apply_Cinv(mat, M), expect, atol=1e-13)


def test_singular_material():
    with pytest.raises(SingularMaterial):
        apply_Cinv(MaterialTensor(1.0, 1.0 - 1e-13), np.eye(2))
    with pytest.raises(SingularMaterial):
        apply_Cinv(MaterialTensor(1.0, -1.0 + 1e-13), np.eye(2))
    with pytest.raises(ValueError):
        MaterialTensor(-1.0, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.45, 0.45), st.floats(0.1, 10.0), st.integers(0, 2 ** 32 - 1))
def test_material_roundtrip_property(nu, D, seed):
    mat = MaterialTensor(D, nu)
    M = _sym(np.random.default_rng(seed), 5)
    assert np.allclose(apply_C(mat, apply_Cinv(mat, M)), M, atol=1e-12 * max(1, np.abs(M).max()))


# -- spaces ---------------------------------------------------------------------

@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("level", [0, 2, 3])
def test_dof_count(k, level):
    n = 2 ** level
    assert FeSpace(build_square_mesh(level), k).ndofs == (k * n + 1) ** 2
    assert FeSpace(build_square_mesh(level), k, 2).ndofs == 2 * (k * n + 1) ** 2


@pytest.mark.parametrize("kind,k", [("triangle", 1), ("triangle", 2), ("triangle", 3), ("quad", 1)])
def test_partition_of_unity(kind, k):
    S = FeSpace(build_square_mesh(2, kind), k)
    rule = element_rule(kind, 2 * k + 2)
    assert np.abs(S.element.values(rule.points).sum(axis=1) - 1).max() < 1e-13
    assert np.abs(S.element.gradients(rule.points).sum(axis=1)).max() < 1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_polynomials_reproduced(k):
    S = FeSpace(build_square_mesh(2), k)
    f = lambda x: (1 + x[:, 0] - 2 * x[:, 1]) ** k  # noqa: E731
    rule = element_rule("triangle", 2 * k)
    X, _, _ = S.geometry(rule.points)
    vals = S.evaluate(S.interpolate(f), rule.points)
    assert np.abs(vals - f(X.reshape(-1, 2)).reshape(vals.shape)).max() < 1e-12


@pytest.mark.parametrize("k", [2, 3])
def test_conforming_continuity(k, rng):
    S = FeSpace(build_square_mesh(2), k)
    c = rng.standard_normal(S.ndofs)
    el = S.element
    seen = {}
    for a, b in el.local_edges:
        t = np.array([0.2, 0.5, 0.7])
        ref = el.vertices[a] + t[:, None] * (el.vertices[b] - el.vertices[a])
        X, _, _ = S.geometry(ref)
        V = S.evaluate(c, ref)
        for key, v in zip(map(tuple, np.round(X.reshape(-1, 2), 10)), V.ravel()):
            if key in seen:
                assert abs(seen[key] - v) < 1e-12
            seen[key] = v


@pytest.mark.parametrize("k", [1, 2, 3])
def test_best_fit_order(k):
    u = lambda x: np.sin(PI * x[..., 0]) * np.sin(PI * x[..., 1])  # noqa: E731
    errs = []
    for level in range(3, 7):
        S = FeSpace(build_square_mesh(level), k)
        c = spla.spsolve(assemble(S, "mass").tocsc(), assemble(S, "load", f=u))
        rule = element_rule("triangle", 2 * k + 4)
        X, _, det = S.geometry(rule.points)
        d = S.evaluate(c, rule.points) - u(X)
        errs.append(np.sqrt(np.sum(np.abs(det) * rule.weights * d ** 2)))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert abs(orders[-1] - (k + 1)) < 0.15, orders


@pytest.mark.parametrize("k", [1, 2, 3])
def test_discrete_trace_inequality(k, rng):
    ratios = []
    for level in range(2, 6):
        mesh = build_square_mesh(level)
        S = FeSpace(mesh, k)
        c = rng.standard_normal(S.ndofs)
        rule = element_rule("triangle", 2 * k)
        _, _, det = S.geometry(rule.points, mesh.boundary_owner)
        vT = S.evaluate(c, rule.points, mesh.boundary_owner)
        normT = np.sum(np.abs(det) * rule.weights * vT ** 2, axis=1)
        g = gauss_interval(k + 1)
        el = S.element
        loc = np.array(el.local_edges)[mesh.boundary_local]
        ref = el.vertices[loc[:, 0]][:, None] + g.points[None, :, None] * (
            el.vertices[loc[:, 1]] - el.vertices[loc[:, 0]])[:, None]
        ve = np.array([S.evaluate(c, r, [o])[0] for r, o in zip(ref, mesh.boundary_owner)])
        he = mesh.boundary_lengths()
        norme = he * np.sum(g.weights * ve ** 2, axis=1)
        ratios.append(np.max(np.sqrt(norme / (normT / he))))
    assert max(ratios) < 10 and max(ratios) / min(ratios) < 2, ratios


# -- symCurl ----------------------------------------------------------------------

@pytest.mark.parametrize("k", [1, 2, 3])
def test_symcurl_rt0_vanishes(k, rng):
    V = FeSpace(build_square_mesh(2), k, 2)
    c = V.rt0_basis() @ rng.standard_normal(3)
    for e in range(0, V.mesh.n_elements, 5):
        x = V.mesh.nodes[V.mesh.elements[e]].mean(axis=0)
        assert np.abs(eval_symcurl(V, c, e, x)).max() < 1e-13


def test_symcurl_hand_example():
    V = FeSpace(build_square_mesh(2), 1, 2)
    c = V.interpolate(lambda x: np.column_stack([x[:, 1], 0 * x[:, 0]]))
    for e in (0, 7, 31):
        x = V.mesh.nodes[V.mesh.elements[e]].mean(axis=0)
        assert np.allclose(eval_symcurl(V, c, e, x), [[1, 0], [0, 0]], atol=1e-14)


@pytest.mark.parametrize("k", [2, 3])
def test_symcurl_finite_differences(k):
    V = FeSpace(build_square_mesh(2), k, 2)
    psi = lambda x: np.column_stack([0 * x[:, 0], x[:, 0] ** 2])  # noqa: E731
    c = V.interpolate(psi)

    def curl(x, h=1e-5):  # rows (d2 psi_i, -d1 psi_i) by central differences
        x = np.asarray(x, dtype=float)
        ex, ey = np.array([h, 0.0]), np.array([0.0, h])
        d1 = (psi((x + ex)[None]) - psi((x - ex)[None]))[0] / (2 * h)
        d2 = (psi((x + ey)[None]) - psi((x - ey)[None]))[0] / (2 * h)
        return np.column_stack([d2, -d1])

    for e in (0, 9, 20):
        x = V.mesh.nodes[V.mesh.elements[e]].mean(axis=0)
        C = curl(x)
        S = eval_symcurl(V, c, e, x)
        assert np.abs(S - 0.5 * (C + C.T)).max() < 1e-8
        assert np.allclose(S, [[0, 0], [0, -2 * x[0]]], atol=1e-12)


def test_symcurl_point_outside():
    V = FeSpace(build_square_mesh(2), 1, 2)
    with pytest.raises(PointOutsideElement):
        eval_symcurl(V, np.zeros(V.ndofs), 0, [0.9, 0.9])


# -- assembly ----------------------------------------------------------------------

def test_quad_stiffness_level0():
    S = FeSpace(build_square_mesh(0, "quad"), 1)
    K = assemble(S, "stiffness").toarray()
    assert K.shape == (4, 4)
    assert np.abs(K.sum(axis=1)).max() < 1e-14
    assert np.abs(K - K.T).max() < 1e-14


@pytest.mark.parametrize("kind,k", [("triangle", 1), ("triangle", 3), ("quad", 1)])
def test_load_sums_to_area(kind, k):
    S = FeSpace(build_square_mesh(3, kind), k)
    b = assemble(S, "load", f=lambda x: np.ones(len(x)))
    assert b.sum() == pytest.approx(4.0, abs=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_symcurl_kernel_dimension(k):
    V = FeSpace(build_square_mesh(2), k, 2)
    A = assemble(V, "symcurl").toarray()
    _, R, _ = scipy.linalg.qr(A, pivoting=True)
    d = np.abs(np.diag(R))
    assert int(np.sum(d > 1e-10 * d[0])) == V.ndofs - 3
    assert np.abs(A @ V.rt0_basis()).max() < 1e-12


@pytest.mark.parametrize("form", ["stiffness", "mass", "symcurl"])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_assembly_symmetric(form, k):
    comps = 2 if form == "symcurl" else 1
    A = assemble(FeSpace(build_square_mesh(3), k, comps), form, material=MaterialTensor(2.0, 0.3))
    assert abs(A - A.T).max() < 1e-13
    assert A.has_sorted_indices and A.has_canonical_format


def test_trace_symcurl_is_transpose_pairing(rng):
    # (p I, symCurl psi)_{C^-1} computed two ways
    mesh = build_square_mesh(2)
    S, V = FeSpace(mesh, 2), FeSpace(mesh, 2, 2)
    mat = MaterialTensor(1.5, 0.25)
    B = assemble(V, "trace_symcurl", S, material=mat)
    p, psi = rng.standard_normal(S.ndofs), rng.standard_normal(V.ndofs)
    rule = element_rule("triangle", 4)
    _, _, det = S.geometry(rule.points)
    from kirchplate.fem.space import symcurl_from_gradient
    sc = symcurl_from_gradient(V.evaluate_gradient(psi, rule.points))
    val = mat.trace_factor * S.evaluate(p, rule.points) * (sc[..., 0] + sc[..., 1])
    assert psi @ (B @ p) == pytest.approx(np.sum(np.abs(det) * rule.weights * val), rel=1e-12)


def test_shape_mismatch():
    mesh = build_square_mesh(1)
    with pytest.raises(ShapeMismatch):
        assemble(FeSpace(mesh, 1), "symcurl")
    with pytest.raises(ShapeMismatch):
        assemble(FeSpace(mesh, 1, 2), "stiffness")
    with pytest.raises(ShapeMismatch):
        assemble(FeSpace(mesh, 1), "stiffness", FeSpace(mesh, 2))


def test_assembly_independent_of_element_order(rng):
    mesh = build_square_mesh(3)
    perm = rng.permutation(mesh.n_elements)
    inv = np.argsort(perm)
    shuffled = dataclasses.replace(mesh, elements=mesh.elements[perm],
                                   boundary_owner=inv[mesh.boundary_owner])
    for k in (1, 2):
        A = assemble(FeSpace(mesh, k, 2), "symcurl")
        B = assemble(FeSpace(shuffled, k, 2), "symcurl")
        assert abs(A - B).max() < 1e-13
