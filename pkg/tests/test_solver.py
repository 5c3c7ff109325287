import csv

import numpy as np
import pytest
import scipy.linalg

from kirchplate import (FeSpace, MaterialTensor, assemble, build_square_mesh, classify_boundary,
                        coercivity_diagnostic, form_c, form_r, form_s, moment_nn_norm, reconstruct_moments,
                        solve_p, solve_phi, solve_plate, solve_w)
from kirchplate.boundary import BoundaryOperators
from kirchplate.errors import NotCoercive, PointOutsideElement
from kirchplate.fem.space import symcurl_from_gradient
from kirchplate.linalg import _pin_dofs
from kirchplate.solver import default_eta, dirichlet_dofs, phi_system, w_rhs, write_solution_csv
from kirchplate.verification import load

ALL_CLAMPED = dict(west="c", north="c", east="c", south="c")


def setup(level=2, k=1, tags=None, material=None):
    mesh = build_square_mesh(level)
    part = classify_boundary(mesh, tags)
    S = FeSpace(mesh, k)
    return S, part, BoundaryOperators(S, part, material)


def test_default_eta():
    assert [default_eta(k) for k in (1, 2, 3)] == [10.0, 40.0, 90.0]


def test_p_zero_load():
    S, part, _ = setup()
    assert np.all(solve_p(S, part, lambda x: np.zeros(len(x))) == 0)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_p_galerkin_orthogonality(k):
    S, part, _ = setup(3, k)
    p = solve_p(S, part, load)
    r = assemble(S, "stiffness") @ p - assemble(S, "load", f=load)
    fixed = dirichlet_dofs(S, part)
    free = np.setdiff1d(np.arange(S.ndofs), fixed)
    assert np.abs(r[free]).max() < 1e-10 * np.abs(assemble(S, "load", f=load)).max()
    assert np.all(p[fixed] == 0)


def test_phi_zero_data():
    S, part, ops = setup()
    phi = solve_phi(np.zeros(S.ndofs), ops, 10.0)
    assert np.abs(phi).max() < 1e-14


@pytest.mark.parametrize("tags", [None, dict(west="c", north="f", east="f", south="s"), ALL_CLAMPED])
@pytest.mark.parametrize("k", [1, 2])
def test_phi_system(tags, k, rng):
    S, part, ops = setup(2, k, tags, MaterialTensor(1.2, 0.3))
    eta = default_eta(k)
    p = rng.standard_normal(S.ndofs)
    system = phi_system(p, ops, eta)
    assert abs(system.A - system.A.T).max() < 1e-12
    # rhs agrees with the forms, tested against random psi
    psi = rng.standard_normal(ops.vspace.ndofs)
    g, proj = ops.geometry, ops.proj
    B = assemble(ops.vspace, "trace_symcurl", S, material=ops.material)
    xi_p = ops.extension(p)
    expect = (-(psi @ (B @ p)) - form_c(g, ops.scalar_trace(p), ops.trace(psi), ops.material, proj)
              + form_s(g, ops.chi(psi), xi_p, proj) + form_r(g, xi_p, ops.trace(psi), eta, proj))
    assert psi @ system.rhs == pytest.approx(expect, rel=1e-10, abs=1e-10)
    phi = solve_phi(p, ops, eta, system)
    assert np.abs(system.B.T @ phi).max() < 1e-9 * max(1, np.abs(phi).max())


@pytest.mark.parametrize("tags", [None, dict(west="c", north="f", east="f", south="s")])
def test_w_rhs_matches_forms(tags, rng):
    S, part, ops = setup(2, 2, tags)
    eta = 40.0
    p, q = rng.standard_normal((2, S.ndofs))
    phi = rng.standard_normal(ops.vspace.ndofs)
    vol, bnd = w_rhs(p, phi, ops, eta)
    g, proj = ops.geometry, ops.proj
    xq, xp = ops.extension(q), ops.extension(p)
    expect = (-form_s(g, ops.chi(phi), xq, proj) - form_c(g, ops.scalar_trace(p), xq, ops.material, proj)
              - form_r(g, ops.trace(phi) - xp, xq, eta, proj))
    assert q @ bnd == pytest.approx(expect, rel=1e-10, abs=1e-10)
    # volume part (M_h, q I)_{C^-1} = 2 tf (p, q) + (q I, symCurl phi)_{C^-1}
    M = assemble(S, "mass")
    B = assemble(ops.vspace, "trace_symcurl", S)
    assert q @ vol == pytest.approx(2 * (q @ (M @ p)) + phi @ (B @ q), rel=1e-12)


def test_w_zero_data():
    S, part, ops = setup()
    z = np.zeros(S.ndofs)
    assert np.all(solve_w(z, np.zeros(ops.vspace.ndofs), ops, 10.0) == 0)


def test_clamped_boundary_terms_vanish(rng):
    S, part, ops = setup(3, 2, ALL_CLAMPED)
    p = rng.standard_normal(S.ndofs)
    p[dirichlet_dofs(S, part)] = 0.0  # p_h lies in S_{h,0}
    phi = rng.standard_normal(ops.vspace.ndofs)
    _, bnd = w_rhs(p, phi, ops, 40.0)
    assert np.abs(bnd).max() < 1e-12
    sol = solve_plate(build_square_mesh(3), part, 2, load)
    assert np.abs(sol.w_boundary_rhs).max() < 1e-12


def test_reconstruct_examples(rng):
    mesh = build_square_mesh(2)
    S, V = FeSpace(mesh, 2), FeSpace(mesh, 2, 2)
    M = reconstruct_moments(S, np.ones(S.ndofs), np.zeros(V.ndofs))
    x = mesh.nodes[mesh.elements[5]].mean(axis=0)
    assert np.allclose(M(5, x), np.eye(2), atol=1e-14)
    M = reconstruct_moments(S, np.zeros(S.ndofs), V.rt0_basis() @ rng.standard_normal(3))
    assert np.abs(M(5, x)).max() < 1e-13
    M = reconstruct_moments(S, rng.standard_normal(S.ndofs), rng.standard_normal(V.ndofs))
    val = M(5, x)
    assert np.array_equal(val, val.T)
    with pytest.raises(PointOutsideElement):
        M(0, [0.9, 0.9])


def test_moments_match_decomposition(rng):
    mesh = build_square_mesh(2)
    S, V = FeSpace(mesh, 3), FeSpace(mesh, 3, 2)
    p, phi = rng.standard_normal(S.ndofs), rng.standard_normal(V.ndofs)
    ref = np.array([[0.2, 0.3], [0.1, 0.6]])
    got = reconstruct_moments(S, p, phi).at(ref)
    sc = symcurl_from_gradient(V.evaluate_gradient(phi, ref))
    pv = S.evaluate(p, ref)
    assert np.allclose(got[..., 0], pv + sc[..., 0]) and np.allclose(got[..., 2], sc[..., 2])


def test_scaling_linearity():
    mesh = build_square_mesh(3)
    part = classify_boundary(mesh)
    a = solve_plate(mesh, part, 2, load)
    alpha = 3.7
    b = solve_plate(mesh, part, 2, lambda x: alpha * load(x))
    for u, v in ((a.p_coeffs, b.p_coeffs), (a.phi_coeffs, b.phi_coeffs), (a.w_coeffs, b.w_coeffs)):
        assert np.abs(alpha * u - v).max() < 1e-12 * np.abs(v).max()


def test_pipeline_deterministic():
    mesh = build_square_mesh(3)
    part = classify_boundary(mesh)
    a = solve_plate(mesh, part, 2, load)
    b = solve_plate(mesh, part, 2, load)
    assert np.array_equal(a.w_coeffs, b.w_coeffs) and np.array_equal(a.phi_coeffs, b.phi_coeffs)


def test_solution_invariants():
    mesh = build_square_mesh(3)
    part = classify_boundary(mesh)
    sol = solve_plate(mesh, part, 2, load, material=MaterialTensor(1.0, 0.3))
    fixed = dirichlet_dofs(sol.space, part)
    assert np.all(sol.p_coeffs[fixed] == 0) and np.all(sol.w_coeffs[fixed] == 0)
    B = assemble(sol.vspace, "mass") @ sol.vspace.rt0_basis()
    assert np.abs(B.T @ sol.phi_coeffs).max() < 1e-9


def test_mnn_decreases():
    vals = []
    for level in range(2, 6):
        mesh = build_square_mesh(level)
        vals.append(moment_nn_norm(solve_plate(mesh, classify_boundary(mesh), 1, load)))
    assert all(b < a for a, b in zip(vals, vals[1:])), vals


def test_solution_csv(tmp_path):
    mesh = build_square_mesh(1)
    sol = solve_plate(mesh, classify_boundary(mesh), 1, load)
    path = tmp_path / "s.csv"
    write_solution_csv(path, sol)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["x", "y", "w", "p", "M11", "M12", "M22"]
    assert len(rows) == 1 + mesh.n_elements


# -- coercivity -------------------------------------------------------------------

def _dense_quotient(k, level, eta):
    S, part, ops = setup(level, k)
    V = ops.vspace
    A_vol = assemble(V, "symcurl")
    A = (A_vol + ops.nitsche_matrix(eta)).toarray()
    H = (A_vol + ops.penalty_norm_matrix()).toarray()
    free = np.setdiff1d(np.arange(V.ndofs), _pin_dofs(V.rt0_basis()))
    return scipy.linalg.eigh(A[np.ix_(free, free)], H[np.ix_(free, free)], eigvals_only=True)[0]


@pytest.mark.parametrize("k", [1, 2])
def test_coercivity_matches_dense_oracle(k):
    S, part, _ = setup(2, k)
    for eta in (0.0, default_eta(k)):
        est = coercivity_diagnostic(S, part, eta)
        assert est == pytest.approx(_dense_quotient(k, 2, eta), rel=1e-6, abs=1e-8)


def test_coercivity_default_positive_and_monotone():
    S, part, _ = setup(3, 1)
    assert coercivity_diagnostic(S, part, 10.0) > 0
    vals = [coercivity_diagnostic(S, part, c) for c in (5.0, 10.0, 20.0)]
    assert vals[0] <= vals[1] <= vals[2]


def test_eta_zero_reports_and_solver_raises():
    S, part, ops = setup(3, 1)
    est = coercivity_diagnostic(S, part, 0.0)
    assert np.isfinite(est) and est <= 0
    with pytest.raises(NotCoercive):
        solve_plate(build_square_mesh(3), part, 1, load, eta=0.0)
