"""Manufactured solution on (-1, 1)^2, error norms and convergence studies.

The exact deflection is w = g(x) sin(pi y) with

    g(x) = (a + b x) cosh(pi x) + (c + d x) sinh(pi x) + sin(pi x) / D,

clamped at x = -1, free at x = 1 and simply supported at y = +-1, under the
load f = 4 pi^4 sin(pi x) sin(pi y).  The decomposition M = p I + symCurl phi
of the exact moments is also available in closed form, so p and phi errors do
not need a fine reference run.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingReference, SingularSystem
from .fem.material import MaterialTensor
from .fem.quadrature import element_rule, gauss_interval
from .fem.space import FeSpace, symcurl_from_gradient
from .mesh import DEFAULT_TAGS, build_square_mesh, classify_boundary, normalize_tag
from .solver import PlateSolution, default_eta, solve_plate

log = logging.getLogger(__name__)

PI = math.pi
STUDY_HEADER = ["L", "h1_w", "order_w", "l2_M", "order_M", "l2_p", "order_p", "h1_phi", "order_phi"]


def load(points) -> np.ndarray:
    """f = 4 pi^4 sin(pi x) sin(pi y)."""
    x, y = np.asarray(points)[..., 0], np.asarray(points)[..., 1]
    return 4 * PI ** 4 * np.sin(PI * x) * np.sin(PI * y)


def _hyp(n, x):
    """n-th derivatives of cosh(pi x) and sinh(pi x)."""
    ch, sh = np.cosh(PI * x), np.sinh(PI * x)
    return PI ** n * (ch if n % 2 == 0 else sh), PI ** n * (sh if n % 2 == 0 else ch)


def _g_basis(n, x) -> np.ndarray:
    """n-th derivatives of cosh, x cosh, sinh, x sinh at x: (..., 4)."""
    x = np.asarray(x, dtype=float)
    c, s = _hyp(n, x)
    c1, s1 = _hyp(n - 1, x) if n > 0 else (0.0, 0.0)
    return np.stack([c, x * c + n * c1, s, x * s + n * s1], axis=-1)


def _sin_deriv(n, x) -> np.ndarray:
    return PI ** n * np.sin(PI * x + n * PI / 2)


def solve_exact_constants(material: MaterialTensor | None = None, particular: bool = True) -> np.ndarray:
    """Constants (a, b, c, d) from the clamped and free edge conditions.

    g(-1) = 0, g'(-1) = 0, g''(1) - nu pi^2 g(1) = 0 and
    g'''(1) - (2 - nu) pi^2 g'(1) = 0.  With ``particular=False`` the
    sin(pi x) term is dropped, which leaves the homogeneous system.
    """
    mat = material or MaterialTensor()
    nu, D = mat.nu, mat.D
    scale = 1.0 / D if particular else 0.0
    rows = [
        (_g_basis(0, -1.0), _sin_deriv(0, -1.0)),
        (_g_basis(1, -1.0), _sin_deriv(1, -1.0)),
        (_g_basis(2, 1.0) - nu * PI ** 2 * _g_basis(0, 1.0), _sin_deriv(2, 1.0) - nu * PI ** 2 * _sin_deriv(0, 1.0)),
        (_g_basis(3, 1.0) - (2 - nu) * PI ** 2 * _g_basis(1, 1.0),
         _sin_deriv(3, 1.0) - (2 - nu) * PI ** 2 * _sin_deriv(1, 1.0)),
    ]
    A = np.array([r[0] for r in rows])
    rhs = -scale * np.array([r[1] for r in rows])
    if np.linalg.cond(A) > 1e14:
        raise SingularSystem("boundary-condition system for the exact constants is singular")
    return np.linalg.solve(A, rhs)


@dataclass
class ExactSolution:
    """Closed-form w, M = -C grad^2 w, p and the RT0-orthogonal phi."""

    material: MaterialTensor = field(default_factory=MaterialTensor)
    constants: np.ndarray = None
    has_decomposition = True
    rt0_shift: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.constants is None:
            self.constants = solve_exact_constants(self.material)
        if self.rt0_shift is None:
            self.rt0_shift = np.zeros(3)
            self.rt0_shift = self._rt0_projection()

    # -- one-dimensional factors -------------------------------------------

    def g(self, x, n: int = 0) -> np.ndarray:
        return _g_basis(n, x) @ self.constants + _sin_deriv(n, x) / self.material.D

    def P(self, x, n: int = 0) -> np.ndarray:
        """x-factor of p: 2 pi^2 sin(pi x) + beta sinh(pi (x + 1))."""
        beta = 2 * PI ** 2 / np.cosh(2 * PI)
        hyp = np.sinh(PI * (x + 1)) if n % 2 == 0 else np.cosh(PI * (x + 1))
        return 2 * PI ** 2 * _sin_deriv(n, x) + beta * PI ** n * hyp

    def m(self, x, n: int = 0):
        """x-factors (m11, m22, m12) of M and their n-th derivatives."""
        D, nu = self.material.D, self.material.nu
        m11 = -D * (self.g(x, n + 2) - nu * PI ** 2 * self.g(x, n))
        m22 = -D * (-PI ** 2 * self.g(x, n) + nu * self.g(x, n + 2))
        m12 = -D * (1 - nu) * PI * self.g(x, n + 1)
        return m11, m22, m12

    def _G(self, x, n: int = 0):
        m11, _, m12 = self.m(x, n + 1)
        return (m11 - self.P(x, n + 1)) / PI ** 2 - 2 * self.m(x, n)[2] / PI

    # -- fields ----------------------------------------------------------------

    @staticmethod
    def _xy(points):
        pts = np.asarray(points, dtype=float)
        return pts[..., 0], pts[..., 1]

    def w(self, points) -> np.ndarray:
        x, y = self._xy(points)
        return self.g(x) * np.sin(PI * y)

    def grad_w(self, points) -> np.ndarray:
        x, y = self._xy(points)
        return np.stack([self.g(x, 1) * np.sin(PI * y), PI * self.g(x) * np.cos(PI * y)], axis=-1)

    def hess_w(self, points) -> np.ndarray:
        """(w_xx, w_yy, w_xy)."""
        x, y = self._xy(points)
        s, c = np.sin(PI * y), np.cos(PI * y)
        return np.stack([self.g(x, 2) * s, -PI ** 2 * self.g(x) * s, PI * self.g(x, 1) * c], axis=-1)

    def w_derivative(self, points, i: int, j: int) -> np.ndarray:
        """d^i/dx^i d^j/dy^j w."""
        x, y = self._xy(points)
        return self.g(x, i) * _sin_deriv(j, y)

    def M(self, points) -> np.ndarray:
        """Moments (M11, M22, M12)."""
        x, y = self._xy(points)
        m11, m22, m12 = self.m(x)
        s, c = np.sin(PI * y), np.cos(PI * y)
        return np.stack([m11 * s, m22 * s, m12 * c], axis=-1)

    def p(self, points) -> np.ndarray:
        x, y = self._xy(points)
        return self.P(x) * np.sin(PI * y)

    def grad_p(self, points) -> np.ndarray:
        x, y = self._xy(points)
        return np.stack([self.P(x, 1) * np.sin(PI * y), PI * self.P(x) * np.cos(PI * y)], axis=-1)

    def _phi_raw(self, points):
        x, y = self._xy(points)
        s, c = np.sin(PI * y), np.cos(PI * y)
        m11, _, _ = self.m(x)
        n11 = m11 - self.P(x)
        dn11 = self.m(x, 1)[0] - self.P(x, 1)
        G, dG = self._G(x), self._G(x, 1)
        phi = np.stack([-n11 * c / PI, -G * s], axis=-1)
        grad = np.stack([np.stack([-dn11 * c / PI, n11 * s], -1), np.stack([-dG * s, -PI * G * c], -1)], -2)
        return phi, grad

    def phi(self, points) -> np.ndarray:
        phi, _ = self._phi_raw(points)
        a1, a2, b = self.rt0_shift
        pts = np.asarray(points, dtype=float)
        return phi - np.stack([a1 + b * pts[..., 0], a2 + b * pts[..., 1]], axis=-1)

    def grad_phi(self, points) -> np.ndarray:
        """[component, derivative]."""
        _, grad = self._phi_raw(points)
        return grad - self.rt0_shift[2] * np.eye(2)

    def G_residual(self, x) -> np.ndarray:
        """G' - n22, which vanishes when symCurl phi = M - p I."""
        return self._G(x, 1) - (self.m(x)[1] - self.P(x))

    def _rt0_projection(self) -> np.ndarray:
        """Coefficients (a1, a2, b) of the L2 projection of phi onto RT0."""
        r = gauss_interval(40)
        t = 2 * r.points - 1
        X, Y = np.meshgrid(t, t, indexing="ij")
        W = np.outer(2 * r.weights, 2 * r.weights)
        pts = np.stack([X, Y], axis=-1)
        phi, _ = self._phi_raw(pts)
        basis = [np.stack([np.ones_like(X), np.zeros_like(X)], -1),
                 np.stack([np.zeros_like(X), np.ones_like(X)], -1), pts]
        G = np.array([[np.sum(W * np.sum(bi * bj, -1)) for bj in basis] for bi in basis])
        rhs = np.array([np.sum(W * np.sum(phi * bi, -1)) for bi in basis])
        return np.linalg.solve(G, rhs)

    # -- checks --------------------------------------------------------------

    def bc_residuals(self, n: int = 100) -> dict:
        """Maximum boundary-condition residuals over ``n`` sample points per edge."""
        y = np.linspace(-1, 1, n)
        x = np.linspace(-1, 1, n)
        west = np.column_stack([-np.ones(n), y])
        east = np.column_stack([np.ones(n), y])
        south = np.column_stack([x, -np.ones(n)])
        north = np.column_stack([x, np.ones(n)])
        shear = self.dM11_dx(east) + 2 * self.dM12_dy(east)
        return {
            "clamped_w": np.abs(self.w(west)).max(),
            "clamped_dwdn": np.abs(self.grad_w(west)[:, 0]).max(),
            "free_Mnn": np.abs(self.M(east)[:, 0]).max(),
            "free_shear": np.abs(shear).max(),
            "simple_w": max(np.abs(self.w(south)).max(), np.abs(self.w(north)).max()),
            "simple_Mnn": max(np.abs(self.M(south)[:, 1]).max(), np.abs(self.M(north)[:, 1]).max()),
        }

    def dM11_dx(self, points) -> np.ndarray:
        x, y = self._xy(points)
        return self.m(x, 1)[0] * np.sin(PI * y)

    def dM12_dy(self, points) -> np.ndarray:
        x, y = self._xy(points)
        return -PI * self.m(x)[2] * np.sin(PI * y)


# ---------------------------------------------------------------------------
# error norms


def _point_values(space: FeSpace, coeffs, points):
    """Values and gradients of a finite element field at physical points (square meshes)."""
    mesh = space.mesh
    el = mesh.locate(points)
    V = mesh.nodes[mesh.elements[el]]
    if mesh.kind != "triangle":
        raise NotImplementedError("reference evaluation supports triangle meshes")
    J = np.stack([V[:, 1] - V[:, 0], V[:, 2] - V[:, 0]], axis=2)
    Jinv = np.linalg.inv(J)
    ref = np.einsum("nij,nj->ni", Jinv, points - V[:, 0])
    N = space.element.values(ref)
    dN = np.einsum("nji,naj->nai", Jinv, space.element.gradients(ref))
    d = space.scalar_elem_dofs[el]
    c = np.asarray(coeffs)
    if space.components == 1:
        lc = c[d]
        return np.einsum("na,na->n", N, lc), np.einsum("nai,na->ni", dN, lc)
    lc = c.reshape(-1, 2)[d]
    return np.einsum("na,nac->nc", N, lc), np.einsum("nai,nac->nci", dN, lc)


def error_norms(solution: PlateSolution, exact=None, reference: PlateSolution | None = None,
                quad_degree: int | None = None, fields=("w", "M", "p", "phi")) -> dict:
    """Errors ||w - w_h||_1, ||M - M_h||_0, ||p - p_h||_0 and ||phi - phi_h||_1.

    ``w`` and ``M`` are compared with ``exact``.  ``p`` and ``phi`` are
    compared with ``reference`` (a finer run) when it is given, otherwise with
    the closed forms of ``exact`` if it provides the decomposition.
    """
    S = solution.space
    V = S.vector()
    k = S.degree
    rule = element_rule(S.mesh.kind, quad_degree or 2 * k + 4)
    X, _, det = S.geometry(rule.points)
    wdet = np.abs(det) * rule.weights[None]
    pts = X.reshape(-1, 2)
    shape = X.shape[:2]
    out = {}

    def integrate(sq):
        return float(np.sqrt(np.sum(wdet * sq)))

    if exact is None and reference is None:
        raise MissingReference("errors need an exact solution or a reference run")
    if "w" in fields:
        wv = S.evaluate(solution.w_coeffs, rule.points)
        gw = S.evaluate_gradient(solution.w_coeffs, rule.points)
        if exact is not None:
            ew, egw = exact.w(pts), exact.grad_w(pts)
        else:
            ew, egw = _point_values(reference.space, reference.w_coeffs, pts)
        out["h1_w"] = integrate((wv - ew.reshape(shape)) ** 2 + np.sum((gw - egw.reshape(shape + (2,))) ** 2, -1))
    if "M" in fields:
        Mh = solution.moments().at(rule.points)
        if exact is not None:
            Me = exact.M(pts)
        else:
            rp, _ = _point_values(reference.space, reference.p_coeffs, pts)
            _, rg = _point_values(reference.vspace, reference.phi_coeffs, pts)
            Me = symcurl_from_gradient(rg)
            Me[:, :2] += rp[:, None]
        dM = Me.reshape(shape + (3,)) - Mh
        out["l2_M"] = integrate(dM[..., 0] ** 2 + dM[..., 1] ** 2 + 2 * dM[..., 2] ** 2)

    if not {"p", "phi"} & set(fields):
        return out
    if reference is not None:
        ep, _ = _point_values(reference.space, reference.p_coeffs, pts)
        ephi, egphi = _point_values(reference.vspace, reference.phi_coeffs, pts)
    elif exact is not None and getattr(exact, "has_decomposition", False):
        ep, ephi, egphi = exact.p(pts), exact.phi(pts), exact.grad_phi(pts)
    else:
        raise MissingReference("p and phi errors need a reference run or an exact decomposition")
    if "p" in fields:
        pv = S.evaluate(solution.p_coeffs, rule.points)
        out["l2_p"] = integrate((pv - ep.reshape(shape)) ** 2)
    if "phi" in fields:
        phv = V.evaluate(solution.phi_coeffs, rule.points)
        gph = V.evaluate_gradient(solution.phi_coeffs, rule.points)
        out["h1_phi"] = integrate(np.sum((phv - ephi.reshape(shape + (2,))) ** 2, -1)
                                  + np.sum((gph - egphi.reshape(shape + (2, 2))) ** 2, axis=(-1, -2)))
    return out


class ClampedPolynomialSolution:
    """w = (1 - x^2)^2 (1 - y^2)^2, clamped on the whole boundary of (-1, 1)^2.

    Used for the purely clamped configuration, where no closed form for the
    sinusoidal load is at hand.  Only w and M are provided.
    """

    has_decomposition = False

    def __init__(self, material: MaterialTensor | None = None):
        self.material = material or MaterialTensor()

    @staticmethod
    def _f1(t, n=0):
        return [(1 - t ** 2) ** 2, -4 * t * (1 - t ** 2), 12 * t ** 2 - 4, 24 * t, 24 + 0 * t][n]

    def w(self, points):
        x, y = np.asarray(points)[..., 0], np.asarray(points)[..., 1]
        return self._f1(x) * self._f1(y)

    def grad_w(self, points):
        x, y = np.asarray(points)[..., 0], np.asarray(points)[..., 1]
        return np.stack([self._f1(x, 1) * self._f1(y), self._f1(x) * self._f1(y, 1)], -1)

    def M(self, points):
        x, y = np.asarray(points)[..., 0], np.asarray(points)[..., 1]
        hxx, hyy = self._f1(x, 2) * self._f1(y), self._f1(x) * self._f1(y, 2)
        hxy = self._f1(x, 1) * self._f1(y, 1)
        D, nu = self.material.D, self.material.nu
        return -D * np.stack([hxx + nu * hyy, hyy + nu * hxx, (1 - nu) * hxy], -1)

    def load(self, points):
        x, y = np.asarray(points)[..., 0], np.asarray(points)[..., 1]
        f = self._f1
        return self.material.D * (f(x, 4) * f(y) + 2 * f(x, 2) * f(y, 2) + f(x) * f(y, 4))


def symcurl_error(solution: PlateSolution, exact: ExactSolution, quad_degree: int | None = None) -> float:
    """||symCurl(phi - phi_h)||_0 against the exact phi."""
    V = solution.vspace
    rule = element_rule(V.mesh.kind, quad_degree or 2 * V.degree + 4)
    X, _, det = V.geometry(rule.points)
    wdet = np.abs(det) * rule.weights[None]
    pts = X.reshape(-1, 2)
    Sh = symcurl_from_gradient(V.evaluate_gradient(solution.phi_coeffs, rule.points))
    Se = symcurl_from_gradient(exact.grad_phi(pts)).reshape(Sh.shape)
    d = Se - Sh
    return float(np.sqrt(np.sum(wdet * (d[..., 0] ** 2 + d[..., 1] ** 2 + 2 * d[..., 2] ** 2))))


# ---------------------------------------------------------------------------
# convergence study


@dataclass
class StudyConfig:
    degree: int = 1
    eta: float | None = None
    material: MaterialTensor = field(default_factory=MaterialTensor)
    tags: dict | None = None
    reference: str = "exact"  # or "fine": p/phi against a run at max(levels) + 2


def run_level(level: int, cfg: StudyConfig, exact: ExactSolution | None = None, reference=None) -> dict:
    """Solve on one level and return its error row (without orders).

    The closed-form solution belongs to the default side layout; for other
    layouts every error is measured against ``reference``.
    """
    if is_default_layout(cfg.tags):
        exact = exact or ExactSolution(cfg.material)
    elif reference is None:
        raise MissingReference("non-default boundary layouts need reference='fine'")
    else:
        exact = None
    mesh = build_square_mesh(level)
    part = classify_boundary(mesh, cfg.tags)
    sol = solve_plate(mesh, part, cfg.degree, load, eta=cfg.eta, material=cfg.material)
    row = {"L": level}
    row.update(error_norms(sol, exact, reference=reference))
    return row


def is_default_layout(tags) -> bool:
    if tags is None:
        return True
    return {s: normalize_tag(t) for s, t in tags.items()} == DEFAULT_TAGS


def _level_worker(args):
    level, cfg, reference = args
    return run_level(level, cfg, reference=reference)


def add_orders(rows: list) -> list:
    """order(L) = log2(err(L-1) / err(L)) for each error column."""
    keys = [("h1_w", "order_w"), ("l2_M", "order_M"), ("l2_p", "order_p"), ("h1_phi", "order_phi")]
    for i, row in enumerate(rows):
        for err, order in keys:
            if i == 0 or err not in row:
                row[order] = float("nan")
            else:
                prev = rows[i - 1][err]
                row[order] = math.log2(prev / row[err]) if prev > 0 and row[err] > 0 else float("nan")
    return rows


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("PLATE_THREADS", "1")))
    except ValueError:
        return 1


def convergence_study(levels, degree: int = 1, eta: float | None = None,
                      material: MaterialTensor | None = None, tags: dict | None = None,
                      reference: str = "exact", threads: int | None = None) -> list:
    """Error rows with orders for ascending ``levels``."""
    levels = list(levels)
    if not levels or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be a nonempty ascending sequence")
    cfg = StudyConfig(degree, eta if eta is not None else default_eta(degree),
                      material or MaterialTensor(), tags, reference)
    ref = None
    if reference == "fine":
        fine = build_square_mesh(levels[-1] + 2)
        ref = solve_plate(fine, classify_boundary(fine, tags), degree, load, eta=cfg.eta, material=cfg.material)
        ref.ops = None
    elif reference != "exact":
        raise ValueError("reference must be 'exact' or 'fine'")
    threads = threads or thread_count()
    if threads > 1 and len(levels) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(levels))) as pool:
            rows = list(pool.map(_level_worker, [(L, cfg, ref) for L in levels]))
    else:
        exact = ExactSolution(cfg.material) if is_default_layout(tags) else None
        rows = [run_level(L, cfg, exact, ref) for L in levels]
    return add_orders(rows)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.6g}"


def study_csv(rows: list) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(STUDY_HEADER)
    for r in rows:
        wr.writerow([_fmt(r.get(k)) for k in STUDY_HEADER])
    return buf.getvalue()


def study_text(rows: list, degree: int | None = None) -> str:
    """Aligned table in the layout of the published error tables."""
    head = ["L", "|w-w_h|_1", "order", "|M-M_h|_0", "order", "|p-p_h|_0", "order", "|phi-phi_h|_1", "order"]
    body = [[_fmt(r.get(k)) for k in STUDY_HEADER] for r in rows]
    widths = [max(len(h), *(len(b[i]) for b in body)) for i, h in enumerate(head)]
    lines = []
    if degree is not None:
        lines.append(f"Discretization errors, k={degree}")
    lines.append("  ".join(h.rjust(wd) for h, wd in zip(head, widths)))
    for b in body:
        lines.append("  ".join(c.rjust(wd) for c, wd in zip(b, widths)))
    return "\n".join(lines) + "\n"
