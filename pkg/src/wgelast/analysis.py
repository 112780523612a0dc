"""Discrete norms, errors against exact solutions, convergence orders and
numerical checks of the structural identities of the weak Galerkin scheme."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .polyspace import edge_quadrature, polygon_quadrature, rigid_motion_coefficients
from .system import (
    assemble_matrix,
    assemble_mixed,
    assemble_primal,
    element_stiffness,
    load_vector,
    recover_pressure,
    solve,
    solve_mixed,
)
from .weakcalc import PressureField, WeakFunction, project_Qh, project_edge_Qb, \
    project_scalar_Qh, project_tensor_Qh


@dataclass(frozen=True)
class ErrorTriple:
    """Errors of ``e_h = Q_h u - u_h`` on one mesh level.

    ``eb`` weights each edge once by its length,
    ``sum_e |e| ||e_b||_e^2``; ``eb_elementwise`` is the element-boundary
    form ``sum_T h_T ||e_b||_{dT}^2``, which counts interior edges twice.
    """

    e0: float
    eb: float
    energy: float
    eb_elementwise: float = float("nan")
    inv_h: float = float("nan")

    def as_tuple(self):
        return (self.e0, self.eb, self.energy)


# ------------------------------------------------------------------ norms

def _element_sum(space, fn):
    return float(sum(fn(t, space.local(t)) for t in range(space.mesh.n_elements)))


def energy_norm(v, material):
    """``|||v|||_*``: ``2 mu ||eps_w||^2 + lam ||div_w||^2 + s(v, v)``."""
    def term(t, op):
        x = v.local(t)
        Keps, Kdiv, S = op.stiffness_parts()
        return x @ (material.mu * Keps + material.lam * Kdiv + S) @ x

    return math.sqrt(max(_element_sum(v.space, term), 0.0))


def strain_norm(v):
    """``|||v|||`` built from ``eps(v0)`` and the scaled trace mismatch."""
    def term(t, op):
        x = v.local(t)
        ni = op.nint
        return x[:ni] @ op.Kstrain @ x[:ni] + x @ op.S @ x

    return math.sqrt(max(_element_sum(v.space, term), 0.0))


def interior_l2(v):
    def term(t, op):
        c = v.interior(t)
        return c[0] @ op.M0 @ c[0] + c[1] @ op.M0 @ c[1]

    return math.sqrt(_element_sum(v.space, term))


def trace_l2(v, elementwise=False):
    """h-weighted L2 norm of the trace component."""
    space = v.space
    mesh = space.mesh
    if elementwise:
        def term(t, op):
            return op.h * sum(v.trace(e) @ Me @ v.trace(e) for e, Me in zip(op.edges, op.edge_mass))

        return math.sqrt(_element_sum(space, term))
    seen = np.zeros(mesh.n_edges, dtype=bool)
    total = 0.0
    for t in range(mesh.n_elements):
        op = space.local(t)
        for e, Me, frame in zip(op.edges, op.edge_mass, op.frames):
            if seen[e]:
                continue
            seen[e] = True
            c = v.trace(e)
            total += frame.length * (c @ Me @ c)
    return math.sqrt(total)


def edge_jumps(q):
    """Per interior edge: jump ``q|T1 - q|T2`` (T1 the lower element id) at
    edge quadrature points, with the points, weights and T1's outward normal."""
    space = q.space
    mesh = space.mesh
    rule = edge_quadrature(space.scheme.edge_points)
    out = []
    for e in mesh.interior_edges:
        t1, t2 = mesh.edge_elements[e]
        frame = mesh.edge_frame(e)
        xq = frame.point(rule.points)
        jump = q.values(t1, xq) - q.values(t2, xq)
        i = int(np.flatnonzero(mesh.element_edges[t1] == e)[0])
        out.append((e, xq, rule.weights * 0.5 * frame.length, jump, mesh.normals[t1][i]))
    return out


def pressure_norm(q):
    """``|||q|||_0^2 = h sum_e ||[[q]]||_e^2 + h^2 sum_T ||grad q||_T^2``."""
    space = q.space
    h = space.mesh.h
    jumps = sum(float(w @ j**2) for _, _, w, j, _ in edge_jumps(q))
    grads = 0.0
    for t in range(space.mesh.n_elements):
        op = space.local(t)
        qx, qw = polygon_quadrature(space.mesh.element_vertices(t), space.scheme.element_degree)
        g = np.einsum("qjd,j->qd", op.pbasis.gradients(qx), q.coeffs[t])
        grads += float(qw @ (g**2).sum(axis=1))
    return math.sqrt(h * jumps + h * h * grads)


# ---------------------------------------------------------------- errors

def _exact_callable(exact):
    return exact.u if hasattr(exact, "u") else exact


def error_vs_exact(u_h, exact, material, inv_h=float("nan")):
    """Errors of ``Q_h u - u_h`` in the energy, interior L2 and trace norms."""
    u = _exact_callable(exact)
    e = project_Qh(u, u_h.space) - u_h
    return ErrorTriple(
        e0=interior_l2(e),
        eb=trace_l2(e),
        energy=energy_norm(e, material),
        eb_elementwise=trace_l2(e, elementwise=True),
        inv_h=inv_h,
    )


@dataclass
class ConvergenceReport:
    """Per-level errors and observed orders of one refinement study."""

    problem: str
    variant: str
    lam: float
    mu: float
    k: int = 1
    levels: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    orders: list = field(default_factory=list)

    def add(self, inv_h, triple, seconds=float("nan")):
        if self.levels and inv_h <= self.levels[-1]:
            raise ValueError("levels must be strictly refining")
        self.levels.append(inv_h)
        self.errors.append(triple)
        self.seconds.append(seconds)

    def rows(self):
        for i, (n, err) in enumerate(zip(self.levels, self.errors)):
            orders = self.orders[i] if i < len(self.orders) else (None, None, None)
            yield n, err, orders, self.seconds[i]


def observed_order(coarse, fine, ratio=2.0):
    """``log(coarse / fine) / log(ratio)``, or ``None`` when undefined."""
    if not (coarse > 0.0 and fine > 0.0) or not (math.isfinite(coarse) and math.isfinite(fine)):
        return None
    return math.log(coarse / fine) / math.log(ratio)


def convergence_order(report, floor=1e-9):
    """Fill ``report.orders``; the first level and levels whose errors sit at
    round-off (below ``floor``) get ``None``."""
    if len(report.levels) < 2:
        raise ValueError("at least two levels are needed for convergence orders")
    orders = [(None, None, None)]
    for i in range(1, len(report.levels)):
        ratio = report.levels[i] / report.levels[i - 1]
        row = []
        for a, b in zip(report.errors[i - 1].as_tuple(), report.errors[i].as_tuple()):
            row.append(None if a < floor or b < floor else observed_order(a, b, ratio))
        orders.append(tuple(row))
    report.orders = orders
    return report


# --------------------------------------------------------------- checks

def _random_polynomial(rng, degree):
    """Random vector polynomial on global coordinates; returns value and
    gradient callables."""
    exps = [(d - b, b) for d in range(degree + 1) for b in range(d + 1)]
    coef = rng.standard_normal((2, len(exps)))
    a = np.array([e[0] for e in exps])
    b = np.array([e[1] for e in exps])

    def value(x):
        x = np.atleast_2d(x)
        mono = x[:, :1] ** a * x[:, 1:] ** b
        return mono @ coef.T

    def grad(x):
        x = np.atleast_2d(x)
        X, Y = x[:, :1], x[:, 1:]
        dx = np.where(a > 0, a * X ** np.maximum(a - 1, 0), 0.0) * Y**b
        dy = X**a * np.where(b > 0, b * Y ** np.maximum(b - 1, 0), 0.0)
        out = np.empty((len(x), 2, 2))
        out[:, :, 0] = dx @ coef.T
        out[:, :, 1] = dy @ coef.T
        return out

    return value, grad


def check_commuting(space, trials=100, degree=None, seed=0):
    """Max coefficient residual of ``div_w(Q_h u) = Q_h(div u)`` and
    ``grad_w(Q_h u) = Q_h(grad u)`` over random polynomials ``u``."""
    rng = np.random.default_rng(seed)
    degree = space.scheme.k if degree is None else degree
    worst = 0.0
    for _ in range(trials):
        u, grad = _random_polynomial(rng, degree)
        v = project_Qh(u, space)
        div_ref = project_scalar_Qh(lambda x: np.trace(grad(x), axis1=1, axis2=2), space).coeffs
        grad_ref = project_tensor_Qh(grad, space)
        for t in range(space.mesh.n_elements):
            op = space.local(t)
            x = v.local(t)
            worst = max(worst,
                        np.abs(op.D @ x - div_ref[t]).max(),
                        np.abs(np.einsum("rsjl,l->rsj", op.G, x) - grad_ref[t]).max())
    return float(worst)


def infsup_test_function(q):
    """``v_q = {-h^2 grad q, h [[q]] n}`` with zero trace on the boundary."""
    space = q.space
    mesh = space.mesh
    h = mesh.h
    coeffs = np.zeros(space.ndofs)
    deg = space.scheme.element_degree
    for t in range(mesh.n_elements):
        op = space.local(t)
        qx, qw = polygon_quadrature(mesh.element_vertices(t), deg)
        g = np.einsum("qjd,j->qd", op.pbasis.gradients(qx), q.coeffs[t])
        phi = op.basis.values(qx)
        c = np.linalg.solve(op.M0, (phi * qw[:, None]).T @ (-h * h * g))
        coeffs[space.interior_dofs(t)] = c.T.ravel()
    for e in mesh.interior_edges:
        t1, t2 = mesh.edge_elements[e]
        i = int(np.flatnonzero(mesh.element_edges[t1] == e)[0])
        n1 = mesh.normals[t1][i]

        def g(x, t1=t1, t2=t2, n1=n1):
            return h * (q.values(t1, x) - q.values(t2, x))[:, None] * n1

        coeffs[space.edge_dofs(e)] = project_edge_Qb(g, space, e)
    return WeakFunction(space, coeffs)


def b_form(v, q):
    """``b(v, q) = sum_T (div_w v, q)_T``."""
    space = v.space
    return _element_sum(space, lambda t, op: q.coeffs[t] @ op.Mr @ (op.D @ v.local(t)))


def check_infsup_construction(q, tol=1e-10):
    """Return ``(|b(v_q, q) - |||q|||_0^2|, |||q|||_0 / |||v_q|||)``."""
    area = float(q.space.mesh.areas.sum())
    scale = max(q.l2_norm(), 1.0)
    if abs(q.integral()) / area > tol * scale:
        raise ValueError("pressure field is not mean-zero")
    vq = infsup_test_function(q)
    qn = pressure_norm(q)
    resid = abs(b_form(vq, q) - qn**2)
    vn = strain_norm(vq)
    ratio = qn / vn if vn > 0 else 0.0
    return resid, ratio


def random_mean_zero_pressure(space, rng):
    q = PressureField(space, rng.standard_normal((space.mesh.n_elements, space.scheme.n_pressure)))
    return q.mean_zero()


def _korn_grams(space, t):
    """(LHS, RHS) Gram matrices on interior coefficients for
    ``||v0 - Q_b v0||_{dT}^2`` and ``||eps(v0)||_T^2``."""
    op = space.local(t)
    nb, ni = op.nb, op.nint
    rule = edge_quadrature(space.scheme.k + 3)
    L = np.zeros((ni, ni))
    for frame, ebasis, Pm in zip(op.frames, op.edge_bases, op.trace_maps):
        xq = frame.point(rule.points)
        w = rule.weights * 0.5 * frame.length
        phi = op.basis.values(xq)
        vals = np.zeros((len(xq), ni, 2))
        vals[:, :nb, 0] = phi
        vals[:, nb:, 1] = phi
        chi = ebasis.values(rule.points)  # (nq, m, 2)
        resid = vals - np.einsum("qmc,mi->qic", chi, Pm)
        L += np.einsum("q,qic,qjc->ij", w, resid, resid)
    return L, op.Kstrain


def korn_lhs(space, t, coeffs):
    L, _ = _korn_grams(space, t)
    return float(coeffs @ L @ coeffs)


def check_korn_ratio(space, trials=200, seed=0):
    """Max over elements and random ``v0`` of
    ``||v0 - Q_b v0||_{dT}^2 / (h_T ||eps(v0)||_T^2)``.

    Random interior polynomials are drawn with their L2(T) projection onto
    the rigid motions removed; the same coefficient draws
    (in the scaled monomial basis) are used on every element.
    """
    rng = np.random.default_rng(seed)
    ni = space.scheme.n_interior
    C = rng.standard_normal((trials, ni))
    R = rigid_motion_coefficients(space.scheme.k)
    worst = 0.0
    cache = {}
    for t in range(space.mesh.n_elements):
        op = space.local(t)
        key = id(op.Kstrain)
        if key not in cache:
            L, K = _korn_grams(space, t)
            M = np.kron(np.eye(2), op.M0)
            # L2(T)-orthogonal removal of rigid motions
            A = R @ M @ R.T
            Cp = C - (np.linalg.solve(A, R @ M @ C.T)).T @ R
            num = np.einsum("ti,ij,tj->t", Cp, L, Cp)
            den = op.h * np.einsum("ti,ij,tj->t", Cp, K, Cp)
            cache[key] = float(np.max(num / den))
        worst = max(worst, cache[key])
    return worst


def check_korn_rigid(space):
    """Max ``||v0 - Q_b v0||^2_{dT}`` over the three rigid motions of every element."""
    R = rigid_motion_coefficients(space.scheme.k)
    worst = 0.0
    for t in range(space.mesh.n_elements):
        L, _ = _korn_grams(space, t)
        worst = max(worst, float(np.max(np.einsum("ri,ij,rj->r", R, L, R))))
    return worst


LINEAR_FIELDS = {
    "(1,0)": lambda x: np.column_stack([np.ones(len(x)), np.zeros(len(x))]),
    "(0,1)": lambda x: np.column_stack([np.zeros(len(x)), np.ones(len(x))]),
    "(x,0)": lambda x: np.column_stack([x[:, 0], np.zeros(len(x))]),
    "(y,0)": lambda x: np.column_stack([x[:, 1], np.zeros(len(x))]),
    "(0,x)": lambda x: np.column_stack([np.zeros(len(x)), x[:, 0]]),
    "(0,y)": lambda x: np.column_stack([np.zeros(len(x)), x[:, 1]]),
}


def check_patch_test(space, material, fields=None, method="auto", tol=1e-12):
    """Max over linear displacement fields (``f = 0``) of ``|||Q_h u - u_h|||_*``."""
    fields = LINEAR_FIELDS if fields is None else fields
    worst = 0.0
    for u in fields.values():
        u_h = solve(assemble_primal(space, material, None, u), tol=tol, method=method)
        e = project_Qh(u, space) - u_h
        worst = max(worst, energy_norm(e, material))
    return worst


def check_equivalence(space, material, f, u_hat, tol=1e-12):
    """Compare the primal solve (with recovered pressure) against the mixed solve.

    Returns ``(|||u_primal - u_mixed|||, ||lam div_w u_primal - p_mixed||)``.
    """
    u_p = solve(assemble_primal(space, material, f, u_hat), tol=tol, method="dense")
    u_m, p_m = solve_mixed(assemble_mixed(space, material, f, u_hat))
    p_p = recover_pressure(u_p, material.lam)
    return strain_norm(u_p - u_m), (p_p - p_m).l2_norm()


def reduced_matrix(space, material):
    return assemble_primal(space, material).matrix


def min_eigenvalue(space, material):
    """Smallest eigenvalue of the reduced primal matrix (dense)."""
    K = reduced_matrix(space, material).toarray()
    return float(np.linalg.eigvalsh(0.5 * (K + K.T))[0])


def symmetry_defect(space, material):
    K = assemble_matrix(space, lambda t: element_stiffness(space, t, material))
    d = abs(K - K.T)
    return float(d.max() / abs(K).max())


def norm_gram_min_eigenvalue(space):
    """Smallest eigenvalue of the ``|||.|||^2`` Gram matrix on ``V_h^0``."""
    def local(t):
        op = space.local(t)
        ni = op.nint
        M = op.S.copy()
        M[:ni, :ni] += op.Kstrain
        return M

    N = assemble_matrix(space, local)
    free = space.free_dofs
    A = N[free][:, free].toarray()
    return float(np.linalg.eigvalsh(A)[0])


def coercivity_sampling(space, material, trials=100, seed=0):
    """``(min, max)`` of ``a(v, v) / |||v|||^2`` over random ``v`` in ``V_h^0``,
    with ``a = 2 mu (eps_w, eps_w) + s``."""
    rng = np.random.default_rng(seed)

    def a_local(t):
        Keps, _, S = space.local(t).stiffness_parts()
        return material.mu * Keps + S

    def n_local(t):
        op = space.local(t)
        M = op.S.copy()
        M[:op.nint, :op.nint] += op.Kstrain
        return M

    free = space.free_dofs
    A = assemble_matrix(space, a_local)[free][:, free]
    N = assemble_matrix(space, n_local)[free][:, free]
    X = rng.standard_normal((trials, len(free)))
    num = np.einsum("ti,ti->t", X, (A @ X.T).T)
    den = np.einsum("ti,ti->t", X, (N @ X.T).T)
    ratios = num / den
    return float(ratios.min()), float(ratios.max())


def galerkin_residual(u_h, material, f):
    """Max over free basis functions of ``|a_s(u_h, v) - (f, v0)|``."""
    space = u_h.space
    K = assemble_matrix(space, lambda t: element_stiffness(space, t, material))
    F = load_vector(space, f)
    free = space.free_dofs
    return float(np.abs(K[free] @ u_h.coeffs - F[free]).max())
