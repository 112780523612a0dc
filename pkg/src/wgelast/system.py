"""Global assembly and solution of the primal and mixed weak Galerkin schemes."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .polyspace import edge_quadrature, polygon_quadrature
from .weakcalc import PressureField, WeakFunction, project_edge_Qb

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000


class SolverError(RuntimeError):
    """Raised when a linear solve fails; carries the diagnostics dict."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class MaterialParams:
    """Lame constants ``lam >= 0`` and ``mu > 0``."""

    lam: float
    mu: float
    E: float | None = None
    nu: float | None = None

    def __post_init__(self):
        if not self.lam >= 0.0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.mu > 0.0:
            raise ValueError(f"mu must be > 0, got {self.mu}")

    @classmethod
    def from_young(cls, E, nu):
        """Build from Young's modulus and Poisson ratio (``nu < 1/2``)."""
        if not E > 0.0:
            raise ValueError("E must be positive")
        if not -1.0 < nu < 0.5:
            raise ValueError("Poisson ratio must lie in (-1, 1/2)")
        lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
        mu = E / (2.0 * (1.0 + nu))
        return cls(lam=lam, mu=mu, E=E, nu=nu)


def stabilizer_local(space, t):
    """Element stabilizer matrix on local DOFs (symmetric PSD)."""
    return space.local(t).S


def element_stiffness(space, t, material):
    Keps, Kdiv, S = space.local(t).stiffness_parts()
    return material.mu * Keps + material.lam * Kdiv + S


def load_vector(space, f):
    """Global vector of ``(f, v0)`` over all basis functions."""
    F = np.zeros(space.ndofs)
    if f is None:
        return F
    deg = space.scheme.load_degree
    for t in range(space.mesh.n_elements):
        op = space.local(t)
        qx, qw = polygon_quadrature(space.mesh.element_vertices(t), deg)
        phi = op.basis.values(qx)
        fx = np.asarray(f(qx), dtype=float)
        if fx.ndim == 1:
            fx = np.broadcast_to(fx, (len(qx), 2))
        F[space.interior_dofs(t)] = ((phi * qw[:, None]).T @ fx).T.ravel()
    return F


def boundary_values(space, u_hat):
    """``Q_b u_hat`` on every boundary edge, as (dofs, values)."""
    dofs = space.boundary_dofs
    if u_hat is None:
        return dofs, np.zeros(len(dofs))
    vals = np.concatenate([project_edge_Qb(u_hat, space, e) for e in space.mesh.boundary_edges])
    return dofs, vals


def assemble_matrix(space, element_matrix):
    """Sum element matrices into a global CSR matrix in element order."""
    rows, cols, data = [], [], []
    for t in range(space.mesh.n_elements):
        dofs = space.element_dofs(t)
        Ke = element_matrix(t)
        rows.append(np.repeat(dofs, len(dofs)))
        cols.append(np.tile(dofs, len(dofs)))
        data.append(Ke.ravel())
    K = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(space.ndofs, space.ndofs))
    return K.tocsr()


@dataclass
class LinearSystem:
    """Reduced primal system ``K u_free = rhs`` with eliminated Dirichlet DOFs.

    When built with static condensation, the unknowns are the free trace
    DOFs only and ``recover`` rebuilds the interior blocks.
    """

    space: object
    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    condensed: bool = False
    recover: object = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_free(self):
        return len(self.free)

    def expand(self, x):
        """Full coefficient vector from the reduced solution."""
        coeffs = np.zeros(self.space.ndofs)
        coeffs[self.fixed] = self.fixed_values
        coeffs[self.free] = x
        if self.condensed:
            self.recover(coeffs)
        return WeakFunction(self.space, coeffs)


def assemble_primal(space, material, f=None, u_hat=None, condense=False):
    """Assemble the primal scheme ``a_s(u_h, v) = (f, v0)`` with ``u_b = Q_b u_hat`` on the boundary."""
    mesh = space.mesh
    if len(mesh.boundary_edges) == 0:
        raise ValueError("mesh has no boundary edges; Dirichlet data cannot be imposed")
    fixed, fixed_values = boundary_values(space, u_hat)
    F = load_vector(space, f)
    if condense:
        return _assemble_condensed(space, material, F, fixed, fixed_values)

    K = assemble_matrix(space, lambda t: element_stiffness(space, t, material))
    mask = np.ones(space.ndofs, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    Kff = K[free][:, free].tocsr()
    rhs = F[free] - K[free][:, fixed] @ fixed_values
    return LinearSystem(space, Kff, rhs, free, fixed, fixed_values)


def _assemble_condensed(space, material, F, fixed, fixed_values):
    # interior blocks couple only inside their element: eliminate them locally
    mesh = space.mesh
    ni = space.scheme.n_interior
    n_int_total = space.n_interior_dofs
    locals_ = []
    rows, cols, data = [], [], []
    Ftrace = F[n_int_total:].copy()
    for t in range(mesh.n_elements):
        Ke = element_stiffness(space, t, material)
        dofs = space.element_dofs(t)
        Kii, Kib = Ke[:ni, :ni], Ke[:ni, ni:]
        fac = sla.cho_factor(Kii)
        X = sla.cho_solve(fac, Kib)
        fi = F[dofs[:ni]]
        y = sla.cho_solve(fac, fi)
        schur = Ke[ni:, ni:] - Kib.T @ X
        tdofs = dofs[ni:] - n_int_total
        rows.append(np.repeat(tdofs, len(tdofs)))
        cols.append(np.tile(tdofs, len(tdofs)))
        data.append(schur.ravel())
        np.add.at(Ftrace, tdofs, -Kib.T @ y)
        locals_.append((dofs, X, y))
    nt = space.ndofs - n_int_total
    K = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nt, nt)).tocsr()
    fixed_t = fixed - n_int_total
    mask = np.ones(nt, dtype=bool)
    mask[fixed_t] = False
    free_t = np.flatnonzero(mask)
    Kff = K[free_t][:, free_t].tocsr()
    rhs = Ftrace[free_t] - K[free_t][:, fixed_t] @ fixed_values

    def recover(coeffs):
        for dofs, X, y in locals_:
            coeffs[dofs[:ni]] = y - X @ coeffs[dofs[ni:]]

    return LinearSystem(space, Kff, rhs, free_t + n_int_total, fixed, fixed_values,
                        condensed=True, recover=recover)


def pcg(A, b, tol=1e-10, max_iter=None, M=None, x0=None):
    """Preconditioned conjugate gradients on an SPD matrix.

    Returns ``(x, iterations, relative_residual)``. Raises
    :class:`SolverError` on non-convergence or when a non-positive curvature
    ``p^T A p <= 0`` reveals an indefinite matrix.
    """
    n = len(b)
    max_iter = 10 * n if max_iter is None else max_iter
    if M is None:
        d = A.diagonal()
        if np.any(d <= 0):
            raise SolverError("non-positive diagonal entry: matrix is not SPD")
        M = 1.0 / d
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    r = b - A @ x
    z = M * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0.0:
            raise SolverError(f"CG breakdown at iteration {it}: p^T A p = {curv:.3e}",
                              {"iterations": it, "curvature": float(curv)})
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return x, it, float(res)
        z = M * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = float(np.linalg.norm(b - A @ x) / bnorm)
    raise SolverError(f"CG did not converge in {max_iter} iterations "
                      f"(relative residual {res:.3e})", {"iterations": max_iter, "residual": res})


def _residual_ext(A, x, b):
    """``b - A x`` accumulated in extended precision (where the platform has
    it), rounded back to double."""
    A = A.tocsr()
    xl = x.astype(np.longdouble)
    prod = A.data.astype(np.longdouble) * xl[A.indices]
    Ax = np.zeros(A.shape[0], dtype=np.longdouble)
    rows = np.flatnonzero(np.diff(A.indptr))
    if len(rows):
        Ax[rows] = np.add.reduceat(prod, A.indptr[rows])
    return (b.astype(np.longdouble) - Ax).astype(float)


def solve(system, tol=1e-10, max_iter=None, method="auto"):
    """Solve a :class:`LinearSystem` and return the :class:`WeakFunction`.

    ``method`` is ``"cg"`` (Jacobi-preconditioned CG), ``"dense"``
    (Cholesky), ``"direct"`` (sparse LU) or ``"auto"``: dense up to
    ``DENSE_LIMIT`` free DOFs, sparse direct above. The direct paths take
    one refinement step with an extended-precision residual, which matters
    for large ``lam``.
    """
    if not 0.0 < tol <= 1e-6:
        raise ValueError("tol must lie in (0, 1e-6]")
    A, b = system.matrix, system.rhs
    n = len(b)
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "direct"
    start = time.perf_counter()
    iterations = 0
    if n == 0:
        x = np.zeros(0)
    elif method == "cg":
        x, iterations, _ = pcg(A, b, tol=tol, max_iter=max_iter)
    elif method == "dense":
        try:
            factor = sla.cho_factor(A.toarray())
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"dense Cholesky failed: {exc}") from exc
        x = sla.cho_solve(factor, b)
        x += sla.cho_solve(factor, _residual_ext(A, x, b))
    elif method == "direct":
        lu = spla.splu(A.tocsc())
        x = lu.solve(b)
        x += lu.solve(_residual_ext(A, x, b))
    else:
        raise ValueError(f"unknown solver method {method!r}")
    bnorm = np.linalg.norm(b)
    res = float(np.linalg.norm(b - A @ x) / bnorm) if bnorm > 0 else float(np.linalg.norm(A @ x))
    system.diagnostics.update(method=method, iterations=iterations, residual=res,
                              seconds=time.perf_counter() - start, n_free=n)
    if not np.all(np.isfinite(x)):
        raise SolverError("solution contains non-finite values", system.diagnostics)
    if method != "cg" and res > max(tol, 1e-8):
        log.warning("relative residual %.3e above tolerance %.1e", res, tol)
    return system.expand(x)


def solve_primal(space, material, f=None, u_hat=None, tol=1e-10, method="auto", condense=False):
    system = assemble_primal(space, material, f, u_hat, condense=condense)
    return solve(system, tol=tol, method=method), system


# -------------------------------------------------------------------- mixed

def boundary_flux(space, u_hat):
    """``integral over the boundary of u_hat . n``."""
    mesh = space.mesh
    rule = edge_quadrature(space.scheme.edge_points)
    total = 0.0
    for e in mesh.boundary_edges:
        frame = mesh.edge_frame(e)
        t = mesh.edge_elements[e, 0]
        i = int(np.flatnonzero(mesh.element_edges[t] == e)[0])
        n = mesh.normals[t][i]
        xq = frame.point(rule.points)
        vals = np.asarray(u_hat(xq), dtype=float)
        if vals.ndim == 1:
            vals = np.broadcast_to(vals, (len(xq), 2))
        total += 0.5 * frame.length * rule.weights @ (vals @ n)
    return float(total)


@dataclass
class MixedSystem:
    """Saddle-point system for ``(u_free, p, multiplier)``."""

    space: object
    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    mean_row: np.ndarray
    rhs_u: np.ndarray
    rhs_p: np.ndarray
    rhs_mean: float
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    material: MaterialParams

    def matrix(self):
        nu, npr = self.A.shape[0], self.C.shape[0]
        m = sp.csr_matrix(self.mean_row.reshape(-1, 1))
        return sp.bmat([[self.A, self.B.T, None],
                        [self.B, -self.C, m],
                        [None, m.T, None]], format="csr")

    def rhs(self):
        return np.concatenate([self.rhs_u, self.rhs_p, [self.rhs_mean]])


def assemble_mixed(space, material, f=None, u_hat=None):
    """Assemble ``a(u,v) + b(v,p) = (f,v0)``, ``b(u,q) - d(p,q) = 0`` with the
    compatibility condition ``(p / lam, 1) = int u_hat . n`` as a multiplier row."""
    lam = material.lam
    if not (lam > 0.0 and np.isfinite(lam)):
        raise ValueError("mixed scheme needs a finite lambda > 0")
    mesh = space.mesh
    nr = space.scheme.n_pressure
    mu = material.mu

    def a_local(t):
        Keps, _, S = space.local(t).stiffness_parts()
        return mu * Keps + S

    A = assemble_matrix(space, a_local)
    rows, cols, data = [], [], []
    Cblocks = []
    mean = np.zeros(mesh.n_elements * nr)
    for t in range(mesh.n_elements):
        op = space.local(t)
        Bt = op.Mr @ op.D
        pd = np.arange(t * nr, (t + 1) * nr)
        dofs = space.element_dofs(t)
        rows.append(np.repeat(pd, len(dofs)))
        cols.append(np.tile(dofs, nr))
        data.append(Bt.ravel())
        Cblocks.append(op.Mr / lam)
        mean[pd] = op.Mr[0] / lam
    B = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(mesh.n_elements * nr, space.ndofs)).tocsr()
    C = sp.block_diag(Cblocks, format="csr")

    fixed, fixed_values = boundary_values(space, u_hat)
    F = load_vector(space, f)
    mask = np.ones(space.ndofs, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    rhs_u = F[free] - A[free][:, fixed] @ fixed_values
    rhs_p = -(B[:, fixed] @ fixed_values)
    g = boundary_flux(space, u_hat) if u_hat is not None else 0.0
    return MixedSystem(space, A[free][:, free].tocsr(), B[:, free].tocsr(), C, mean,
                       rhs_u, rhs_p, g, free, fixed, fixed_values, material)


def solve_mixed(system):
    """Dense symmetric-indefinite solve; returns ``(WeakFunction, PressureField)``."""
    K = system.matrix().toarray()
    rhs = system.rhs()
    try:
        x = sla.solve(K, rhs, assume_a="sym")
    except (np.linalg.LinAlgError, sla.LinAlgWarning) as exc:
        raise SolverError(f"singular saddle-point system: {exc}") from exc
    if not np.all(np.isfinite(x)) or np.linalg.norm(K @ x - rhs) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
        raise SolverError("singular saddle-point system (residual check failed)")
    nu = len(system.free)
    npr = system.C.shape[0]
    coeffs = np.zeros(system.space.ndofs)
    coeffs[system.fixed] = system.fixed_values
    coeffs[system.free] = x[:nu]
    u = WeakFunction(system.space, coeffs)
    p = PressureField(system.space, x[nu:nu + npr])
    return u, p


def recover_pressure(u_h, lam):
    """``p_h = lam * div_w u_h`` per element."""
    sp_ = u_h.space
    coeffs = np.stack([lam * (sp_.local(t).D @ u_h.local(t)) for t in range(sp_.mesh.n_elements)])
    return PressureField(sp_, coeffs)
