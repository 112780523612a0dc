"""Weak function spaces, L2 projections and the discrete weak operators.

Local degrees of freedom on an element are ordered as the interior block
(first displacement component, then the second, each over the scaled
monomial basis of degree ``k``) followed by one trace block per local edge.
Globally, all interior blocks come first in element order, then the trace
blocks in global edge order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .polyspace import (
    P,
    RM,
    VARIANTS,
    EdgeTraceBasis,
    ElementBasis,
    dim_poly,
    edge_quadrature,
    polygon_quadrature,
    trace_space,
)


@dataclass(frozen=True)
class Scheme:
    """Order ``k`` and edge-space variant (``"rm"`` or ``"p"``; ``"p1"`` is accepted as an alias)."""

    k: int = 1
    variant: str = RM

    def __post_init__(self):
        if self.variant == "p1":
            object.__setattr__(self, "variant", P)
        if self.k not in (1, 2):
            raise ValueError(f"k must be 1 or 2, got {self.k}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @property
    def trace(self):
        return trace_space(self.k, self.variant)

    @property
    def n_interior(self):
        return 2 * dim_poly(self.k)

    @property
    def n_trace(self):
        variant, degree = self.trace
        return 3 if variant == RM else 2 * (degree + 1)

    @property
    def n_pressure(self):
        return dim_poly(self.k - 1)

    # quadrature defaults
    @property
    def element_degree(self):
        return 2 * self.k + 2

    @property
    def load_degree(self):
        return 2 * self.k + 4

    @property
    def edge_points(self):
        return self.k + 2


class LocalOperators:
    """Per-element matrices acting on local weak degrees of freedom.

    Attributes
    ----------
    G : (2, 2, nr, nloc) array
        ``G[r, s] @ v`` are the coefficients of the ``(r, s)`` entry of the
        discrete weak gradient (approximating ``d v_r / d x_s``).
    D : (nr, nloc) array, weak divergence (the trace of ``G``).
    E : (2, 2, nr, nloc) array, weak strain (symmetric part of ``G``).
    S : (nloc, nloc) array, stabilizer ``h_T^-1 <Q_b v0 - vb, Q_b v0 - vb>``.
    Mr : mass matrix of the ``P_{k-1}`` scalar basis.
    M0 : mass matrix of the ``P_k`` scalar basis.
    Kstrain : (nint, nint) Gram matrix of ``(eps(v0), eps(v0))_T``.
    trace_maps : per local edge, the (m, nint) map from interior coefficients
        to the ``Q_b`` projection of their trace.
    edge_mass : per local edge, the (m, m) trace mass matrix.
    """

    def __init__(self, mesh, t, scheme, **cached):
        k = scheme.k
        self.element = t
        self.scheme = scheme
        xy = mesh.element_vertices(t)
        self.h = float(mesh.diameters[t])
        self.basis = ElementBasis.on(mesh, t, k)
        self.pbasis = ElementBasis.on(mesh, t, k - 1)
        self.edges = mesh.element_edges[t]
        self.normals = mesh.normals[t]
        self.frames = [mesh.edge_frame(e) for e in self.edges]
        variant, degree = scheme.trace
        self.edge_bases = [EdgeTraceBasis(f, variant, degree) for f in self.frames]

        nb = len(self.basis)
        nr = len(self.pbasis)
        nint = 2 * nb
        m = scheme.n_trace
        nloc = nint + m * len(self.edges)
        self.nb, self.nr, self.nint, self.nloc = nb, nr, nint, nloc

        if cached:
            self.__dict__.update(cached)
            return

        qx, qw = polygon_quadrature(xy, scheme.element_degree)
        phi = self.basis.values(qx)
        psi = self.pbasis.values(qx)
        dpsi = self.pbasis.gradients(qx)
        self.M0 = (phi * qw[:, None]).T @ phi
        self.Mr = (psi * qw[:, None]).T @ psi
        # strain of the interior polynomial, eps(v0), for the discrete norm
        dphi = self.basis.gradients(qx)  # (nq, nb, 2)
        eps = np.zeros((len(qx), nint, 2, 2))
        for r in range(2):
            eps[:, r * nb:(r + 1) * nb, r, :] += 0.5 * dphi
            eps[:, r * nb:(r + 1) * nb, :, r] += 0.5 * dphi
        self.Kstrain = np.einsum("q,qirs,qjrs->ij", qw, eps, eps)

        erule = edge_quadrature(scheme.edge_points)
        B = np.zeros((2, 2, nr, nloc))
        # -(v0_r, d_s psi_j)
        for r in range(2):
            for s in range(2):
                B[r, s, :, r * nb:(r + 1) * nb] -= ((dpsi[:, :, s] * qw[:, None]).T @ phi)

        self.trace_maps = []
        self.edge_mass = []
        S = np.zeros((nloc, nloc))
        for i, (frame, ebasis, nrm) in enumerate(zip(self.frames, self.edge_bases, self.normals)):
            off = nint + i * m
            tq = erule.points
            wq = erule.weights * 0.5 * frame.length
            xq = frame.point(tq)
            chi = ebasis.values(tq)  # (nq, m, 2)
            psi_e = self.pbasis.values(xq)  # (nq, nr)
            phi_e = self.basis.values(xq)  # (nq, nb)
            # <vb_r, psi_j n_s>
            for r in range(2):
                proj = (psi_e * wq[:, None]).T @ chi[:, :, r]  # (nr, m)
                for s in range(2):
                    B[r, s, :, off:off + m] += proj * nrm[s]
            Me = np.einsum("q,qic,qjc->ij", wq, chi, chi)
            C = np.zeros((m, nint))
            for c in range(2):
                C[:, c * nb:(c + 1) * nb] = (chi[:, :, c] * wq[:, None]).T @ phi_e
            Pm = np.linalg.solve(Me, C)
            self.trace_maps.append(Pm)
            self.edge_mass.append(Me)
            R = np.zeros((m, nloc))
            R[:, :nint] = Pm
            R[:, off:off + m] = -np.eye(m)
            S += R.T @ Me @ R
        self.S = S / self.h

        fac = cho_factor(self.Mr)
        self.G = cho_solve(fac, B.reshape(4, nr, nloc).transpose(1, 0, 2).reshape(nr, -1))
        self.G = self.G.reshape(nr, 4, nloc).transpose(1, 0, 2).reshape(2, 2, nr, nloc)
        self.D = self.G[0, 0] + self.G[1, 1]
        self.E = 0.5 * (self.G + self.G.transpose(1, 0, 2, 3))

    def stiffness_parts(self):
        """Element matrices ``(2 (eps_w, eps_w), (div_w, div_w), s)``."""
        Mr = self.Mr
        Keps = 2.0 * sum(self.E[r, s].T @ Mr @ self.E[r, s] for r in range(2) for s in range(2))
        Kdiv = self.D.T @ Mr @ self.D
        return Keps, Kdiv, self.S

    def shareable(self):
        keys = ("M0", "Mr", "Kstrain", "trace_maps", "edge_mass", "S", "G", "D", "E")
        return {key: self.__dict__[key] for key in keys}


def _shape_key(mesh, t):
    xy = mesh.element_vertices(t) - mesh.centroids[t]
    h = mesh.diameters[t]
    rel = np.round(xy / h, 12) + 0.0
    return (rel.tobytes(), round(h, 14), mesh.edge_signs[t].tobytes())


class WeakSpace:
    """Global weak finite element space ``V_h`` on a mesh.

    Parameters
    ----------
    mesh : Mesh
    scheme : Scheme
    reuse_congruent : bool
        Share local operators between elements that are translates of each
        other with identical edge orientation (uniform meshes have two
        such shapes per level).
    """

    def __init__(self, mesh, scheme=Scheme(), reuse_congruent=True):
        self.mesh = mesh
        self.scheme = scheme
        self.reuse_congruent = reuse_congruent
        self.n_interior_dofs = mesh.n_elements * scheme.n_interior
        self.ndofs = self.n_interior_dofs + mesh.n_edges * scheme.n_trace
        self._local = [None] * mesh.n_elements
        self._shared = {}
        self._elem_dofs = [self._compute_dofs(t) for t in range(mesh.n_elements)]

    def _compute_dofs(self, t):
        ni, m = self.scheme.n_interior, self.scheme.n_trace
        interior = np.arange(t * ni, (t + 1) * ni)
        edges = self.mesh.element_edges[t]
        trace = (self.n_interior_dofs + m * edges[:, None] + np.arange(m)).ravel()
        return np.concatenate([interior, trace])

    def element_dofs(self, t):
        return self._elem_dofs[t]

    def edge_dofs(self, e):
        m = self.scheme.n_trace
        start = self.n_interior_dofs + m * int(e)
        return np.arange(start, start + m)

    def interior_dofs(self, t):
        ni = self.scheme.n_interior
        return np.arange(t * ni, (t + 1) * ni)

    @property
    def boundary_dofs(self):
        m = self.scheme.n_trace
        b = self.mesh.boundary_edges
        return (self.n_interior_dofs + m * b[:, None] + np.arange(m)).ravel()

    @property
    def free_dofs(self):
        mask = np.ones(self.ndofs, dtype=bool)
        mask[self.boundary_dofs] = False
        return np.flatnonzero(mask)

    def local(self, t):
        op = self._local[t]
        if op is None:
            if self.reuse_congruent:
                key = _shape_key(self.mesh, t)
                shared = self._shared.get(key)
                if shared is None:
                    op = LocalOperators(self.mesh, t, self.scheme)
                    self._shared[key] = op.shareable()
                else:
                    op = LocalOperators(self.mesh, t, self.scheme, **shared)
            else:
                op = LocalOperators(self.mesh, t, self.scheme)
            self._local[t] = op
        return op

    def zero(self):
        return WeakFunction(self, np.zeros(self.ndofs))

    def edge_basis(self, e):
        variant, degree = self.scheme.trace
        return EdgeTraceBasis(self.mesh.edge_frame(e), variant, degree)


class WeakFunction:
    """A member ``{v0, vb}`` of ``V_h`` stored as one global coefficient vector."""

    def __init__(self, space, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.ndofs,):
            raise ValueError(f"expected {space.ndofs} coefficients, got {coeffs.shape}")
        self.space = space
        self.coeffs = coeffs

    @property
    def scheme(self):
        return self.space.scheme

    def interior(self, t):
        """(2, nb) interior coefficients on element ``t``."""
        return self.coeffs[self.space.interior_dofs(t)].reshape(2, -1)

    def trace(self, e):
        return self.coeffs[self.space.edge_dofs(e)]

    def local(self, t):
        return self.coeffs[self.space.element_dofs(t)]

    def interior_values(self, t, x):
        """Values of ``v0`` on element ``t`` at points ``x``; shape (nq, 2)."""
        phi = self.space.local(t).basis.values(x)
        return phi @ self.interior(t).T

    def trace_values(self, e, tparam):
        vals = self.space.edge_basis(e).values(tparam)
        return np.einsum("qic,i->qc", vals, self.trace(e))

    def __sub__(self, other):
        _check_same(self, other)
        return WeakFunction(self.space, self.coeffs - other.coeffs)

    def __add__(self, other):
        _check_same(self, other)
        return WeakFunction(self.space, self.coeffs + other.coeffs)

    def __mul__(self, scalar):
        return WeakFunction(self.space, scalar * self.coeffs)

    __rmul__ = __mul__


def _check_same(a, b):
    if a.space is not b.space:
        raise ValueError("weak functions live on different spaces")


class PressureField:
    """Piecewise polynomial of degree ``k - 1``; coefficients (n_elements, nr)."""

    def __init__(self, space, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        nr = space.scheme.n_pressure
        coeffs = coeffs.reshape(space.mesh.n_elements, nr)
        self.space = space
        self.coeffs = coeffs

    def values(self, t, x):
        return self.space.local(t).pbasis.values(x) @ self.coeffs[t]

    def integral(self):
        """``(q, 1)`` over the whole domain."""
        total = 0.0
        for t in range(self.space.mesh.n_elements):
            op = self.space.local(t)
            # first scaled monomial is the constant 1
            total += op.Mr[0] @ self.coeffs[t]
        return float(total)

    def l2_norm(self):
        total = 0.0
        for t in range(self.space.mesh.n_elements):
            c = self.coeffs[t]
            total += c @ self.space.local(t).Mr @ c
        return float(np.sqrt(total))

    def mean_zero(self):
        """Copy with the domain average removed."""
        area = float(self.space.mesh.areas.sum())
        coeffs = self.coeffs.copy()
        coeffs[:, 0] -= self.integral() / area
        return PressureField(self.space, coeffs)

    def __sub__(self, other):
        return PressureField(self.space, self.coeffs - other.coeffs)


# ---------------------------------------------------------------- projections

def _vector_eval(f, x):
    out = np.asarray(f(x), dtype=float)
    if out.ndim == 1:
        out = np.broadcast_to(out, (len(x), 2))
    return out


def project_interior_Q0(f, space, t, degree=None):
    """L2 projection of a vector field onto ``[P_k(T)]^2``; returns (2, nb)."""
    op = space.local(t)
    degree = space.scheme.load_degree if degree is None else degree
    qx, qw = polygon_quadrature(space.mesh.element_vertices(t), degree)
    phi = op.basis.values(qx)
    fx = _vector_eval(f, qx)
    rhs = (phi * qw[:, None]).T @ fx  # (nb, 2)
    return np.linalg.solve(op.M0, rhs).T


def project_edge_Qb(g, space, e, points=None):
    """L2 projection of a vector field onto the trace space of edge ``e``."""
    basis = space.edge_basis(e)
    points = space.scheme.edge_points if points is None else points
    rule = edge_quadrature(points)
    frame = basis.frame
    xq = frame.point(rule.points)
    w = rule.weights * 0.5 * frame.length
    chi = basis.values(rule.points)
    gx = _vector_eval(g, xq)
    Me = np.einsum("q,qic,qjc->ij", w, chi, chi)
    rhs = np.einsum("q,qic,qc->i", w, chi, gx)
    return np.linalg.solve(Me, rhs)


def project_Qh(u, space, degree=None, points=None):
    """``Q_h u = {Q_0 u, Q_b u}`` as a :class:`WeakFunction`."""
    coeffs = np.zeros(space.ndofs)
    for t in range(space.mesh.n_elements):
        coeffs[space.interior_dofs(t)] = project_interior_Q0(u, space, t, degree).ravel()
    for e in range(space.mesh.n_edges):
        coeffs[space.edge_dofs(e)] = project_edge_Qb(u, space, e, points)
    return WeakFunction(space, coeffs)


def project_scalar_Qh(rho, space, degree=None):
    """Elementwise L2 projection onto ``P_{k-1}``; returns a PressureField."""
    degree = space.scheme.load_degree if degree is None else degree
    out = np.zeros((space.mesh.n_elements, space.scheme.n_pressure))
    for t in range(space.mesh.n_elements):
        op = space.local(t)
        qx, qw = polygon_quadrature(space.mesh.element_vertices(t), degree)
        psi = op.pbasis.values(qx)
        vals = np.broadcast_to(np.asarray(rho(qx), dtype=float), (len(qx),))
        out[t] = np.linalg.solve(op.Mr, psi.T @ (qw * vals))
    return PressureField(space, out)


def project_tensor_Qh(tau, space, degree=None):
    """Elementwise L2 projection of a 2x2 tensor field onto ``[P_{k-1}]^{2x2}``.

    ``tau(x)`` returns shape (nq, 2, 2); result has shape (n_elements, 2, 2, nr).
    """
    degree = space.scheme.load_degree if degree is None else degree
    nr = space.scheme.n_pressure
    out = np.zeros((space.mesh.n_elements, 2, 2, nr))
    for t in range(space.mesh.n_elements):
        op = space.local(t)
        qx, qw = polygon_quadrature(space.mesh.element_vertices(t), degree)
        psi = op.pbasis.values(qx)
        vals = np.broadcast_to(np.asarray(tau(qx), dtype=float), (len(qx), 2, 2))
        rhs = np.einsum("qj,q,qrs->rsj", psi, qw, vals)
        out[t] = np.linalg.solve(op.Mr, rhs.reshape(4, nr).T).T.reshape(2, 2, nr)
    return out


# ---------------------------------------------------------- weak operators

def weak_gradient_matrix(space, t):
    """(2, 2, nr, nloc) map from local DOFs to weak gradient coefficients."""
    return space.local(t).G


def weak_divergence_matrix(space, t):
    """(nr, nloc) map from local DOFs to weak divergence coefficients."""
    return space.local(t).D


def weak_strain_matrix(space, t):
    return space.local(t).E


def weak_gradient(v):
    """Per-element weak gradient coefficients, shape (n_elements, 2, 2, nr)."""
    sp = v.space
    return np.stack([np.einsum("rsjl,l->rsj", sp.local(t).G, v.local(t))
                     for t in range(sp.mesh.n_elements)])


def weak_divergence(v):
    """Weak divergence as a :class:`PressureField` (degree ``k - 1``)."""
    sp = v.space
    return PressureField(sp, np.stack([sp.local(t).D @ v.local(t)
                                       for t in range(sp.mesh.n_elements)]))


def weak_strain(v):
    g = weak_gradient(v)
    return 0.5 * (g + g.transpose(0, 2, 1, 3))


def weak_stress(v, mu, lam):
    """``sigma_w = 2 mu eps_w + lam (div_w v) I`` per element, (n_el, 2, 2, nr)."""
    eps = weak_strain(v)
    div = weak_divergence(v).coeffs
    sigma = 2.0 * mu * eps
    sigma[:, 0, 0] += lam * div
    sigma[:, 1, 1] += lam * div
    return sigma
