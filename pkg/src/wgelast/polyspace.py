"""Quadrature rules, polynomial bases on elements and edges, mass matrices."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

RM = "rm"
P = "p"
VARIANTS = (RM, P)


@dataclass(frozen=True)
class QuadRule:
    """Quadrature points/weights together with the exactness degree."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def _triangle_rule(degree):
    # Conical product rule: Gauss-Jacobi(1, 0) in the collapsed direction,
    # Gauss-Legendre along the fibres. n points per direction are exact to
    # degree 2n - 1; n = 1 is the centroid rule.
    n = (degree + 2) // 2
    s, ws = roots_jacobi(n, 1.0, 0.0)  # weight (1 - s) on [-1, 1]
    t, wt = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (s + 1.0)
    ws = ws / 4.0
    t = 0.5 * (t + 1.0)
    wt = wt / 2.0
    S, T = np.meshgrid(s, t, indexing="ij")
    x = S
    y = (1.0 - S) * T
    w = np.outer(ws, wt)
    pts = np.column_stack([x.ravel(), y.ravel()])
    return pts, w.ravel()


def triangle_quadrature(degree):
    """Rule on the reference triangle (0,0), (1,0), (0,1) exact to ``degree``."""
    degree = int(degree)
    if not 1 <= degree <= 10:
        raise ValueError(f"unsupported triangle quadrature degree {degree} (1..10)")
    pts, w = _triangle_rule(degree)
    return QuadRule(pts.copy(), w.copy(), degree)


def edge_quadrature(points):
    """Gauss-Legendre rule on [-1, 1] with ``points`` nodes."""
    points = int(points)
    if not 1 <= points <= 10:
        raise ValueError(f"unsupported edge quadrature size {points} (1..10)")
    t, w = np.polynomial.legendre.leggauss(points)
    return QuadRule(t, w, 2 * points - 1)


def polygon_quadrature(xy, degree):
    """Physical points and weights on a CCW polygon.

    Triangles are mapped affinely; other polygons are split into a fan of
    triangles around the vertex average with the same rule on each.
    """
    rule = triangle_quadrature(degree)
    xy = np.asarray(xy, dtype=float)
    if len(xy) == 3:
        tris = [xy]
    else:
        c = xy.mean(axis=0)
        tris = [np.array([c, xy[i], xy[(i + 1) % len(xy)]]) for i in range(len(xy))]
    pts, wts = [], []
    for a, b, c in tris:
        jac = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
        pts.append(a + np.outer(rule.points[:, 0], b - a) + np.outer(rule.points[:, 1], c - a))
        wts.append(rule.weights * jac)
    return np.vstack(pts), np.concatenate(wts)


def monomial_exponents(k):
    """Exponents (a, b) with a + b <= k ordered by total degree."""
    return [(d - b, b) for d in range(k + 1) for b in range(d + 1)]


def dim_poly(k):
    return (k + 1) * (k + 2) // 2 if k >= 0 else 0


class ElementBasis:
    """Scaled monomials ``((x - x_T)/h_T)^a ((y - y_T)/h_T)^b`` on one element."""

    def __init__(self, center, h, k):
        self.center = np.asarray(center, dtype=float)
        self.h = float(h)
        self.degree = int(k)
        self.exponents = np.array(monomial_exponents(k), dtype=int).reshape(-1, 2)

    @classmethod
    def on(cls, mesh, t, k):
        return cls(mesh.centroids[t], mesh.diameters[t], k)

    def __len__(self):
        return len(self.exponents)

    def _scaled(self, x):
        return (np.asarray(x, dtype=float) - self.center) / self.h

    def values(self, x):
        """(nq, nb) basis values at points ``x`` of shape (nq, 2)."""
        z = self._scaled(x)
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        return z[:, :1] ** a * z[:, 1:] ** b

    def gradients(self, x):
        """(nq, nb, 2) basis gradients."""
        z = self._scaled(x)
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        zx, zy = z[:, :1], z[:, 1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = np.where(a > 0, a * zx ** np.maximum(a - 1, 0), 0.0) * zy**b
            dy = zx**a * np.where(b > 0, b * zy ** np.maximum(b - 1, 0), 0.0)
        return np.stack([dx, dy], axis=-1) / self.h


class EdgeTraceBasis:
    """Vector-valued trace basis on one edge, parametrized by ``t`` in [-1, 1].

    Variant ``"p"``: Legendre ``P_j(t) e_c`` for ``j <= degree``, ordered
    component-major. Variant ``"rm"``: ``e_1, e_2, P_1(t) n_e`` where ``n_e``
    is the global edge normal; this spans the traces of rigid motions.
    """

    def __init__(self, frame, variant, degree=1):
        if variant not in VARIANTS:
            raise ValueError(f"unknown trace variant {variant!r}")
        self.frame = frame
        self.variant = variant
        self.degree = 1 if variant == RM else int(degree)

    def __len__(self):
        return 3 if self.variant == RM else 2 * (self.degree + 1)

    def values(self, t):
        """(nq, nb, 2) basis values at reference parameters ``t``."""
        t = np.asarray(t, dtype=float)
        nq = len(t)
        if self.variant == RM:
            out = np.zeros((nq, 3, 2))
            out[:, 0, 0] = 1.0
            out[:, 1, 1] = 1.0
            out[:, 2, :] = t[:, None] * self.frame.normal
            return out
        leg = np.polynomial.legendre.legvander(t, self.degree)  # (nq, d+1)
        nd = self.degree + 1
        out = np.zeros((nq, 2 * nd, 2))
        out[:, :nd, 0] = leg
        out[:, nd:, 1] = leg
        return out


def trace_space(k, variant):
    """Resolved (variant, degree) of the edge space.

    For ``k > 1`` the rigid-motion traces are already contained in
    ``[P_{k-1}(e)]^2``, so both variants use the full polynomial space.
    """
    if k == 1:
        return (RM, 1) if variant == RM else (P, 1)
    return (P, k - 1)


def mass_matrix(basis, rule, points=None, weights=None):
    """Mass matrix ``M[i, j] = integral of phi_i . phi_j``.

    For an :class:`ElementBasis` pass the physical quadrature ``points`` and
    ``weights`` (e.g. from :func:`polygon_quadrature`); ``rule`` carries the
    exactness degree. For an :class:`EdgeTraceBasis` the reference edge rule
    is scaled by the edge length.
    """
    if rule.degree < 2 * basis.degree:
        raise ValueError(f"quadrature degree {rule.degree} too low for basis degree "
                         f"{basis.degree} (need {2 * basis.degree})")
    if isinstance(basis, EdgeTraceBasis):
        vals = basis.values(rule.points)
        w = rule.weights * 0.5 * basis.frame.length
        return np.einsum("q,qic,qjc->ij", w, vals, vals)
    vals = basis.values(points)
    return (vals * weights[:, None]).T @ vals


def rigid_motion_basis(center, h):
    """Three rigid motions on an element: two translations and a scaled rotation.

    Returns a list of callables mapping (nq, 2) points to (nq, 2) values,
    followed by their constant gradients as (2, 2) arrays.
    """
    center = np.asarray(center, dtype=float)
    h = float(h)

    def tx(x):
        x = np.atleast_2d(x)
        return np.tile([1.0, 0.0], (len(x), 1))

    def ty(x):
        x = np.atleast_2d(x)
        return np.tile([0.0, 1.0], (len(x), 1))

    def rot(x):
        z = (np.atleast_2d(x) - center) / h
        return np.column_stack([-z[:, 1], z[:, 0]])

    grads = [np.zeros((2, 2)), np.zeros((2, 2)), np.array([[0.0, -1.0], [1.0, 0.0]]) / h]
    return [tx, ty, rot], grads


def rigid_motion_coefficients(k):
    """Coefficients of the three rigid motions in the element vector basis.

    The vector basis is component-major over :func:`monomial_exponents`;
    the rotation ``(-(y-y_T), x-x_T)/h_T`` uses the scaled monomials
    directly.
    """
    nb = dim_poly(k)
    C = np.zeros((3, 2 * nb))
    C[0, 0] = 1.0
    C[1, nb] = 1.0
    C[2, 2] = -1.0  # first component: -(y - y_T)/h_T, exponent (0, 1)
    C[2, nb + 1] = 1.0  # second component: (x - x_T)/h_T, exponent (1, 0)
    return C
