"""Manufactured solutions on the unit square.

Loads are hand-derived from ``f = -div sigma(u)`` with
``sigma = 2 mu eps(u) + lam (div u) I``, i.e.
``f = -mu lap u - (lam + mu) grad div u``, and are checked against a
central finite-difference oracle whenever a problem is built.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_LAM = 1.0
DEFAULT_MU = 0.5


class LoadMismatch(AssertionError):
    """The closed-form load disagrees with the finite-difference oracle."""


@dataclass(frozen=True)
class ManufacturedProblem:
    name: str
    lam: float
    mu: float
    u: Callable
    grad: Callable
    f: Callable
    description: str = ""
    linear: bool = False

    @property
    def u_hat(self):
        return self.u

    def stress(self, x):
        g = self.grad(x)
        eps = 0.5 * (g + g.transpose(0, 2, 1))
        div = g[:, 0, 0] + g[:, 1, 1]
        return 2.0 * self.mu * eps + self.lam * div[:, None, None] * np.eye(2)

    def check_load(self, samples=5, step=1e-4):
        """Compare ``f`` and ``grad`` with central differences at
        ``samples**2`` interior points; returns the worst relative error."""
        s = (np.arange(samples) + 0.5) / samples
        X, Y = np.meshgrid(s, s)
        x = np.column_stack([X.ravel(), Y.ravel()])
        h = step
        ex, ey = np.array([h, 0.0]), np.array([0.0, h])

        g_fd = np.empty((len(x), 2, 2))
        g_fd[:, :, 0] = (self.u(x + ex) - self.u(x - ex)) / (2 * h)
        g_fd[:, :, 1] = (self.u(x + ey) - self.u(x - ey)) / (2 * h)
        g = self.grad(x)
        grad_err = np.abs(g - g_fd).max() / max(np.abs(g).max(), 1.0)

        div_sigma = ((self.stress(x + ex) - self.stress(x - ex))[:, :, 0]
                     + (self.stress(x + ey) - self.stress(x - ey))[:, :, 1]) / (2 * h)
        f = self.f(x)
        load_err = np.abs(f + div_sigma).max() / max(np.abs(f).max(), 1.0)
        return float(max(grad_err, load_err))


def _cols(*arrays):
    return np.column_stack(arrays)


def test1(lam=DEFAULT_LAM, mu=DEFAULT_MU):
    """``u = (sin x sin y, 1)``."""
    def u(x):
        X, Y = x[:, 0], x[:, 1]
        return _cols(np.sin(X) * np.sin(Y), np.ones_like(X))

    def grad(x):
        X, Y = x[:, 0], x[:, 1]
        g = np.zeros((len(x), 2, 2))
        g[:, 0, 0] = np.cos(X) * np.sin(Y)
        g[:, 0, 1] = np.sin(X) * np.cos(Y)
        return g

    def f(x):
        X, Y = x[:, 0], x[:, 1]
        return _cols((3 * mu + lam) * np.sin(X) * np.sin(Y), -(mu + lam) * np.cos(X) * np.cos(Y))

    return ManufacturedProblem("test1", lam, mu, u, grad, f, "u = (sin x sin y, 1)")


def test2(lam=DEFAULT_LAM, mu=DEFAULT_MU):
    """``u = ((x + y)^2, (x - y)^2)``."""
    def u(x):
        X, Y = x[:, 0], x[:, 1]
        return _cols((X + Y) ** 2, (X - Y) ** 2)

    def grad(x):
        X, Y = x[:, 0], x[:, 1]
        g = np.empty((len(x), 2, 2))
        g[:, 0, 0] = g[:, 0, 1] = 2 * (X + Y)
        g[:, 1, 0] = 2 * (X - Y)
        g[:, 1, 1] = -2 * (X - Y)
        return g

    def f(x):
        return np.tile([-4.0 * mu, -8.0 * mu - 4.0 * lam], (len(x), 1))

    return ManufacturedProblem("test2", lam, mu, u, grad, f, "u = ((x+y)^2, (x-y)^2)")


def locking(lam=DEFAULT_LAM, mu=DEFAULT_MU):
    """``u = (sin x sin y, cos x cos y) + (x, y) / lam``; ``div u = 2 / lam``."""
    if lam <= 0:
        raise ValueError("the locking problem needs lam > 0")

    def u(x):
        X, Y = x[:, 0], x[:, 1]
        return _cols(np.sin(X) * np.sin(Y) + X / lam, np.cos(X) * np.cos(Y) + Y / lam)

    def grad(x):
        X, Y = x[:, 0], x[:, 1]
        g = np.empty((len(x), 2, 2))
        g[:, 0, 0] = np.cos(X) * np.sin(Y) + 1.0 / lam
        g[:, 0, 1] = np.sin(X) * np.cos(Y)
        g[:, 1, 0] = -np.sin(X) * np.cos(Y)
        g[:, 1, 1] = -np.cos(X) * np.sin(Y) + 1.0 / lam
        return g

    def f(x):
        X, Y = x[:, 0], x[:, 1]
        return 2 * mu * _cols(np.sin(X) * np.sin(Y), np.cos(X) * np.cos(Y))

    return ManufacturedProblem("locking", lam, mu, u, grad, f,
                               "u = (sin x sin y, cos x cos y) + (x, y)/lam")


def rigid(lam=DEFAULT_LAM, mu=DEFAULT_MU):
    """Rigid motion ``u = (0.3 - 0.7 y, -0.2 + 0.7 x)``; ``f = 0``."""
    def u(x):
        return _cols(0.3 - 0.7 * x[:, 1], -0.2 + 0.7 * x[:, 0])

    def grad(x):
        g = np.zeros((len(x), 2, 2))
        g[:, 0, 1] = -0.7
        g[:, 1, 0] = 0.7
        return g

    def f(x):
        return np.zeros((len(x), 2))

    return ManufacturedProblem("rigid", lam, mu, u, grad, f, "rigid motion", linear=True)


def linear(lam=DEFAULT_LAM, mu=DEFAULT_MU):
    """General linear field ``u = (1 + 2x - y, -0.5 + 0.3x + 1.5y)``; ``f = 0``."""
    A = np.array([[2.0, -1.0], [0.3, 1.5]])
    b = np.array([1.0, -0.5])

    def u(x):
        return x @ A.T + b

    def grad(x):
        return np.broadcast_to(A, (len(x), 2, 2)).copy()

    def f(x):
        return np.zeros((len(x), 2))

    return ManufacturedProblem("linear", lam, mu, u, grad, f, "linear field", linear=True)


PROBLEMS = {
    "test1": test1,
    "test2": test2,
    "locking": locking,
    "rigid": rigid,
    "linear": linear,
}


def get_problem(name, lam=DEFAULT_LAM, mu=DEFAULT_MU, check=True, tol=1e-5):
    """Build a registered problem; the load is verified unless ``check`` is false."""
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    problem = factory(lam=lam, mu=mu)
    if check:
        err = problem.check_load()
        if err >= tol:
            raise LoadMismatch(f"problem {name}: load differs from finite differences "
                               f"by {err:.2e} (relative)")
    return problem
