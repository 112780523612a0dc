import dataclasses

import numpy as np
import pytest

from wgelast import PROBLEMS, get_problem
from wgelast.problems import LoadMismatch


@pytest.mark.parametrize("name", sorted(PROBLEMS))
@pytest.mark.parametrize("lam", [1.0, 100.0, 1e6])
def test_loads_match_finite_differences(name, lam):
    prob = get_problem(name, lam=lam, mu=0.5)
    assert prob.check_load() < 1e-5


def test_sign_error_detected():
    prob = get_problem("test1")
    flipped = dataclasses.replace(prob, f=lambda x: -prob.f(x))
    assert flipped.check_load() > 1e-2


def test_get_problem_guards(monkeypatch):
    with pytest.raises(KeyError):
        get_problem("nope")
    from wgelast import problems
    good = problems.test2

    def broken(lam, mu):
        p = good(lam, mu)
        return dataclasses.replace(p, f=lambda x: p.f(x) + np.array([0.0, 1.0]))

    monkeypatch.setitem(problems.PROBLEMS, "test2", broken)
    with pytest.raises(LoadMismatch):
        get_problem("test2")


def test_locking_divergence():
    lam = 250.0
    prob = get_problem("locking", lam=lam)
    x = np.random.default_rng(0).random((10, 2))
    g = prob.grad(x)
    assert np.allclose(g[:, 0, 0] + g[:, 1, 1], 2 / lam)
    with pytest.raises(ValueError):
        get_problem("locking", lam=0.0)


def test_dirichlet_data_is_exact_solution():
    prob = get_problem("test2")
    x = np.array([[0.0, 0.3], [1.0, 1.0]])
    assert np.allclose(prob.u_hat(x), [[0.09, 0.09], [4.0, 0.0]])
