import time

import numpy as np
import pytest

from wgelast import (MaterialParams, Scheme, SolverError, WeakSpace, assemble_mixed,
                     assemble_primal, generate_uniform_triangles, get_problem, project_Qh,
                     recover_pressure, solve, solve_mixed, solve_primal)
from wgelast.analysis import (energy_norm, error_vs_exact, galerkin_residual, interior_l2,
                              strain_norm, symmetry_defect)
from wgelast.system import boundary_flux, pcg, stabilizer_local
from wgelast.weakcalc import project_scalar_Qh

from conftest import SCHEMES

MAT = MaterialParams(1.0, 0.5)


def test_material_from_young():
    m = MaterialParams.from_young(E=210.0, nu=0.3)
    assert m.lam == pytest.approx(210 * 0.3 / (1.3 * 0.4))
    assert m.mu == pytest.approx(210 / 2.6)
    with pytest.raises(ValueError):
        MaterialParams.from_young(1.0, 0.5)
    with pytest.raises(ValueError):
        MaterialParams(-1.0, 1.0)
    with pytest.raises(ValueError):
        MaterialParams(1.0, 0.0)


@pytest.mark.parametrize("scheme", SCHEMES, ids=str)
def test_stabilizer_symmetric_psd(scheme):
    sp = WeakSpace(generate_uniform_triangles(2), scheme)
    S = stabilizer_local(sp, 1)
    assert np.abs(S - S.T).max() < 1e-14
    assert np.linalg.eigvalsh(S).min() > -1e-13


def test_rigid_patch(spaces):
    prob = get_problem("rigid")
    for key in [(3, 1, "rm"), (3, 1, "p"), (3, 2, "p")]:
        u_h, _ = solve_primal(spaces(*key), MAT, prob.f, prob.u)
        err = error_vs_exact(u_h, prob, MAT)
        assert max(err.as_tuple()) < 1e-10


def test_linear_patch_residual(spaces):
    # a_s(Q_h u, v) = 0 for all v in V_h^0 when u is linear and f = 0
    prob = get_problem("linear")
    for key in [(4, 1, "rm"), (4, 1, "p"), (4, 2, "p")]:
        sp = spaces(*key)
        assert galerkin_residual(project_Qh(prob.u, sp), MAT, prob.f) < 1e-12
        u_h, _ = solve_primal(sp, MAT, prob.f, prob.u)
        assert energy_norm(project_Qh(prob.u, sp) - u_h, MAT) < 1e-10


def test_table_value_test1(spaces):
    prob = get_problem("test1")
    u_h, _ = solve_primal(spaces(4), MAT, prob.f, prob.u)
    err = error_vs_exact(u_h, prob, MAT)
    assert round(err.e0, 4) == 0.0192
    assert round(err.energy, 4) == 0.1566


def test_cg_matches_dense(spaces):
    prob = get_problem("test1")
    sys_ = assemble_primal(spaces(4), MAT, prob.f, prob.u)
    a = solve(sys_, method="dense", tol=1e-12)
    b = solve(sys_, method="cg", tol=1e-12)
    c = solve(sys_, method="direct")
    assert energy_norm(a - b, MAT) < 1e-9
    assert energy_norm(a - c, MAT) < 1e-12
    assert sys_.diagnostics["method"] == "direct"


def test_pcg_reports_failure():
    import scipy.sparse as sps
    n = 200
    A = sps.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")
    x, iters, _ = pcg(A, np.ones(n), tol=1e-10)
    assert np.linalg.norm(A @ x - 1.0) < 1e-8 * np.sqrt(n)
    with pytest.raises(SolverError) as info:
        pcg(A, np.ones(n), tol=1e-10, max_iter=3)
    assert info.value.diagnostics["iterations"] == 3


def test_solve_validates_tolerance(spaces):
    sys_ = assemble_primal(spaces(2), MAT)
    with pytest.raises(ValueError):
        solve(sys_, tol=1e-3)
    with pytest.raises(ValueError):
        solve(sys_, method="magic")


@pytest.mark.parametrize("lam", [0.0, 1.0, 1e6])
def test_zero_data_zero_solution(spaces, lam):
    for key in [(2, 1, "rm"), (2, 1, "p")]:
        u_h, _ = solve_primal(spaces(*key), MaterialParams(lam, 0.5))
        assert np.abs(u_h.coeffs).max() < 1e-12


def test_symmetry(spaces):
    for lam in (0.0, 1.0, 1e6):
        assert symmetry_defect(spaces(3), MaterialParams(lam, 0.5)) < 1e-12


def test_condensation_agrees(spaces):
    prob = get_problem("test1")
    for key in [(4, 1, "rm"), (4, 2, "p")]:
        sp = spaces(*key)
        full, _ = solve_primal(sp, MAT, prob.f, prob.u)
        cond, sys_ = solve_primal(sp, MAT, prob.f, prob.u, condense=True)
        assert sys_.condensed and sys_.n_free < len(sp.free_dofs)
        assert energy_norm(full - cond, MAT) < 1e-10


def test_no_boundary_rejected():
    import dataclasses
    mesh = generate_uniform_triangles(1)
    closed = dataclasses.replace(mesh, edge_elements=np.where(mesh.edge_elements < 0, 0,
                                                              mesh.edge_elements))
    with pytest.raises(ValueError):
        assemble_primal(WeakSpace(closed, Scheme()), MAT)


def test_mixed_rigid(spaces):
    prob = get_problem("rigid")
    sp = spaces(3)
    u, p = solve_mixed(assemble_mixed(sp, MAT, prob.f, prob.u))
    assert energy_norm(u - project_Qh(prob.u, sp), MAT) < 1e-10
    assert np.abs(p.coeffs).max() < 1e-10


def test_mixed_rejects_zero_lambda(spaces):
    with pytest.raises(ValueError):
        assemble_mixed(spaces(2), MaterialParams(0.0, 0.5))


@pytest.mark.parametrize("lam", [1.0, 1e4])
def test_compatibility_flux(lam):
    prob = get_problem("locking", lam=lam)
    sp = WeakSpace(generate_uniform_triangles(4), Scheme())
    assert boundary_flux(sp, prob.u) == pytest.approx(2.0 / lam, rel=1e-12)


def test_mixed_matches_primal(spaces):
    prob = get_problem("test1")
    sp = spaces(4)
    u_p, _ = solve_primal(sp, MAT, prob.f, prob.u)
    u_m, p_m = solve_mixed(assemble_mixed(sp, MAT, prob.f, prob.u))
    assert strain_norm(u_p - u_m) < 1e-10
    assert (recover_pressure(u_p, MAT.lam) - p_m).l2_norm() < 1e-10


def test_recover_pressure_identity_map(spaces):
    p = recover_pressure(project_Qh(lambda x: x.copy(), spaces(2)), 3.0)
    assert np.allclose(p.coeffs[:, 0], 6.0, atol=1e-12)


def test_pressure_converges_for_solenoidal_field():
    # u = (sin x sin y, cos x cos y) is divergence-free, so p = lam div u = 0
    errs = []
    for n in (4, 8, 16):
        prob = get_problem("locking", lam=1e6)
        sp = WeakSpace(generate_uniform_triangles(n), Scheme())
        mat = MaterialParams(prob.lam, prob.mu)
        u_h, _ = solve_primal(sp, mat, prob.f, prob.u)
        exact = project_scalar_Qh(lambda x: 2.0 * np.ones(len(x)), sp)  # lam * 2/lam
        errs.append((recover_pressure(u_h, mat.lam) - exact).l2_norm())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 0.9)


def test_large_mesh_runtime():
    prob = get_problem("test1")
    start = time.perf_counter()
    sp = WeakSpace(generate_uniform_triangles(32), Scheme())
    u_h, sys_ = solve_primal(sp, MAT, prob.f, prob.u)
    assert time.perf_counter() - start < 60
    assert interior_l2(project_Qh(prob.u, sp) - u_h) < 5e-4
    assert sys_.diagnostics["residual"] < 1e-10


def test_pcg_detects_indefinite():
    import scipy.sparse as sps
    A = sps.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(SolverError, match="breakdown"):
        pcg(A, np.array([1.0, -1.0]))
