import numpy as np
import pytest
import sympy as sp

from wgelast import (MaterialParams, Scheme, WeakSpace, generate_uniform_triangles,
                     get_problem, project_Qh, solve_primal)
from wgelast.analysis import (ConvergenceReport, ErrorTriple, b_form, check_commuting,
                              check_infsup_construction, check_korn_rigid, check_korn_ratio,
                              check_patch_test, coercivity_sampling, convergence_order,
                              error_vs_exact, infsup_test_function, korn_lhs,
                              norm_gram_min_eigenvalue, observed_order, pressure_norm,
                              random_mean_zero_pressure, strain_norm)
from wgelast.weakcalc import PressureField, weak_divergence

from conftest import SCHEMES, reference_triangle

MAT = MaterialParams(1.0, 0.5)


# ----------------------------------------------------------------- orders

def test_observed_order_examples():
    assert observed_order(0.0192, 0.0049) == pytest.approx(1.98, abs=0.02)
    assert observed_order(0.1566, 0.0787) == pytest.approx(0.99, abs=0.005)
    assert observed_order(1.0, 0.5) == pytest.approx(1.0)
    assert observed_order(0.0, 1.0) is None


def test_convergence_order_report():
    rep = ConvergenceReport("x", "rm", 1.0, 0.5)
    for n, e in [(2, 0.4), (4, 0.1), (8, 0.025)]:
        rep.add(n, ErrorTriple(e, e, 2 * e))
    convergence_order(rep)
    assert rep.orders[0] == (None, None, None)
    assert rep.orders[2][0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        rep.add(8, ErrorTriple(1, 1, 1))
    tiny = ConvergenceReport("x", "rm", 1.0, 0.5)
    tiny.add(2, ErrorTriple(1e-14, 1e-14, 1e-13))
    tiny.add(4, ErrorTriple(3e-15, 2e-14, 4e-13))
    assert convergence_order(tiny).orders[1] == (None, None, None)
    with pytest.raises(ValueError):
        convergence_order(ConvergenceReport("x", "rm", 1.0, 0.5))


# ----------------------------------------------------------------- errors

def test_errors_of_exact_projection(spaces):
    prob = get_problem("test1")
    e = error_vs_exact(project_Qh(prob.u, spaces(4)), prob, MAT)
    assert max(e.as_tuple()) < 1e-10


def test_table_row_test1_rm(spaces):
    prob = get_problem("test1")
    u_h, _ = solve_primal(spaces(8), MAT, prob.f, prob.u)
    e = error_vs_exact(u_h, prob, MAT)
    assert tuple(round(v, 4) for v in e.as_tuple()) == (0.0049, 0.0031, 0.0787)
    # the element-boundary form counts interior edges twice and weights by h_T
    assert e.eb_elementwise > e.eb


def test_table_row_test2_p(spaces):
    prob = get_problem("test2")
    u_h, _ = solve_primal(spaces(16, 1, "p"), MAT, prob.f, prob.u)
    e = error_vs_exact(u_h, prob, MAT)
    assert round(e.e0, 4) == 0.0068
    assert round(e.energy, 4) == 0.2316


def test_divergence_term_bounded_in_lambda():
    # lam ||div_w e||^2 = ||lam div_w e||^2 / lam: the pressure-scaled
    # quantity lam ||div_w e|| is what stays fixed as lam grows. Q_h u is
    # taken with high-order rules since lam amplifies quadrature error.
    terms, scaled = [], []
    for lam in (1e4, 1e6):
        prob = get_problem("locking", lam=lam)
        mat = MaterialParams(lam, 0.5)
        sp_ = WeakSpace(generate_uniform_triangles(8), Scheme())
        u_h, _ = solve_primal(sp_, mat, prob.f, prob.u)
        e = project_Qh(prob.u, sp_, degree=10, points=8) - u_h
        d = weak_divergence(e).l2_norm()
        terms.append(lam * d**2)
        scaled.append(lam * d)
    assert terms[1] <= terms[0]
    assert abs(scaled[0] - scaled[1]) / max(scaled) < 0.05


# --------------------------------------------------------------- commuting

@pytest.mark.parametrize("scheme", SCHEMES, ids=str)
def test_commuting_polynomials(scheme, spaces):
    sp_ = spaces(4, scheme.k, scheme.variant)
    assert check_commuting(sp_, trials=100) < 1e-10


@pytest.mark.parametrize("variant", ["rm", "p"])
def test_commuting_beyond_degree(variant, spaces):
    sp_ = spaces(4, 1, variant)
    assert check_commuting(sp_, trials=20, degree=2, seed=5) < 1e-11
    assert check_commuting(sp_, trials=10, degree=3, seed=6) < 1e-11


def test_commuting_identity_map(spaces):
    assert check_commuting(spaces(2), trials=1, degree=1) < 1e-12


# ------------------------------------------------------------------ inf-sup

def test_zero_pressure():
    sp_ = WeakSpace(generate_uniform_triangles(2), Scheme())
    q = PressureField(sp_, np.zeros(sp_.mesh.n_elements))
    assert check_infsup_construction(q) == (0.0, 0.0)


def test_checkerboard_pressure():
    sp_ = WeakSpace(generate_uniform_triangles(4), Scheme())
    q = PressureField(sp_, (-1.0) ** np.arange(sp_.mesh.n_elements)).mean_zero()
    vq = infsup_test_function(q)
    assert abs(b_form(vq, q) - pressure_norm(q) ** 2) < 1e-11 * pressure_norm(q) ** 2
    assert strain_norm(vq) > 0


def test_infsup_test_function_has_zero_boundary_trace(spaces, rng):
    sp_ = spaces(4, 2, "p")
    vq = infsup_test_function(random_mean_zero_pressure(sp_, rng))
    assert np.abs(vq.coeffs[sp_.boundary_dofs]).max() == 0.0


@pytest.mark.parametrize("k,variant", [(1, "rm"), (1, "p"), (2, "p")])
def test_infsup_identity_random(k, variant, spaces, rng):
    ratios = []
    for n in (2, 4, 8):
        sp_ = spaces(n, k, variant)
        level = []
        for _ in range(10):
            q = random_mean_zero_pressure(sp_, rng)
            resid, ratio = check_infsup_construction(q)
            assert resid < 1e-11 * pressure_norm(q) ** 2
            level.append(ratio)
        ratios.append(min(level))
    assert min(ratios) > 0.2


def test_infsup_requires_mean_zero(spaces):
    sp_ = spaces(2)
    with pytest.raises(ValueError):
        check_infsup_construction(PressureField(sp_, np.ones(sp_.mesh.n_elements)))


# --------------------------------------------------------------------- Korn

@pytest.mark.parametrize("scheme", SCHEMES, ids=str)
def test_korn_rigid_motions(scheme, spaces):
    assert check_korn_rigid(spaces(2, scheme.k, scheme.variant)) < 1e-13


def test_korn_symbolic_oracle():
    # v0 = (x, -y) on the reference triangle with rigid-motion traces
    space = WeakSpace(reference_triangle(), Scheme(1, "rm"))
    op = space.local(0)
    xc, yc = space.mesh.centroids[0]
    h = op.h
    coeffs = np.array([xc, h, 0.0, -yc, 0.0, -h])
    lhs = korn_lhs(space, 0, coeffs)
    ratio = lhs / (h * coeffs[:6] @ op.Kstrain @ coeffs[:6])

    s = sp.symbols("s")
    x, y = sp.symbols("x y")
    v0 = sp.Matrix([x, -y])
    verts = [sp.Matrix([0, 0]), sp.Matrix([1, 0]), sp.Matrix([0, 1])]
    total = 0
    for i in range(3):
        a, b = verts[i], verts[(i + 1) % 3]
        length = sp.sqrt((b - a).dot(b - a))
        tau = (b - a) / length
        # any unit normal spans the same rigid-motion trace space
        n = sp.Matrix([tau[1], -tau[0]])
        pt = a + s * (b - a)
        g = v0.subs({x: pt[0], y: pt[1]})
        basis = [sp.Matrix([1, 0]), sp.Matrix([0, 1]), (2 * s - 1) * n]
        gram = sp.Matrix(3, 3, lambda p, q: sp.integrate(basis[p].dot(basis[q]) * length, (s, 0, 1)))
        rhs = sp.Matrix(3, 1, lambda p, _: sp.integrate(basis[p].dot(g) * length, (s, 0, 1)))
        c = gram.solve(rhs)
        proj = sum((c[j] * basis[j] for j in range(3)), sp.zeros(2, 1))
        r = g - proj
        total += sp.integrate(r.dot(r) * length, (s, 0, 1))
    # eps(v0) = diag(1, -1): ||eps||^2 = 2 |T| = 1
    oracle = float(total) / (h * 1.0)
    assert ratio == pytest.approx(oracle, rel=1e-12)
    assert np.isfinite(ratio) and ratio > 0


def test_korn_ratio_level_independent():
    vals = [check_korn_ratio(WeakSpace(generate_uniform_triangles(n), Scheme()), trials=50)
            for n in (2, 4, 8)]
    assert (max(vals) - min(vals)) / max(vals) < 0.15


def test_korn_vanishes_for_linear_traces(spaces):
    assert check_korn_ratio(spaces(4, 1, "p"), trials=50) < 1e-12


# --------------------------------------------------------- well-posedness

@pytest.mark.parametrize("scheme", SCHEMES, ids=str)
def test_norm_gram_positive(scheme):
    sp_ = WeakSpace(generate_uniform_triangles(2), scheme)
    assert norm_gram_min_eigenvalue(sp_) > 1e-8


@pytest.mark.parametrize("variant", ["rm", "p"])
def test_coercivity_interval_stable(variant, spaces):
    a = coercivity_sampling(spaces(4, 1, variant), MAT)
    b = coercivity_sampling(spaces(8, 1, variant), MAT)
    assert 0 < a[0] <= a[1] and 0 < b[0] <= b[1]
    assert abs(a[0] - b[0]) / a[0] < 0.2 and abs(a[1] - b[1]) / a[1] < 0.2


def test_patch_rigid_fields(spaces):
    from wgelast.analysis import LINEAR_FIELDS
    rigid = {k: LINEAR_FIELDS[k] for k in ("(1,0)", "(0,1)")}
    rigid["rot"] = lambda x: np.column_stack([-x[:, 1], x[:, 0]])
    assert check_patch_test(spaces(3), MAT, fields=rigid) < 1e-10


def test_patch_single_field_coarse(spaces):
    from wgelast.analysis import LINEAR_FIELDS
    field = {"(x,0)": LINEAR_FIELDS["(x,0)"]}
    for key in [(2, 1, "rm"), (2, 1, "p"), (2, 2, "p")]:
        assert check_patch_test(spaces(*key), MAT, fields=field) < 1e-9
        assert check_patch_test(spaces(*key), MaterialParams(1e6, 0.5), fields=field) < 1e-8


def test_patch_k2_large_lambda_floor(spaces):
    # measured floor from rounding in the assembled lam-term (see notes); the
    # bound here documents it rather than the 1e-8 target met by k = 1
    assert check_patch_test(spaces(4, 2, "p"), MaterialParams(1e6, 0.5)) < 5e-8


def _jittered(n, amp=0.2, seed=0):
    from wgelast import build_mesh
    mesh = generate_uniform_triangles(n)
    v = mesh.vertices.copy()
    inner = (v > 0).all(axis=1) & (v < 1).all(axis=1)
    v[inner] += np.random.default_rng(seed).uniform(-amp / n, amp / n, (inner.sum(), 2))
    return build_mesh(v, [e.tolist() for e in mesh.elements])


def test_korn_ratio_bounded_on_jittered_meshes():
    # element shapes now differ, so the ratio tracks the worst shape; it
    # stays bounded under a fixed shape-regularity budget
    ratios = [check_korn_ratio(WeakSpace(_jittered(n, seed=n), Scheme()), trials=100)
              for n in (4, 8, 16)]
    assert max(ratios) < 2.0
    assert min(ratios) > 0.3


def test_jittered_mesh_convergence():
    prob = get_problem("test1")
    errs = []
    for n in (4, 8, 16):
        sp_ = WeakSpace(_jittered(n, seed=n), Scheme())
        u_h, _ = solve_primal(sp_, MAT, prob.f, prob.u)
        errs.append(error_vs_exact(u_h, prob, MAT).e0)
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.7)
