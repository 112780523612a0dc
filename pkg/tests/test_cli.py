import csv
import io
import subprocess
import sys

import numpy as np
import pytest

from wgelast import analysis, cli
from wgelast.weakcalc import LocalOperators


def table_rows(text):
    """Data rows of the convergence tables in ``text``."""
    rows = []
    for line in text.splitlines():
        parts = line.split()
        if len(parts) == 7 and parts[0].isdigit():
            rows.append(parts)
    return rows


def run(argv):
    out = io.StringIO()
    code = cli.main(argv, stdout=out)
    return code, out.getvalue()


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# study\nproblem = test2\nvariant = p1\nlambda = 3.5\nlevels = 2, 4, 8\n")
    c = cli.load_config(cfg, {"mu": 2.0, "levels": (4, 8)})
    assert (c.problem, c.variant, c.lam, c.mu, c.levels) == ("test2", "p", 3.5, 2.0, (4, 8))


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("k = 1\ncolour = red\n")
    with pytest.raises(cli.UsageError, match="bad.cfg:2"):
        cli.load_config(bad)
    with pytest.raises(cli.UsageError, match="strictly increasing"):
        cli.RunConfig(levels=(4, 4))
    with pytest.raises(cli.UsageError):
        cli.RunConfig(k=3)
    with pytest.raises(cli.UsageError):
        cli.RunConfig(E=1.0)


def test_young_modulus_config():
    c = cli.RunConfig(E=2.5, nu=0.25)
    assert c.mu == pytest.approx(1.0) and c.lam == pytest.approx(1.0)


def test_solve_table_value(tmp_path):
    code, out = run(["solve", "--problem", "test1", "--n", "8", "--variant", "rm", "--out", str(tmp_path)])
    assert code == 0
    e0 = float(next(line for line in out.splitlines() if line.startswith("||e0||")).split("=")[1])
    assert round(e0, 4) == 0.0049
    dump = np.load(tmp_path / "test1_rm_k1_n8.npz")
    assert dump["coeffs"].ndim == 1 and round(float(dump["errors"][0]), 4) == 0.0049


def test_solve_rigid_exact():
    code, out = run(["solve", "--problem", "rigid", "--n", "4"])
    assert code == 0
    vals = [float(line.split("=")[1]) for line in out.splitlines() if " = " in line]
    assert len(vals) == 3 and max(vals) < 1e-10


def test_solve_test2_p1_energy():
    code, out = run(["solve", "--problem", "test2", "--n", "32", "--variant", "p1"])
    assert code == 0 and "|||e||| = 1.158" in out


def test_solve_on_mesh_file(tmp_path):
    from wgelast import dump_mesh, generate_uniform_quads
    path = tmp_path / "quads.wgm"
    path.write_text(dump_mesh(generate_uniform_quads(4)))
    code, out = run(["solve", "--problem", "linear", "--mesh", str(path)])
    assert code == 0 and "mesh=quads" in out


def test_convergence_table_and_csv(tmp_path):
    code, out = run(["convergence", "--problem", "test2", "--variant", "rm",
                     "--levels", "2,4,8,16,32", "--out", str(tmp_path)])
    assert code == 0
    rows = table_rows(out)
    assert [r[1] for r in rows] == ["0.4334", "0.1095", "0.0275", "0.0069", "0.0017"]
    path = tmp_path / "test2_rm_k1_lam1.csv"
    with path.open() as fh:
        header = next(csv.reader(fh))
    assert tuple(header) == cli.CSV_COLUMNS

    # round trip: recomputed orders equal the stored ones exactly
    stored = cli.read_csv(path)
    recomputed = analysis.convergence_order(cli.read_csv(path))
    assert recomputed.orders == stored.orders
    assert cli.format_table(recomputed) == cli.format_table(stored)
    # and the console table is the same table
    assert cli.format_table(stored) in out


def test_convergence_final_orders():
    code, out = run(["convergence", "--problem", "test1", "--levels", "2,4,8,16,32"])
    last = out.splitlines()[-1].split()
    assert (last[2], last[4], last[6]) == ("2.00", "1.97", "1.00")


def test_convergence_linear_solution_orders_undefined(tmp_path):
    code, out = run(["convergence", "--problem", "linear", "--levels", "2,4,8", "--out", str(tmp_path)])
    assert code == 0
    rep = cli.read_csv(tmp_path / "linear_rm_k1_lam1.csv")
    assert all(max(e.as_tuple()) < 1e-9 for e in rep.errors)
    assert all(o == (None, None, None) for o in rep.orders)


def test_convergence_parallel_matches_serial():
    cfg = cli.RunConfig(problem="test1", levels=(2, 4, 8))
    serial = cli.convergence_study(cfg)
    par = cli.convergence_study(cli.RunConfig(problem="test1", levels=(2, 4, 8), jobs=3))
    assert par.levels == [2, 4, 8]
    assert [e.as_tuple() for e in par.errors] == [e.as_tuple() for e in serial.errors]


def test_convergence_needs_two_levels():
    assert run(["convergence", "--levels", "4"])[0] == cli.EXIT_USAGE


def test_locking_values():
    code, out = run(["locking", "--variant", "rm", "--levels", "8,16,32", "--lambdas", "1e4,1e6"])
    assert code == 0
    blocks = out.split("locking, k=1")
    tables = [table_rows(b) for b in blocks[1:]]
    assert tables[0][-1][5] == "0.0103"
    assert [r[1::2] for r in tables[0]] == [r[1::2] for r in tables[1]]
    assert "max relative spread" in out


def test_locking_p1_lambda100():
    code, out = run(["locking", "--variant", "p1", "--levels", "2,4", "--lambdas", "100"])
    row = table_rows(out)[1]
    assert row[1] == "0.0098"


def test_lambda_spread_helper():
    reps = [cli.convergence_study(cli.RunConfig(problem="locking", lam=lam, levels=(2, 4)))
            for lam in (1e4, 1e6)]
    spread = cli.lambda_spread(reps)
    assert [n for n, _ in spread] == [2, 4]
    assert max(max(row) for _, row in spread) < 0.02


def test_verify_default_passes():
    code, out = run(["verify"])
    assert code == 0, out
    assert "FAIL" not in out


def test_verify_lambda_zero_spd():
    code, out = run(["verify", "--lambda", "0", "--checks", "spd"])
    assert code == 0
    assert "[PASS] SPD reduced matrix (lam=0)" in out


def test_verify_detects_corrupted_stabilizer(monkeypatch):
    original = LocalOperators.stiffness_parts

    def corrupted(self):
        Keps, Kdiv, S = original(self)
        return Keps, Kdiv, -S

    monkeypatch.setattr(LocalOperators, "stiffness_parts", corrupted)
    code, out = run(["verify", "--checks", "spd"])
    assert code == cli.EXIT_VERIFY
    assert "[FAIL] SPD reduced matrix" in out


def test_solver_failure_exit_code(monkeypatch):
    from wgelast import system

    def broken(*args, **kwargs):
        raise system.SolverError("forced", {"residual": 1.0})

    monkeypatch.setattr(cli, "solve_primal", broken)
    assert run(["solve", "--n", "2"])[0] == cli.EXIT_SOLVER


def test_usage_errors():
    assert run(["solve", "--k", "5"])[0] == cli.EXIT_USAGE
    assert run(["solve", "--tol", "0.1"])[0] == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == cli.EXIT_USAGE


def test_mesh_info(tmp_path):
    code, out = run(["mesh-info", "--n", "4"])
    assert code == 0 and "elements: 32" in out and "mesh valid" in out
    bad = tmp_path / "cw.wgm"
    bad.write_text("wgmesh 2d\n3 1\n0 0\n0 1\n1 0\n3 0 1 2\n")
    assert run(["mesh-info", "--mesh", str(bad)])[0] == cli.EXIT_VERIFY


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "wgelast", "mesh-info", "--n", "1"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "edges: 5" in res.stdout
