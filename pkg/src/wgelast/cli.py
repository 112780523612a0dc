"""Command-line drivers for weak Galerkin elasticity solves.

Subcommands cover single solves, convergence and locking studies, the
property suite and mesh inspection.

Configuration comes from an optional flat ``key = value`` file, overridden
by command-line flags. Exit codes: 0 success, 1 usage error, 2 solver
failure, 3 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import analysis
from .mesh import MeshError, generate_uniform_triangles, load_mesh, validate
from .problems import PROBLEMS, LoadMismatch, get_problem
from .system import MaterialParams, SolverError, solve_primal
from .verify import CHECKS, run_checks
from .weakcalc import Scheme, WeakSpace

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3

CSV_COLUMNS = ("level", "inv_h", "e0", "e0_order", "eb", "eb_order",
               "energy", "energy_order", "seconds")
DEFAULT_LAMBDAS = (1.0, 100.0, 1e4, 1e6)
SPREAD_LAMBDAS = (100.0, 1e4, 1e6)


class UsageError(ValueError):
    pass


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class RunConfig:
    problem: str = "test1"
    k: int = 1
    variant: str = "rm"
    lam: float = 1.0
    mu: float = 0.5
    E: float | None = None
    nu: float | None = None
    levels: tuple = (2, 4, 8, 16, 32)
    lambdas: tuple = DEFAULT_LAMBDAS
    n: int | None = None
    mesh: str | None = None
    tol: float = 1e-10
    method: str = "auto"
    out: str | None = None
    seed: int = 0
    jobs: int = 1
    diagonal: str = "nw"
    checks: tuple = CHECKS

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise UsageError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        try:
            scheme = Scheme(self.k, self.variant)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        object.__setattr__(self, "variant", scheme.variant)
        if (self.E is None) != (self.nu is None):
            raise UsageError("E and nu must be given together")
        if self.E is not None:
            try:
                m = MaterialParams.from_young(self.E, self.nu)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            object.__setattr__(self, "lam", m.lam)
            object.__setattr__(self, "mu", m.mu)
        if self.lam < 0 or self.mu <= 0:
            raise UsageError("need lambda >= 0 and mu > 0")
        if not self.levels or any(n < 1 for n in self.levels):
            raise UsageError("levels must be positive integers")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise UsageError(f"levels must be strictly increasing, got {list(self.levels)}")
        if not self.lambdas:
            raise UsageError("the lambda list is empty")
        if not 0 < self.tol <= 1e-6:
            raise UsageError("tol must lie in (0, 1e-6]")
        if self.jobs < 1:
            raise UsageError("jobs must be >= 1")
        if self.diagonal not in ("ne", "nw"):
            raise UsageError("diagonal must be 'ne' or 'nw'")
        bad = set(self.checks) - set(CHECKS)
        if bad:
            raise UsageError(f"unknown checks {sorted(bad)}; choose from {list(CHECKS)}")

    @property
    def scheme(self):
        return Scheme(self.k, self.variant)

    @property
    def material(self):
        return MaterialParams(self.lam, self.mu)


def _int_list(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _float_list(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _str_list(text):
    return tuple(v for v in text.replace(",", " ").split())


_CONVERTERS = {
    "problem": str, "k": int, "variant": str, "lam": float, "mu": float,
    "E": float, "nu": float, "levels": _int_list, "lambdas": _float_list,
    "n": int, "mesh": str, "tol": float, "method": str, "out": str,
    "seed": int, "jobs": int, "diagonal": str, "checks": _str_list,
}
_ALIASES = {"lambda": "lam", "e": "E"}


def parse_config_text(text, source="<config>"):
    """Parse ``key = value`` lines (``#`` comments) into typed overrides."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in _CONVERTERS:
            raise UsageError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError:
            raise UsageError(f"{source}:{lineno}: bad value {value!r} for {key}") from None
    return values


def load_config(path=None, overrides=None):
    """Defaults, then the config file, then explicit overrides."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        values.update(parse_config_text(text, str(path)))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in values.items() if k in known})


# ---------------------------------------------------------------- studies

def run_level(problem, lam, mu, k, variant, n, tol=1e-10, method="auto", diagonal="nw"):
    """Solve one uniform level; returns ``(n, ErrorTriple, seconds)``."""
    start = time.perf_counter()
    prob = get_problem(problem, lam=lam, mu=mu)
    space = WeakSpace(generate_uniform_triangles(n, diagonal), Scheme(k, variant))
    material = MaterialParams(lam, mu)
    u_h, _ = solve_primal(space, material, prob.f, prob.u_hat, tol=tol, method=method)
    err = analysis.error_vs_exact(u_h, prob, material, inv_h=n)
    return n, err, time.perf_counter() - start


def convergence_study(config, lam=None, problem=None):
    """Run every level of ``config`` and return a filled ConvergenceReport.

    With ``config.jobs > 1`` levels run in worker processes; rows are
    collected in level order either way.
    """
    lam = config.lam if lam is None else lam
    problem = config.problem if problem is None else problem
    args = [(problem, lam, config.mu, config.k, config.variant, n, config.tol,
             config.method, config.diagonal) for n in config.levels]
    if config.jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(run_level, *zip(*args)))
    else:
        results = [run_level(*a) for a in args]
    report = analysis.ConvergenceReport(problem, config.variant, lam, config.mu, config.k)
    for n, err, seconds in results:
        report.add(n, err, seconds)
    if len(report.levels) > 1:
        analysis.convergence_order(report)
    else:
        report.orders = [(None, None, None)]
    return report


def format_order(value):
    return "-" if value is None else f"{value:.2f}"


def format_table(report):
    """Console table: 4-decimal errors and 2-decimal orders."""
    head = f"{'1/h':>5}  {'||e0||':>8}  {'order':>5}  {'||eb||':>8}  {'order':>5}  {'|||e|||':>8}  {'order':>5}"
    lines = [head]
    for n, err, orders, _ in report.rows():
        cells = []
        for value, order in zip(err.as_tuple(), orders):
            cells.append(f"{value:>8.4f}  {format_order(order):>5}")
        lines.append(f"{n:>5}  " + "  ".join(cells))
    return "\n".join(lines)


def _csv_float(value):
    return "" if value is None else repr(float(value))


def write_csv(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for i, (n, err, orders, seconds) in enumerate(report.rows()):
            writer.writerow([i, n, _csv_float(err.e0), _csv_float(orders[0]),
                             _csv_float(err.eb), _csv_float(orders[1]),
                             _csv_float(err.energy), _csv_float(orders[2]),
                             _csv_float(seconds)])
    return path


def read_csv(path, problem="", variant="", lam=float("nan"), mu=float("nan"), k=1):
    """Read a convergence CSV back; orders are returned as stored (``None``
    for empty cells) so callers can recompute and compare."""
    report = analysis.ConvergenceReport(problem, variant, lam, mu, k)
    stored = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            err = analysis.ErrorTriple(float(row["e0"]), float(row["eb"]), float(row["energy"]),
                                       inv_h=int(row["inv_h"]))
            report.add(int(row["inv_h"]), err, float(row["seconds"]))
            stored.append(tuple(None if row[c] == "" else float(row[c])
                                for c in ("e0_order", "eb_order", "energy_order")))
    report.orders = stored
    return report


def _csv_name(config, lam):
    return f"{config.problem}_{config.variant}_k{config.k}_lam{lam:g}.csv"


def lambda_spread(reports):
    """Per level, max relative spread ``(max - min) / max`` of each error
    measure across the given reports."""
    levels = reports[0].levels
    out = []
    for i, n in enumerate(levels):
        row = []
        for j in range(3):
            vals = np.array([r.errors[i].as_tuple()[j] for r in reports])
            top = vals.max()
            row.append(float((top - vals.min()) / top) if top > 0 else 0.0)
        out.append((n, tuple(row)))
    return out


# --------------------------------------------------------------- commands

def cmd_solve(config, stdout=sys.stdout):
    prob = get_problem(config.problem, lam=config.lam, mu=config.mu)
    if config.mesh is not None:
        try:
            mesh = load_mesh(Path(config.mesh))
        except (OSError, MeshError) as exc:
            raise UsageError(f"cannot load mesh {config.mesh}: {exc}") from None
        label = Path(config.mesh).stem
        inv_h = 1.0 / mesh.h
    else:
        n = config.n if config.n is not None else config.levels[-1]
        mesh = generate_uniform_triangles(n, config.diagonal)
        label, inv_h = f"n{n}", n
    space = WeakSpace(mesh, config.scheme)
    start = time.perf_counter()
    u_h, system = solve_primal(space, config.material, prob.f, prob.u_hat,
                               tol=config.tol, method=config.method)
    seconds = time.perf_counter() - start
    err = analysis.error_vs_exact(u_h, prob, config.material, inv_h=inv_h)
    print(f"problem {prob.name}: {prob.description}", file=stdout)
    print(f"k={config.k} variant={config.variant} lambda={config.lam:g} mu={config.mu:g} "
          f"mesh={label} dofs={space.ndofs} free={system.n_free}", file=stdout)
    print(f"||e0|| = {err.e0:.4e}", file=stdout)
    print(f"||eb|| = {err.eb:.4e}", file=stdout)
    print(f"|||e||| = {err.energy:.4e}", file=stdout)
    print(f"solver: {system.diagnostics.get('method', '?')}, {seconds:.2f} s", file=stdout)
    if config.out is not None:
        path = Path(config.out) / f"{config.problem}_{config.variant}_k{config.k}_{label}.npz"
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, coeffs=u_h.coeffs, k=config.k, variant=config.variant,
                 lam=config.lam, mu=config.mu, n_interior_dofs=space.n_interior_dofs,
                 errors=np.array(err.as_tuple()))
        print(f"wrote {path}", file=stdout)
    return EXIT_OK


def cmd_convergence(config, stdout=sys.stdout):
    if len(config.levels) < 2:
        raise UsageError("a convergence study needs at least two levels")
    report = convergence_study(config)
    print(f"{config.problem}, k={config.k}, variant={config.variant}, "
          f"lambda={config.lam:g}, mu={config.mu:g}", file=stdout)
    print(format_table(report), file=stdout)
    if config.out is not None:
        path = write_csv(report, Path(config.out) / _csv_name(config, config.lam))
        print(f"wrote {path}", file=stdout)
    return EXIT_OK


def cmd_locking(config, stdout=sys.stdout):
    problem = "locking" if config.problem == "test1" else config.problem
    reports = []
    for lam in config.lambdas:
        if lam <= 0:
            raise UsageError("the locking study needs positive lambda values")
        report = convergence_study(config, lam=lam, problem=problem)
        reports.append(report)
        print(f"\n{problem}, k={config.k}, variant={config.variant}, lambda={lam:g}", file=stdout)
        print(format_table(report), file=stdout)
        if config.out is not None:
            path = write_csv(report, Path(config.out) / _csv_name(replace(config, problem=problem), lam))
            print(f"wrote {path}", file=stdout)
    chosen = [r for r in reports if r.lam in SPREAD_LAMBDAS]
    if len(chosen) < 2:
        chosen = reports
    if len(chosen) >= 2:
        lams = ", ".join(f"{r.lam:g}" for r in chosen)
        print(f"\nmax relative spread across lambda in {{{lams}}}", file=stdout)
        print(f"{'1/h':>5}  {'||e0||':>9}  {'||eb||':>9}  {'|||e|||':>9}", file=stdout)
        for n, row in lambda_spread(chosen):
            print(f"{n:>5}  " + "  ".join(f"{v:>9.2e}" for v in row), file=stdout)
    return EXIT_OK


def cmd_verify(config, stdout=sys.stdout):
    levels = config.levels if config.levels != RunConfig.levels else (2, 4)
    results = run_checks(k=config.k, variant=config.variant, levels=levels, lam=config.lam,
                         mu=config.mu, seed=config.seed, diagonal=config.diagonal,
                         checks=config.checks)
    for r in results:
        print(r.line(), file=stdout)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed", file=stdout)
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_mesh_info(config, stdout=sys.stdout):
    if config.mesh is not None:
        try:
            mesh = load_mesh(Path(config.mesh))
        except OSError as exc:
            raise UsageError(f"cannot read mesh {config.mesh}: {exc}") from None
        except MeshError as exc:
            print(f"invalid mesh: {exc}", file=stdout)
            return EXIT_VERIFY
    else:
        n = config.n if config.n is not None else config.levels[0]
        mesh = generate_uniform_triangles(n, config.diagonal)
    for key, value in mesh.summary().items():
        print(f"{key:>15}: {value}", file=stdout)
    space = WeakSpace(mesh, config.scheme)
    print(f"{'dofs':>15}: {space.ndofs} ({space.n_interior_dofs} interior)", file=stdout)
    problems = validate(mesh)
    for p in problems:
        print(f"violation: {p}", file=stdout)
    print("mesh valid" if not problems else f"{len(problems)} violations", file=stdout)
    return EXIT_VERIFY if problems else EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "locking": cmd_locking,
    "verify": cmd_verify,
    "mesh-info": cmd_mesh_info,
}


# ----------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="wgelast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value file")
        p.add_argument("--problem", choices=sorted(PROBLEMS))
        p.add_argument("--k", type=int)
        p.add_argument("--variant", choices=["rm", "p", "p1"])
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--mu", type=float)
        p.add_argument("--E", type=float)
        p.add_argument("--nu", type=float)
        p.add_argument("--levels", type=_int_list, help="e.g. 2,4,8,16,32")
        p.add_argument("--lambdas", type=_float_list, help="lambda list for 'locking'")
        p.add_argument("--n", type=int, help="single level for 'solve' / 'mesh-info'")
        p.add_argument("--mesh", help="wgmesh file instead of a uniform mesh")
        p.add_argument("--tol", type=float)
        p.add_argument("--method", choices=["auto", "cg", "dense", "direct"])
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, help="worker processes for levels")
        p.add_argument("--diagonal", choices=["ne", "nw"])
        p.add_argument("--checks", type=_str_list, help="subset of " + ",".join(CHECKS))
    return parser


def main(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        config = load_config(args.config, overrides)
        return COMMANDS[args.command](config, stdout=stdout)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        for key, value in (exc.diagnostics or {}).items():
            print(f"  {key}: {value}", file=sys.stderr)
        return EXIT_SOLVER
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except LoadMismatch as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
