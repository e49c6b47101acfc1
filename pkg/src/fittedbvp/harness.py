"""Problem-file loading plus the solve and sweep drivers behind the CLI."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import BVPError, ConfigError, EvaluationError, ExpressionError, InvalidProblemError, MeshError
from .exprlang import derivative_array, evaluate, parse
from .fitted_exp import solve_exp
from .fitted_pow import solve_pow
from .mesh import power_layer_mesh, uniform_mesh
from .oracle import DEFAULT_N_REF, classical_central_scheme, closed_form_for, fine_mesh_reference
from .problems import ExpLayerProblem, PowLayerProblem, default_u_range
from .solver import SolveOptions

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "epsilon", "N", "scheme", "mesh", "max_nodal_error", "normalized_error",
    "eoc", "iterations", "runtime_ms", "status",
)
SCHEMES = ("fitted", "classical")
MESHES = ("uniform", "layer")
ORACLES = ("auto", "closed-form", "fine-mesh")


# --------------------------------------------------------------------------
# problem files


def _expr_field(d, name):
    if name not in d:
        raise ConfigError(f"missing field {name!r}")
    value = d[name]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = repr(float(value))
    if not isinstance(value, str):
        raise ConfigError(f"field {name!r} must be an expression string")
    try:
        return parse(value)
    except ExpressionError as exc:
        raise ConfigError(f"field {name!r}: {exc}") from exc


def _num_field(d, name, default=None):
    if name not in d:
        if default is None:
            raise ConfigError(f"missing field {name!r}")
        return default
    value = d[name]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"field {name!r} must be a number")
    return float(value)


def _infer_exp_constants(a, g, epsilon, L, A):
    """alpha, beta, gamma from samples when the file omits them.

    gamma is chosen so the problem stays valid for every eps <= 1 if that is
    possible, otherwise for the file's eps only.
    """
    if a.free_vars - {"x", "eps"} or g.free_vars - {"u", "eps"}:
        raise ConfigError("a may only depend on x and eps, g only on u and eps")
    try:
        alpha = float(np.min(evaluate(a, {"x": np.linspace(0.0, L, 257), "eps": epsilon})))
        lo, hi = default_u_range(A)
        dg = derivative_array(g, "u", {"u": np.linspace(lo, hi, 257), "eps": epsilon})
    except EvaluationError as exc:
        raise ConfigError(f"cannot infer alpha/beta: {exc}") from exc
    if alpha <= 0:
        raise ConfigError("a(x) is not positive on [0, L]; cannot infer alpha")
    beta = max(-float(np.min(dg)), 0.0) or 1e-6
    gamma = alpha**2 - 4.0 * beta
    if gamma <= 0:
        gamma = alpha**2 - 4.0 * epsilon * beta
    return alpha, beta, gamma


def _infer_pow_alpha(f, epsilon, A, B):
    lo, hi = default_u_range(A, B)
    X, U = np.meshgrid(np.linspace(0.0, 1.0, 65), np.linspace(lo, hi, 65), indexing="ij")
    try:
        df = derivative_array(f, "u", {"x": X.ravel(), "u": U.ravel(), "eps": epsilon})
    except EvaluationError as exc:
        raise ConfigError(f"cannot infer alpha: {exc}") from exc
    alpha = float(np.min(df))
    if alpha <= 0:
        # keep the problem loadable; `verify` reports the violated monotonicity
        log.warning("df/du is not positive on the sample grid; using alpha = 1")
        return 1.0
    return alpha


def problem_from_dict(d: dict):
    if not isinstance(d, dict):
        raise ConfigError("problem file must hold a JSON object")
    kind = d.get("type")
    if kind not in ("exponential", "power"):
        raise ConfigError(f"unknown problem type {kind!r} (expected 'exponential' or 'power')")
    try:
        epsilon = _num_field(d, "epsilon")
        if kind == "exponential":
            a, g, f = _expr_field(d, "a"), _expr_field(d, "g"), _expr_field(d, "f_boundary")
            A = _num_field(d, "A")
            L = _num_field(d, "L", 1.0)
            if all(k in d for k in ("alpha", "beta", "gamma")):
                alpha, beta, gamma = (_num_field(d, k) for k in ("alpha", "beta", "gamma"))
            else:
                alpha, beta, gamma = _infer_exp_constants(a, g, epsilon, L, A)
                alpha = _num_field(d, "alpha", alpha)
                beta = _num_field(d, "beta", beta)
                gamma = _num_field(d, "gamma", gamma)
            return ExpLayerProblem(epsilon, a, g, f, A, L, alpha, beta, gamma)
        f = _expr_field(d, "f")
        A, B = _num_field(d, "A"), _num_field(d, "B")
        alpha = _num_field(d, "alpha") if "alpha" in d else _infer_pow_alpha(f, epsilon, A, B)
        return PowLayerProblem(epsilon, f, A, B, alpha)
    except InvalidProblemError as exc:
        raise ConfigError(str(exc)) from exc


def load_problem(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read problem file {str(path)!r}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{str(path)!r} is not valid JSON: {exc}") from exc
    try:
        return problem_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def problem_to_dict(problem) -> dict:
    if isinstance(problem, ExpLayerProblem):
        return {
            "type": "exponential", "epsilon": problem.epsilon, "a": problem.a.source,
            "g": problem.g.source, "f_boundary": problem.f_boundary.source, "A": problem.A,
            "L": problem.L, "alpha": problem.alpha, "beta": problem.beta, "gamma": problem.gamma,
        }
    return {
        "type": "power", "epsilon": problem.epsilon, "f": problem.f.source,
        "A": problem.A, "B": problem.B, "alpha": problem.alpha,
    }


# --------------------------------------------------------------------------
# building blocks


def default_mesh_kind(problem) -> str:
    return "uniform" if isinstance(problem, ExpLayerProblem) else "layer"


def build_mesh(problem, N: int, kind: Optional[str] = None):
    kind = kind or default_mesh_kind(problem)
    if kind == "uniform":
        return uniform_mesh(problem.L, N)
    if kind == "layer":
        if not isinstance(problem, PowLayerProblem):
            raise ConfigError("--mesh layer is only available for the power problem")
        return power_layer_mesh(problem.epsilon, N)
    raise ConfigError(f"unknown mesh {kind!r}")


def solve_problem(problem, mesh, scheme="fitted", opts=SolveOptions(), linearization="tangent",
                  as_printed_signs=False):
    """Dispatch to the fitted or classical solver; returns (solution, stats)."""
    if scheme == "classical":
        return classical_central_scheme(problem, mesh, opts, linearization)
    if scheme != "fitted":
        raise ConfigError(f"unknown scheme {scheme!r}")
    if isinstance(problem, ExpLayerProblem):
        return solve_exp(problem, mesh, opts, linearization, as_printed_signs)
    if as_printed_signs:
        raise ConfigError("--as-printed-signs applies to the exponential problem only")
    return solve_pow(problem, mesh, opts, linearization)


def make_oracle(problem, kind="auto", n_ref=DEFAULT_N_REF, production_N=None):
    """Callable x -> reference u(x).

    'closed-form' insists on a closed form (ConfigError if there is none),
    'fine-mesh' always solves on an n_ref mesh, 'auto' prefers the closed form.
    """
    if kind not in ORACLES:
        raise ConfigError(f"unknown oracle {kind!r}")
    if kind in ("auto", "closed-form"):
        exact = closed_form_for(problem)
        if exact is not None:
            return exact
        if kind == "closed-form":
            raise ConfigError("no closed-form solution is known for this problem")
    if production_N is not None and n_ref < 8 * production_N:
        raise ConfigError(f"fine-mesh reference needs N_ref >= 8*N = {8 * production_N}, got {n_ref}")
    return fine_mesh_reference(problem, n_ref)


def nodal_error(sol, oracle, dense=False) -> float:
    """max |V - u| over mesh nodes, or over a 10x finer sampling if ``dense``."""
    if dense:
        x = np.unique(np.concatenate([
            np.linspace(sol.nodes[i], sol.nodes[i + 1], 11) for i in range(sol.mesh.N)
        ]))
        return float(np.max(np.abs(sol(x) - oracle(x))))
    return float(np.max(np.abs(sol.values - oracle(sol.nodes))))


def normalized_error(problem, error, N) -> float:
    if isinstance(problem, PowLayerProblem):
        return error * N / math.log1p(1.0 / problem.epsilon)
    return error * N


def compute_eoc(errors: Sequence[float], Ns: Optional[Sequence[int]] = None) -> list:
    """rate_k = log(e_k/e_{k+1}) / log(N_{k+1}/N_k); log2 of the ratio when N
    doubles (the default when ``Ns`` is omitted). A zero next error gives +inf."""
    rates = []
    for k in range(len(errors) - 1):
        e0, e1 = float(errors[k]), float(errors[k + 1])
        base = math.log(Ns[k + 1] / Ns[k]) if Ns is not None else math.log(2.0)
        if e1 == 0.0:
            rates.append(math.inf if e0 > 0 else math.nan)
        elif e0 <= 0.0 or not (math.isfinite(e0) and math.isfinite(e1)):
            rates.append(math.nan)
        else:
            rates.append(math.log(e0 / e1) / base)
    return rates


# --------------------------------------------------------------------------
# reports


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _float_or_none(s):
    return None if s == "" else float(s)


def _same(a, b):
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b


@dataclass
class ReportRow:
    epsilon: float
    N: int
    scheme: str
    mesh: str
    max_nodal_error: float
    normalized_error: float
    eoc: Optional[float]
    iterations: int
    runtime_ms: float
    status: str = "ok"

    def __eq__(self, other):
        if not isinstance(other, ReportRow):
            return NotImplemented
        return all(_same(getattr(self, f.name), getattr(other, f.name)) for f in fields(self))

    def key(self):
        return (self.epsilon, self.N)

    def as_csv_row(self):
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]

    @classmethod
    def from_csv_row(cls, rec: dict):
        return cls(
            epsilon=float(rec["epsilon"]), N=int(rec["N"]), scheme=rec["scheme"], mesh=rec["mesh"],
            max_nodal_error=float(rec["max_nodal_error"]),
            normalized_error=float(rec["normalized_error"]),
            eoc=_float_or_none(rec["eoc"]), iterations=int(rec["iterations"]),
            runtime_ms=float(rec["runtime_ms"]), status=rec["status"],
        )


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)

    def __eq__(self, other):
        return isinstance(other, ConvergenceReport) and self.rows == other.rows

    def by_epsilon(self) -> dict:
        out = {}
        for row in self.rows:
            out.setdefault(row.epsilon, []).append(row)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow(row.as_csv_row())
        return buf.getvalue()

    def write(self, path):
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "ConvergenceReport":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ConfigError(f"unexpected CSV header {reader.fieldnames}")
        return cls([ReportRow.from_csv_row(rec) for rec in reader])

    @classmethod
    def read(cls, path) -> "ConvergenceReport":
        return cls.from_csv(Path(path).read_text())


# --------------------------------------------------------------------------
# single solve


@dataclass
class SolveConfig:
    problem_path: Optional[str] = None
    N: int = 64
    mesh: Optional[str] = None
    scheme: str = "fitted"
    options: SolveOptions = field(default_factory=SolveOptions)
    output: Optional[str] = None
    epsilon: Optional[float] = None
    linearization: str = "tangent"
    as_printed_signs: bool = False
    oracle: Optional[str] = "auto"
    n_ref: int = DEFAULT_N_REF
    problem: object = None


@dataclass
class SingleResult:
    problem: object
    solution: object
    stats: object
    max_nodal_error: Optional[float]
    runtime_ms: float
    mesh_kind: str

    def nodal_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("x", "V", "dV"))
        x = self.solution.nodes
        for xi, vi, di in zip(x, self.solution.values, self.solution.derivative(x)):
            w.writerow((repr(float(xi)), repr(float(vi)), repr(float(di))))
        return buf.getvalue()

    def summary(self, scheme) -> str:
        s = self.stats
        parts = [
            f"type={self.problem.kind}", f"epsilon={self.problem.epsilon:g}",
            f"N={self.solution.mesh.N}", f"scheme={scheme}", f"mesh={self.mesh_kind}",
            f"iterations={s.iterations}", f"converged={str(s.converged).lower()}",
            f"update={s.final_update_norm:.3e}", f"residual={s.final_residual_norm:.3e}",
        ]
        if self.max_nodal_error is not None:
            parts.append(f"max_nodal_error={self.max_nodal_error:.6e}")
        parts.append(f"runtime_ms={self.runtime_ms:.1f}")
        return " ".join(parts)


def _resolve_problem(config):
    problem = config.problem if config.problem is not None else load_problem(config.problem_path)
    if getattr(config, "epsilon", None) is not None:
        try:
            problem = problem.with_epsilon(config.epsilon)
        except InvalidProblemError as exc:
            raise ConfigError(str(exc)) from exc
    return problem


def run_single(config: SolveConfig) -> SingleResult:
    """Solve once. Writes the nodal CSV (x, V, V') when ``config.output`` is set."""
    problem = _resolve_problem(config)
    mesh_kind = config.mesh or default_mesh_kind(problem)
    try:
        mesh = build_mesh(problem, config.N, mesh_kind)
    except MeshError as exc:
        raise ConfigError(str(exc)) from exc
    t0 = time.perf_counter()
    sol, stats = solve_problem(problem, mesh, config.scheme, config.options,
                               config.linearization, config.as_printed_signs)
    runtime = (time.perf_counter() - t0) * 1e3
    error = None
    if config.oracle:
        if config.oracle == "auto":
            exact = closed_form_for(problem)
            error = nodal_error(sol, exact) if exact is not None else None
        else:
            error = nodal_error(sol, make_oracle(problem, config.oracle, config.n_ref, config.N))
    result = SingleResult(problem, sol, stats, error, runtime, mesh_kind)
    if config.output:
        Path(config.output).write_text(result.nodal_csv())
    return result


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepConfig:
    problem_path: Optional[str] = None
    epsilons: Sequence[float] = (1.0,)
    Ns: Sequence[int] = (64,)
    scheme: str = "fitted"
    mesh: Optional[str] = None
    oracle: str = "auto"
    options: SolveOptions = field(default_factory=SolveOptions)
    output: Optional[str] = None
    linearization: str = "tangent"
    as_printed_signs: bool = False
    dense_error: bool = False
    n_ref: int = DEFAULT_N_REF
    jobs: int = 1
    problem: object = None

    def __post_init__(self):
        if not self.epsilons or not self.Ns:
            raise ConfigError("epsilon and N lists must be non-empty")
        if any(int(n) != n or n < 2 for n in self.Ns):
            raise ConfigError("every N must be an integer >= 2")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.mesh is not None and self.mesh not in MESHES:
            raise ConfigError(f"unknown mesh {self.mesh!r}")
        if self.oracle not in ORACLES:
            raise ConfigError(f"unknown oracle {self.oracle!r}")


def _run_cell(problem, N, config, oracle, mesh_kind):
    try:
        if isinstance(oracle, BVPError):
            raise BVPError(f"reference solution failed: {oracle}")
        mesh = build_mesh(problem, N, mesh_kind)
        t0 = time.perf_counter()
        sol, stats = solve_problem(problem, mesh, config.scheme, config.options,
                                   config.linearization, config.as_printed_signs)
        runtime = (time.perf_counter() - t0) * 1e3
        err = nodal_error(sol, oracle, config.dense_error)
        status = "ok" if stats.converged else "not-converged"
        return ReportRow(problem.epsilon, N, config.scheme, mesh_kind, err,
                         normalized_error(problem, err, N), None, stats.iterations, runtime, status)
    except BVPError as exc:
        log.warning("cell eps=%g N=%d failed: %s", problem.epsilon, N, exc)
        return ReportRow(problem.epsilon, N, config.scheme, mesh_kind, math.nan, math.nan,
                         None, 0, 0.0, f"error: {exc}")


def run_sweep(config: SweepConfig) -> ConvergenceReport:
    """Solve every (eps, N) cell, measure errors against the oracle and
    attach EOCs between consecutive N for each eps."""
    base = config.problem if config.problem is not None else load_problem(config.problem_path)
    mesh_kind = config.mesh or default_mesh_kind(base)
    if mesh_kind == "layer" and not isinstance(base, PowLayerProblem):
        raise ConfigError("--mesh layer is only available for the power problem")
    try:
        problems = {eps: base.with_epsilon(float(eps)) for eps in sorted(set(config.epsilons))}
    except InvalidProblemError as exc:
        raise ConfigError(str(exc)) from exc
    Ns = sorted(set(int(n) for n in config.Ns))
    if config.oracle != "closed-form" and config.oracle != "auto" and config.n_ref < 8 * Ns[-1]:
        raise ConfigError(f"fine-mesh reference needs N_ref >= {8 * Ns[-1]}, got {config.n_ref}")

    def oracle_for(p):
        try:
            return make_oracle(p, config.oracle, config.n_ref, Ns[-1])
        except ConfigError:
            raise
        except BVPError as exc:
            return exc

    cells = [(eps, N) for eps in problems for N in Ns]
    with ThreadPoolExecutor(max_workers=max(1, config.jobs)) as pool:
        oracles = dict(zip(problems, pool.map(oracle_for, problems.values())))
        rows = list(pool.map(
            lambda cell: _run_cell(problems[cell[0]], cell[1], config, oracles[cell[0]], mesh_kind),
            cells,
        ))

    rows.sort(key=ReportRow.key)
    for eps_rows in ConvergenceReport(rows).by_epsilon().values():
        errors = [r.max_nodal_error for r in eps_rows]
        rates = compute_eoc(errors, [r.N for r in eps_rows])
        for row, rate in zip(eps_rows[1:], rates):
            row.eoc = rate
    report = ConvergenceReport(rows)
    if config.output:
        report.write(config.output)
    return report
