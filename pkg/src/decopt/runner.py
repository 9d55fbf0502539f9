"""Config-driven experiment orchestration.

A config is a TOML document with four sections::

    [algorithm]
    name = "dmbfgs"        # dgd | gt | abm | sdcg | ndcg | dmbfgs
    alpha = 0.1            # or auto_alpha = true (ndcg, dmbfgs)

    [problem]
    kind = "synthetic_quadratic"
    p = 50
    kappa = 100.0

    [network]
    n = 10
    density = 0.56

    [run]
    seed = 0
    max_iters = 5000
    tol_relative = 1e-8
    output = "trace.csv"

Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import analysis
from .algorithms import (
    CG_VARIANTS,
    GT_FLAVORS,
    ROUNDS_PER_ITERATION,
    AlgoParams,
    DivergenceError,
    dmbfgs_stepsize_bound,
    make_stepper,
    ndcg_stepsize_bound,
    quasi_newton_envelope,
)
from .datasets import load_libsvm, logistic_from_samples, synth_logistic_samples, synth_quadratic, true_solution
from .problems import ProblemOracle, SmoothnessConstants
from .topology import Graph, MixingMatrix, generate_connected_graph, metropolis_weights

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "DECOPT_OUTPUT_DIR"

ALGORITHMS = tuple(ROUNDS_PER_ITERATION)
PROBLEM_KINDS = ("synthetic_quadratic", "synthetic_logistic", "libsvm")
METRICS = tuple(c for c in analysis.TRACE_COLUMNS if c not in ("iter", "comm_volume"))


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


_REQUIRED = object()

_SCHEMA: dict[str, dict[str, tuple[type | tuple, Any]]] = {
    "algorithm": {
        "name": (str, _REQUIRED),
        "alpha": (float, None),
        "auto_alpha": (bool, False),
        "beta_fixed": (float, 0.0),
        "cg_variant": (str, "PRP"),
        "l": (float, 1e-4),
        "u": (float, 1e4),
        "gt_flavor": (str, "SEMI_ATC"),
        "alpha_grid": (list, None),
        "label": (str, None),
    },
    "problem": {
        "kind": (str, _REQUIRED),
        "p": (int, None),
        "kappa": (float, None),
        "num_samples": (int, None),
        "path": (str, None),
        "num_features": (int, None),
        "regularizer": (str, "L2"),
        "lambda_hat": (float, 1.0),
        "feature_scale": (float, 1.0),
        "label_noise": (float, 0.1),
    },
    "network": {
        "n": (int, _REQUIRED),
        "density": (float, _REQUIRED),
    },
    "run": {
        "seed": (int, 0),
        "max_iters": (int, _REQUIRED),
        "tol_optimality": (float, None),
        "tol_relative": (float, None),
        "metrics": (list, None),
        "output": (str, None),
        "compute_z_star": (bool, True),
        "check_theory": (bool, False),
        "record_wall_time": (bool, False),
        "x0": (float, 0.0),
    },
}


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    alpha: float | None = None
    auto_alpha: bool = False
    beta_fixed: float = 0.0
    cg_variant: str = "PRP"
    l: float = 1e-4
    u: float = 1e4
    gt_flavor: str = "SEMI_ATC"
    alpha_grid: tuple[float, ...] | None = None
    label: str | None = None


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    p: int | None = None
    kappa: float | None = None
    num_samples: int | None = None
    path: str | None = None
    num_features: int | None = None
    regularizer: str = "L2"
    lambda_hat: float = 1.0
    feature_scale: float = 1.0
    label_noise: float = 0.1


@dataclass(frozen=True)
class NetworkSpec:
    n: int
    density: float


@dataclass(frozen=True)
class RunSpec:
    max_iters: int
    seed: int = 0
    tol_optimality: float | None = None
    tol_relative: float | None = None
    metrics: tuple[str, ...] | None = None
    output: str | None = None
    compute_z_star: bool = True
    check_theory: bool = False
    record_wall_time: bool = False
    x0: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: AlgorithmSpec
    problem: ProblemSpec
    network: NetworkSpec
    run: RunSpec

    @property
    def label(self) -> str:
        a = self.algorithm
        if a.label:
            return a.label
        if a.name == "sdcg":
            return f"sdcg-{a.cg_variant.lower()}"
        return a.name

    def with_alpha(self, alpha: float) -> "ExperimentConfig":
        algo = dataclasses.replace(self.algorithm, alpha=alpha, auto_alpha=False, alpha_grid=None)
        return dataclasses.replace(self, algorithm=algo)


def _coerce(path: str, value, kind):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {type(value).__name__}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {type(value).__name__}")
        return value
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {type(value).__name__}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {type(value).__name__}")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        return value
    raise AssertionError(kind)


def _section(doc: dict, name: str) -> dict:
    raw = doc.get(name)
    if raw is None:
        raise ConfigError(name, "missing required section")
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected a table")
    schema = _SCHEMA[name]
    out = {}
    for key in raw:
        if key not in schema:
            raise ConfigError(f"{name}.{key}", "unknown key")
    for key, (kind, default) in schema.items():
        path = f"{name}.{key}"
        if key in raw:
            out[key] = _coerce(path, raw[key], kind)
        elif default is _REQUIRED:
            raise ConfigError(path, "missing required key")
        else:
            out[key] = default
    return out


def _enum(path: str, value: str, allowed) -> str:
    if value not in allowed:
        raise ConfigError(path, f"invalid value {value!r}; expected one of {', '.join(allowed)}")
    return value


def config_from_dict(doc: dict) -> ExperimentConfig:
    for key in doc:
        if key not in _SCHEMA:
            raise ConfigError(key, "unknown section")
    a = _section(doc, "algorithm")
    pr = _section(doc, "problem")
    nw = _section(doc, "network")
    rn = _section(doc, "run")

    a["name"] = _enum("algorithm.name", a["name"].lower(), ALGORITHMS)
    a["cg_variant"] = _enum("algorithm.cg_variant", a["cg_variant"].upper(), tuple(CG_VARIANTS))
    a["gt_flavor"] = _enum("algorithm.gt_flavor", a["gt_flavor"].upper(), GT_FLAVORS)
    if a["alpha"] is None and not a["auto_alpha"] and a["alpha_grid"] is None:
        raise ConfigError("algorithm.alpha", "missing required key (or set auto_alpha = true)")
    if a["alpha"] is not None and a["alpha"] <= 0:
        raise ConfigError("algorithm.alpha", "must be positive")
    if a["auto_alpha"] and a["name"] not in ("ndcg", "dmbfgs"):
        raise ConfigError("algorithm.auto_alpha", f"no theoretical stepsize bound for {a['name']}")
    if not 0 < a["l"] < a["u"]:
        raise ConfigError("algorithm.l", "need 0 < l < u")
    if a["alpha_grid"] is not None:
        grid = tuple(_coerce(f"algorithm.alpha_grid[{k}]", v, float) for k, v in enumerate(a["alpha_grid"]))
        if not grid or min(grid) <= 0:
            raise ConfigError("algorithm.alpha_grid", "needs positive entries")
        a["alpha_grid"] = grid

    pr["kind"] = _enum("problem.kind", pr["kind"], PROBLEM_KINDS)
    pr["regularizer"] = _enum("problem.regularizer", pr["regularizer"].upper(), ("L2", "NONCONVEX"))
    need = {
        "synthetic_quadratic": ("p", "kappa"),
        "synthetic_logistic": ("p", "num_samples"),
        "libsvm": ("path",),
    }[pr["kind"]]
    for key in need:
        if pr[key] is None:
            raise ConfigError(f"problem.{key}", f"missing required key for kind {pr['kind']!r}")
    if pr["kind"] == "synthetic_quadratic":
        if pr["p"] < 2:
            raise ConfigError("problem.p", "must be >= 2")
        if pr["kappa"] < 1:
            raise ConfigError("problem.kappa", "must be >= 1")
    if pr["lambda_hat"] < 0:
        raise ConfigError("problem.lambda_hat", "must be nonnegative")
    if pr["feature_scale"] <= 0:
        raise ConfigError("problem.feature_scale", "must be positive")
    if pr["label_noise"] < 0:
        raise ConfigError("problem.label_noise", "must be nonnegative")

    if nw["n"] < 1:
        raise ConfigError("network.n", "must be >= 1")
    if not 0 < nw["density"] <= 1:
        raise ConfigError("network.density", "must lie in (0, 1]")

    if rn["max_iters"] < 1:
        raise ConfigError("run.max_iters", "must be >= 1")
    for key in ("tol_optimality", "tol_relative"):
        if rn[key] is not None and rn[key] <= 0:
            raise ConfigError(f"run.{key}", "must be positive")
    if rn["metrics"] is not None:
        for k, m in enumerate(rn["metrics"]):
            _enum(f"run.metrics[{k}]", _coerce(f"run.metrics[{k}]", m, str), METRICS)
        rn["metrics"] = tuple(rn["metrics"])

    return ExperimentConfig(AlgorithmSpec(**a), ProblemSpec(**pr), NetworkSpec(**nw), RunSpec(**rn))


def load_config(text: str) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<document>", f"TOML syntax error: {exc}") from None
    return config_from_dict(doc)


def load_config_file(path: str | Path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        cfg = load_config(fh.read())
    if cfg.problem.path is not None and not os.path.isabs(cfg.problem.path):
        resolved = str(Path(path).resolve().parent / cfg.problem.path)
        cfg = dataclasses.replace(cfg, problem=dataclasses.replace(cfg.problem, path=resolved))
    return cfg


# ---------------------------------------------------------------- building blocks


@dataclass
class Experiment:
    graph: Graph
    mixing: MixingMatrix
    problem: ProblemOracle
    constants: SmoothnessConstants
    z_star: np.ndarray | None
    F_star: float | None


def _seeds(seed: int) -> tuple[int, int]:
    graph_ss, problem_ss = np.random.SeedSequence(seed).spawn(2)
    return int(graph_ss.generate_state(1)[0]), int(problem_ss.generate_state(1)[0])


def build_problem(spec: ProblemSpec, n: int, seed: int) -> ProblemOracle:
    if spec.kind == "synthetic_quadratic":
        return synth_quadratic(spec.p, spec.kappa, n, seed)
    if spec.kind == "synthetic_logistic":
        samples = synth_logistic_samples(spec.num_samples, spec.p, seed, noise=spec.label_noise, scale=spec.feature_scale)
    else:
        samples = load_libsvm(spec.path, p=spec.num_features)
    return logistic_from_samples(samples, n, spec.regularizer, spec.lambda_hat)


def build_experiment(cfg: ExperimentConfig) -> Experiment:
    graph_seed, problem_seed = _seeds(cfg.run.seed)
    graph = generate_connected_graph(cfg.network.n, cfg.network.density, graph_seed)
    mixing = metropolis_weights(graph)
    problem = build_problem(cfg.problem, cfg.network.n, problem_seed)
    consts = problem.smoothness_constants()
    z_star = F_star = None
    if cfg.run.compute_z_star and problem.strongly_convex:
        z_star = true_solution(problem).z_star
        F_star = problem.global_value(z_star)
    return Experiment(graph, mixing, problem, consts, z_star, F_star)


def theoretical_alpha(name: str, exp: Experiment, spec: AlgorithmSpec) -> float:
    c = exp.constants
    if name == "ndcg":
        return ndcg_stepsize_bound(c.L, exp.mixing.sigma, exp.problem.n)
    if name == "dmbfgs":
        if c.mu <= 0:
            raise ConfigError("algorithm.auto_alpha", "dmbfgs bound needs a strongly convex problem")
        return dmbfgs_stepsize_bound(c.L, c.mu, exp.mixing.sigma, spec.l, spec.u)
    raise ConfigError("algorithm.auto_alpha", f"no theoretical stepsize bound for {name}")


def resolve_alpha(cfg: ExperimentConfig, exp: Experiment) -> float:
    if cfg.algorithm.auto_alpha:
        return theoretical_alpha(cfg.algorithm.name, exp, cfg.algorithm)
    if cfg.algorithm.alpha is None:
        raise ConfigError("algorithm.alpha", "no stepsize given")
    return cfg.algorithm.alpha


# ---------------------------------------------------------------- running


@dataclass
class RunResult:
    label: str
    trace: analysis.MetricTrace
    termination: str
    alpha: float
    sigma: float
    edges: int
    L: float
    mu: float
    iterations: int
    verification: dict[str, dict] | None = None
    final_states: Any = None
    output_path: str | None = None

    def final(self, metric: str) -> float | None:
        return self.trace.last[metric]


class _TheoryRecorder:
    """Collects the per-round quantities needed for the theory checks."""

    def __init__(self, name: str, exp: Experiment, alpha: float, spec: AlgorithmSpec):
        self.name = name
        self.exp = exp
        self.alpha = alpha
        self.spec = spec
        self.tracking: list[float] = []
        self.potentials: list[float] = []
        self.eps_stat: list[float] = []
        self.cone: list[float] = []
        self.us: list[np.ndarray] = []
        self.h_lo = math.inf
        self.h_hi = -math.inf
        self.interlace_ok = True
        L = exp.constants.L
        self.cone_enabled = name == "ndcg" and L * alpha <= 0.25
        self.xi = 1.0

    def record(self, st) -> None:
        exp = self.exp
        if st.v is not None:
            self.tracking.append(analysis.tracking_deviation(st.v, st.g))
        if self.name == "ndcg":
            self.potentials.append(analysis.potential(st.x, st.v, self.alpha, exp.problem, exp.mixing))
            self.eps_stat.append(float(np.sum(st.v_tilde**2)) + analysis.consensus_error(st.x) ** 2)
            if self.cone_enabled:
                self.cone.append(analysis.cone_violation(st.v_tilde, st.d, self.xi))
                self.xi = 1.0 + exp.constants.L * self.alpha * self.xi**2
        if self.name == "dmbfgs":
            if st.h_lo is not None:
                ok = np.isfinite(st.h_lo)
                if ok.any():
                    self.h_lo = min(self.h_lo, float(np.min(st.h_lo[ok])))
                    self.h_hi = max(self.h_hi, float(np.max(st.h_hi[ok])))
                    tau = st.tau[ok]
                    slack = 1e-12 * np.maximum(1.0, st.h_hi[ok])
                    if np.any(st.h_lo[ok] > tau + slack) or np.any(tau > st.h_hi[ok] + slack):
                        self.interlace_ok = False
            if exp.z_star is not None:
                self.us.append(analysis.error_vector(st.x, st.v, exp.problem, exp.z_star, exp.F_star))

    def report(self) -> dict[str, dict]:
        exp = self.exp
        rep: dict[str, dict] = {}
        if self.tracking:
            worst = max(self.tracking)
            rep["tracking_identity"] = {"passed": worst <= 1e-10, "max_deviation": worst}
        if self.name == "ndcg":
            P = np.asarray(self.potentials)
            inc = np.diff(P) / np.maximum(1.0, np.abs(P[:-1])) if P.size > 1 else np.zeros(0)
            worst = float(inc.max()) if inc.size else 0.0
            bound = ndcg_stepsize_bound(exp.constants.L, exp.mixing.sigma, exp.problem.n)
            rep["potential_monotone"] = {
                "passed": worst <= 1e-9,
                "max_relative_increase": worst,
                "alpha_within_bound": self.alpha <= bound,
            }
            rep["eps_stationarity"] = {"passed": True, "min_so_far": float(np.min(self.eps_stat))}
            if self.cone_enabled:
                worst = max(self.cone)
                rep["descent_cone"] = {"passed": worst <= 1e-9, "max_violation": worst}
        if self.name == "dmbfgs":
            c = exp.constants
            if c.mu > 0 and math.isfinite(self.h_lo):
                psi, Psi = quasi_newton_envelope(c.L, c.mu, self.spec.l, self.spec.u)
                ok = self.h_lo >= psi * (1 - 1e-12) and self.h_hi <= Psi * (1 + 1e-12)
                rep["h_envelope"] = {"passed": ok, "min_eig": self.h_lo, "max_eig": self.h_hi, "psi": psi, "Psi": Psi}
            rep["eigen_interlacing"] = {"passed": self.interlace_ok}
            if len(self.us) >= 2 and c.mu > 0:
                psi, Psi = quasi_newton_envelope(c.L, c.mu, self.spec.l, self.spec.u)
                J = analysis.contraction_matrix(self.alpha, c.L, c.mu, exp.mixing.sigma, psi, Psi)
                chk = analysis.check_contraction(self.us, J)
                rep["contraction"] = {
                    "passed": chk.fraction >= 0.99,
                    "fraction": chk.fraction,
                    "rho": J.rho,
                    "rho_bound": J.rho_bound(),
                }
        return rep


def _stop_reached(rs: RunSpec, opt: float | None, rel: float | None) -> bool:
    wanted = []
    if rs.tol_optimality is not None:
        wanted.append(opt is not None and opt <= rs.tol_optimality)
    if rs.tol_relative is not None:
        wanted.append(rel is not None and rel <= rs.tol_relative)
    return bool(wanted) and all(wanted)


def output_path_for(cfg: ExperimentConfig) -> str | None:
    if cfg.run.output is None:
        return None
    override = os.environ.get(OUTPUT_DIR_ENV)
    if override:
        return str(Path(override) / Path(cfg.run.output).name)
    return cfg.run.output


def run(cfg: ExperimentConfig, experiment: Experiment | None = None, write_output: bool = True) -> RunResult:
    """Run one configured experiment to budget, tolerance or divergence."""
    exp = experiment if experiment is not None else build_experiment(cfg)
    alpha = resolve_alpha(cfg, exp)
    a = cfg.algorithm
    params = AlgoParams(alpha=alpha, beta_fixed=a.beta_fixed, cg_variant=a.cg_variant, l=a.l, u=a.u, gt_flavor=a.gt_flavor)
    stepper = make_stepper(a.name, exp.problem, exp.mixing, params)
    rs = cfg.run
    wanted = set(rs.metrics) if rs.metrics is not None else set(METRICS)
    if rs.tol_optimality is not None:
        wanted.add("optimality_error")
    if rs.tol_relative is not None:
        wanted.add("relative_error")
    if not rs.record_wall_time:
        wanted.discard("wall_s")

    recorder = _TheoryRecorder(a.name, exp, alpha, a) if rs.check_theory else None
    trace = analysis.MetricTrace()
    edges = exp.graph.num_edges
    p = exp.problem.p
    t0 = time.perf_counter()

    def record(st) -> tuple[float | None, float | None]:
        row: dict[str, Any] = {
            "iter": st.t,
            "comm_volume": analysis.communication_volume(st.t, stepper.rounds_per_iteration, edges, p),
        }
        opt = rel = None
        if "optimality_error" in wanted:
            opt = row["optimality_error"] = analysis.optimality_error(st.x, exp.problem, st.g)
        if "relative_error" in wanted and exp.z_star is not None:
            rel = row["relative_error"] = analysis.relative_error(st.x, exp.z_star)
        if "consensus_error" in wanted:
            row["consensus_error"] = analysis.consensus_error(st.x)
        if st.v is not None:
            if "tracking_error" in wanted:
                row["tracking_error"] = analysis.consensus_error(st.v)
            if "potential" in wanted:
                row["potential"] = analysis.potential(st.x, st.v, alpha, exp.problem, exp.mixing)
        if "objective_gap" in wanted and exp.F_star is not None:
            row["objective_gap"] = exp.problem.n * (exp.problem.global_value(st.x.mean(axis=0)) - exp.F_star)
        if "wall_s" in wanted:
            row["wall_s"] = time.perf_counter() - t0
        trace.append(**row)
        if recorder is not None:
            recorder.record(st)
        return opt, rel

    st = stepper.init(np.full((exp.problem.n, p), rs.x0))
    termination = "budget"
    opt, rel = record(st)
    if _stop_reached(rs, opt, rel):
        termination = "tolerance"
    else:
        while st.t < rs.max_iters:
            try:
                st = stepper.step(st)
            except DivergenceError as exc:
                log.warning("%s: %s", cfg.label, exc)
                trace.diverged_at = exc.t
                termination = "divergence"
                break
            opt, rel = record(st)
            if _stop_reached(rs, opt, rel):
                termination = "tolerance"
                break

    result = RunResult(
        label=cfg.label,
        trace=trace,
        termination=termination,
        alpha=alpha,
        sigma=exp.mixing.sigma,
        edges=edges,
        L=exp.constants.L,
        mu=exp.constants.mu,
        iterations=st.t,
        verification=recorder.report() if recorder is not None else None,
        final_states=st,
    )
    out = output_path_for(cfg)
    if write_output and out is not None:
        trace.write_csv(out)
        result.output_path = out
    return result


# ---------------------------------------------------------------- comparisons


def _score(res: RunResult) -> float:
    if res.termination == "divergence":
        return math.inf
    rel = res.final("relative_error")
    val = rel if rel is not None else res.final("optimality_error")
    if val is None or not math.isfinite(val):
        return math.inf
    # reaching tolerance sooner beats a slightly smaller final error
    return val if res.termination != "tolerance" else -1.0 / (1 + res.iterations)


@dataclass
class ComparisonRow:
    label: str
    alpha: float
    iterations: int
    comm_volume: int
    optimality_error: float | None
    relative_error: float | None
    termination: str
    grid: list[tuple[float, float | None, str]] = field(default_factory=list)


@dataclass
class ComparisonTable:
    rows: list[ComparisonRow]
    results: dict[str, RunResult]

    def format(self) -> str:
        head = f"{'algorithm':<14s} {'alpha':>10s} {'iters':>7s} {'volume':>12s} {'opt_err':>11s} {'rel_err':>11s}  stop"
        lines = [head, "-" * len(head)]

        def fmt(x):
            return f"{x:11.3e}" if x is not None else f"{'-':>11s}"

        for r in self.rows:
            lines.append(
                f"{r.label:<14s} {r.alpha:10.3g} {r.iterations:7d} {r.comm_volume:12d} "
                f"{fmt(r.optimality_error)} {fmt(r.relative_error)}  {r.termination}"
            )
            for alpha, err, term in r.grid:
                lines.append(f"{'':<14s}   grid alpha={alpha:<10.3g} final={fmt(err).strip()} ({term})")
        return "\n".join(lines)


def _shared_key(cfg: ExperimentConfig):
    return (cfg.problem, cfg.network, cfg.run.seed)


def compare(configs: list[ExperimentConfig], write_output: bool = True) -> ComparisonTable:
    """Run several algorithms on one shared problem and network.

    Configs with ``alpha_grid`` are swept and the best final error is kept.
    """
    if len(configs) < 2:
        raise ValueError("compare needs at least two configs")
    key = _shared_key(configs[0])
    for cfg in configs[1:]:
        if _shared_key(cfg) != key:
            raise ConfigError("problem", f"config {cfg.label!r} does not share problem, network and seed")
    exp = build_experiment(configs[0])

    rows: list[ComparisonRow] = []
    results: dict[str, RunResult] = {}
    seen: dict[str, int] = {}
    for cfg in configs:
        label = cfg.label
        seen[label] = seen.get(label, 0) + 1
        if seen[label] > 1:
            label = f"{label}#{seen[label]}"
        grid_log = []
        if cfg.algorithm.alpha_grid:
            best = None
            for alpha in cfg.algorithm.alpha_grid:
                res = run(cfg.with_alpha(alpha), exp, write_output=False)
                err = res.final("relative_error")
                if err is None:
                    err = res.final("optimality_error")
                grid_log.append((alpha, err, res.termination))
                if best is None or _score(res) < _score(best):
                    best = res
            if write_output and output_path_for(cfg):
                best.trace.write_csv(output_path_for(cfg))
            res = best
        else:
            res = run(cfg, exp, write_output=write_output)
        res.label = label
        results[label] = res
        last = res.trace.last
        rows.append(
            ComparisonRow(
                label=label,
                alpha=res.alpha,
                iterations=res.iterations,
                comm_volume=last["comm_volume"],
                optimality_error=last["optimality_error"],
                relative_error=last["relative_error"],
                termination=res.termination,
                grid=grid_log,
            )
        )
    return ComparisonTable(rows=rows, results=results)


def align_on_volume(results: dict[str, RunResult], metric: str = "optimality_error") -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-run ``(comm_volume, metric)`` columns for plotting against communication cost."""
    return {k: (r.trace.column("comm_volume"), r.trace.column(metric)) for k, r in results.items()}


def clone_config(cfg: ExperimentConfig, **run_overrides) -> ExperimentConfig:
    return dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, **run_overrides))
