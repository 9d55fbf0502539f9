"""Acceptance checks, one test per criterion.

Each test records a ``criterion N: PASS|FAIL ...`` line; the lines are printed
in the pytest terminal summary, or directly when this file is run as a script.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decopt import analysis, runner
from decopt.algorithms import (
    AlgoParams,
    dmbfgs_direction,
    dmbfgs_eigenpair,
    dmbfgs_matrix,
    make_stepper,
    ndcg_stepsize_bound,
)
from decopt.datasets import (
    LibSVMParseError,
    format_libsvm,
    load_libsvm,
    parse_libsvm,
    synth_quadratic,
)
from decopt.problems import LogisticProblem, finite_difference_check
from decopt.topology import generate_connected_graph, metropolis_weights, path_graph, validate_mixing_matrix

RESULTS: dict[int, str] = {}
FIXTURE = Path(__file__).parent / "fixtures" / "sample.libsvm"


def record(num: int, ok: bool, detail: str) -> None:
    RESULTS[num] = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(RESULTS[num])
    assert ok, RESULTS[num]


def quad_config(name, alpha, kappa, max_iters, extra_algo="", run_extra="", p=50):
    return runner.load_config(
        f"""
[algorithm]
name = "{name}"
{alpha}
{extra_algo}
[problem]
kind = "synthetic_quadratic"
p = {p}
kappa = {kappa!r}
[network]
n = 10
density = 0.56
[run]
seed = 0
max_iters = {max_iters}
{run_extra}
"""
    )


# ---------------------------------------------------------------- 1


def test_criterion_01_mixing_matrix_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_sym = worst_row = 0.0
    worst_sigma = 0.0
    all_ok = True
    for _ in range(20):
        n = int(rng.integers(3, 31))
        g = generate_connected_graph(n, float(rng.uniform(0.05, 1.0)), int(rng.integers(2**31)))
        mix = metropolis_weights(g)
        W = mix.W
        worst_sym = max(worst_sym, float(np.max(np.abs(W - W.T))))
        worst_row = max(worst_row, float(np.max(np.abs(W.sum(axis=1) - 1))))
        worst_sigma = max(worst_sigma, mix.sigma)
        all_ok &= validate_mixing_matrix(W, g).ok and bool(np.all(W >= 0)) and g.is_connected()
    sigma3 = metropolis_weights(path_graph(3)).sigma
    elapsed = time.perf_counter() - t0
    ok = all_ok and worst_sym <= 1e-12 and worst_row <= 1e-12 and worst_sigma < 1 and abs(sigma3 - 2 / 3) <= 1e-10 and elapsed < 5
    record(1, ok, f"sym={worst_sym:.1e} rows={worst_row:.1e} max sigma={worst_sigma:.4f} path3 sigma={sigma3:.12f} t={elapsed:.2f}s")


# ---------------------------------------------------------------- 2


def test_criterion_02_tracking_identity():
    prob = synth_quadratic(20, 10.0, 10, seed=11)
    mix = metropolis_weights(generate_connected_graph(10, 0.56, seed=12))
    worst = {}
    for name, alpha in (("gt", 0.02), ("abm", 0.02), ("ndcg", 0.02), ("dmbfgs", 0.05)):
        step = make_stepper(name, prob, mix, AlgoParams(alpha=alpha, beta_fixed=0.3))
        s = step.init(np.zeros((10, 20)))
        dev = 0.0
        for _ in range(1000):
            s = step.step(s)
            dev = max(dev, np.linalg.norm(s.v.mean(axis=0) - s.g.mean(axis=0)) / (1 + np.linalg.norm(s.g)))
        worst[name] = dev
    ok = max(worst.values()) <= 1e-9
    record(2, ok, " ".join(f"{k}={v:.1e}" for k, v in worst.items()))


# ---------------------------------------------------------------- 3


def centralized_prp_cg(A, b, z0, alpha, iters):
    """Plain-loop PRP conjugate gradient with constant stepsize."""
    p = len(z0)

    def grad(z):
        return [sum(A[r][c] * z[c] for c in range(p)) + b[r] for r in range(p)]

    z = list(z0)
    g = grad(z)
    d = [-gi for gi in g]
    out = []
    for _ in range(iters):
        z = [zi + alpha * di for zi, di in zip(z, d)]
        g_new = grad(z)
        num = sum(gn * (gn - go) for gn, go in zip(g_new, g))
        den = sum(go * go for go in g)
        beta = num / den if den > 0 else 0.0
        d = [-gn + beta * di for gn, di in zip(g_new, d)]
        g = g_new
        out.append(list(z))
    return np.array(out)


def test_criterion_03_ndcg_centralized_equivalence():
    prob = synth_quadratic(20, 10.0, 1, seed=5)
    alpha = 0.02
    step = make_stepper("ndcg", prob, np.eye(1), AlgoParams(alpha=alpha))
    s = step.init(np.zeros((1, 20)))
    got = []
    for _ in range(100):
        s = step.step(s)
        got.append(s.x[0].copy())
    ref = centralized_prp_cg(prob.A[0].tolist(), prob.b[0].tolist(), [0.0] * 20, alpha, 100)
    diff = float(np.max(np.abs(np.array(got) - ref)))
    record(3, diff <= 1e-12, f"max elementwise diff over 100 iterations = {diff:.2e}")


# ---------------------------------------------------------------- 4 and 5

NDCG_LOGISTIC = """
[algorithm]
name = "ndcg"
auto_alpha = true
[problem]
kind = "synthetic_logistic"
num_samples = 200
p = 20
regularizer = "NONCONVEX"
lambda_hat = 2.0
feature_scale = 0.1
label_noise = 1.0
[network]
n = 10
density = 0.56
[run]
seed = 0
max_iters = 2000
"""


@pytest.fixture(scope="module")
def ndcg_logistic_run():
    t0 = time.perf_counter()
    cfg = runner.load_config(NDCG_LOGISTIC)
    exp = runner.build_experiment(cfg)
    L = exp.constants.L
    alpha = ndcg_stepsize_bound(L, exp.mixing.sigma, exp.problem.n)
    step = make_stepper("ndcg", exp.problem, exp.mixing, AlgoParams(alpha=alpha))
    s = step.init(np.zeros((exp.problem.n, exp.problem.p)))
    P = [analysis.potential(s.x, s.v, alpha, exp.problem, exp.mixing)]
    eps = [float(np.sum(s.v_tilde**2)) + analysis.consensus_error(s.x) ** 2]
    cone = []
    xi = 1.0
    cone.append(analysis.cone_violation(s.v_tilde, s.d, xi))
    for _ in range(2000):
        s = step.step(s)
        xi = 1.0 + L * alpha * xi**2
        P.append(analysis.potential(s.x, s.v, alpha, exp.problem, exp.mixing))
        eps.append(float(np.sum(s.v_tilde**2)) + analysis.consensus_error(s.x) ** 2)
        cone.append(analysis.cone_violation(s.v_tilde, s.d, xi))
    return dict(P=np.array(P), eps=np.array(eps), cone=np.array(cone), alpha=alpha, L=L, elapsed=time.perf_counter() - t0)


def test_criterion_04_ndcg_potential_decrease(ndcg_logistic_run):
    r = ndcg_logistic_run
    P = r["P"]
    rel_inc = (P[1:] - P[:-1]) / np.abs(P[:-1])
    worst = float(rel_inc.max())
    best = float(r["eps"].min())
    ok = worst <= 1e-9 and best < 1e-6 and r["elapsed"] < 60
    record(4, ok, f"alpha={r['alpha']:.4g} max rel increase of P={worst:.2e} min eps={best:.2e} t={r['elapsed']:.1f}s")


def test_criterion_05_descent_cone(ndcg_logistic_run):
    r = ndcg_logistic_run
    assert r["L"] * r["alpha"] <= 0.25
    worst = float(r["cone"].max())
    record(5, worst <= 1e-9, f"L*alpha={r['L'] * r['alpha']:.3f} max normalized violation={worst:.2e}")


# ---------------------------------------------------------------- 6


def test_criterion_06_dmbfgs_matrix_equivalence():
    rng = np.random.default_rng(6)
    worst_dir = worst_eig = 0.0
    interlace = True
    for _ in range(100):
        p = int(rng.integers(3, 30))
        s, y, v = rng.standard_normal((3, p)) * rng.uniform(0.1, 10, size=(3, 1))
        if s @ y <= 0:
            y = -y
        H = dmbfgs_matrix(s, y)
        ref = -H @ v
        d = dmbfgs_direction(v, s, y)
        worst_dir = max(worst_dir, np.linalg.norm(d - ref) / np.linalg.norm(ref))
        lam, Lam = dmbfgs_eigenpair(s, y)
        tau = (s @ y) / (y @ y)
        eig = np.linalg.eigvalsh(H)
        worst_eig = max(worst_eig, abs(eig[0] - lam) / abs(lam), abs(eig[-1] - Lam) / abs(Lam))
        interlace &= bool(lam <= tau <= Lam)
    ok = worst_dir <= 1e-12 and worst_eig <= 1e-10 and interlace
    record(6, ok, f"direction rel diff={worst_dir:.1e} eigen rel diff={worst_eig:.1e} interlacing={interlace}")


# ---------------------------------------------------------------- 7


def tail_fit(err):
    y = np.log(err)
    k = len(y) // 2
    t = np.arange(len(y))[k:]
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, y[k:], rcond=None)
    resid = y[k:] - A @ coef
    r2 = 1 - np.sum(resid**2) / np.sum((y[k:] - y[k:].mean()) ** 2)
    return float(coef[0]), float(r2)


def test_criterion_07_dmbfgs_linear_convergence():
    t0 = time.perf_counter()
    exp = runner.build_experiment(quad_config("dmbfgs", "alpha = 0.1", 100.0, 1))
    best = None
    for alpha in (0.02, 0.05, 0.1):
        res = runner.run(
            quad_config("dmbfgs", f"alpha = {alpha}", 100.0, 10000, run_extra='tol_relative = 1e-8\nmetrics = ["relative_error"]'),
            exp,
        )
        if res.termination == "tolerance" and (best is None or res.iterations < best.iterations):
            best = res
    elapsed = time.perf_counter() - t0
    if best is None:
        record(7, False, "no stepsize reached relative_error <= 1e-8")
    slope, r2 = tail_fit(best.trace.column("relative_error"))
    ok = best.trace.last["relative_error"] <= 1e-8 and best.iterations <= 10000 and slope < 0 and r2 >= 0.95 and elapsed < 60
    record(7, ok, f"alpha={best.alpha} iters={best.iterations} tail slope={slope:.4f} R2={r2:.4f} t={elapsed:.1f}s")


# ---------------------------------------------------------------- 8


def test_criterion_08_contraction():
    cfg0 = quad_config("dmbfgs", "alpha = 1.0", 100.0, 1)
    exp = runner.build_experiment(cfg0)
    L, mu = exp.constants.L, exp.constants.mu
    l, u = 1.0 / (2.0 * L), 2.0 / mu
    cfg = quad_config(
        "dmbfgs", "auto_alpha = true", 100.0, 2000, extra_algo=f"l = {l!r}\nu = {u!r}", run_extra="check_theory = true"
    )
    res = runner.run(cfg, exp)
    rep = res.verification["contraction"]
    ok = rep["fraction"] >= 0.99 and rep["rho"] < 1 and rep["rho"] <= rep["rho_bound"] + 1e-12
    record(8, ok, f"alpha={res.alpha:.3e} fraction={rep['fraction']:.4f} rho={rep['rho']!r} bound={rep['rho_bound']!r}")


# ---------------------------------------------------------------- 9


def iterations_to(name, grid, kappa, exp, cap):
    best = math.inf
    for alpha in grid:
        cfg = quad_config(name, f"alpha = {alpha!r}", kappa, cap, run_extra='tol_relative = 1e-6\nmetrics = ["relative_error"]')
        res = runner.run(cfg, exp)
        if res.termination == "tolerance":
            best = min(best, res.iterations)
    return best


@pytest.mark.slow
def test_criterion_09_condition_number_robustness():
    t0 = time.perf_counter()
    dm, gt = {}, {}
    for kappa in (1e2, 1e3, 1e4):
        exp = runner.build_experiment(quad_config("gt", "alpha = 1.0", kappa, 1))
        L = exp.constants.L
        dm[kappa] = iterations_to("dmbfgs", (0.005, 0.01, 0.02, 0.05, 0.1), kappa, exp, 50_000)
        gt[kappa] = iterations_to("gt", tuple(c / L for c in (0.25, 0.5, 1.0, 1.5, 2.0)), kappa, exp, 300_000)
    elapsed = time.perf_counter() - t0
    growth = [dm[1e3] / dm[1e2], dm[1e4] / dm[1e3]]
    ratio = gt[1e4] / dm[1e4]
    ok = max(growth) <= 20 and ratio >= 5 and elapsed < 600
    detail = (
        f"dmbfgs iters={[dm[k] for k in dm]} gt iters={[gt[k] for k in gt]} "
        f"growth/decade={[round(g, 2) for g in growth]} gt/dmbfgs at 1e4={ratio:.1f} t={elapsed:.0f}s"
    )
    record(9, ok, detail)


# ---------------------------------------------------------------- 10


@pytest.mark.slow
def test_criterion_10_sdcg_inexactness():
    alphas = (0.1, 0.01, 0.001)
    exp = runner.build_experiment(quad_config("sdcg", "alpha = 0.1", 5.0, 1))
    plateau, beta, ndcg_final, flat = {}, {}, {}, {}
    for alpha in alphas:
        res = runner.run(quad_config("sdcg", f"alpha = {alpha}", 5.0, 20000, run_extra='metrics = ["optimality_error"]'), exp)
        oe = res.trace.column("optimality_error")
        tail = oe[-2000:]
        flat[alpha] = float((tail.max() - tail.min()) / tail.mean())
        plateau[alpha] = float(oe[-1])
        beta[alpha] = float(np.mean(np.abs(res.final_states.beta)))
        nd = runner.run(quad_config("ndcg", f"alpha = {alpha}", 5.0, 20000, run_extra='metrics = ["optimality_error"]'), exp)
        ndcg_final[alpha] = float(nd.trace.last["optimality_error"])
    ordered = plateau[0.1] > plateau[0.01] > plateau[0.001] > 0
    ok = (
        ordered
        and max(flat.values()) <= 1e-6
        and max(beta.values()) < 1e-3
        and all(ndcg_final[a] <= plateau[a] * 1e-3 for a in alphas)
    )
    detail = " ".join(f"a={a}: plateau={plateau[a]:.3e} |beta|={beta[a]:.1e} ndcg={ndcg_final[a]:.1e}" for a in alphas)
    record(10, ok, detail)


# ---------------------------------------------------------------- 11


def test_criterion_11_gradient_oracles():
    rng = np.random.default_rng(11)
    worst = {}
    quad = synth_quadratic(8, 50.0, 4, seed=1)
    blocks = []
    for _ in range(4):
        A = rng.standard_normal((5, 8))
        blocks.append((A, rng.choice([-1.0, 1.0], size=5)))
    fams = {
        "quadratic": quad,
        "logistic_l2": LogisticProblem(blocks, "L2", 0.5),
        "logistic_nonconvex": LogisticProblem(blocks, "NONCONVEX", 0.5),
    }
    for name, prob in fams.items():
        dev = 0.0
        for _ in range(20):
            z = rng.standard_normal(prob.p)
            dev = max(dev, finite_difference_check(prob, int(rng.integers(prob.n)), z / np.linalg.norm(z)))
        worst[name] = dev
    record(11, max(worst.values()) <= 1e-5, " ".join(f"{k}={v:.1e}" for k, v in worst.items()))


# ---------------------------------------------------------------- 12

_lines_checked = []


@settings(max_examples=100, deadline=None, derandomize=True)
@given(
    st.lists(
        st.tuples(
            st.sampled_from(["+1", "-1"]),
            st.dictionaries(st.integers(1, 500), st.floats(allow_nan=False, allow_infinity=False), max_size=10),
        ),
        min_size=10,
        max_size=10,
    )
)
def _round_trip(lines):
    text = "\n".join(lab + "".join(f" {k}:{v!r}" for k, v in sorted(f.items())) for lab, f in lines)
    s = parse_libsvm(text)
    t = parse_libsvm(format_libsvm(s), p=s.p)
    assert np.array_equal(s.indptr, t.indptr) and np.array_equal(s.indices, t.indices)
    assert np.array_equal(s.data, t.data) and np.array_equal(s.labels, t.labels)
    _lines_checked.append(len(lines))


def test_criterion_12_parser():
    _lines_checked.clear()
    _round_trip()
    n_random = sum(_lines_checked)
    fx = load_libsvm(FIXTURE)
    back = parse_libsvm(format_libsvm(fx), p=fx.p)
    fixture_ok = len(fx) == 100 and np.array_equal(back.data, fx.data) and np.array_equal(back.indices, fx.indices)
    fixture_ok &= np.array_equal(back.labels, fx.labels) and np.array_equal(back.indptr, fx.indptr)
    # corrupt fixture lines and check the reported line number
    raw = FIXTURE.read_text().splitlines()
    lineno_ok = True
    for k in (0, 41, 99):
        bad = list(raw)
        bad[k] = bad[k] + " 7:oops"
        try:
            parse_libsvm("\n".join(bad))
            lineno_ok = False
        except LibSVMParseError as exc:
            lineno_ok &= exc.lineno == k + 1
    ok = n_random >= 1000 and fixture_ok and lineno_ok
    record(12, ok, f"random lines round-tripped={n_random} fixture={fixture_ok} error line numbers={lineno_ok}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
