import math

import numpy as np
import pytest

from decopt import analysis, runner
from decopt.algorithms import ndcg_stepsize_bound

MINIMAL = """
[algorithm]
name = "dgd"
alpha = 0.01

[problem]
kind = "synthetic_quadratic"
p = 10
kappa = 10.0

[network]
n = 4
density = 1.0

[run]
max_iters = 100
"""


def cfg_text(algorithm="dgd", alpha="alpha = 0.01", extra_algo="", problem=None, run_extra="", max_iters=100, n=4, density=1.0):
    problem = problem or 'kind = "synthetic_quadratic"\np = 10\nkappa = 10.0'
    return f"""
[algorithm]
name = "{algorithm}"
{alpha}
{extra_algo}

[problem]
{problem}

[network]
n = {n}
density = {density}

[run]
seed = 3
max_iters = {max_iters}
{run_extra}
"""


def test_minimal_config_valid():
    cfg = runner.load_config(MINIMAL)
    assert cfg.algorithm.name == "dgd" and cfg.algorithm.alpha == 0.01
    assert cfg.run.max_iters == 100 and cfg.run.seed == 0 and cfg.run.x0 == 0.0
    assert cfg.algorithm.l == 1e-4 and cfg.algorithm.u == 1e4


def test_unknown_key_named():
    with pytest.raises(runner.ConfigError) as info:
        runner.load_config(MINIMAL.replace("[algorithm]", "[algorthm]"))
    assert info.value.key == "algorthm"
    with pytest.raises(runner.ConfigError) as info:
        runner.load_config(MINIMAL.replace("alpha = 0.01", "alpah = 0.01\nalpha = 0.01"))
    assert info.value.key == "algorithm.alpah"


@pytest.mark.parametrize(
    "old, new, key",
    [
        ("max_iters = 100", "max_iters = 0", "run.max_iters"),
        ("max_iters = 100", "max_iters = 1.5", "run.max_iters"),
        ('name = "dgd"', 'name = "newton"', "algorithm.name"),
        ("p = 10", 'p = "ten"', "problem.p"),
        ("n = 4", "", "network.n"),
        ("max_iters = 100", "max_iters = 100\ntol_relative = -1.0", "run.tol_relative"),
        ("density = 1.0", "density = 1.2", "network.density"),
        ('kind = "synthetic_quadratic"', 'kind = "libsvm"', "problem.path"),
    ],
)
def test_config_errors_carry_key_path(old, new, key):
    with pytest.raises(runner.ConfigError) as info:
        runner.load_config(MINIMAL.replace(old, new))
    assert info.value.key == key


def test_toml_syntax_error():
    with pytest.raises(runner.ConfigError):
        runner.load_config("[algorithm\nname=")


def test_auto_alpha_rules():
    with pytest.raises(runner.ConfigError):
        runner.load_config(cfg_text(alpha="auto_alpha = true"))
    cfg = runner.load_config(cfg_text("ndcg", alpha="auto_alpha = true", max_iters=3))
    res = runner.run(cfg)
    assert res.alpha == ndcg_stepsize_bound(res.L, res.sigma, 4)


def test_run_is_deterministic(tmp_path):
    paths = []
    for k in range(2):
        out = tmp_path / f"trace{k}.csv"
        cfg = runner.load_config(cfg_text("ndcg", alpha="alpha = 0.02", run_extra=f'output = "{out}"', n=6, density=0.5))
        runner.run(cfg)
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_output_dir_override(tmp_path, monkeypatch):
    monkeypatch.setenv(runner.OUTPUT_DIR_ENV, str(tmp_path))
    cfg = runner.load_config(cfg_text(run_extra='output = "somewhere/else/t.csv"'))
    res = runner.run(cfg)
    assert res.output_path == str(tmp_path / "t.csv")
    back = analysis.MetricTrace.read_csv(res.output_path)
    assert len(back) == 101


def test_budget_and_volume_accounting():
    cfg = runner.load_config(cfg_text("gt", alpha="alpha = 0.02", max_iters=37, n=6, density=0.5))
    res = runner.run(cfg)
    assert res.termination == "budget" and res.iterations == 37
    vol = res.trace.column("comm_volume")
    assert vol[-1] == analysis.communication_volume(37, 2, res.edges, 10)
    assert np.all(np.diff(res.trace.column("iter")) == 1)


def test_tolerance_termination():
    cfg = runner.load_config(cfg_text("dmbfgs", alpha="alpha = 0.05", max_iters=5000, run_extra="tol_relative = 1e-8"))
    res = runner.run(cfg)
    assert res.termination == "tolerance"
    assert res.trace.last["relative_error"] <= 1e-8
    assert res.iterations < 5000


def test_both_tolerances_must_hold():
    text = cfg_text("dmbfgs", alpha="alpha = 0.05", max_iters=5000, run_extra="tol_relative = 1e-8\ntol_optimality = 1e-30")
    res = runner.run(runner.load_config(text))
    assert res.termination == "budget"


def test_divergence_is_a_termination_reason():
    cfg = runner.load_config(cfg_text("sdcg", alpha="alpha = 1.0", extra_algo='cg_variant = "FR"', max_iters=2000))
    res = runner.run(cfg)
    assert res.termination == "divergence"
    assert res.trace.diverged_at == res.iterations + 1
    assert all(math.isfinite(v) for v in res.trace.column("optimality_error"))


def test_ndcg_auto_alpha_tiny_on_ill_conditioned_quadratic():
    # the theoretical stepsize is tiny here; a tuned stepsize does the work
    base = 'kind = "synthetic_quadratic"\np = 50\nkappa = 100.0'
    cfg = runner.load_config(cfg_text("ndcg", alpha="auto_alpha = true", problem=base, max_iters=1, n=10, density=0.56))
    assert runner.run(cfg).alpha < 1e-6
    cfg = runner.load_config(
        cfg_text("ndcg", alpha="alpha = 0.002", problem=base, max_iters=5000, n=10, density=0.56, run_extra='metrics = ["optimality_error"]')
    )
    oe = runner.run(cfg).trace.column("optimality_error")
    assert oe[-1] <= oe[0] / 100


def test_check_theory_report():
    cfg = runner.load_config(cfg_text("ndcg", alpha="auto_alpha = true", max_iters=200, n=6, density=0.5, run_extra="check_theory = true"))
    rep = runner.run(cfg).verification
    assert rep["tracking_identity"]["passed"]
    assert rep["potential_monotone"]["passed"] and rep["potential_monotone"]["alpha_within_bound"]
    assert rep["descent_cone"]["passed"]


def test_logistic_problem_from_file(tmp_path):
    lines = ["+1 1:0.5 2:-1", "-1 2:0.3 3:1", "+1 1:-0.2 3:0.4", "-1 1:1 2:1 3:1"] * 3
    (tmp_path / "d.libsvm").write_text("\n".join(lines) + "\n")
    text = cfg_text("gt", alpha="alpha = 0.1", problem='kind = "libsvm"\npath = "d.libsvm"\nlambda_hat = 0.5', max_iters=50, n=3)
    (tmp_path / "c.toml").write_text(text)
    cfg = runner.load_config_file(tmp_path / "c.toml")
    res = runner.run(cfg)
    assert res.termination == "budget"
    assert res.trace.last["relative_error"] is not None


def test_compare_duplicate_configs_identical():
    cfg = runner.load_config(cfg_text("gt", alpha="alpha = 0.02", max_iters=50, n=5, density=0.6))
    table = runner.compare([cfg, cfg], write_output=False)
    a, b = table.results.values()
    assert a.trace.rows == b.trace.rows
    assert [r.label for r in table.rows] == ["gt", "gt#2"]


def test_compare_grid_selects_best():
    cfg = runner.load_config(
        cfg_text("sdcg", alpha="alpha_grid = [0.1, 0.01]", extra_algo='cg_variant = "PRP"', max_iters=3000,
                 problem='kind = "synthetic_quadratic"\np = 10\nkappa = 5.0', n=6, density=0.5)
    )
    other = runner.load_config(
        cfg_text("ndcg", alpha="alpha = 0.01", max_iters=3000, problem='kind = "synthetic_quadratic"\np = 10\nkappa = 5.0', n=6, density=0.5)
    )
    table = runner.compare([cfg, other], write_output=False)
    row = table.rows[0]
    assert row.label == "sdcg-prp"
    errs = {alpha: err for alpha, err, _ in row.grid}
    assert set(errs) == {0.1, 0.01}
    assert row.alpha == min(errs, key=errs.get)
    assert "grid alpha" in table.format()


def test_compare_rejects_mismatched_problems():
    a = runner.load_config(cfg_text(max_iters=5))
    b = runner.load_config(cfg_text(max_iters=5, n=5))
    with pytest.raises(runner.ConfigError):
        runner.compare([a, b])


def test_compare_nonconvex_logistic_table():
    prob = 'kind = "synthetic_logistic"\np = 5\nnum_samples = 60\nregularizer = "NONCONVEX"\nlambda_hat = 1.0'
    cfgs = [
        runner.load_config(cfg_text(name, alpha="alpha = 0.05", problem=prob, max_iters=100, n=5, density=0.6))
        for name in ("ndcg", "gt", "dgd")
    ]
    table = runner.compare(cfgs, write_output=False)
    assert [r.label for r in table.rows] == ["ndcg", "gt", "dgd"]
    assert all(r.optimality_error is not None and r.relative_error is None for r in table.rows)
    gt, dgd = table.rows[1], table.rows[2]
    assert gt.comm_volume == 2 * dgd.comm_volume
    # iteration and volume axes
    aligned = runner.align_on_volume(table.results)
    assert set(aligned) == {"ndcg", "gt", "dgd"}
