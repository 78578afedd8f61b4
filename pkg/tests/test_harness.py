import csv
import math
from pathlib import Path

import numpy as np
import pytest

from saddle_escape.harness.config import ConfigError, ExperimentSpec, load_spec, make_spec, parse_config
from saddle_escape.harness.experiments import (exp_convergence, exp_dimension_scaling,
                                               exp_noise_robustness, exp_success_rate, linear_fit,
                                               run_experiment)
from saddle_escape.harness.output import write_table
from saddle_escape.harness.runner import Job, run_jobs, run_one
from saddle_escape.stats import bootstrap_median_ci


def small(name, **kw):
    kw.setdefault("resamples", 500)
    kw.setdefault("stride", 500)
    return make_spec(name, kw)


def test_defaults():
    s = make_spec("convergence")
    assert s.seeds == list(range(50)) and s.iter_cap == 50_000
    assert s.methods == ["gd", "psd", "psd_probe", "pgd"]
    assert make_spec("dimension_scaling").dims == [10, 50, 100, 500, 1000]
    assert make_spec("success_rate", seed_base=7).seeds[0] == 7


def test_parse_config_forms():
    kw = parse_config("# comment\nseeds = 3\ndims = 10, 20\nepsilon = 1e-2\nwrite_traces = no\n"
                      "family = rosenbrock\nfamily.coupling = 0.2\n", seed_base=100)
    assert kw["seeds"] == [100, 101, 102] and kw["dims"] == [10, 20]
    assert kw["epsilon"] == 0.01 and kw["write_traces"] is False
    assert kw["family_params"] == {"coupling": 0.2}
    assert parse_config("seeds = 4 9 2")["seeds"] == [4, 9, 2]


@pytest.mark.parametrize("text", ["bogus = 1", "epsilon = abc", "just words", "write_traces = maybe"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


@pytest.mark.parametrize("kw", [dict(seeds=[]), dict(seeds=[1, 1]), dict(family="nope"),
                                dict(methods=["adam"]), dict(epsilon=-1.0), dict(dims=[0]),
                                dict(problems=["quartic"])])
def test_spec_validation(kw):
    with pytest.raises(ConfigError):
        ExperimentSpec("convergence", **kw)


def test_load_spec_file(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("name = success_rate\nseeds = 2\n")
    assert load_spec("success_rate", f).seeds == [0, 1]
    with pytest.raises(ConfigError):
        load_spec("convergence", f)
    with pytest.raises(ConfigError):
        load_spec("convergence", tmp_path / "missing.txt")


def test_linear_fit_exact():
    a, b, r2 = linear_fit([1, 2, 3], [3, 5, 7])
    assert (round(a, 12), round(b, 12), r2) == (1.0, 2.0, 1.0)


def test_failed_run_does_not_abort():
    bad = Job("k", 0, "separable_quartic", 4, "nope", 1e-3, 1.0)
    good = Job("k", 1, "separable_quartic", 4, "psd", 1e-3, 1.0)
    res = run_jobs([bad, good])
    assert res[0].error and res[0].status == "error" and math.isinf(res[0].censored_value)
    assert res[1].success


def test_pool_matches_serial():
    jobs = [Job("k", s, "separable_quartic", 10, "psd", 1e-3, 1.0, stride=500) for s in (3, 1, 2)]
    a, b = run_jobs(jobs, 1), run_jobs(jobs, 2)
    assert [r.seed for r in a] == [1, 2, 3]
    assert [(r.iterations, r.trace_csv) for r in a] == [(r.iterations, r.trace_csv) for r in b]


def test_dimension_scaling_table(tmp_path):
    t = exp_dimension_scaling(small("dimension_scaling", dims=[10, 100], seeds=[0, 1]))
    assert [r.extra["T"] for r in t.rows] == [5350, 7777]
    assert t.meta["fit_r2"] == pytest.approx(1.0)
    write_table(t, tmp_path)
    assert (tmp_path / "traces" / "d=10" / "trace_0.csv").exists()


def test_dimension_scaling_single_dim_warns():
    with pytest.warns(UserWarning, match="fit skipped"):
        t = exp_dimension_scaling(small("dimension_scaling", dims=[10], seeds=[0]))
    assert len(t.rows) == 1 and "fit_r2" not in t.meta


def test_raw_samples_resummarize(tmp_path):
    t = exp_dimension_scaling(small("dimension_scaling", dims=[10], seeds=[0, 1, 2]))
    write_table(t, tmp_path)
    with open(tmp_path / "results.csv") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        vals = [float(v) for v in (tmp_path / row["raw_path"]).read_text().split()[1:]]
        s = bootstrap_median_ci(vals, int(row["resamples"]), int(row["seed"]))
        assert repr(s.median) == row["median"] and repr(s.ci_low) == row["ci_low"]
        assert repr(s.ci_high) == row["ci_high"]


def test_convergence_convex_quadratic_all_methods_follow_gd():
    spec = small("convergence", problems=["random_quadratic:10"], seeds=[0, 1, 2, 3, 4],
                 family_params={"eig_min": 1.0, "eig_max": 5.0})
    t = exp_convergence(spec)
    runs = {}
    for r in t.runs:
        runs.setdefault(r.method, []).append(r)
    for m in ("psd", "psd_probe"):
        assert [r.trace_csv for r in runs[m]] == [r.trace_csv for r in runs["gd"]]
    assert all(r.success and not r.episodes for r in runs["gd"])
    # PGD has no curvature test: it spends one window after its perturbation, then returns
    # the pre-perturbation point, which is GD's terminal point
    assert all(r.success for r in runs["pgd"])


def test_convergence_censoring_and_wilcoxon():
    spec = small("convergence", problems=["separable_quartic:10"], seeds=list(range(6)),
                 methods=["gd", "psd", "pgd"], iter_cap=20_000)
    t = exp_convergence(spec)
    gd = t.row("separable_quartic:10/gd")
    assert gd.extra["censored"] == 6 and math.isinf(gd.summary.median)
    psd = t.row("separable_quartic:10/psd")
    assert psd.summary.median < t.row("separable_quartic:10/pgd").summary.median
    assert psd.extra["wilcoxon_p_vs_pgd"] < 0.05


def test_success_rate_convex_is_empty():
    spec = small("success_rate", family="random_quadratic", dims=[10], seeds=[0, 1])
    with pytest.warns(UserWarning, match="no escape episodes"):
        t = exp_success_rate(spec)
    assert not t.rows


def test_success_rate_theory_column():
    t = exp_success_rate(small("success_rate", dims=[100], seeds=list(range(5))))
    # the formula 1 - 1/(16d) as written; 0.9375 would be its value at d = 1
    assert t.rows[-1].extra["theory"] == pytest.approx(1 - 1 / 1600)


def test_noise_table_batches():
    spec = small("noise_robustness", dims=[10], seeds=[0, 1])
    t = exp_noise_robustness(spec)
    assert [r.extra["B"] for r in t.rows] == [1, 4, 40, 400]


def test_lemma_checks_via_run_experiment():
    t = run_experiment(make_spec("lemma_checks", {"quick": True}))
    assert t.meta["all_passed"]


def test_determinism_bytes(tmp_path):
    spec = small("convergence", problems=["separable_quartic:10"], seeds=[0, 1, 2, 3, 4],
                 methods=["psd", "pgd"], stride=200)
    write_table(exp_convergence(spec), tmp_path / "a")
    write_table(exp_convergence(spec), tmp_path / "b")
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
