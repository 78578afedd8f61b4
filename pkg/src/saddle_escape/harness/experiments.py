"""The synthetic experiments: dimension sweep, convergence table, episode success, noise."""

from __future__ import annotations

import math
import warnings

import numpy as np

from ..oracle import ALIASES, make_problem
from ..psd import derive_params
from ..psgd import DELTA_FP, batch_size, trigger_threshold
from ..stats import wilcoxon_signed_rank
from .config import ExperimentSpec
from .output import ResultsTable
from .runner import Job, run_jobs


def _job(spec: ExperimentSpec, key, seed, family, d, method, **kw) -> Job:
    return Job(key, seed, ALIASES.get(family, family), int(d), method, spec.epsilon, spec.delta,
               params=tuple(sorted(spec.family_params.items())), max_episodes=spec.max_episodes,
               episode_cap=spec.episode_cap, iter_cap=kw.pop("iter_cap", spec.iter_cap),
               delta_fp=spec.delta_fp, exact_episodes=spec.exact_episodes,
               probe_strict=spec.probe_strict, init_mode=spec.init_mode, stride=spec.stride,
               keep_trace=spec.write_traces, **kw)


def _warn(table: ResultsTable, msg: str):
    table.warnings.append(msg)
    warnings.warn(msg, stacklevel=3)


def _by_key(results) -> dict:
    out: dict = {}
    for r in results:
        out.setdefault(r.key, []).append(r)
    return out


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares ``y = a + b x``; returns (a, b, R^2)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


def exp_dimension_scaling(spec: ExperimentSpec) -> ResultsTable:
    """Episode length and per-episode decrease across dimensions."""
    table = ResultsTable(spec.name)
    jobs = [_job(spec, f"d={d}", s, spec.family, d, "psd") for d in spec.dims for s in spec.seeds]
    results = run_jobs(jobs, spec.jobs)
    table.runs = results
    groups = _by_key(results)
    Ts = []
    for d in spec.dims:
        runs = groups[f"d={d}"]
        T = next((r.T for r in runs if r.T is not None), None)
        if T is None:
            p = make_problem(spec.family, d)
            T = derive_params(p.ell, p.rho, p.delta_f, spec.epsilon, spec.delta, d,
                              max_episodes=spec.max_episodes).window
        Ts.append(T)
        decs = [e[2] for r in runs for e in r.episodes]
        succ = [e[2] for r in runs for e in r.episodes if e[4]]
        thr = spec.epsilon**2 / (128.0 * make_problem(spec.family, d).ell)
        frac = sum(v >= thr for v in succ) / len(succ) if succ else math.nan
        if not decs:
            _warn(table, f"d={d}: no escape episodes recorded")
        table.add(f"d={d}", decs, resamples=spec.resamples, seed=spec.stats_seed,
                  d=d, T=T, ln_d=math.log(d), episodes=len(decs),
                  success_fraction=(sum(e[4] for r in runs for e in r.episodes) / len(decs)
                                    if decs else math.nan),
                  threshold_fraction_of_successful=frac,
                  failed_runs=sum(r.error is not None for r in runs))
    if len(spec.dims) < 2:
        _warn(table, "single dimension: log-d fit skipped")
    else:
        a, b, r2 = linear_fit([math.log(d) for d in spec.dims], Ts)
        table.meta.update(fit_intercept=a, fit_slope=b, fit_r2=r2)
        meds = [r.summary.median for r in table.rows if r.summary is not None]
        if meds:
            table.meta["decrease_spread"] = (max(meds) - min(meds)) / max(meds)
    return table


def exp_convergence(spec: ExperimentSpec) -> ResultsTable:
    """Iterations to an approximate SOSP per (problem, method), censored at the cap."""
    table = ResultsTable(spec.name)
    problems = spec.problems or [f"{spec.family}:{d}" for d in spec.dims]
    jobs = []
    for prob in problems:
        fam, _, d = prob.partition(":")
        for m in spec.methods:
            jobs += [_job(spec, f"{prob}/{m}", s, fam, int(d), m) for s in spec.seeds]
    results = run_jobs(jobs, spec.jobs)
    table.runs = results
    groups = _by_key(results)
    for prob in problems:
        for m in spec.methods:
            runs = groups[f"{prob}/{m}"]
            vals = [r.censored_value for r in runs]
            table.add(f"{prob}/{m}", vals, resamples=spec.resamples, seed=spec.stats_seed,
                      problem=prob, method=m, censored=sum(math.isinf(v) for v in vals),
                      false_sosp=sum(r.status == "SOSP" and not r.success for r in runs),
                      success_rate=sum(r.success for r in runs) / len(runs),
                      wilcoxon_p_vs_pgd=None)
        if "psd" in spec.methods and "pgd" in spec.methods:
            a, b = groups[f"{prob}/psd"], groups[f"{prob}/pgd"]
            pairs = [(x.censored_value, y.censored_value) for x, y in zip(a, b)]
            diffs = [x - y for x, y in pairs if math.isfinite(x) and math.isfinite(y)]
            pval = math.nan
            if not diffs:
                _warn(table, f"{prob}: Wilcoxon PSD vs PGD skipped (no pair with both runs uncensored)")
            else:
                try:
                    pval = wilcoxon_signed_rank(diffs)
                except ValueError as e:
                    _warn(table, f"{prob}: Wilcoxon PSD vs PGD skipped ({e})")
            table.row(f"{prob}/psd").extra["wilcoxon_p_vs_pgd"] = pval
    return table


def exp_success_rate(spec: ExperimentSpec) -> ResultsTable:
    """Per-episode success fraction by episode ordinal, with the 1 - 1/(16d) reference."""
    table = ResultsTable(spec.name)
    d = spec.dims[0]
    jobs = [_job(spec, f"d={d}", s, spec.family, d, "psd") for s in spec.seeds]
    results = run_jobs(jobs, spec.jobs)
    table.runs = results
    theory = 1.0 - 1.0 / (16.0 * d)
    by_ord: dict = {}
    for r in results:
        for i, e in enumerate(r.episodes):
            by_ord.setdefault(i, []).append(1.0 if e[4] else 0.0)
    total = sum(len(v) for v in by_ord.values())
    if total == 0:
        _warn(table, "no escape episodes: nothing to measure (convex problem?)")
        return table
    if total < 100:
        _warn(table, f"only {total} episodes collected; at least 100 are expected")
    allv = [v for k in sorted(by_ord) for v in by_ord[k]]
    for k in sorted(by_ord):
        v = by_ord[k]
        p = sum(v) / len(v)
        table.add(f"d={d}/episode={k}", v, resamples=spec.resamples, seed=spec.stats_seed,
                  episode=k, episodes=len(v), success_rate=p,
                  std_error=math.sqrt(p * (1 - p) / len(v)), theory=theory)
    p = sum(allv) / len(allv)
    table.add(f"d={d}/all", allv, resamples=spec.resamples, seed=spec.stats_seed,
              episode="all", episodes=len(allv), success_rate=p,
              std_error=math.sqrt(p * (1 - p) / len(allv)), theory=theory)
    table.meta.update(aggregate_success_rate=p, theory=theory, episodes=len(allv))
    return table


def exp_noise_robustness(spec: ExperimentSpec) -> ResultsTable:
    """PSGD across noise levels sigma^2 = ratio * eps^2."""
    table = ResultsTable(spec.name)
    d = spec.dims[0]
    delta_fp = DELTA_FP if spec.delta_fp is None else spec.delta_fp
    jobs = []
    for ratio in spec.noise_ratios:
        jobs += [_job(spec, f"ratio={ratio:g}", s, spec.family, d, "psgd",
                      sigma2=ratio * spec.epsilon**2) for s in spec.seeds]
    results = run_jobs(jobs, spec.jobs)
    table.runs = results
    groups = _by_key(results)
    for ratio in spec.noise_ratios:
        runs = groups[f"ratio={ratio:g}"]
        sigma2 = ratio * spec.epsilon**2
        B = batch_size(sigma2, spec.epsilon, delta_fp)
        evals = sorted(r.grad_evals for r in runs if r.success)
        table.add(f"ratio={ratio:g}", [r.censored_value for r in runs], resamples=spec.resamples,
                  seed=spec.stats_seed, noise_ratio=ratio, sigma2=sigma2, B=B,
                  trigger_threshold=trigger_threshold(spec.epsilon, sigma2, B),
                  success_rate=sum(r.success for r in runs) / len(runs),
                  median_grad_samples=float(np.median(evals)) if evals else math.inf)
    return table


EXPERIMENT_FUNCS = {
    "dimension_scaling": exp_dimension_scaling,
    "convergence": exp_convergence,
    "success_rate": exp_success_rate,
    "noise_robustness": exp_noise_robustness,
}


def run_experiment(spec: ExperimentSpec) -> ResultsTable:
    if spec.name == "lemma_checks":
        from .checks import checks_table, run_lemma_checks
        return checks_table(run_lemma_checks(spec))
    return EXPERIMENT_FUNCS[spec.name](spec)
