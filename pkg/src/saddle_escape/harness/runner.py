"""One seeded run per job, executed in-process or on a worker pool."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..baselines import run_pgd
from ..oracle import NoisyGradModel, make_problem, standard_init
from ..probe import probe_params, run_psd_probe
from ..psd import SOSP, DivergenceError, config_for, run_psd, sosp_check
from ..psgd import DELTA_FP, make_psgd_config, run_psgd

# independent streams per seed
INIT_STREAM, ALGO_STREAM, NOISE_STREAM, CHECK_STREAM = 0, 1, 2, 3


@dataclass(frozen=True)
class Job:
    key: str
    seed: int
    family: str
    d: int
    method: str
    epsilon: float
    delta: float
    params: tuple = ()
    max_episodes: int | None = 1
    episode_cap: int = 20
    iter_cap: int | None = None
    sigma2: float | None = None
    delta_fp: float | None = None
    exact_episodes: bool = False
    probe_strict: bool = False
    init_mode: str = "saddle"
    stride: int = 100
    keep_trace: bool = True


@dataclass
class RunResult:
    key: str
    seed: int
    method: str
    family: str
    d: int
    iterations: int
    status: str
    success: bool
    T: int | None
    episodes: list = field(default_factory=list)
    grad_evals: int = 0
    batch: int = 1
    f_initial: float = math.nan
    f_final: float = math.nan
    detections: int = 0
    probes: int = 0
    audit: dict | None = None
    trace_csv: str | None = None
    error: str | None = None

    @property
    def censored_value(self) -> float:
        """Iterations for a verified SOSP, ``inf`` otherwise."""
        return float(self.iterations) if self.success else math.inf


def build_problem(job: Job):
    params = dict(job.params)
    if "seed" in params:
        params["seed"] = int(params["seed"])
    return make_problem(job.family, job.d, **params)


def run_one(job: Job) -> RunResult:
    """Execute a single (config, seed) run; failures come back as an error result."""
    try:
        return _run(job)
    except (DivergenceError, ArithmeticError, ValueError, RuntimeError) as e:
        return RunResult(job.key, job.seed, job.method, job.family, job.d, 0, "error", False, None,
                         error=f"{type(e).__name__}: {e}")


def _run(job: Job) -> RunResult:
    base = build_problem(job)
    x0 = standard_init(base, np.random.default_rng([job.seed, INIT_STREAM]), job.init_mode)
    p = base.with_start(x0)
    cfg = config_for(p, job.epsilon, job.delta, max_episodes=job.max_episodes,
                     episode_cap=job.episode_cap)
    rng = np.random.default_rng([job.seed, ALGO_STREAM])
    kw = dict(max_iters=job.iter_cap, stride=job.stride)
    batch = 1
    if job.method == "psd":
        tr = run_psd(p, cfg, x0, rng, **kw)
    elif job.method == "gd":
        tr = run_psd(p, cfg, x0, rng, escape=False, **kw)
    elif job.method == "pgd":
        tr = run_pgd(p, cfg, x0, rng, **kw)
    elif job.method == "psd_probe":
        pp = probe_params(job.epsilon, p.rho, job.delta, p.dim, strict=job.probe_strict, ell=p.ell)
        tr = run_psd_probe(p, cfg, pp, x0, rng, **kw)
    elif job.method == "psgd":
        sigma2 = job.sigma2 or 0.0
        pc = make_psgd_config(cfg, sigma2, DELTA_FP if job.delta_fp is None else job.delta_fp)
        model = NoisyGradModel(p, sigma2, seed=[job.seed, NOISE_STREAM])
        tr = run_psgd(model, pc, x0, rng, exact_episodes=job.exact_episodes, **kw)
        batch = pc.B
    else:
        raise ValueError(f"unknown method {job.method!r}")
    ok = False
    if tr.terminal_status == SOSP:
        # exact oracles on an independent stream decide success
        ok, _ = sosp_check(p, tr.terminal_point, cfg, np.random.default_rng([job.seed, CHECK_STREAM]))
    if job.iter_cap is not None and tr.iterations > job.iter_cap:
        ok = False
    dets = tr.extra.get("detections", [])
    return RunResult(
        job.key, job.seed, job.method, job.family, job.d, tr.iterations, tr.terminal_status,
        bool(ok), cfg.window,
        episodes=[(e.f_enter, e.f_exit, e.decrease, e.steps, bool(e.success), e.probe_id)
                  for e in tr.episodes],
        grad_evals=(tr.total_grad_evals if batch == 1 else batch * tr.iterations),
        batch=batch, f_initial=tr.f_initial, f_final=tr.f_final,
        detections=sum(1 for r in dets if r.detected), probes=len(dets),
        trace_csv=tr.trace_csv() if job.keep_trace else None)


def run_jobs(jobs: list, n_workers: int = 1) -> list:
    """Run jobs serially or on a process pool; results sorted by (key, seed)."""
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as ex:
            results = list(ex.map(run_one, jobs, chunksize=max(1, len(jobs) // (4 * n_workers))))
    else:
        results = [run_one(j) for j in jobs]
    order = {k: i for i, k in enumerate(dict.fromkeys(j.key for j in jobs))}
    return sorted(results, key=lambda r: (order[r.key], r.seed))
