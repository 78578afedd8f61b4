"""Perturbed saddle-escape descent: parameter schedule, phases and run loop."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .eigs import LanczosResult, default_lanczos_k, lanczos_min_eig, sample_ball
from .oracle import Problem

SOSP = "SOSP"
BUDGET_EXHAUSTED = "budget_exhausted"
EPISODE_CAP = "episode_cap"

DEFAULT_GRAD_BUDGET = 10**7
DESCENT_AUDIT_TOL = 1e-12

TRACE_COLUMNS = ("iter", "phase", "f", "grad_norm", "episode_id")
EPISODE_COLUMNS = ("episode_id", "f_enter", "f_exit", "decrease", "steps", "success")


class DivergenceError(FloatingPointError):
    """A non-finite function value or gradient showed up during a run."""


def snap_ceil(x: float) -> int:
    """Ceiling that treats values within 1e-9 (relative) of an integer as that integer."""
    n = round(x)
    if abs(x - n) <= 1e-9 * max(1.0, abs(x)):
        return int(n)
    return math.ceil(x)


@dataclass(frozen=True)
class PsdConfig:
    epsilon: float
    delta: float
    eta: float
    gamma: float | None
    r: float
    M: int
    T: int | None
    ell: float
    rho: float
    delta_f: float
    d: int
    M_theory: int
    episode_cap: int
    grad_budget: int | None = DEFAULT_GRAD_BUDGET
    quadratic_mode: bool = False
    eps_H: float | None = None
    lanczos_k: int | None = None

    @property
    def curvature_threshold(self) -> float:
        """Negative-curvature scale that separates saddles from SOSPs."""
        return self.gamma if self.gamma is not None else self.eps_H

    @property
    def escape_decrease(self) -> float:
        return self.epsilon**2 / (128.0 * self.ell)

    @property
    def window(self) -> int:
        """Episode length; in quadratic mode the same formula with ``eps_H`` for gamma."""
        if self.T is not None:
            return self.T
        return math.ceil(8.0 * self.ell / self.eps_H * math.log(16.0 * self.d * self.M / self.delta))

    def descent_bound(self, refined: bool = False) -> float:
        """Bound on descent steps: ``4 l Df / eps^2``, or ``8 l Df / (3 eps^2)`` when refined."""
        c = 8.0 / 3.0 if refined else 4.0
        return c * self.ell * self.delta_f / self.epsilon**2

    def gradient_bound(self, refined: bool = False) -> float:
        """Total gradient-evaluation bound: descent part plus ``M * T``."""
        return self.descent_bound(refined) + self.M * self.window


def derive_params(ell: float, rho: float, delta_f: float, epsilon: float, delta: float, d: int,
                  *, max_episodes: int | None = None, episode_cap: int | None = None,
                  grad_budget: int | None = DEFAULT_GRAD_BUDGET,
                  eps_H: float | None = None) -> PsdConfig:
    """Derive the run parameters of the escape schedule.

    ``max_episodes`` caps the episode count ``M`` that enters the episode
    length (the uncapped value stays in ``M_theory``). With ``rho = 0`` the
    config is flagged ``quadratic_mode``: no ``gamma``/``T``, a perturbation
    radius of ``epsilon / ell`` and curvature tolerance ``eps_H``
    (default ``sqrt(epsilon)``).
    """
    if ell <= 0 or epsilon <= 0:
        raise ValueError("ell and epsilon must be positive")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if delta_f < 0 or rho < 0:
        raise ValueError("delta_f and rho must be non-negative")
    if d < 1:
        raise ValueError("d must be a positive integer")
    eta = 1.0 / (2.0 * ell)
    M_theory = 1 + snap_ceil(128.0 * ell * delta_f / epsilon**2)
    M = M_theory if max_episodes is None else max(1, min(M_theory, int(max_episodes)))
    cap = M if episode_cap is None else int(episode_cap)
    if rho == 0:
        return PsdConfig(epsilon, delta, eta, None, epsilon / ell, M, None, ell, rho, delta_f, d,
                         M_theory, cap, grad_budget, quadratic_mode=True,
                         eps_H=math.sqrt(epsilon) if eps_H is None else eps_H)
    gamma = math.sqrt(rho * epsilon)
    r = gamma / (8.0 * rho)
    T = math.ceil(8.0 * ell / gamma * math.log(16.0 * d * M / delta))
    return PsdConfig(epsilon, delta, eta, gamma, r, M, T, ell, rho, delta_f, d, M_theory, cap,
                     grad_budget, eps_H=eps_H)


def config_for(p: Problem, epsilon: float, delta: float, **kw) -> PsdConfig:
    return derive_params(p.ell, p.rho, p.delta_f, epsilon, delta, p.dim, **kw)


@dataclass(frozen=True)
class EpisodeRecord:
    f_enter: float
    f_exit: float
    decrease: float
    steps: int
    success: bool
    perturbation_norm: float
    probe_id: int = -1
    start_iter: int = 0


@dataclass
class RunTrace:
    method: str
    rows: list
    episodes: list
    descent_steps: int
    episode_steps: int
    idle_steps: int
    hvp_evals: int
    hvp_grad_charge: int
    fevals: int
    terminal_point: np.ndarray
    terminal_status: str
    f_initial: float
    f_final: float
    audit: dict | None = None
    extra: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        """Gradient steps taken: descent, escape and idle steps."""
        return self.descent_steps + self.episode_steps + self.idle_steps

    @property
    def total_grad_evals(self) -> int:
        return self.iterations + self.hvp_grad_charge

    def within_bound(self, cfg: PsdConfig, refined: bool = False) -> bool:
        """Pure gradient steps against the descent-plus-episodes bound."""
        return self.descent_steps + self.episode_steps <= cfg.gradient_bound(refined)

    def trace_csv(self) -> str:
        cols = TRACE_COLUMNS + tuple(self.extra.get("trace_columns", ()))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def episodes_csv(self) -> str:
        probe = self.method == "psd_probe"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EPISODE_COLUMNS + (("probe_id",) if probe else ()))
        for i, e in enumerate(self.episodes):
            row = [i, e.f_enter, e.f_exit, e.decrease, e.steps, int(e.success)]
            if probe:
                row.append(e.probe_id)
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _check_finite(g, what="gradient"):
    if not np.all(np.isfinite(g)):
        raise DivergenceError(f"non-finite {what} encountered")


class Tracker:
    """Counters, budget, trace rows and the descent-decrease audit shared by every run loop."""

    def __init__(self, p: Problem, cfg: PsdConfig, method: str, x0, *, stride: int = 1,
                 max_iters: int | None = None, audit: bool = False):
        self.p, self.cfg, self.method = p, cfg, method
        self.stride = max(1, int(stride))
        self.max_iters = max_iters
        self.it = 0
        self.descent_steps = self.episode_steps = self.idle_steps = 0
        self.hvp_evals = self.fevals = 0
        self.episodes: list[EpisodeRecord] = []
        self.rows: list[tuple] = []
        self.f_initial = float(p.value(x0))
        self.audit = {"steps": 0, "violations": 0, "min_slack": math.inf} if audit else None
        self.extra: dict = {}

    @property
    def hvp_grad_charge(self) -> int:
        return 0 if self.p.hvp_exact else 2 * self.hvp_evals

    def remaining(self) -> int:
        left = math.inf
        if self.max_iters is not None:
            left = self.max_iters - self.it
        if self.cfg.grad_budget is not None:
            left = min(left, self.cfg.grad_budget - self.it - self.hvp_grad_charge)
        return int(min(left, 2**62))

    def due(self) -> bool:
        return self.it % self.stride == 0

    def row(self, phase: str, x, gn: float, episode_id: int = -1, f: float | None = None, *extra):
        if f is None:
            f = float(self.p.value(x))
        self.rows.append((self.it, phase, f, float(gn), episode_id) + tuple(extra))

    def descent(self, x, g, gn: float):
        x_new = x - self.cfg.eta * g
        if self.audit is not None:
            fx = float(self.p.value(x))
            slack = fx - 3.0 / (8.0 * self.cfg.ell) * gn * gn - float(self.p.value(x_new))
            self.audit["steps"] += 1
            self.audit["min_slack"] = min(self.audit["min_slack"], slack)
            if slack < -DESCENT_AUDIT_TOL * (1.0 + abs(fx)):
                self.audit["violations"] += 1
        self.descent_steps += 1
        self.it += 1
        return x_new

    def idle(self, x, g):
        self.idle_steps += 1
        self.it += 1
        return x - self.cfg.eta * g

    def episode_callback(self, episode_id: int, *extra) -> Callable:
        start = self.it

        def cb(t, y, g):
            if (start + t) % self.stride == 0:
                self.rows.append((start + t, "episode", float(self.p.value(y)),
                                  float(np.linalg.norm(g)), episode_id) + extra)
        return cb

    def add_episode(self, rec: EpisodeRecord):
        self.episodes.append(rec)
        self.episode_steps += rec.steps
        self.it += rec.steps

    def finish(self, x, status: str, gn: float, *extra) -> RunTrace:
        f_final = float(self.p.value(x))
        if not self.rows or self.rows[-1][0] != self.it or self.rows[-1][1] != "end":
            self.rows.append((self.it, "end", f_final, float(gn), -1) + tuple(extra))
        return RunTrace(self.method, self.rows, self.episodes, self.descent_steps,
                        self.episode_steps, self.idle_steps, self.hvp_evals,
                        self.hvp_grad_charge, self.fevals, np.array(x, dtype=float), status,
                        self.f_initial, f_final, self.audit, self.extra)


def descent_step(p: Problem, x, eta: float, g=None):
    """One gradient step ``x - eta * grad f(x)``."""
    if g is None:
        g = p.grad(x)
    return x - eta * g


def sosp_check(p: Problem, x, cfg: PsdConfig, rng, *, grad_norm: float | None = None,
               k: int | None = None) -> tuple[bool, LanczosResult | None]:
    """Approximate second-order stationarity test.

    True iff ``||grad f(x)|| <= epsilon`` and the Lanczos estimate of the
    smallest Hessian eigenvalue is at least ``-3/4`` of the curvature scale.
    The gradient test short-circuits before any Hessian work.
    """
    if grad_norm is None:
        grad_norm = float(np.linalg.norm(p.grad(x)))
    if grad_norm > cfg.epsilon:
        return False, None
    c = cfg.curvature_threshold
    if k is None:
        k = cfg.lanczos_k or default_lanczos_k(p.dim, cfg.ell, c)
    res = lanczos_min_eig(lambda v: p.hvp(x, v), p.dim, k, 1e-10 * cfg.ell, rng)
    return res.lambda_min_est >= -c + c / 4.0, res


def escape_episode(p: Problem, x, cfg: PsdConfig, rng, *, grad: Callable | None = None,
                   max_steps: int | None = None, early_exit: bool = False,
                   callback: Callable | None = None, f_enter: float | None = None,
                   perturbation=None, probe_id: int = -1) -> tuple[np.ndarray, EpisodeRecord]:
    """Perturb ``x`` inside the ball of radius ``r`` and take ``T`` gradient steps.

    ``perturbation`` replaces the ball draw (used by the probe variant).
    ``callback(t, y, g)`` sees each iterate before its step. In quadratic mode
    the steps continue until the gradient has grown past ``epsilon`` and
    dropped back below it.
    """
    grad = p.grad if grad is None else grad
    if f_enter is None:
        f_enter = float(p.value(x))
    xi = sample_ball(cfg.r, p.dim, rng) if perturbation is None else np.asarray(perturbation)
    y = x + xi
    limit = max_steps if max_steps is not None else math.inf
    target = cfg.escape_decrease
    steps = 0
    if cfg.quadratic_mode:
        left = False
        while steps < limit:
            g = grad(y)
            _check_finite(g)
            gn = float(np.linalg.norm(g))
            if gn > cfg.epsilon:
                left = True
            elif left:
                break
            if callback is not None:
                callback(steps, y, g)
            y = y - cfg.eta * g
            steps += 1
    else:
        n = int(min(cfg.T, limit))
        for t in range(n):
            g = grad(y)
            _check_finite(g)
            if callback is not None:
                callback(t, y, g)
            y = y - cfg.eta * g
            steps += 1
            if early_exit and f_enter - float(p.value(y)) >= target:
                break
    f_exit = float(p.value(y))
    if not math.isfinite(f_exit):
        raise DivergenceError("non-finite function value after escape episode")
    dec = f_enter - f_exit
    rec = EpisodeRecord(f_enter, f_exit, dec, steps, dec >= target,
                        float(np.linalg.norm(xi)), probe_id)
    return y, rec


def run_psd(p: Problem, cfg: PsdConfig, x0, rng, *, escape: bool = True,
            max_iters: int | None = None, stride: int = 1, audit: bool = False,
            early_exit: bool = False) -> RunTrace:
    """Descend while the gradient is large; at small gradients verify or escape.

    ``escape=False`` gives plain gradient descent with the same stopping test:
    at a first-order point that fails the curvature check it keeps stepping
    and re-checks every episode-length steps.
    """
    x = np.array(x0, dtype=float)
    _check_finite(x, "starting point")
    tr = Tracker(p, cfg, "psd" if escape else "gd", x, stride=stride, max_iters=max_iters,
                 audit=audit)
    recheck = cfg.window
    next_check = 0
    while True:
        g = p.grad(x)
        _check_finite(g)
        gn = float(np.linalg.norm(g))
        small = gn <= cfg.epsilon
        if small and (escape or tr.it >= next_check):
            ok, lz = sosp_check(p, x, cfg, rng, grad_norm=gn)
            tr.hvp_evals += lz.iterations_used
            if ok:
                return tr.finish(x, SOSP, gn)
            if not escape:
                next_check = tr.it + recheck
            elif len(tr.episodes) >= cfg.episode_cap:
                return tr.finish(x, EPISODE_CAP, gn)
        if tr.remaining() <= 0:
            return tr.finish(x, BUDGET_EXHAUSTED, gn)
        if tr.due():
            tr.row("descent" if not small else ("escape" if escape else "idle"), x, gn)
        if not small:
            x = tr.descent(x, g, gn)
        elif not escape:
            x = tr.idle(x, g)
        else:
            eid = len(tr.episodes)
            x, rec = escape_episode(p, x, cfg, rng, max_steps=tr.remaining(),
                                    early_exit=early_exit, callback=tr.episode_callback(eid))
            rec = _with_start(rec, tr.it)
            tr.add_episode(rec)


def _with_start(rec: EpisodeRecord, it: int) -> EpisodeRecord:
    return EpisodeRecord(rec.f_enter, rec.f_exit, rec.decrease, rec.steps, rec.success,
                         rec.perturbation_norm, rec.probe_id, it)
