"""Perturbed gradient descent baseline sharing the PSD schedule."""

from __future__ import annotations

import numpy as np

from .eigs import sample_ball
from .oracle import Problem
from .psd import BUDGET_EXHAUSTED, SOSP, EpisodeRecord, PsdConfig, RunTrace, Tracker, _check_finite


def run_pgd(p: Problem, cfg: PsdConfig, x0, rng, *, max_iters: int | None = None,
            stride: int = 1, audit: bool = False) -> RunTrace:
    """Perturb at small gradients, at most once per window of ``T`` steps.

    There is no curvature test: the run returns the pre-perturbation point
    once a full window after a perturbation fails to lower ``f`` by
    ``eps^2 / (128 ell)``.
    """
    x = np.array(x0, dtype=float)
    tr = Tracker(p, cfg, "pgd", x, stride=stride, max_iters=max_iters, audit=audit)
    window = cfg.window
    t_noise = None
    x_noise = f_noise = None
    while True:
        if t_noise is not None and tr.it - t_noise == window:
            f_now = float(p.value(x))
            dec = f_noise - f_now
            tr.episodes.append(EpisodeRecord(f_noise, f_now, dec, window,
                                             dec >= cfg.escape_decrease,
                                             float(np.linalg.norm(xi)), -1, t_noise))
            tr.episode_steps += window
            tr.descent_steps -= window
            if dec < cfg.escape_decrease:
                gn = float(np.linalg.norm(p.grad(x_noise)))
                return tr.finish(x_noise, SOSP, gn)
        g = p.grad(x)
        _check_finite(g)
        gn = float(np.linalg.norm(g))
        if gn <= cfg.epsilon and (t_noise is None or tr.it - t_noise > window):
            x_noise, f_noise, t_noise = x.copy(), float(p.value(x)), tr.it
            xi = sample_ball(cfg.r, p.dim, rng)
            x = x + xi
            g = p.grad(x)
            _check_finite(g)
            gn = float(np.linalg.norm(g))
        if tr.remaining() <= 0:
            return tr.finish(x, BUDGET_EXHAUSTED, gn)
        if tr.due():
            tr.row("descent", x, gn)
        x = tr.descent(x, g, gn)
