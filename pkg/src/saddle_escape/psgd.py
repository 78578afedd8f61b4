"""Stochastic variant: mini-batch sizing and the noise-aware escape trigger."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .oracle import NoisyGradModel, stochastic_grad
from .psd import (BUDGET_EXHAUSTED, EPISODE_CAP, SOSP, PsdConfig, RunTrace, Tracker,
                  _check_finite, _with_start, escape_episode, snap_ceil, sosp_check)

# 2 log(2 / DELTA_FP) = 4, which gives batch sizes 1, 4, 40, 400 at sigma^2/eps^2 = 0, 1, 10, 100.
DELTA_FP = 2.0 * math.exp(-2.0)

DESCEND = "descend"
MAYBE_ESCAPE = "maybe_escape"


@dataclass(frozen=True)
class PsgdConfig:
    base: PsdConfig
    sigma2: float
    delta_fp: float
    B: int
    trigger_threshold: float


def batch_size(sigma2: float, epsilon: float, delta_fp: float = DELTA_FP) -> int:
    """``max(1, ceil(2 sigma^2 / eps^2 * log(2 / delta_fp)))``."""
    if sigma2 < 0 or epsilon <= 0 or not 0 < delta_fp < 1:
        raise ValueError("need sigma2 >= 0, epsilon > 0, delta_fp in (0, 1)")
    return max(1, snap_ceil(2.0 * sigma2 / epsilon**2 * math.log(2.0 / delta_fp)))


def trigger_threshold(epsilon: float, sigma2: float, B: int) -> float:
    return epsilon * math.sqrt(1.0 + 2.0 * sigma2 / (B * epsilon**2))


def make_psgd_config(base: PsdConfig, sigma2: float, delta_fp: float = DELTA_FP) -> PsgdConfig:
    B = batch_size(sigma2, base.epsilon, delta_fp)
    return PsgdConfig(base, sigma2, delta_fp, B, trigger_threshold(base.epsilon, sigma2, B))


def noise_aware_trigger(g_hat, cfg: PsgdConfig) -> str:
    """``"descend"`` when the batch gradient clears the noise-inflated threshold."""
    return DESCEND if float(np.linalg.norm(g_hat)) > cfg.trigger_threshold else MAYBE_ESCAPE


def run_psgd(model: NoisyGradModel, cfg: PsgdConfig, x0, rng, *, exact_episodes: bool = False,
             max_iters: int | None = None, stride: int = 1, audit: bool = False) -> RunTrace:
    """Mini-batch descent with the noise-aware trigger.

    Below the trigger the candidate is verified with the exact oracles; if it
    is not an SOSP an escape episode runs, with batch gradients unless
    ``exact_episodes``. Each batch counts as one iteration.
    """
    p, base = model.base, cfg.base
    x = np.array(x0, dtype=float)
    tr = Tracker(p, base, "psgd", x, stride=stride, max_iters=max_iters, audit=audit)
    tr.extra.update(trace_columns=("batch_size", "trigger_threshold", "triggered"),
                    batch_size=cfg.B, trigger_threshold=cfg.trigger_threshold)
    cols = (cfg.B, cfg.trigger_threshold)

    def noisy(y):
        return stochastic_grad(model, y, cfg.B)

    ep_grad = p.grad if exact_episodes else noisy
    while True:
        g = noisy(x)
        _check_finite(g)
        gn = float(np.linalg.norm(g))
        triggered = noise_aware_trigger(g, cfg) == MAYBE_ESCAPE
        if triggered:
            ok, lz = sosp_check(p, x, base, rng)
            if lz is not None:
                tr.hvp_evals += lz.iterations_used
            if ok:
                return tr.finish(x, SOSP, gn, *cols, 1)
            if len(tr.episodes) >= base.episode_cap:
                return tr.finish(x, EPISODE_CAP, gn, *cols, 1)
        if tr.remaining() <= 0:
            return tr.finish(x, BUDGET_EXHAUSTED, gn, *cols, int(triggered))
        if tr.due():
            tr.row("escape" if triggered else "descent", x, gn, -1, None, *cols, int(triggered))
        if not triggered:
            x = tr.descent(x, g, gn)
            continue
        eid = len(tr.episodes)
        x, rec = escape_episode(p, x, base, rng, grad=ep_grad, max_steps=tr.remaining(),
                                callback=tr.episode_callback(eid, *cols, 0))
        tr.add_episode(_with_start(rec, tr.it))
