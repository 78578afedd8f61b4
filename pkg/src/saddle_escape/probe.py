"""Finite-difference negative-curvature probing (the PSD-Probe variant)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigs import sample_sphere
from .oracle import Problem
from .psd import (BUDGET_EXHAUSTED, EPISODE_CAP, SOSP, PsdConfig, RunTrace, Tracker,
                  _check_finite, _with_start, escape_episode)


@dataclass(frozen=True)
class ProbeParams:
    h: float
    m: int
    alpha: float
    threshold: float

    def __post_init__(self):
        if self.h <= 0 or self.alpha <= 0 or self.m < 1:
            raise ValueError("need h > 0, alpha > 0, m >= 1")


@dataclass(frozen=True)
class Detection:
    detected: bool
    index: int
    q_min: float
    q: tuple


def probe_params(epsilon: float, rho: float, delta: float, d: int, *, strict: bool = False,
                 ell: float | None = None) -> ProbeParams:
    """Probe radius ``sqrt(eps/rho)``, ``ceil(16 log(16d/delta))`` probes, step ``radius/8``.

    The detection cutoff defaults to ``-(2/3) sqrt(rho eps)``, the level an
    exact eigenvector is guaranteed to reach; ``strict=True`` uses
    ``-sqrt(rho eps)``. With ``rho = 0`` the radius is ``sqrt(eps)`` (any
    radius is exact on a quadratic) and the step ``eps / ell``.
    """
    m = math.ceil(16.0 * math.log(16.0 * d / delta))
    if rho == 0:
        h = math.sqrt(epsilon)
        alpha = epsilon / (ell or 1.0)
        gamma = math.sqrt(epsilon)
    else:
        h = math.sqrt(epsilon / rho)
        alpha = h / 8.0
        gamma = math.sqrt(rho * epsilon)
    thr = -gamma if strict else -2.0 * gamma / 3.0
    return ProbeParams(h, max(1, m), alpha, thr)


def central_diff_curvature(p: Problem, x, v, h: float, fx: float | None = None) -> float:
    """Second difference ``(f(x+hv) - 2 f(x) + f(x-hv)) / h^2`` along unit ``v``."""
    if h <= 0:
        raise ValueError("h must be positive")
    if fx is None:
        fx = p.value(x)
    return (p.value(x + h * v) - 2.0 * fx + p.value(x - h * v)) / (h * h)


def psd_probe_step(p: Problem, x, params: ProbeParams, rng, *, directions=None):
    """Probe ``m`` random directions; step ``alpha`` along the most negative one if it clears the cutoff.

    Returns the new point and a :class:`Detection`. ``directions`` overrides
    the sphere draws (rows are unit vectors).
    """
    if directions is None:
        directions = [sample_sphere(p.dim, rng) for _ in range(params.m)]
    fx = p.value(x)
    q = [central_diff_curvature(p, x, v, params.h, fx) for v in directions]
    i = int(np.argmin(q))  # argmin keeps the lowest index on ties
    found = q[i] <= params.threshold
    report = Detection(bool(found), i, float(q[i]), tuple(float(s) for s in q))
    if found:
        return x + params.alpha * np.asarray(directions[i]), report
    return np.array(x, dtype=float), report


def run_psd_probe(p: Problem, cfg: PsdConfig, probe: ProbeParams, x0, rng, *,
                  max_iters: int | None = None, stride: int = 1, audit: bool = False) -> RunTrace:
    """Descent loop whose saddle test and escape direction come from probing.

    After a detection the iterate moves ``alpha`` along the detected
    direction, then runs the usual ``T`` gradient steps without a ball draw.
    No detection ends the run as an SOSP.
    """
    x = np.array(x0, dtype=float)
    tr = Tracker(p, cfg, "psd_probe", x, stride=stride, max_iters=max_iters, audit=audit)
    tr.extra["detections"] = []
    while True:
        g = p.grad(x)
        _check_finite(g)
        gn = float(np.linalg.norm(g))
        small = gn <= cfg.epsilon
        if small:
            f_enter = float(p.value(x))
            x_step, rep = psd_probe_step(p, x, probe, rng)
            tr.fevals += 2 * len(rep.q) + 1
            tr.extra["detections"].append(rep)
            if not rep.detected:
                return tr.finish(x, SOSP, gn)
            if len(tr.episodes) >= cfg.episode_cap:
                return tr.finish(x, EPISODE_CAP, gn)
        if tr.remaining() <= 0:
            return tr.finish(x, BUDGET_EXHAUSTED, gn)
        if tr.due():
            tr.row("escape" if small else "descent", x, gn)
        if not small:
            x = tr.descent(x, g, gn)
            continue
        eid = len(tr.episodes)
        x, rec = escape_episode(p, x, cfg, rng, max_steps=tr.remaining(),
                                callback=tr.episode_callback(eid), f_enter=f_enter,
                                perturbation=x_step - x, probe_id=rep.index)
        tr.add_episode(_with_start(rec, tr.it))
