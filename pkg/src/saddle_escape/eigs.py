"""Minimum-eigenvalue estimation by Lanczos, plus ball and sphere sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

K_CAP = 200


class LanczosBreakdown(RuntimeError):
    """The starting vector had zero norm twice in a row."""


@dataclass(frozen=True)
class LanczosResult:
    lambda_min_est: float
    direction: np.ndarray
    iterations_used: int
    terminated_early: bool
    alphas: tuple = ()
    betas: tuple = ()


def default_lanczos_k(d: int, ell: float, gamma: float) -> int:
    """``min(d, ceil(10 log(d) sqrt(ell/gamma)), 200)``, at least one."""
    if d <= 1:
        return 1
    k = math.ceil(10.0 * math.log(d) * math.sqrt(ell / gamma))
    return max(1, min(d, k, K_CAP))


def sturm_count(alpha, beta, x: float) -> int:
    """Number of eigenvalues of the tridiagonal (alpha, beta) strictly below ``x``."""
    count = 0
    q = 1.0
    tiny = 1e-300
    for i, a in enumerate(alpha):
        if i == 0:
            q = a - x
        else:
            q = (a - x) - beta[i - 1] * beta[i - 1] / q
        if q == 0.0:
            q = -tiny
        if q < 0.0:
            count += 1
    return count


def tridiag_min_eig(alpha, beta, tol: float = 1e-12) -> float:
    """Smallest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection."""
    alpha = [float(a) for a in alpha]
    beta = [abs(float(b)) for b in beta]
    n = len(alpha)
    if n == 1:
        return alpha[0]
    radius = [0.0] * n
    for i, b in enumerate(beta):
        radius[i] += b
        radius[i + 1] += b
    lo = min(a - r for a, r in zip(alpha, radius))
    hi = max(a + r for a, r in zip(alpha, radius))
    for _ in range(400):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if sturm_count(alpha, beta, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _tridiag_eigvec(alpha, beta, lam: float) -> np.ndarray:
    n = len(alpha)
    if n == 1:
        return np.ones(1)
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(beta, dtype=float)
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    shift = lam - 1e-10 * scale
    ab = np.zeros((3, n))
    ab[0, 1:] = b
    ab[1] = a - shift
    ab[2, :-1] = b
    y = np.ones(n) / math.sqrt(n)
    for _ in range(3):
        y = solve_banded((1, 1), ab, y)
        y /= np.linalg.norm(y)
    return y


def lanczos_min_eig(hvp: Callable[[np.ndarray], np.ndarray], d: int, k: int,
                    eps_term: float, seed=None) -> LanczosResult:
    """Estimate the smallest eigenvalue of a symmetric operator from ``k`` products.

    Plain three-term recurrence without re-orthogonalization; stops early when
    the next off-diagonal falls below ``eps_term``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if eps_term <= 0:
        raise ValueError("eps_term must be positive")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(d)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        v = rng.standard_normal(d)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            raise LanczosBreakdown("zero-norm starting vector")
    v = v / nv
    v_prev = np.zeros(d)
    beta_j = 0.0
    basis = [v]
    alphas: list[float] = []
    betas: list[float] = []
    early = False
    for j in range(k):
        w = hvp(v)
        a = float(v @ w)
        w = w - a * v - beta_j * v_prev
        alphas.append(a)
        beta_next = float(np.linalg.norm(w))
        if beta_next < eps_term:
            early = True
            break
        if j == k - 1:
            break
        betas.append(beta_next)
        v_prev, v = v, w / beta_next
        beta_j = beta_next
        basis.append(v)

    lam = tridiag_min_eig(alphas, betas)
    y = _tridiag_eigvec(alphas, betas, lam)
    direction = np.asarray(basis[: len(alphas)]).T @ y
    direction /= np.linalg.norm(direction)
    return LanczosResult(lam, direction, len(alphas), early, tuple(alphas), tuple(betas))


def sample_sphere(d: int, rng, size: int | None = None) -> np.ndarray:
    """Uniform draw(s) on the unit sphere in ``R^d``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if size is None:
        g = rng.standard_normal(d)
        return g / np.linalg.norm(g)
    g = rng.standard_normal((size, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_ball(r: float, d: int, rng, size: int | None = None) -> np.ndarray:
    """Uniform draw(s) on the solid ball of radius ``r``: direction times ``r U^(1/d)``."""
    if r <= 0:
        raise ValueError("r must be positive")
    direction = sample_sphere(d, rng, size)
    if size is None:
        return r * rng.random() ** (1.0 / d) * direction
    return r * (rng.random(size) ** (1.0 / d))[:, None] * direction
