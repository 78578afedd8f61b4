"""Objective oracles: the synthetic test families and a noisy-gradient wrapper.

Every family is returned as a :class:`Problem`, a bundle of value, gradient
and Hessian-vector-product callables plus the smoothness constants the
optimizers need (``ell`` for the gradient, ``rho`` for the Hessian).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray

Vector = NDArray[np.float64]

# Box |x_i| <= BOX encloses the standard starts and the sublevel sets we run on.
BOX = 1.5
DEFAULT_COUPLING = 0.1
INIT_RADIUS = 1e-3

FAMILIES = ("separable_quartic", "coupled_quartic", "rosenbrock", "random_quadratic")
ALIASES = {"quartic": "separable_quartic", "coupled": "coupled_quartic", "random": "random_quadratic"}


@dataclass(frozen=True)
class Problem:
    """Black-box objective with first- and second-order oracles.

    ``hvp`` may be omitted, in which case a central-difference fallback on the
    gradient is installed and ``hvp_exact`` is set to ``False``.
    """

    dim: int
    value: Callable[[Vector], float]
    grad: Callable[[Vector], Vector]
    hvp: Callable[[Vector, Vector], Vector] | None
    ell: float
    rho: float
    delta_f: float = 0.0
    name: str = "custom"
    f_lower: float | None = None
    hvp_exact: bool = True
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.ell <= 0 or self.rho < 0 or self.delta_f < 0:
            raise ValueError("need ell > 0, rho >= 0, delta_f >= 0")
        if self.hvp is None:
            object.__setattr__(self, "hvp", lambda x, v: hvp_finite_difference(self, x, v))
            object.__setattr__(self, "hvp_exact", False)

    def replace(self, **changes) -> "Problem":
        return dataclasses.replace(self, **changes)

    def with_start(self, x0: Vector) -> "Problem":
        """Copy with ``delta_f`` set to ``f(x0) - f_lower`` when the infimum is known."""
        if self.f_lower is None or not np.isfinite(self.f_lower):
            return self
        return self.replace(delta_f=max(0.0, float(self.value(x0)) - self.f_lower))

    def hessian(self, x: Vector) -> NDArray[np.float64]:
        """Dense Hessian assembled column by column from the HVP oracle."""
        eye = np.eye(self.dim)
        cols = [self.hvp(x, eye[i]) for i in range(self.dim)]
        return np.column_stack(cols)


@dataclass
class NoisyGradModel:
    """Stochastic first-order oracle ``grad f(x) + zeta`` with ``E||zeta||^2 = sigma2``."""

    base: Problem
    sigma2: float
    seed: int | None = None
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")
        self.rng = np.random.default_rng(self.seed)

    def clone(self, seed) -> "NoisyGradModel":
        return NoisyGradModel(self.base, self.sigma2, seed)


def stochastic_grad(model: NoisyGradModel, x: Vector, batch: int) -> Vector:
    """Mini-batch gradient: the mean of ``batch`` independent noisy samples.

    Each sample's noise is isotropic Gaussian with per-coordinate variance
    ``sigma2 / d``; the samples are drawn in sequence from the model's stream.
    """
    if batch < 1:
        raise ValueError("batch must be >= 1")
    g = model.base.grad(x)
    if model.sigma2 == 0:
        return np.array(g, dtype=float)
    d = model.base.dim
    draws = model.rng.standard_normal((batch, d))
    return g + np.sqrt(model.sigma2 / d) * draws.mean(axis=0)


def hvp_finite_difference(p: Problem, x: Vector, v: Vector, h: float | None = None) -> Vector:
    """Symmetric-difference Hessian-vector product along ``v``.

    Returns the zero vector for ``v = 0``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    vn = float(np.linalg.norm(v))
    if vn == 0.0:
        return np.zeros_like(x)
    if h is None:
        h = 1e-5 * (1.0 + float(np.linalg.norm(x)))
    if h <= 0:
        raise ValueError("h must be positive")
    u = v / vn
    return (p.grad(x + h * u) - p.grad(x - h * u)) / (2.0 * h) * vn


# ---------------------------------------------------------------- families

def make_separable_quartic(d: int) -> Problem:
    if d < 1:
        raise ValueError("separable quartic needs d >= 1")

    def value(x):
        x2 = x * x
        return float(np.sum(x2 * x2 - x2))

    def grad(x):
        return 4.0 * x**3 - 2.0 * x

    def hvp(x, v):
        return (12.0 * x * x - 2.0) * v

    ell = 12.0 * BOX**2 - 2.0
    rho = 24.0 * BOX
    return Problem(d, value, grad, hvp, ell=ell, rho=rho, delta_f=d / 4.0,
                   name="separable_quartic", f_lower=-d / 4.0)


def make_coupled_quartic(d: int, coupling: float = DEFAULT_COUPLING) -> Problem:
    if d < 2:
        raise ValueError("coupled quartic needs d >= 2")
    c = float(coupling)

    def value(x):
        x2 = x * x
        base = float(np.sum(x2 * x2 - x2))
        if c == 0.0:
            return base
        s = float(np.sum(x))
        return base + c * 0.5 * (s * s - float(np.sum(x2)))

    def grad(x):
        g = 4.0 * x**3 - 2.0 * x
        if c == 0.0:
            return g
        return g + c * (np.sum(x) - x)

    def hvp(x, v):
        hv = (12.0 * x * x - 2.0) * v
        if c == 0.0:
            return hv
        return hv + c * (np.sum(v) - v)

    # coupling matrix c(11^T - I) has eigenvalues c(d-1) and -c
    lam_c = (c * (d - 1), -c)
    ell = 12.0 * BOX**2 - 2.0 + max(abs(lam_c[0]), abs(lam_c[1]))
    b = 1.0 - min(lam_c) / 2.0
    f_lower = -d * b * b / 4.0
    return Problem(d, value, grad, hvp, ell=ell, rho=24.0 * BOX, delta_f=-f_lower,
                   name="coupled_quartic", f_lower=f_lower, info={"coupling": c})


def make_rosenbrock(d: int) -> Problem:
    if d < 2:
        raise ValueError("rosenbrock needs d >= 2")

    def value(x):
        a = x[1:] - x[:-1] ** 2
        b = 1.0 - x[:-1]
        return float(np.sum(100.0 * a * a + b * b))

    def grad(x):
        a = x[1:] - x[:-1] ** 2
        g = np.zeros_like(x)
        g[:-1] = -400.0 * x[:-1] * a - 2.0 * (1.0 - x[:-1])
        g[1:] += 200.0 * a
        return g

    def hvp(x, v):
        diag = np.zeros_like(x)
        diag[:-1] = 1200.0 * x[:-1] ** 2 - 400.0 * x[1:] + 2.0
        diag[1:] += 200.0
        off = -400.0 * x[:-1]
        hv = diag * v
        hv[:-1] += off * v[1:]
        hv[1:] += off * v[:-1]
        return hv

    # Gershgorin on the box: diagonal <= 1200B^2 + 400B + 202, two off-diagonals <= 400B each.
    ell = 1200.0 * BOX**2 + 400.0 * BOX + 202.0 + 800.0 * BOX
    # Row sums of dH: |2400 x_i| + 3 * 400, against ||dx||_inf <= ||dx||_2.
    rho = 2400.0 * BOX + 1200.0
    x0 = np.ones(d)
    x0[0] = -1.2
    return Problem(d, value, grad, hvp, ell=ell, rho=rho, delta_f=value(x0),
                   name="rosenbrock", f_lower=0.0)


def random_orthogonal(d: int, rng: np.random.Generator) -> NDArray[np.float64]:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def make_random_quadratic(d: int, eigenvalues, seed=0, b=None) -> Problem:
    """``f(x) = x^T A x / 2 - b^T x`` with ``A = Q^T diag(eigenvalues) Q``.

    ``b=None`` draws a seeded Gaussian ``b``; a scalar fills it.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.shape != (d,):
        raise ValueError(f"expected {d} eigenvalues, got shape {lam.shape}")
    if np.any(np.diff(lam) < 0):
        raise ValueError("eigenvalues must be sorted ascending")
    rng = np.random.default_rng(seed)
    q = random_orthogonal(d, rng)
    a = q.T @ (lam[:, None] * q)
    a = 0.5 * (a + a.T)
    if b is None:
        bvec = rng.standard_normal(d)
    else:
        bvec = np.broadcast_to(np.asarray(b, dtype=float), (d,)).copy()

    def value(x):
        return float(0.5 * x @ (a @ x) - bvec @ x)

    def grad(x):
        return a @ x - bvec

    def hvp(x, v):
        return a @ v

    if lam[0] > 0:
        f_lower = float(-0.5 * bvec @ np.linalg.solve(a, bvec))
    elif lam[0] == 0 and not np.any(bvec):
        f_lower = 0.0
    else:
        f_lower = None
    ell = float(np.max(np.abs(lam)))
    if ell == 0:
        ell = 1.0
    return Problem(d, value, grad, hvp, ell=ell, rho=0.0, delta_f=0.0,
                   name="random_quadratic", f_lower=f_lower,
                   info={"lambda_min": float(lam[0]), "A": a, "b": bvec, "Q": q})


def make_problem(family: str, d: int, **params) -> Problem:
    """Build a family by its configuration name."""
    family = ALIASES.get(family, family)
    if family == "separable_quartic":
        return make_separable_quartic(d)
    if family == "coupled_quartic":
        return make_coupled_quartic(d, params.get("coupling", DEFAULT_COUPLING))
    if family == "rosenbrock":
        return make_rosenbrock(d)
    if family == "random_quadratic":
        eig = params.get("eigenvalues")
        if eig is None:
            lo, hi = params.get("eig_min", 1.0), params.get("eig_max", 10.0)
            eig = np.linspace(lo, hi, d)
        return make_random_quadratic(d, eig, params.get("seed", 0), params.get("b"))
    raise ValueError(f"unknown problem family {family!r}")


# ------------------------------------------------------ standard starts

def find_saddle(p: Problem, x: Vector, tol: float = 1e-12, max_iter: int = 100) -> Vector:
    """Newton iteration on the gradient; returns the stationary point it lands on."""
    x = np.array(x, dtype=float)
    for _ in range(max_iter):
        g = p.grad(x)
        if np.linalg.norm(g) <= tol:
            break
        x = x - np.linalg.solve(p.hessian(x), g)
    return x


def rosenbrock_saddle(d: int) -> Vector:
    """Index-1 saddle of Rosenbrock-d reached by Newton from a fixed start."""
    p = make_rosenbrock(d)
    start = np.full(d, 0.01)
    start[: min(3, d)] = [-0.5, 0.3, 0.1][: min(3, d)]
    s = find_saddle(p, start)
    lam = np.linalg.eigvalsh(p.hessian(s))
    if np.linalg.norm(p.grad(s)) > 1e-8 or lam[0] >= 0:
        raise ValueError(f"no strict saddle found for rosenbrock d={d}")
    return s


def standard_init(p: Problem, rng: np.random.Generator, mode: str = "saddle") -> Vector:
    """Seeded starting point for a family.

    Quartics: a point at distance ``INIT_RADIUS`` from the origin with one
    coordinate exactly zero, so plain gradient descent is drawn to a strict
    saddle. Rosenbrock: the saddle plus an offset of the same size in the
    saddle's stable subspace (``mode="classic"`` jitters (-1.2, 1, ..., 1)).
    Random quadratic: a point on the unit sphere.
    """
    d = p.dim
    if p.name in ("separable_quartic", "coupled_quartic"):
        x = rng.standard_normal(d)
        if d > 1:
            x[rng.integers(d)] = 0.0
        return INIT_RADIUS * x / np.linalg.norm(x)
    if p.name == "rosenbrock":
        if mode == "classic":
            x = np.ones(d)
            x[0] = -1.2
            return x + INIT_RADIUS * _unit(rng.standard_normal(d))
        s = rosenbrock_saddle(d)
        _, vecs = np.linalg.eigh(p.hessian(s))
        u = vecs[:, 0]
        o = rng.standard_normal(d)
        o -= (o @ u) * u
        return s + INIT_RADIUS * _unit(o)
    return _unit(rng.standard_normal(d))


def _unit(v: Vector) -> Vector:
    return v / np.linalg.norm(v)
