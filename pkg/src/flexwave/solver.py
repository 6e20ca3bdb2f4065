"""Steady traveling-wave solver: nonlocal residual, Newton iteration and
amplitude continuation of bifurcation branches.

The unknown vector is z = [c, a_2, ..., a_N] with the first cosine
coefficient a_1 held fixed as the continuation parameter.  The m-th residual
is the cos(m x) projection of

    sqrt((1+eta_x^2)(c^2 - 2 g eta - 2 D P_flex)) * (sinh(m eta) + cosh(m eta) tanh(m h)),

computed by trapezoidal quadrature on the oversampled collocation grid; in
infinite depth the kernel is exp(m eta).  The depth dependence is kept in the
bounded tanh form so large m*h never overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from .core import (
    IceModel,
    NonpositiveRadicand,
    PhysicalParams,
    SpectralProfile,
    TravelingWave,
    default_grid_size,
    eval_profile,
    grid_derivative,
    grid_points,
    p_flex_grid,
)

__all__ = [
    "NoConvergence",
    "SingularJacobian",
    "StepUnderflow",
    "SolverConfig",
    "BifurcationBranch",
    "Direction",
    "bifurcation_speed",
    "residual",
    "residual_sine_projections",
    "newton_solve",
    "continue_branch",
    "branch_direction",
]


class NoConvergence(RuntimeError):
    """Newton iteration failed to reach the residual tolerance."""


class SingularJacobian(RuntimeError):
    """The finite-difference Jacobian could not be inverted."""


class StepUnderflow(RuntimeError):
    """Continuation step shrank below 1e-9 without convergence.

    Signals a fold or breakdown (e.g. approaching limiting waves).  The
    ``branch`` attribute carries the points computed so far.
    """

    def __init__(self, message: str, branch: "BifurcationBranch"):
        super().__init__(message)
        self.branch = branch


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and discretization knobs for the steady solver."""

    residual_tol: float = 1e-10
    max_newton_iters: int = 50
    jacobian_step: float = 1e-7
    tail_threshold: float = 1e-12
    amplitude_step: float = 1e-3
    grid_oversample: int = 4
    n_modes: int = 32
    max_modes: int = 512

    def __post_init__(self):
        for name in ("residual_tol", "jacobian_step", "tail_threshold", "amplitude_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.grid_oversample < 4:
            raise ValueError("grid_oversample must be at least 4")
        if self.n_modes < 1 or self.max_modes < self.n_modes:
            raise ValueError("mode counts must satisfy 1 <= n_modes <= max_modes")


class Direction(Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass
class BifurcationBranch:
    """Ordered family of converged waves with strictly increasing a_1."""

    params: PhysicalParams
    model: IceModel
    points: list[TravelingWave]

    def amplitudes(self) -> np.ndarray:
        return np.array([w.a1 for w in self.points])

    def speeds(self) -> np.ndarray:
        return np.array([w.c for w in self.points])

    @property
    def direction(self) -> Direction:
        return branch_direction(self)


def bifurcation_speed(params: PhysicalParams) -> float:
    """Speed sqrt(tanh(h)(g + D)) at which the k=1 branch leaves flat water."""
    th = 1.0 if params.infinite_depth else math.tanh(params.h)
    return math.sqrt(th * (params.g + params.D))


@lru_cache(maxsize=32)
def _cos_table(n: int, m: int) -> np.ndarray:
    x = grid_points(m)
    return np.cos(np.outer(np.arange(1, n + 1), x))


@lru_cache(maxsize=32)
def _sin_table(n: int, m: int) -> np.ndarray:
    x = grid_points(m)
    return np.sin(np.outer(np.arange(1, n + 1), x))


def _integrand(z, a1, params, model, config):
    """Common factor W(x) * K_m(x) of every residual projection, as an (N, M) array."""
    n = z.size
    coeffs = np.concatenate(([a1], z[1:]))
    c = z[0]
    m_grid = default_grid_size(n, config.grid_oversample)
    eta = eval_profile(SpectralProfile(coeffs), m_grid)
    ex = grid_derivative(eta, 1)
    radicand = c**2 - 2.0 * params.g * eta - 2.0 * params.D * p_flex_grid(eta, model)
    if radicand.min() <= 0.0:
        raise NonpositiveRadicand(
            f"radicand reaches {radicand.min():.3e} at a1={a1:.3e}, c={c:.6g}"
        )
    weight = np.sqrt((1.0 + ex**2) * radicand)
    modes = np.arange(1, n + 1)
    marg = np.outer(modes, eta)
    if params.infinite_depth:
        kernel = np.exp(marg)
    else:
        kernel = np.sinh(marg) + np.cosh(marg) * np.tanh(modes * params.h)[:, None]
    return weight[None, :] * kernel, m_grid


def residual(z: np.ndarray, a1: float, params: PhysicalParams, model: IceModel,
             config: SolverConfig) -> np.ndarray:
    """Cosine projections F_m, m = 1..N, of the steady nonlocal equation.

    Flat water gives an identically zero residual at any speed; the residual
    vanishes to O(a1^2) at the bifurcation point seed.
    """
    z = np.asarray(z, dtype=float)
    wk, m_grid = _integrand(z, a1, params, model, config)
    cos_mx = _cos_table(z.size, m_grid)
    return (2.0 * np.pi / m_grid) * np.einsum("ni,ni->n", cos_mx, wk)


def residual_sine_projections(z: np.ndarray, a1: float, params: PhysicalParams,
                              model: IceModel, config: SolverConfig) -> np.ndarray:
    """Sine projections of the residual: identically zero for even profiles.

    Debug-mode symmetry check; the Newton system uses only the cosine parts.
    """
    z = np.asarray(z, dtype=float)
    wk, m_grid = _integrand(z, a1, params, model, config)
    sin_mx = _sin_table(z.size, m_grid)
    return (2.0 * np.pi / m_grid) * np.einsum("ni,ni->n", sin_mx, wk)


def newton_solve(z0: np.ndarray, a1: float, params: PhysicalParams, model: IceModel,
                 config: SolverConfig | None = None) -> TravelingWave:
    """Solve F(z) = 0 by Newton's method with a forward-difference Jacobian.

    Returns the converged wave; raises :class:`NoConvergence` after
    ``max_newton_iters``, :class:`SingularJacobian` if the linear solve
    fails, or propagates :class:`NonpositiveRadicand` from a bad iterate.
    """
    config = config or SolverConfig()
    z = np.asarray(z0, dtype=float).copy()
    n = z.size
    f = residual(z, a1, params, model, config)
    for _ in range(config.max_newton_iters):
        if np.max(np.abs(f)) <= config.residual_tol:
            break
        jac = np.empty((n, n))
        step = config.jacobian_step
        for j in range(n):
            zj = z.copy()
            zj[j] += step
            jac[:, j] = (residual(zj, a1, params, model, config) - f) / step
        try:
            dz = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc
        z = z - dz
        f = residual(z, a1, params, model, config)
    if np.max(np.abs(f)) > config.residual_tol:
        raise NoConvergence(
            f"|F|_inf = {np.max(np.abs(f)):.3e} after {config.max_newton_iters} iterations"
        )
    coeffs = np.concatenate(([a1], z[1:]))
    return TravelingWave(profile=SpectralProfile(coeffs), c=float(z[0]), params=params, model=model)


def _tail_ratio(wave: TravelingWave) -> float:
    coeffs = np.abs(wave.profile.coeffs)
    peak = coeffs.max()
    return coeffs[-1] / peak if peak > 0 else 0.0


def continue_branch(params: PhysicalParams, model: IceModel, a1_max: float,
                    config: SolverConfig | None = None,
                    start: TravelingWave | None = None) -> BifurcationBranch:
    """Continue the branch from the flat-water bifurcation point up to a1_max.

    Each converged point seeds the next guess with a larger a_1; the step
    halves on Newton failure and the mode count doubles whenever the last
    Fourier coefficient fails the relative tail test.  Passing a converged
    ``start`` wave resumes continuation from there instead of the
    bifurcation point.
    """
    if a1_max <= 0:
        raise ValueError("a1_max must be positive")
    config = config or SolverConfig()
    if start is not None:
        z = np.concatenate(([start.c], start.profile.coeffs[1:]))
        a1 = start.a1
    else:
        z = np.zeros(config.n_modes)
        z[0] = bifurcation_speed(params)
        a1 = 0.0
    branch = BifurcationBranch(params=params, model=model, points=[])

    step = min(config.amplitude_step, max(a1_max - a1, config.amplitude_step * 1e-6))
    while a1 < a1_max - 1e-15:
        a1_try = min(a1 + step, a1_max)
        guess = z
        try:
            wave = newton_solve(guess, a1_try, params, model, config)
            while _tail_ratio(wave) > config.tail_threshold and 2 * wave.profile.n_modes <= config.max_modes:
                n = 2 * wave.profile.n_modes
                guess = np.concatenate(([wave.c], wave.profile.coeffs[1:], np.zeros(n - wave.profile.n_modes)))
                wave = newton_solve(guess, a1_try, params, model, config)
        except (NoConvergence, SingularJacobian, NonpositiveRadicand):
            step *= 0.5
            if step < 1e-9:
                raise StepUnderflow(f"continuation stalled at a1 = {a1:.6g}", branch) from None
            continue
        branch.points.append(wave)
        a1 = a1_try
        z = np.concatenate(([wave.c], wave.profile.coeffs[1:]))
        step = min(step * 2.0, config.amplitude_step, max(a1_max - a1, 1e-15))
    return branch


def branch_direction(branch: BifurcationBranch, n_fit: int = 5) -> Direction:
    """Sign of the least-squares slope of c against a_1^2 near the bifurcation."""
    if len(branch.points) < 3:
        raise ValueError("need at least 3 small-amplitude points to orient a branch")
    pts = sorted(branch.points, key=lambda w: w.a1)[: max(3, min(n_fit, len(branch.points)))]
    a_sq = np.array([w.a1**2 for w in pts])
    c = np.array([w.c for w in pts])
    slope = np.polyfit(a_sq, c, 1)[0]
    return Direction.RIGHT if slope > 0 else Direction.LEFT
