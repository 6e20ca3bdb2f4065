"""Domain types and pseudospectral machinery for periodic wave profiles.

Profiles are even, zero-mean and 2*pi-periodic, represented by their cosine
coefficients ``a_1..a_N``.  All pointwise operations (ice pressure, surface
velocity) are evaluated on a uniform collocation grid ``x_i = 2*pi*i/M`` with
derivatives taken in Fourier space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "INFINITE_DEPTH",
    "NonpositiveRadicand",
    "PhysicalParams",
    "IceModel",
    "SpectralProfile",
    "TravelingWave",
    "GridFunction",
    "grid_points",
    "default_grid_size",
    "depth_factor",
    "eval_profile",
    "spectral_derivative",
    "grid_derivative",
    "profile_coefficients",
    "p_flex",
    "p_flex_grid",
    "qx_from_profile",
    "qx_on_grid",
]

#: Distinguished depth value; tanh(k*h) factors become sign(k) exactly.
INFINITE_DEPTH = math.inf

#: Grid values of a 2*pi-periodic function sampled at x_i = 2*pi*i/M.
GridFunction = np.ndarray


class NonpositiveRadicand(ArithmeticError):
    """The Bernoulli radicand c^2 - 2*g*eta - 2*D*P_flex is not positive.

    Signals that a wave (or Newton iterate) lies outside the admissible set,
    e.g. near breaking or after an overly large continuation step.
    """


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensionless physical parameters: gravity, depth, flexural rigidity.

    ``D`` is the flexural rigidity divided by the fluid density.  Infinite
    depth is encoded by ``h = INFINITE_DEPTH`` (``math.inf``), never by a
    large finite number.
    """

    g: float = 1.0
    h: float = INFINITE_DEPTH
    D: float = 0.0

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")
        if not self.h > 0:
            raise ValueError(f"h must be positive or infinite, got {self.h}")
        if self.D < 0:
            raise ValueError(f"D must be nonnegative, got {self.D}")

    @property
    def infinite_depth(self) -> bool:
        return math.isinf(self.h)


class IceModel(Enum):
    """Surface-pressure model for the ice sheet."""

    LINEAR_BIHARMONIC = "linear"
    NONLINEAR_COSSERAT = "nonlinear"


@dataclass(frozen=True)
class SpectralProfile:
    """Even zero-mean profile eta(x) = sum_{j=1..N} a_j cos(j x)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a nonempty 1-d array")
        object.__setattr__(self, "coeffs", c)
        self.coeffs.flags.writeable = False

    @property
    def n_modes(self) -> int:
        return self.coeffs.size

    def padded(self, n_modes: int) -> "SpectralProfile":
        """Profile extended with zero coefficients up to ``n_modes``."""
        if n_modes < self.n_modes:
            raise ValueError("cannot truncate a profile by padding")
        out = np.zeros(n_modes)
        out[: self.n_modes] = self.coeffs
        return SpectralProfile(out)


@dataclass(frozen=True)
class TravelingWave:
    """One point on a bifurcation branch: profile plus frame speed c."""

    profile: SpectralProfile
    c: float
    params: PhysicalParams
    model: IceModel

    @property
    def a1(self) -> float:
        return float(self.profile.coeffs[0])


def grid_points(m: int) -> np.ndarray:
    """Collocation nodes x_i = 2*pi*i/M, i = 0..M-1."""
    return 2.0 * np.pi * np.arange(m) / m


def default_grid_size(n_modes: int, oversample: int = 4) -> int:
    """Next power of two >= oversample*N, at least 64.

    The Toland operator is a rational nonlinearity, so exact dealiasing is
    impossible; 4x oversampling keeps aliasing below truncation error for
    the smooth profiles handled here.
    """
    target = max(oversample * n_modes, 64)
    return 1 << (target - 1).bit_length()


def depth_factor(k, h: float):
    """tanh(k*h), evaluated as sign(k) when the depth is infinite."""
    k = np.asarray(k, dtype=float)
    if math.isinf(h):
        return np.sign(k)
    return np.tanh(k * h)


def eval_profile(profile: SpectralProfile, m: int) -> GridFunction:
    """Sample eta(x) = sum a_j cos(j x) on the M-point grid.

    Exact to rounding for band-limited input; requires M >= 2N+2 so that no
    mode aliases.
    """
    n = profile.n_modes
    if m < 2 * n + 2:
        raise ValueError(f"grid size {m} aliases a profile with {n} modes; need M >= {2 * n + 2}")
    spec = np.zeros(m // 2 + 1, dtype=complex)
    spec[1 : n + 1] = 0.5 * m * profile.coeffs
    return np.fft.irfft(spec, n=m)


def grid_derivative(values: GridFunction, order: int) -> GridFunction:
    """Spectral derivative of grid samples: mode j multiplied by (i*j)^order."""
    m = values.size
    spec = np.fft.rfft(values)
    j = np.arange(m // 2 + 1)
    spec *= (1j * j) ** order
    if order % 2 == 1 and m % 2 == 0:
        spec[-1] = 0.0  # Nyquist mode has no well-defined odd derivative
    return np.fft.irfft(spec, n=m)


def spectral_derivative(profile: SpectralProfile, order: int, m: int) -> GridFunction:
    """Samples of d^n eta/dx^n via Fourier multipliers (i*j)^n.

    Orders up to 5 are supported; nothing higher is needed by the steady
    residual or the linearized flexural operator.
    """
    if order < 0 or order > 5:
        raise ValueError(f"derivative order must be in 0..5, got {order}")
    return grid_derivative(eval_profile(profile, m), order)


def profile_coefficients(values: GridFunction, n_modes: int) -> np.ndarray:
    """Cosine coefficients a_1..a_N recovered from grid samples (round trip)."""
    m = values.size
    spec = np.fft.rfft(values)
    return 2.0 * spec[1 : n_modes + 1].real / m


def p_flex_grid(eta: GridFunction, model: IceModel) -> GridFunction:
    """Ice-pressure operator applied to grid samples of any periodic profile.

    Linear model: eta_4x.  Nonlinear (Toland/Cosserat) model:

        d^2/dx^2 [ eta_xx / (1+eta_x^2)^(5/2) ]
        + (5/2) d/dx [ eta_xx^2 eta_x / (1+eta_x^2)^(7/2) ]

    evaluated pseudospectrally: derivatives in Fourier space, algebra
    pointwise, outer derivatives back in Fourier space.
    """
    if model is IceModel.LINEAR_BIHARMONIC:
        return grid_derivative(eta, 4)
    ex = grid_derivative(eta, 1)
    exx = grid_derivative(eta, 2)
    r = 1.0 + ex**2
    bending = grid_derivative(exx * r ** (-2.5), 2)
    stretch = 2.5 * grid_derivative(exx**2 * ex * r ** (-3.5), 1)
    return bending + stretch


def p_flex(profile: SpectralProfile, model: IceModel, m: int) -> GridFunction:
    """Ice pressure of a cosine profile on the M-point grid."""
    if m < 4 * profile.n_modes:
        raise ValueError(f"grid size {m} too small for p_flex; need M >= 4N = {4 * profile.n_modes}")
    return p_flex_grid(eval_profile(profile, m), model)


def qx_on_grid(eta: GridFunction, c: float, params: PhysicalParams, model: IceModel) -> GridFunction:
    """q_x = c - sqrt((1+eta_x^2)(c^2 - 2 g eta - 2 D P_flex)) on the grid.

    A vanishing radicand is tolerated only where it is identically zero
    (flat water at rest); any negative value puts the wave outside the
    admissible set.
    """
    ex = grid_derivative(eta, 1)
    radicand = c**2 - 2.0 * params.g * eta - 2.0 * params.D * p_flex_grid(eta, model)
    low = radicand.min()
    if low < 0.0 or (low == 0.0 and radicand.max() > 0.0):
        raise NonpositiveRadicand(
            f"c^2 - 2 g eta - 2 D P_flex reaches {low:.3e} (c={c:.6g})"
        )
    return c - np.sqrt((1.0 + ex**2) * radicand)


def qx_from_profile(wave: TravelingWave, m: int) -> GridFunction:
    """Surface velocity-potential derivative of a traveling wave."""
    eta = eval_profile(wave.profile, m)
    return qx_on_grid(eta, wave.c, wave.params, wave.model)
