"""Closed-form kernels of the free operator -Delta on R^3.

Resolvent, heat and Poisson kernels, plus the Bessel-function kernel of the
spectral multiplier (1 - lambda/lambda0)_+^alpha (a Bochner-Riesz mean).
The Poisson kernel uses the 1/pi^2 normalization, which is the one that
integrates to unit mass over R^3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (CoincidentPoints, NonPositiveTime, OutOfSupportedRange)

_BESSEL_CROSSOVER = 20.0


@dataclass(frozen=True)
class SpectralParameter:
    """eta with Im(eta) >= 0; the spectral parameter is lambda = eta^2.

    Boundary values lambda +- i0 on the positive half-line correspond to
    eta = +-sqrt(lambda) on the real axis (principal square root branch);
    lambda = -kappa^2 < 0 corresponds to eta = i kappa.
    """

    eta: complex

    def __post_init__(self):
        if self.eta.imag < -1e-15:
            raise ValueError("Im(eta) must be nonnegative")

    @property
    def lam(self) -> complex:
        return self.eta ** 2

    @classmethod
    def from_lambda(cls, lam: float, side: str = "+") -> "SpectralParameter":
        """Boundary value lambda + i0 (side '+') or lambda - i0 (side '-')
        for real lambda; negative lambda gives eta = i sqrt(-lambda)."""
        if lam < 0:
            return cls(eta=1j * math.sqrt(-lam))
        root = math.sqrt(lam)
        return cls(eta=root if side == "+" else -root)


def _sep(x, y):
    d = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float),
                       axis=-1)
    return d


def resolvent0(eta, x, y):
    """Free resolvent kernel e^{i eta |x-y|} / (4 pi |x-y|), Im eta >= 0."""
    if isinstance(eta, SpectralParameter):
        eta = eta.eta
    d = _sep(x, y)
    if np.any(d == 0):
        raise CoincidentPoints("resolvent kernel is singular at x == y")
    return np.exp(1j * complex(eta) * d) / (4 * math.pi * d)


def heat0(t, x, y):
    """Free heat kernel (4 pi t)^{-3/2} e^{-|x-y|^2 / 4t}."""
    if t <= 0:
        raise NonPositiveTime("heat kernel requires t > 0")
    d = _sep(x, y)
    return (4 * math.pi * t) ** -1.5 * np.exp(-d**2 / (4 * t))


def poisson0(t, x, y):
    """Free Poisson kernel (1/pi^2) t / (t^2 + |x-y|^2)^2 (unit mass)."""
    if t <= 0:
        raise NonPositiveTime("Poisson kernel requires t > 0")
    d = _sep(x, y)
    return t / (math.pi**2 * (t**2 + d**2) ** 2)


def _bessel_series(nu, z):
    """Ascending power series, reliable for z <= ~20 in double precision."""
    z = np.asarray(z, dtype=float)
    half = z / 2.0
    term = half**nu / math.gamma(nu + 1.0)
    total = term.copy()
    zz = half**2
    for m in range(1, 60):
        term = -term * zz / (m * (m + nu))
        total += term
        if np.all(np.abs(term) <= 1e-18 * (np.abs(total) + 1e-300)):
            break
    return total


def _bessel_asymptotic(nu, z):
    """Large-argument expansion with truncation at the smallest term."""
    z = np.asarray(z, dtype=float)
    mu = 4.0 * nu**2
    p = np.ones_like(z)
    q = np.zeros_like(z)
    term = np.ones_like(z)
    best = np.abs(term)
    for k in range(1, 13):
        term = term * (mu - (2 * k - 1) ** 2) / (8.0 * k * z)
        mag = np.abs(term)
        if np.all(mag >= best):
            break
        best = np.minimum(best, mag)
        if k % 2 == 1:
            q += term * (-1.0) ** ((k - 1) // 2)
        else:
            p += term * (-1.0) ** (k // 2)
    omega = z - nu * math.pi / 2.0 - math.pi / 4.0
    return np.sqrt(2.0 / (math.pi * z)) * (p * np.cos(omega) - q * np.sin(omega))


def bessel_j(nu: float, z):
    """J_nu(z) for nu in [0, 6], z >= 0: power series up to the crossover
    point, large-argument asymptotics beyond it."""
    if not (0.0 <= nu <= 6.0):
        raise OutOfSupportedRange(f"order {nu} outside [0, 6]")
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise OutOfSupportedRange("argument must be nonnegative")
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)
    lo = z <= _BESSEL_CROSSOVER
    if np.any(lo):
        out[lo] = _bessel_series(nu, z[lo])
    if np.any(~lo):
        out[~lo] = _bessel_asymptotic(nu, z[~lo])
    return float(out[0]) if scalar else out


def bessel_crossover_gap(nu: float) -> float:
    """Relative disagreement of the two evaluation branches at the crossover
    argument (a consistency diagnostic; should be well below 1e-6)."""
    z = np.array([_BESSEL_CROSSOVER])
    a = _bessel_series(nu, z)[0]
    b = _bessel_asymptotic(nu, z)[0]
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def br0_kernel(alpha: float, lambda0: float, x, y):
    """Kernel of the free multiplier (1 - lambda/lambda0)_+^alpha:

        K(s) = lambda0^{3/2} (2 pi)^{-3/2} Gamma(alpha+1) 2^alpha
               J_{alpha+3/2}(z) / z^{alpha+3/2},   z = sqrt(lambda0) |x-y|.
    """
    if alpha <= -1:
        raise OutOfSupportedRange("alpha must exceed -1")
    if not (0.0 <= alpha + 1.5 <= 6.0):
        raise OutOfSupportedRange("alpha + 3/2 outside the supported Bessel range")
    if lambda0 <= 0:
        raise ValueError("lambda0 must be positive")
    d = _sep(x, y)
    if np.any(d == 0):
        raise CoincidentPoints("use the s -> 0 limit explicitly if needed")
    z = math.sqrt(lambda0) * d
    nu = alpha + 1.5
    pref = lambda0**1.5 * (2 * math.pi) ** -1.5 * math.gamma(alpha + 1.0) * 2.0**alpha
    return pref * bessel_j(nu, z) / z**nu


def br0_kernel_sep(alpha: float, lambda0: float, sep):
    """br0_kernel as a function of the separation |x-y| directly."""
    sep = np.asarray(sep, dtype=float)
    x = np.zeros(3)
    y = np.stack([np.zeros_like(sep), np.zeros_like(sep), sep], axis=-1)
    return br0_kernel(alpha, lambda0, x, y)
