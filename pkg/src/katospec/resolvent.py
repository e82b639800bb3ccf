"""Perturbed resolvent R_V(lambda +- i0)(x, y) and the spectral density.

Everything rests on the factorization R_V = R0 - R0 (I + V R0)^{-1} V R0:
one linear solve per (spectral parameter, source point), reused across
evaluation points.  Radial potentials dispatch to the partial-wave engine,
where the correction term becomes a Legendre sum of one-dimensional solves;
the dense grid path covers general potentials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import NearSingularSolve
from .free_kernels import SpectralParameter, resolvent0
from .grids import SupportGrid
from .potentials import Potential
from .radial import channel_count, legendre_p_table
from .birman_schwinger import assemble, engine_for

SOLVER_TOL = 1e-10


def _eta_value(eta):
    return eta.eta if isinstance(eta, SpectralParameter) else complex(eta)


@dataclass
class ResolventSolve:
    """One factorization of I + V R0(eta) on the dense support grid."""

    eta: SpectralParameter
    lu: tuple
    condition_estimate: float
    grid: SupportGrid

    def correction(self, x, y):
        """R0 (I + V R0)^{-1} V R0 evaluated at (x, y) by one solve."""
        g = self.grid
        dy = np.linalg.norm(g.nodes - np.asarray(y, float)[None, :], axis=1)
        dx = np.linalg.norm(g.nodes - np.asarray(x, float)[None, :], axis=1)
        e = self.eta.eta
        b = g.potential_values * np.exp(1j * e * dy) / (4 * math.pi * dy)
        c = lu_solve(self.lu, b)
        row = np.exp(1j * e * dx) / (4 * math.pi * dx)
        return complex(np.sum(row * c * g.weights))


def factorize(p: Potential, g: SupportGrid, eta) -> ResolventSolve:
    """LU of I + V R0(eta) on the column grid (square Nystrom system)."""
    e = _eta_value(eta)
    d = np.linalg.norm(g.nodes[:, None, :] - g.nodes[None, :, :], axis=-1)
    # square system on the column grid with the singular diagonal excluded
    # (the offset-dual variant is available via birman_schwinger.assemble)
    np.fill_diagonal(d, 1.0)
    r0 = np.exp(1j * e * d) / (4 * math.pi * d)
    np.fill_diagonal(r0, 0.0)
    mat = np.eye(g.size) + g.potential_values[:, None] * r0 * g.weights[None, :]
    sv_min = float(np.linalg.svd(mat, compute_uv=False)[-1])
    if sv_min < SOLVER_TOL:
        raise NearSingularSolve(f"sigma_min = {sv_min:.3e} at eta = {e}")
    sp = eta if isinstance(eta, SpectralParameter) else SpectralParameter(e)
    return ResolventSolve(eta=sp, lu=lu_factor(mat),
                          condition_estimate=sv_min, grid=g)


def _radial_correction(p, g, eta, x, y):
    """Channel form of R0 (I + V R0)^{-1} V R0 at (x, y)."""
    eng = engine_for(p, g)
    e = _eta_value(eta)
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    rx = float(np.linalg.norm(x))
    ry = float(np.linalg.norm(y))
    if rx == 0 or ry == 0:
        cos_gamma = 1.0  # only the l = 0 term survives at the origin
    else:
        cos_gamma = float(np.dot(x, y) / (rx * ry))
    lmax = channel_count(e, g.radius)
    pl = legendre_p_table(lmax, np.array(cos_gamma))
    total = 0.0 + 0.0j
    from .radial import g_l
    for l in range(lmax + 1):
        if l > 0 and (rx == 0 or ry == 0):
            break
        b = eng.vr * g_l(l, e, np.minimum(eng.r, ry), np.maximum(eng.r, ry))
        c = eng.solve(l, e, b.astype(complex))
        row = eng.rows(l, e, [rx])[0]
        cl = complex(np.sum(row * c))
        term = (2 * l + 1) / (4 * math.pi) * float(pl[l]) * cl
        total += term
        if l > 8 and abs(term) < 1e-14 * max(abs(total), 1.0):
            break
    return total


def resolvent_v(p: Potential, g: SupportGrid, eta, x, y,
                solve: ResolventSolve | None = None) -> complex:
    """R_V(eta^2)(x, y) = R0(eta)(x, y) - correction."""
    e = _eta_value(eta)
    free = complex(resolvent0(e, x, y))
    if not p.primitives:
        return free
    if p.is_radial and solve is None:
        return free - _radial_correction(p, g, eta, x, y)
    if solve is None:
        solve = factorize(p, g, eta)
    return free - solve.correction(x, y)


def spectral_density(p: Potential, g: SupportGrid, lam: float, x, y) -> float:
    """Stone-formula density (1/pi) Im R_V(lambda + i0)(x, y), lambda > 0."""
    if lam <= 0:
        raise ValueError("spectral density is defined on lambda > 0")
    return float(resolvent_v(p, g, math.sqrt(lam), x, y).imag) / math.pi
