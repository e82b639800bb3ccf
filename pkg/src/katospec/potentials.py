"""Test potentials on R^3 and their Kato-class diagnostics.

A potential is a finite sum of analytic primitives (gaussian bumps, square
wells, exponential tails), each with its own center, amplitude and width.  The
diagnostics quantify the strength of the 1/|x-y|-weighted integrals

    phi(y) = int |V(x)| / |x-y| dx,

whose supremum over y is the Kato norm.  For a primitive centered at c the
integral reduces exactly to one dimension via spherical averaging about c
(the average of 1/|x-y| over the sphere |x-c| = t is 1/max(t, |y-c|)), which
gives machine-precision closed forms for all three shapes.

When primitives of opposite sign overlap, summing per-primitive integrals
bounds |V| from above by the triangle inequality; the bound is exact whenever
supports are disjoint or all amplitudes share one sign.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import NonConvergedQuadrature

_SHAPES = ("gaussian", "square_well", "exp_decay")


@dataclass(frozen=True)
class Primitive:
    """One radial building block translated to ``center``.

    gaussian:    a * exp(-|x-c|^2 / w^2)
    square_well: a * 1_{|x-c| <= w}
    exp_decay:   a * exp(-|x-c| / w)
    """

    shape: str
    amplitude: float
    width: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if not (np.isfinite(self.amplitude) and np.isfinite(self.width)):
            raise ValueError("amplitude and width must be finite")
        if self.width <= 0:
            raise ValueError("width must be positive")

    def radial(self, t):
        """Profile a*shape(t) as a function of distance t from the center."""
        t = np.asarray(t, dtype=float)
        if self.shape == "gaussian":
            return self.amplitude * np.exp(-(t / self.width) ** 2)
        if self.shape == "square_well":
            return np.where(t <= self.width, self.amplitude, 0.0)
        return self.amplitude * np.exp(-t / self.width)

    def extent(self, tail_tol):
        """Radius beyond which |value| < tail_tol."""
        a, w = abs(self.amplitude), self.width
        if a <= tail_tol:
            return 0.0
        if self.shape == "square_well":
            return w
        if self.shape == "gaussian":
            return w * math.sqrt(math.log(a / tail_tol))
        return w * math.log(a / tail_tol)

    # -- closed-form radial moments about the center ------------------------
    # I1(b) = int_b^inf t |shape| dt ;  I2(0,b) = int_0^b t^2 |shape| dt

    def _i1_tail(self, b):
        a, w = abs(self.amplitude), self.width
        b = np.asarray(b, dtype=float)
        if self.shape == "gaussian":
            return a * 0.5 * w**2 * np.exp(-(b / w) ** 2)
        if self.shape == "square_well":
            return a * 0.5 * np.clip(w**2 - b**2, 0.0, None)
        return a * w * np.exp(-b / w) * (b + w)

    def _i2_head(self, b):
        a, w = abs(self.amplitude), self.width
        b = np.asarray(b, dtype=float)
        if self.shape == "gaussian":
            return a * (0.25 * math.sqrt(math.pi) * w**3 * erf(b / w)
                        - 0.5 * w**2 * b * np.exp(-(b / w) ** 2))
        if self.shape == "square_well":
            bb = np.minimum(b, w)
            return a * bb**3 / 3.0
        s = b / w
        return a * w**3 * _expint2(s)

    def phi_abs(self, d):
        """int |primitive(x)| / |x-y| dx for |y - center| = d (exact)."""
        d = np.asarray(d, dtype=float)
        a, w = abs(self.amplitude), self.width
        if self.shape == "gaussian":
            s = np.maximum(d / w, 1e-300)
            small = d < 1e-6 * w
            val = a * math.pi ** 1.5 * w**3 * erf(s) / np.maximum(d, 1e-300)
            return np.where(small, 2 * math.pi * a * w**2, val)
        if self.shape == "square_well":
            inside = a * 4 * math.pi * (w**2 / 2.0 - d**2 / 6.0)
            outside = a * 4 * math.pi * w**3 / (3.0 * np.maximum(d, 1e-300))
            return np.where(d <= w, inside, outside)
        s = d / w
        return a * 4 * math.pi * w**2 * _gfun(s)

    def shell_mean_abs(self, rho, d):
        """Mean of |primitive| over the sphere of radius rho about a point at
        distance d from the center (exact closed forms)."""
        rho = np.asarray(rho, dtype=float)
        d = np.asarray(d, dtype=float)
        a, w = abs(self.amplitude), self.width
        lo = np.abs(d - rho)
        hi = d + rho
        denom = 2.0 * d * rho
        tiny = denom < 1e-12 * w**2
        denom = np.where(tiny, 1.0, denom)
        if self.shape == "gaussian":
            val = a * 0.5 * w**2 * (np.exp(-(lo / w) ** 2)
                                    - np.exp(-(hi / w) ** 2)) / denom
        elif self.shape == "square_well":
            val = a * 0.5 * np.clip(np.minimum(hi, w) ** 2 - lo**2, 0.0, None) / denom
        else:
            val = a * w * (np.exp(-lo / w) * (lo + w)
                           - np.exp(-hi / w) * (hi + w)) / denom
        direct = np.abs(self.radial(np.sqrt(d**2 + rho**2)))
        return np.where(tiny, direct, val)


def _expint2(s):
    """int_0^s u^2 e^{-u} du = 2 - e^{-s}(s^2 + 2s + 2), series-guarded."""
    s = np.asarray(s, dtype=float)
    small = s < 1e-3
    safe = np.where(small, 1.0, s)
    exact = 2.0 - np.exp(-safe) * (safe**2 + 2 * safe + 2.0)
    series = s**3 / 3.0 - s**4 / 4.0
    return np.where(small, series, exact)


def _gfun(s):
    """phi/(4 pi a w^2) for the exponential shape: (2 - e^{-s}(s^2+2s+2))/s
    + e^{-s}(1+s), with the s -> 0 limit 1 - s^2/6 + s^3/12."""
    s = np.asarray(s, dtype=float)
    small = s < 1e-3
    safe = np.where(small, 1.0, s)
    exact = _expint2(safe) / safe + np.exp(-safe) * (1.0 + safe)
    series = 1.0 - s**2 / 6.0 + s**3 / 12.0
    return np.where(small, series, exact)


@dataclass(frozen=True)
class Potential:
    """A real potential V = sum of primitives, with a hard support cutoff.

    ``support_radius`` is the radius beyond which |V| < tail_tol (computed
    from the primitives if not given).
    """

    primitives: tuple[Primitive, ...] = ()
    tail_tol: float = 1e-10
    support_radius: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        if self.support_radius is None:
            r = 0.0
            for p in self.primitives:
                r = max(r, float(np.linalg.norm(p.center)) + p.extent(self.tail_tol))
            object.__setattr__(self, "support_radius", max(r, 1e-6))

    @property
    def is_radial(self):
        return all(np.allclose(p.center, 0.0) for p in self.primitives)

    def evaluate(self, x):
        """V(x); x is a point or an (..., 3) array."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for p in self.primitives:
            t = np.linalg.norm(x - np.asarray(p.center), axis=-1)
            out = out + p.radial(t)
        return out if out.shape else float(out)

    def radial_profile(self, r):
        """V as a function of |x| (requires a radially symmetric potential)."""
        if not self.is_radial:
            raise ValueError("potential is not radially symmetric")
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for p in self.primitives:
            out = out + p.radial(r)
        return out

    def abs_radial_profile(self, r):
        """Sum of |primitive| profiles (radial potentials only make this |V|)."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for p in self.primitives:
            out = out + np.abs(p.radial(r))
        return out

    def key(self):
        """Hashable identity used for caching derived objects."""
        return (tuple((p.shape, p.amplitude, p.width, tuple(p.center))
                      for p in self.primitives), self.tail_tol, self.support_radius)


def evaluate(p: Potential, x):
    """V(x) as the sum of primitive evaluations."""
    return p.evaluate(x)


@dataclass
class QuadSpec:
    """Radial-angular quadrature controls for the modulus integrals."""

    points: int = 24          # Gauss points per radial panel
    n_mu: int = 12            # polar angular points (non-radial fallback)
    n_phi: int = 24           # azimuthal points (non-radial fallback)
    rel_tol: float = 1e-6     # refinement agreement required


def default_probes(p: Potential, step: float = 0.5, margin: float = 2.0):
    """Primitive centers plus a cubic lattice of the given step within
    radius support_radius + margin (the supremum over y is approximated by a
    maximum over this finite set)."""
    rad = p.support_radius + margin
    n = int(math.floor(rad / step))
    ax = step * np.arange(-n, n + 1)
    gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    pts = pts[np.linalg.norm(pts, axis=1) <= rad]
    centers = np.array([p.center for p in p.primitives], dtype=float).reshape(-1, 3)
    if len(centers):
        pts = np.vstack([centers, pts])
    return pts


@dataclass
class KatoDiagnostics:
    kato_norm: float
    local_modulus: dict
    distal_modulus: dict

    def to_json(self):
        return json.dumps({
            "kato_norm": self.kato_norm,
            "local": [{"eps": e, "val": v} for e, v in sorted(self.local_modulus.items())],
            "distal": [{"R": r, "val": v} for r, v in sorted(self.distal_modulus.items())],
        }, sort_keys=True)


def kato_norm(p: Potential, probe=None, quad: QuadSpec | None = None):
    """max over probe points y of int |V(x)| / |x-y| dx (closed forms)."""
    if not p.primitives:
        return 0.0
    if probe is None:
        probe = default_probes(p)
    probe = np.atleast_2d(np.asarray(probe, dtype=float))
    vals = np.zeros(len(probe))
    for prim in p.primitives:
        d = np.linalg.norm(probe - np.asarray(prim.center), axis=1)
        vals += prim.phi_abs(d)
    return float(np.max(vals))


def _panel_nodes(a, b, breakpoints, points):
    """Composite Gauss-Legendre nodes/weights on [a, b] split at breakpoints."""
    xg, wg = np.polynomial.legendre.leggauss(points)
    cuts = sorted({a, b, *(c for c in breakpoints if a < c < b)})
    nodes, weights = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        nodes.append(0.5 * (hi - lo) * (xg + 1) + lo)
        weights.append(0.5 * (hi - lo) * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def _panel_nodes_batch(a, b, breaks, points):
    """Vectorized composite Gauss rule: one row of nodes/weights per probe.

    ``breaks`` is an (P, K) array of candidate breakpoints per row; values
    outside (a, b_row) are clamped to the interval edges (zero-length panels
    contribute nothing).  Returns (P, (K+1)*points) node and weight arrays.
    """
    xg, wg = np.polynomial.legendre.leggauss(points)
    b = np.broadcast_to(np.asarray(b, dtype=float), (breaks.shape[0],))
    cuts = np.clip(np.sort(breaks, axis=1), a, b[:, None])
    edges = np.concatenate([np.full((breaks.shape[0], 1), a), cuts,
                            b[:, None]], axis=1)
    lo = edges[:, :-1, None]
    hi = edges[:, 1:, None]
    nodes = 0.5 * (hi - lo) * (xg + 1.0) + lo
    weights = 0.5 * (hi - lo) * wg
    P = breaks.shape[0]
    return nodes.reshape(P, -1), weights.reshape(P, -1)


def local_kato_modulus(p: Potential, eps: float, probe=None,
                       quad: QuadSpec | None = None):
    """max over probe y of int_{|x-y|<eps} |V(x)| / |x-y| dx.

    Radial reduction about y: 4 pi int_0^eps rho * mean_{|x-y|=rho}|V| drho,
    with exact shell means per primitive; composite Gauss quadrature split at
    square-well shell edges, with one refinement-agreement check.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not p.primitives:
        return 0.0
    quad = quad or QuadSpec()
    if probe is None:
        probe = default_probes(p)
    probe = np.atleast_2d(np.asarray(probe, dtype=float))

    dists = np.stack([np.linalg.norm(probe - np.asarray(prim.center), axis=1)
                      for prim in p.primitives], axis=1)  # (P, n_prim)

    def integral(points):
        breaks = []
        for k, prim in enumerate(p.primitives):
            if prim.shape == "square_well":
                breaks.append(np.abs(dists[:, k] - prim.width))
                breaks.append(dists[:, k] + prim.width)
        if breaks:
            breaks = np.stack(breaks, axis=1)
        else:
            breaks = np.zeros((len(probe), 0))
        rho, w = _panel_nodes_batch(0.0, eps, breaks, points)  # (P, M)
        m = np.zeros_like(rho)
        for k, prim in enumerate(p.primitives):
            m += prim.shell_mean_abs(rho, dists[:, k][:, None])
        return 4 * math.pi * float(np.max(np.sum(rho * m * w, axis=1)))

    coarse = integral(quad.points)
    fine = integral(2 * quad.points)
    if abs(fine - coarse) > quad.rel_tol * max(abs(fine), 1e-300) + 1e-14:
        raise NonConvergedQuadrature(
            f"local modulus refinement mismatch: {coarse} vs {fine}")
    return fine


def distal_kato_modulus(p: Potential, R: float, probe=None,
                        quad: QuadSpec | None = None):
    """max over probe y of int_{|x|>R} |V(x)| / |x-y| dx.

    For radial |V| the integral is exact (1D closed-form/radial quadrature);
    otherwise it is phi(y) minus a numeric integral over the ball |x| <= R.
    """
    if R < 0:
        raise ValueError("R must be nonnegative")
    if not p.primitives:
        return 0.0
    quad = quad or QuadSpec()
    if probe is None:
        probe = default_probes(p)
    probe = np.atleast_2d(np.asarray(probe, dtype=float))

    if p.is_radial:
        def one(points):
            dy = np.linalg.norm(probe, axis=1)
            top = max(R, p.support_radius) + 2.0
            end = np.maximum(top, dy + 1e-9)
            wells = [prim.width for prim in p.primitives
                     if prim.shape == "square_well"]
            breaks = np.concatenate(
                [dy[:, None], np.broadcast_to(np.asarray(wells, dtype=float),
                                              (len(dy), len(wells)))], axis=1) \
                if wells else dy[:, None]
            t, w = _panel_nodes_batch(R, end, breaks, points)  # (P, M)
            integrand = p.abs_radial_profile(t) * t**2 / np.maximum(t, dy[:, None])
            vals = 4 * math.pi * np.sum(integrand * w, axis=1)
            # decaying tails beyond the panel window (1/max(t,d) = 1/t there)
            for prim in p.primitives:
                if prim.shape != "square_well":
                    vals += 4 * math.pi * prim._i1_tail(end)
            return float(np.max(vals))

        coarse, fine = one(quad.points), one(2 * quad.points)
        if abs(fine - coarse) > quad.rel_tol * max(abs(fine), 1e-300) + 1e-14:
            raise NonConvergedQuadrature(
                f"distal modulus refinement mismatch: {coarse} vs {fine}")
        return fine

    # General case: phi(y) - int_{|x|<=R} |V|/|x-y|.  The inner integral is
    # desingularized by taking the polar axis along y and substituting
    # u = |x - y| for the polar angle:
    #   int_{S^2} f / |rho w - y| dw = (2 pi / (rho d)) int_{|rho-d|}^{rho+d}
    #        <f>_ring(u) du,
    # so only smooth ring averages of |V| remain.
    def inner(y, points, n_phi):
        dy = float(np.linalg.norm(y))
        if dy < 1e-9:
            # probe at the origin: plain radial reduction, 1/|x| is 1/rho
            rho, wr = _panel_nodes(1e-12, R, [], points)
            total = 0.0
            for rh, wrh in zip(rho, wr):
                total += wrh * rh * _sphere_mean_abs(p, np.zeros(3), rh, n_phi)
            return 4 * math.pi * total
        zhat = np.asarray(y, dtype=float) / dy
        # orthonormal frame (e1, e2, zhat)
        a = np.array([1.0, 0.0, 0.0])
        if abs(a @ zhat) > 0.9:
            a = np.array([0.0, 1.0, 0.0])
        e1 = np.cross(zhat, a)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(zhat, e1)
        phi_ang = 2 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
        breaks = [prim.width for prim in p.primitives if prim.shape == "square_well"]
        rho, wr = _panel_nodes(1e-12, R, breaks, points)
        total = 0.0
        for rh, wrh in zip(rho, wr):
            u, wu = _panel_nodes(abs(rh - dy), rh + dy, [], points)
            mu = np.clip((rh**2 + dy**2 - u**2) / (2 * rh * dy), -1.0, 1.0)
            st = np.sqrt(np.clip(1 - mu**2, 0.0, None))
            # ring points: (n_u, n_phi, 3)
            ring = (rh * (st[:, None, None]
                          * (np.cos(phi_ang)[None, :, None] * e1
                             + np.sin(phi_ang)[None, :, None] * e2)
                          + mu[:, None, None] * zhat))
            vabs = np.zeros(ring.shape[:2])
            for prim in p.primitives:
                vabs += np.abs(prim.radial(
                    np.linalg.norm(ring - np.asarray(prim.center), axis=2)))
            ringmean = vabs.mean(axis=1)
            total += wrh * rh * float(np.sum(ringmean * wu)) * 2 * math.pi / dy
        return total

    # The exterior integral is bounded by phi(y); restrict the (expensive)
    # numeric maximization to the probes with the largest phi values.
    phis = np.zeros(len(probe))
    for prim in p.primitives:
        d = np.linalg.norm(probe - np.asarray(prim.center), axis=1)
        phis += prim.phi_abs(d)
    keep = np.argsort(-phis, kind="stable")[:24]

    def full(points, n_phi):
        best = 0.0
        for idx in keep:
            best = max(best, float(phis[idx]) - inner(probe[idx], points, n_phi))
        return best

    coarse = full(quad.points, quad.n_phi)
    fine = full(int(1.5 * quad.points), 2 * quad.n_phi)
    # the non-radial path is a diagnostic; its agreement requirement is a
    # looser multiple of rel_tol than the closed-form radial path
    if abs(fine - coarse) > 100 * quad.rel_tol * max(abs(fine), 1e-300) + 1e-10:
        raise NonConvergedQuadrature(
            f"distal modulus refinement mismatch: {coarse} vs {fine}")
    return fine


def _sphere_mean_abs(p: Potential, center, rho, n_phi):
    """Mean of |V| over the sphere of radius rho about ``center`` (numeric)."""
    n_mu = max(8, n_phi // 2)
    xg, wg = np.polynomial.legendre.leggauss(n_mu)
    phi_ang = 2 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
    st = np.sqrt(1 - xg**2)
    dirs = np.stack([np.outer(st, np.cos(phi_ang)).ravel(),
                     np.outer(st, np.sin(phi_ang)).ravel(),
                     np.outer(xg, np.ones(n_phi)).ravel()], axis=1)
    wang = np.repeat(wg, n_phi) * (2 * math.pi / n_phi)
    x = np.asarray(center, dtype=float) + rho * dirs
    vabs = np.zeros(len(dirs))
    for prim in p.primitives:
        vabs += np.abs(prim.radial(np.linalg.norm(x - np.asarray(prim.center), axis=1)))
    return float(np.sum(vabs * wang)) / (4 * math.pi)


def diagnostics(p: Potential, eps_list=(0.1, 0.5, 1.0, 10.0),
                r_list=(0.0, 0.5, 1.0, 2.0), probe=None,
                quad: QuadSpec | None = None) -> KatoDiagnostics:
    """Bundle of the Kato norm with local/distal modulus tables."""
    return KatoDiagnostics(
        kato_norm=kato_norm(p, probe=probe, quad=quad),
        local_modulus={e: local_kato_modulus(p, e, probe=probe, quad=quad)
                       for e in eps_list},
        distal_modulus={r: distal_kato_modulus(p, max(r, 1e-12), probe=probe, quad=quad)
                        for r in r_list},
    )
