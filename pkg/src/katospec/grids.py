"""Quadrature grids on the support ball and evaluation-pair grids.

The support grid is a tensor product of Gauss-Legendre radial nodes on
[0, R_supp] (weights carry the r^2 Jacobian) with a spherical rule: the
classical degree-7 octahedral 26-point rule by default, or a
Gauss-Legendre(cos theta) x uniform(phi) product rule for other angular
orders.  Operator rows use a second copy of the grid whose radial shells are
shifted by half a radial cell, so row and column nodes never coincide and
1/|x-y| kernels stay finite without any diagonal regularization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidOrder
from .potentials import Potential

# degree-7 spherical rule on 26 octahedral points: vertices, edge midpoints,
# cube vertices with weights 1/21, 4/105, 27/840 (times 4 pi)
_OCT_RULES = {
    6: [("vertex", 1.0 / 6.0)],
    26: [("vertex", 1.0 / 21.0), ("edge", 4.0 / 105.0), ("cube", 27.0 / 840.0)],
}


def _octahedral_points(kind):
    if kind == "vertex":
        pts = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    elif kind == "edge":
        pts = []
        for i in range(3):
            for j in range(i + 1, 3):
                for si in (1, -1):
                    for sj in (1, -1):
                        v = [0.0, 0.0, 0.0]
                        v[i], v[j] = si, sj
                        pts.append(tuple(c / math.sqrt(2) for c in v))
    else:  # cube
        pts = [(sx / math.sqrt(3), sy / math.sqrt(3), sz / math.sqrt(3))
               for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)]
    return np.array(pts, dtype=float)


def angular_rule(order: int):
    """Unit-sphere nodes and weights (weights sum to 4 pi)."""
    if order in _OCT_RULES:
        dirs, w = [], []
        for kind, wt in _OCT_RULES[order]:
            pts = _octahedral_points(kind)
            dirs.append(pts)
            w.append(np.full(len(pts), wt * 4 * math.pi))
        return np.vstack(dirs), np.concatenate(w)
    # product rule: Gauss in cos(theta) x uniform in phi
    n_mu = max(2, int(round(math.sqrt(order / 2.0))))
    n_phi = max(4, int(math.ceil(order / n_mu)))
    mu, wmu = np.polynomial.legendre.leggauss(n_mu)
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - mu**2)
    dirs = np.stack([np.outer(st, np.cos(phi)).ravel(),
                     np.outer(st, np.sin(phi)).ravel(),
                     np.outer(mu, np.ones(n_phi)).ravel()], axis=1)
    w = np.repeat(wmu, n_phi) * (2 * math.pi / n_phi)
    return dirs, w


@dataclass
class SupportGrid:
    """Quadrature discretization of the ball |x| <= R_supp.

    ``nodes``/``weights`` form the column (integration) grid; ``row_nodes``
    is the half-cell radially shifted copy used for operator rows.
    """

    nodes: np.ndarray
    weights: np.ndarray
    scheme: dict
    potential_values: np.ndarray
    row_nodes: np.ndarray
    radius: float
    radial_nodes: np.ndarray
    radial_weights: np.ndarray
    row_radial_nodes: np.ndarray
    angular_dirs: np.ndarray
    angular_weights: np.ndarray
    potential: Potential = None  # type: ignore[assignment]

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise InvalidOrder("all quadrature weights must be positive")

    @property
    def size(self):
        return len(self.weights)

    def refined(self, factor=1.5):
        """A finer grid of the same family (used for stability checks)."""
        return build_support_grid(
            self.potential,
            radial_order=int(math.ceil(self.scheme["radial_order"] * factor)),
            angular_order=int(math.ceil(self.scheme["angular_order"] * factor)),
        )

    def to_csv_rows(self):
        for (x, y, z), w, v in zip(self.nodes, self.weights, self.potential_values):
            yield x, y, z, w, v


def build_support_grid(p: Potential, radial_order: int = 24,
                       angular_order: int = 26) -> SupportGrid:
    """Tensor Gauss-Legendre(radius) x spherical-rule grid on supp V."""
    if radial_order < 2 or angular_order < 2:
        raise InvalidOrder("orders must be at least 2")
    R = p.support_radius
    xg, wg = np.polynomial.legendre.leggauss(radial_order)
    r = 0.5 * R * (xg + 1.0)
    wr = 0.5 * R * wg * r**2
    # rows: shells shifted by half a cell (midpoints, last one toward R)
    r_row = np.empty_like(r)
    r_row[:-1] = 0.5 * (r[:-1] + r[1:])
    r_row[-1] = 0.5 * (r[-1] + R)
    dirs, wa = angular_rule(angular_order)
    nodes = (r[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    row_nodes = (r_row[:, None, None] * dirs[None, :, :]).reshape(-1, 3)
    weights = (wr[:, None] * wa[None, :]).ravel()
    pv = p.evaluate(nodes) if p.primitives else np.zeros(len(nodes))
    return SupportGrid(
        nodes=nodes, weights=weights,
        scheme={"radial_order": radial_order, "angular_order": angular_order},
        potential_values=np.atleast_1d(pv),
        row_nodes=row_nodes, radius=R,
        radial_nodes=r, radial_weights=wr, row_radial_nodes=r_row,
        angular_dirs=dirs, angular_weights=wa,
        potential=p,
    )


@dataclass
class EvalGrid:
    """Kernel sample pairs (x_i, y_i) with their separations."""

    points: np.ndarray
    pair_list: list  # of (x, y) tuples as arrays
    separations: np.ndarray
    diagonal: bool = False


def build_eval_grid(sep_min: float, sep_max: float, count: int,
                    box: float = 8.0, diagonal: bool = False) -> EvalGrid:
    """Deterministic pair list with log-spaced separations along the z-axis,
    pairs centered on the origin: x = (0,0,+s/2), y = (0,0,-s/2)."""
    if diagonal:
        x = np.zeros(3)
        return EvalGrid(points=np.zeros((1, 3)), pair_list=[(x, x)],
                        separations=np.zeros(1), diagonal=True)
    if sep_min <= 0:
        raise ValueError("separations must be positive (or request diagonal)")
    if count == 1:
        seps = np.array([sep_min]) if sep_min == sep_max else \
            np.array([math.sqrt(sep_min * sep_max)])
    else:
        seps = np.geomspace(sep_min, sep_max, count)
    pairs, pts = [], []
    for s in seps:
        x = np.array([0.0, 0.0, +0.5 * min(s, 2 * box)])
        y = np.array([0.0, 0.0, -0.5 * min(s, 2 * box)])
        pairs.append((x, y))
        pts.extend([x, y])
    return EvalGrid(points=np.array(pts), pair_list=pairs,
                    separations=np.asarray(seps, dtype=float))
