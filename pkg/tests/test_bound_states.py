"""Bound-state energies and eigenfunctions against independent oracles."""

import math

import numpy as np
import pytest

from katospec.potentials import Potential, Primitive
from katospec.grids import build_support_grid
from katospec.bound_states import (agmon_ratio, extend_eigenfunction,
                                   find_bound_states, real_sph_harm)
from katospec.birman_schwinger import count_negative_bound_states

from oracles import fd_negative_spectrum, square_well_kappa_s


def make(shape, amplitude, width=1.0):
    p = Potential(primitives=[Primitive(shape, amplitude, width)])
    return p, build_support_grid(p)


@pytest.fixture(scope="module")
def sw4():
    p, g = make("square_well", -4.0)
    return p, g, find_bound_states(p, g, 2.5)


def test_square_well_single_state_matches_transcendental(sw4):
    _, _, states = sw4
    assert len(states) == 1
    kap = square_well_kappa_s(4.0)
    assert states[0].kappa == pytest.approx(kap, rel=1e-7)
    assert states[0].lambda_k == pytest.approx(-kap * kap, rel=1e-7)


@pytest.mark.parametrize("shape,amp,kmax", [
    ("square_well", -4.0, 2.5),
    ("square_well", -10.0, 3.7),
    ("gaussian", -8.0, 3.0),
])
def test_energies_match_fd_oracle(shape, amp, kmax):
    p, g = make(shape, amp)
    states = find_bound_states(p, g, kmax)
    oracle = fd_negative_spectrum(lambda r: p.radial_profile(r), l_max=3)
    assert len(states) == len(oracle)
    for s, (lam, l) in zip(states, oracle):
        assert s.lambda_k == pytest.approx(lam, rel=1e-3)
        assert s.channel.l == l


def test_no_states_for_shallow_wells():
    for shape, amp in (("square_well", -1.0), ("gaussian", -1.0)):
        p, g = make(shape, amp)
        assert find_bound_states(p, g, 2.0) == []
        assert count_negative_bound_states(p, g) == 0


def test_residual_and_normalization(sw4):
    p, g, states = sw4
    s = states[0]
    assert s.residual < 1e-8
    # L2 norm over R^3 by direct radial quadrature of the closed form
    r = np.linspace(1e-4, 12.0, 4000)
    vals = s.channel.radial_at(r, s.kappa)
    norm2 = np.trapezoid(vals**2 * r**2, r)  # Y_00 integrates to 1
    assert norm2 == pytest.approx(1.0, rel=1e-4)


def test_extension_continuous_across_support_boundary(sw4):
    p, g, states = sw4
    s = states[0]
    just_in = extend_eigenfunction(s, p, g, np.array([0.0, 0.0, 0.999]))
    just_out = extend_eigenfunction(s, p, g, np.array([0.0, 0.0, 1.001]))
    assert abs(just_in - just_out) < 5e-3 * abs(just_in)


def test_exterior_decay_is_exact_exponential(sw4):
    p, g, states = sw4
    s = states[0]
    r1, r2 = 3.0, 5.0
    v1 = extend_eigenfunction(s, p, g, np.array([0.0, 0.0, r1]))
    v2 = extend_eigenfunction(s, p, g, np.array([0.0, 0.0, r2]))
    # psi ~ e^{-kappa r}/r outside the well
    want = math.exp(-s.kappa * (r2 - r1)) * r1 / r2
    assert abs(v2 / v1) == pytest.approx(want, rel=1e-9)


def test_agmon_ratio_finite(sw4):
    p, g, states = sw4
    c = agmon_ratio(states[0], p, g, [2.0, 4.0, 8.0])
    assert 0 < c < 10.0


def test_real_sph_harm_orthonormal():
    # quadrature over a Lebedev-free product grid
    nt, nph = 24, 48
    ct, wt = np.polynomial.legendre.leggauss(nt)
    phi = (np.arange(nph) + 0.5) * 2 * math.pi / nph
    C, P = np.meshgrid(ct, phi, indexing="ij")
    S = np.sqrt(1.0 - C**2)
    dirs = np.stack([S * np.cos(P), S * np.sin(P), C], axis=-1).reshape(-1, 3)
    w = np.broadcast_to(wt[:, None] * (2 * math.pi / nph), C.shape).ravel()
    for (l1, m1), (l2, m2) in [((0, 0), (0, 0)), ((1, 0), (1, 0)),
                               ((1, 1), (1, -1)), ((2, 1), (2, 1)),
                               ((2, 2), (1, 1))]:
        y1 = real_sph_harm(l1, m1, dirs)
        y2 = real_sph_harm(l2, m2, dirs)
        want = 1.0 if (l1, m1) == (l2, m2) else 0.0
        assert np.sum(y1 * y2 * w) == pytest.approx(want, abs=1e-6)


def test_states_sorted_shallowest_first():
    p, g = make("square_well", -10.0)
    states = find_bound_states(p, g, 3.7)
    lams = [s.lambda_k for s in states]
    assert lams == sorted(lams, reverse=True)
