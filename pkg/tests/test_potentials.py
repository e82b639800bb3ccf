"""Kato-norm diagnostics: closed forms, scaling covariance, Frostman bound."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from katospec.potentials import (Potential, Primitive, kato_norm,
                                 local_kato_modulus, distal_kato_modulus)


def gaussian(amplitude=1.0, width=1.0):
    return Potential(primitives=[Primitive("gaussian", amplitude, width)])


def ball(amplitude=1.0, radius=1.0):
    return Potential(primitives=[Primitive("square_well", amplitude, radius)])


def test_kato_norm_gaussian_closed_form():
    # sup_y int e^{-|x|^2} / |x - y| dx is attained at y = 0 and equals 2 pi
    assert kato_norm(gaussian()) == pytest.approx(2 * math.pi, abs=1e-3)


def test_kato_norm_unit_ball_closed_form():
    # int_{|x|<=1} 1/|x| dx = 2 pi, again attained at the center
    assert kato_norm(ball()) == pytest.approx(2 * math.pi, abs=1e-3)


def test_kato_norm_scales_with_amplitude():
    assert kato_norm(gaussian(3.0)) == pytest.approx(
        3.0 * kato_norm(gaussian()), rel=1e-9)
    assert kato_norm(gaussian(-3.0)) == pytest.approx(
        3.0 * kato_norm(gaussian()), rel=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(min_value=0.5, max_value=2.5))
def test_kato_norm_scaling_covariance(s):
    # V_s(x) = s^2 V(s x) leaves the Kato norm unchanged
    base = kato_norm(gaussian())
    scaled = kato_norm(gaussian(amplitude=s * s, width=1.0 / s))
    assert scaled == pytest.approx(base, rel=2e-3)


@pytest.mark.parametrize("r", [0.1, 0.3, 0.7, 1.0])
def test_frostman_ball_bound(r):
    # int_{B(0,r)} |V| dx <= ||V||_K * r for every radius
    p = ball()
    vol = 4 * math.pi * r**3 / 3
    assert vol <= kato_norm(p) * r * (1 + 1e-9)
    pg = gaussian()
    rho = np.linspace(0, r, 4000)
    integral = 4 * math.pi * np.trapezoid(np.exp(-rho**2) * rho**2, rho)
    assert integral <= kato_norm(pg) * r * (1 + 1e-9)


def test_local_modulus_monotone_and_below_norm():
    p = gaussian()
    vals = [local_kato_modulus(p, e) for e in (0.1, 0.5, 1.0, 10.0)]
    assert all(a <= b * (1 + 1e-9) for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= kato_norm(p) * (1 + 1e-9)
    assert vals[0] < vals[-1]


def test_distal_modulus_vanishes_for_compact_support():
    p = ball()
    far = distal_kato_modulus(p, 5.0)
    near = distal_kato_modulus(p, 0.5)
    assert far == pytest.approx(0.0, abs=1e-12)
    assert near > 0


def test_potential_evaluate_matches_radial_profile():
    p = Potential(primitives=[Primitive("gaussian", -2.0, 1.5)])
    x = np.array([[0.3, -0.4, 1.2], [0.0, 0.0, 0.0]])
    r = np.linalg.norm(x, axis=1)
    assert np.allclose(p.evaluate(x), p.radial_profile(r))


def test_support_radius_covers_tail():
    p = gaussian()
    assert abs(p.radial_profile(p.support_radius)) <= p.tail_tol * 1.01
