"""Counting, regularity at zero, embedded-spectrum and homotopy scans."""

import numpy as np
import pytest

from katospec.potentials import Potential, Primitive
from katospec.grids import build_support_grid
from katospec.birman_schwinger import (assemble, count_negative_bound_states,
                                       embedded_scan, homotopy_scan,
                                       regular_at_zero)
from katospec.free_kernels import SpectralParameter

from oracles import fd_negative_spectrum

FIXTURES = [("square_well", -1.0), ("square_well", -4.0),
            ("square_well", -10.0), ("gaussian", -1.0), ("gaussian", -8.0)]


def make(shape, amp):
    p = Potential(primitives=[Primitive(shape, amp, 1.0)])
    return p, build_support_grid(p)


@pytest.mark.parametrize("shape,amp", FIXTURES)
def test_count_matches_fd_oracle(shape, amp):
    p, g = make(shape, amp)
    oracle = fd_negative_spectrum(lambda r: p.radial_profile(r), l_max=3)
    assert count_negative_bound_states(p, g) == len(oracle)


@pytest.mark.parametrize("shape,amp", FIXTURES)
def test_homotopy_crossings_equal_count(shape, amp):
    p, g = make(shape, amp)
    crossings = homotopy_scan(p, g)
    assert len(crossings) == count_negative_bound_states(p, g)
    assert all(0 < t <= 1.0 for t in crossings)


def test_regular_at_zero_fixtures():
    for shape, amp in FIXTURES:
        p, g = make(shape, amp)
        assert regular_at_zero(p, g)["regular"]


def test_threshold_square_well_not_regular():
    # V0 = pi^2/4 puts the s-wave zero-energy resonance exactly at threshold
    v0 = (np.pi / 2.0) ** 2
    p, g = make("square_well", -v0)
    rep = regular_at_zero(p, g)
    assert not rep["regular"]
    assert rep["sigma_min"] < 0.012


def test_embedded_scan_no_embedded_eigenvalues():
    for shape, amp in (("square_well", -10.0), ("gaussian", -8.0)):
        p, g = make(shape, amp)
        scan = embedded_scan(p, g, 25.0, 40)
        assert min(e["sigma_min"] for e in scan) > 1e-2


def test_assemble_spectral_radius_scales_with_amplitude():
    # same grid for both so the discretizations differ only by the factor
    p2, g2 = make("gaussian", -1.0)
    p1 = Potential(primitives=[Primitive("gaussian", -0.5, 1.0)])
    eta = SpectralParameter(0.0 + 1e-9j)
    b1 = assemble(p1, g2, eta)
    b2 = assemble(p2, g2, eta)
    assert b2.spectral_radius() == pytest.approx(2 * b1.spectral_radius(),
                                                 rel=1e-6)
