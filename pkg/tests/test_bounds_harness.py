"""Domination-bound harness: report shape, free-case ratios, preconditions."""

import math

import numpy as np
import pytest

from katospec.potentials import Potential, Primitive
from katospec.grids import build_support_grid
from katospec.propagators import build_spectral_quadrature
from katospec.bound_states import find_bound_states
from katospec.bounds_harness import (br_decay_slope, check_heat_domination,
                                     check_k2_decay, check_poisson_domination,
                                     l2_br_norm, separation_pairs, tau_T_mass)
from katospec.errors import PreconditionViolated


@pytest.fixture(scope="module")
def free():
    p = Potential(primitives=[])
    return p, build_support_grid(p)


@pytest.fixture(scope="module")
def sw4():
    p = Potential(primitives=[Primitive("square_well", -4.0, 1.0)])
    g = build_support_grid(p)
    return p, g, find_bound_states(p, g, 2.5)


def test_separation_pairs_are_antipodal():
    pairs = separation_pairs([1.0, 3.0])
    for (x, y), sep in zip(pairs, (1.0, 3.0)):
        assert np.linalg.norm(x - y) == pytest.approx(sep)
        assert np.allclose(x, -y)


def test_free_poisson_ratios_are_unity(free):
    p, g = free
    sq = build_spectral_quadrature(eta_max=20.0, osc_scale=2.0)
    rep = check_poisson_domination(p, g, sq, [0.5, 1.0],
                                   separation_pairs([1.0, 3.0]))
    assert rep.theorem_id == "bound1"
    assert rep.passed
    assert max(abs(e["ratio"] - 1.0) for e in rep.ratio_grid) < 1e-6
    assert rep.fitted_constant == pytest.approx(1.0, abs=1e-6)


def test_free_heat_skips_sub_floor_kernel_values(free):
    p, g = free
    sq = build_spectral_quadrature(eta_max=20.0, osc_scale=2.0)
    rep = check_heat_domination(p, g, sq, [0.1],
                                separation_pairs([1.0, 6.0]))
    # heat0(0.1) at separation 6 is ~1e-40, below any achievable quadrature
    # accuracy; the harness must skip it rather than certify a garbage ratio
    assert rep.metadata["n_below_floor"] == 1
    assert len(rep.ratio_grid) == 1
    assert rep.passed


def test_bound1_precondition_rejects_bound_states(sw4):
    p, g, _ = sw4
    sq = build_spectral_quadrature(eta_max=20.0, osc_scale=2.0)
    with pytest.raises(PreconditionViolated):
        check_poisson_domination(p, g, sq, [1.0], separation_pairs([1.0]),
                                 mode="bound1")
    with pytest.raises(PreconditionViolated):
        check_heat_domination(p, g, sq, [1.0], separation_pairs([1.0]),
                              mode="gauss1")


def test_k2_decay_vacuous_without_bound_states(free):
    p, g = free
    rep = check_k2_decay(p, g, [], "poisson", eps=0.1)
    assert rep.passed
    assert rep.metadata["vacuous"]
    assert rep.ratio_grid == []


def test_k2_decay_validates_inputs(sw4):
    p, g, states = sw4
    with pytest.raises(PreconditionViolated):
        check_k2_decay(p, g, states, "elliptic", eps=0.1)
    with pytest.raises(PreconditionViolated):
        check_k2_decay(p, g, states, "heat", eps=0.0)


def test_k2_decay_square_well_poisson(sw4):
    p, g, states = sw4
    rep = check_k2_decay(p, g, states, "poisson", eps=0.1,
                         t_list=[1.0, 2.0], pairs=separation_pairs([1.0, 2.0]))
    assert rep.theorem_id == "bound2"
    assert rep.passed
    assert math.isfinite(rep.fitted_constant) and rep.fitted_constant > 0


def test_br_decay_slope_free_case(free):
    p, g = free
    rep = br_decay_slope(p, g, None, 0.0, 4.0, n_sep=32, n_bins=5)
    assert rep.theorem_id == "br_decay"
    assert rep.passed
    slope = rep.fitted_constant
    assert abs(slope - rep.metadata["target_slope"]) <= 0.3


def test_br_decay_slope_rejects_bad_alpha(free):
    p, g = free
    with pytest.raises(PreconditionViolated):
        br_decay_slope(p, g, None, 1.5, 4.0)


def test_l2_br_contraction_square_well(sw4):
    p, g, _ = sw4
    rep = l2_br_norm(p, g, None, 0.0, 1.0)
    assert rep.theorem_id == "l2_br"
    assert rep.passed
    assert rep.fitted_constant <= 1.0 + 1e-3


def test_l2_br_rejects_negative_alpha(sw4):
    p, g, _ = sw4
    with pytest.raises(PreconditionViolated):
        l2_br_norm(p, g, None, -0.5, 4.0)


def test_tau_t_mass_free_case(free):
    p, g = free
    sq = build_spectral_quadrature(eta_max=20.0, osc_scale=2.0)
    rep = tau_T_mass(p, g, sq, separation_pairs([1.0, 2.0]),
                     tau_max=3.0, n_tau=90)
    assert rep.theorem_id == "tauT_mass"
    assert rep.passed
    # the free measure tau T0(tau) has mass 1/(4 pi) per pair; the smeared
    # absolute mass overshoots but stays within a small factor of it
    ref = 1.0 / (4 * math.pi)
    for e in rep.ratio_grid:
        assert 0.5 * ref < e["tau_mass"] < 5.0 * ref
        assert 0.5 * ref < e["sep_mass"] < 5.0 * ref


def test_report_serialization_key(free):
    p, g = free
    sq = build_spectral_quadrature(eta_max=10.0, osc_scale=1.0)
    rep = check_poisson_domination(p, g, sq, [1.0], separation_pairs([1.0]))
    blob = rep.to_json()
    assert blob["pass"] is True
    assert set(blob) == {"theorem_id", "ratio_grid", "fitted_constant",
                         "refinement_drift", "pass", "metadata"}
