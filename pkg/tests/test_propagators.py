"""Spectral quadrature, kernel slices, free identities, error contracts."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from katospec.potentials import Potential, Primitive
from katospec.grids import build_support_grid
from katospec.free_kernels import heat0, poisson0, br0_kernel_sep
from katospec.bound_states import find_bound_states
from katospec.propagators import (DensityTable, build_spectral_quadrature,
                                  bochner_riesz_pc, density_table, heat_pc,
                                  heat_weight_density, k2_split,
                                  outside_cone_formula, point_spectrum_kernel,
                                  poisson_pc, poisson_weight_density, wave_T)
from katospec.bounds_harness import separation_pairs
from katospec.errors import (InsideCone, NonPositiveTime, TruncationTooTight,
                             UnderresolvedOscillation)

from oracles import br0_direct


@pytest.fixture(scope="module")
def free():
    p = Potential(primitives=[])
    return p, build_support_grid(p)


@pytest.fixture(scope="module")
def sw4():
    p = Potential(primitives=[Primitive("square_well", -4.0, 1.0)])
    g = build_support_grid(p)
    return p, g, find_bound_states(p, g, 2.5)


def test_quadrature_nodes_and_weights():
    sq = build_spectral_quadrature(eta_max=10.0, osc_scale=2.0)
    assert np.all(np.diff(sq.eta_nodes) > 0)
    assert sq.weights.sum() == pytest.approx(10.0, rel=1e-12)
    assert sq.eta_nodes[0] > 0 and sq.eta_nodes[-1] < 10.0


def test_quadrature_refinement_shrinks_panels():
    sq = build_spectral_quadrature(eta_max=10.0, osc_scale=2.0)
    ref = sq.refined(2.0)
    assert ref.panel_width == pytest.approx(sq.panel_width / 2.0)
    assert len(ref.eta_nodes) > len(sq.eta_nodes)


def test_quadrature_end_grading():
    sq = build_spectral_quadrature(eta_max=2.0, end_graded=True)
    assert sq.metadata["end_graded"]
    # last panels shrink geometrically toward eta_max
    gaps = np.diff(sq.eta_nodes)[-3:]
    assert np.all(np.diff(gaps) < 0)


def test_free_heat_and_poisson_identity(free):
    p, g = free
    sq = build_spectral_quadrature(eta_max=20.0, osc_scale=2.0)
    pairs = separation_pairs([0.5, 2.0])
    for t in (0.25, 1.0):
        kh = heat_pc(p, g, sq, t, pairs)
        kp = poisson_pc(p, g, sq, t, pairs)
        for j, (x, y) in enumerate(kh.geom.pairs):
            assert kh.values[j] == pytest.approx(heat0(t, x, y), rel=1e-4)
            assert kp.values[j] == pytest.approx(poisson0(t, x, y), rel=1e-4)


def test_free_bochner_riesz_identity(free):
    p, g = free
    pairs = separation_pairs([2.0, 5.0])
    ks = bochner_riesz_pc(p, g, None, 0.5, 4.0, pairs)
    for j, sep in enumerate(ks.geom.sep):
        assert ks.values[j] == pytest.approx(
            float(br0_kernel_sep(0.5, 4.0, sep)), rel=1e-6)
        assert ks.values[j] == pytest.approx(br0_direct(0.5, 4.0, sep),
                                             rel=1e-6)


@pytest.mark.parametrize("t", [0.4, 1.3])
def test_weight_densities_subordinate_correctly(t):
    # int_0^inf wd(tau) sin(tau eta)/eta dtau reproduces the semigroup symbol
    eta = 1.7
    wp = poisson_weight_density(t)
    val, _ = quad(lambda tau: wp(tau) * math.sin(tau * eta) / eta, 0, np.inf,
                  limit=400)
    assert val == pytest.approx(math.exp(-t * eta), rel=1e-6)
    wh = heat_weight_density(t)
    val, _ = quad(lambda tau: wh(tau) * math.sin(tau * eta) / eta, 0, np.inf,
                  limit=400)
    assert val == pytest.approx(math.exp(-t * eta * eta), rel=1e-6)


def test_nonpositive_time_rejected(free):
    p, g = free
    sq = build_spectral_quadrature(eta_max=10.0)
    pairs = separation_pairs([1.0])
    with pytest.raises(NonPositiveTime):
        heat_pc(p, g, sq, 0.0, pairs)
    with pytest.raises(NonPositiveTime):
        poisson_pc(p, g, sq, -1.0, pairs)


def test_truncation_guard_for_tiny_time(free):
    p, g = free
    sq = build_spectral_quadrature(eta_max=30.0)
    with pytest.raises(TruncationTooTight):
        heat_pc(p, g, sq, 1e-4, separation_pairs([1.0]))


def test_underresolved_oscillation_guard(free):
    p, g = free
    sq = build_spectral_quadrature(eta_max=10.0, osc_scale=1.0)
    with pytest.raises(UnderresolvedOscillation):
        wave_T(p, g, sq, 50.0, separation_pairs([1.0]))


def test_density_table_is_cached(free):
    p, g = free
    sq = build_spectral_quadrature(eta_max=10.0)
    pairs = separation_pairs([1.0, 2.0])
    t1 = density_table(p, g, sq, pairs)
    t2 = density_table(p, g, sq, pairs)
    assert isinstance(t1, DensityTable)
    assert t1 is t2


def test_kernel_slice_csv_rows(free):
    p, g = free
    sq = build_spectral_quadrature(eta_max=10.0)
    ks = heat_pc(p, g, sq, 1.0, separation_pairs([0.5, 1.0, 2.0]))
    rows = list(ks.to_csv_rows())
    assert len(rows) == 3
    assert rows[0][5] == "heat_pc"
    assert [r[0] for r in rows] == [0.5, 1.0, 2.0]


def test_outside_cone_requires_spacelike_separation(sw4):
    _, _, states = sw4
    x = np.array([0.0, 0.0, 1.0])
    y = np.array([0.0, 0.0, -1.0])
    with pytest.raises(InsideCone):
        outside_cone_formula(states, 2.5, x, y)
    val = outside_cone_formula(states, 1.0, x, y)
    assert math.isfinite(val) and val != 0.0


def test_point_spectrum_kernel_positive_on_diagonal(sw4):
    _, _, states = sw4
    x = np.array([0.0, 0.0, 0.5])
    val = point_spectrum_kernel(states, lambda lam: 1.0, x, x)
    assert val.imag == pytest.approx(0.0, abs=1e-14)
    assert val.real > 0


def test_k2_split_delta_validation(sw4):
    _, _, states = sw4
    x = np.array([0.0, 0.0, 1.0])
    y = np.array([0.0, 0.0, -1.0])
    for delta in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            k2_split(states, poisson_weight_density(1.0), delta, x, y)


def test_k2_small_time_approaches_negative_point_kernel(sw4):
    # as t -> 0 the Poisson-subordinated outside-cone part tends to
    # -P_p(x, y) with full weight
    _, _, states = sw4
    x = np.array([0.0, 0.0, 1.5])
    y = np.array([0.0, 0.0, -1.5])
    split = k2_split(states, poisson_weight_density(1e-3), 0.5, x, y)
    target = -point_spectrum_kernel(states, lambda lam: 1.0, x, y).real
    assert split["K2"] == pytest.approx(target, rel=2e-2)
    assert split["K20_bound"] > 0
