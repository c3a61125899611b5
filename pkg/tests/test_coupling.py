"""Coupling model tests: flux-quadrature oracle, ordering theorem, calibration."""

import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from twinsim import coupling as cp

EX = cp.ExcitationModel()
GEOM = cp.TwinGeometry(cp.TagGeometry())


def flux_quadrature_inductance(loop_width, gap, loop_length):
    """Independent oracle: integrate the line's field mu0/(2*pi*rho) over
    the rectangle numerically instead of using the closed-form log."""
    val, _err = dblquad(
        lambda rho, x: cp.MU0 / (2.0 * math.pi * rho),
        0.0, loop_width,
        lambda x: gap, lambda x: gap + loop_length,
    )
    return val


class TestRayleighLength:
    def test_hand_value(self):
        # 2 * 0.16^2 / 0.3277
        assert cp.rayleigh_length(0.16, 0.3277) == pytest.approx(0.15624, abs=1e-4)

    def test_trivial(self):
        assert cp.rayleigh_length(1.0, 2.0) == 1.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            cp.rayleigh_length(0.16, 0.0)
        with pytest.raises(ValueError):
            cp.rayleigh_length(-1.0, 0.3)


class TestMutualInductance:
    def test_hand_value(self):
        # (mu0 * 5mm / 2pi) * ln(11) = 2.3979 nH
        m = cp.mutual_inductance_line_loop(0.005, 0.001, 0.010)
        assert m == pytest.approx(2.3979e-9, rel=1e-4)

    def test_quadrature_oracle_sweep(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            a, gap, b = rng.uniform(1e-4, 0.1, size=3)
            closed = cp.mutual_inductance_line_loop(a, gap, b)
            oracle = flux_quadrature_inductance(a, gap, b)
            assert closed == pytest.approx(oracle, rel=1e-3)

    def test_short_loop_limit(self):
        m = cp.mutual_inductance_line_loop(0.005, 0.001, 1e-12)
        assert m == pytest.approx(0.0, abs=1e-17)

    def test_linear_in_width(self):
        m1 = cp.mutual_inductance_line_loop(0.005, 0.001, 0.010)
        m2 = cp.mutual_inductance_line_loop(0.010, 0.001, 0.010)
        assert m2 == pytest.approx(2.0 * m1, rel=1e-12)

    def test_decreasing_in_gap(self):
        gaps = np.linspace(0.5e-3, 50e-3, 40)
        vals = [cp.mutual_inductance_line_loop(0.005, g, 0.01) for g in gaps]
        assert all(x > y for x, y in zip(vals, vals[1:]))
        assert all(v > 0 for v in vals)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            cp.mutual_inductance_line_loop(0.005, 0.0, 0.01)


class TestInducedCurrent:
    def test_zero_mutual(self):
        assert cp.induced_current(0.0, 1e-3, 2 * math.pi * 915e6, 50.0) == 0.0

    def test_hand_value(self):
        m = cp.mutual_inductance_line_loop(0.005, 0.001, 0.010)
        i = cp.induced_current(m, 1e-3, 2 * math.pi * 915e6, 50.0)
        assert i == pytest.approx(2.7573e-4, rel=1e-3)

    def test_aiding_flips_sign(self):
        m = 2.4e-9
        opp = cp.induced_current(m, 1e-3, 5.7e9, 50.0, aiding=False)
        aid = cp.induced_current(m, 1e-3, 5.7e9, 50.0, aiding=True)
        assert aid == -opp
        assert abs(aid) == abs(opp)

    def test_rejects_zero_resistance(self):
        with pytest.raises(ValueError):
            cp.induced_current(2.4e-9, 1e-3, 5.7e9, 0.0)


def random_shadowing_geometries(n, seed):
    """Random valid shadowing layouts with all dimensions in (0.1 mm, 100 mm)."""
    rng = np.random.default_rng(seed)
    geoms = []
    while len(geoms) < n:
        a, b = rng.uniform(1e-4, 0.1, size=2)
        r = rng.uniform(1e-4, b)        # loop gap never exceeds loop length
        l = rng.uniform(r, 0.1)         # separation at least the loop gap
        geoms.append(cp.TwinGeometry(
            cp.TagGeometry(loop_width=a, loop_length=b, loop_gap=r),
            separation=l))
    return geoms


class TestOrderingTheorem:
    def test_rear_current_below_fore_10k(self):
        for geom in random_shadowing_geometries(10_000, seed=7):
            k1, k2 = cp.twin_coupling_terms(geom, EX, 1e-3)
            assert k2 > k1 >= -1e-18
            rear, fore = cp.tag_currents(geom, EX, 20.0, 2.0)
            assert rear.magnitude < fore.magnitude

    def test_limit_gap_at_large_separation(self):
        geom = GEOM.with_separation(GEOM.tag.loop_length * 1e4)
        assert cp.differential_coupling(geom) <= 2.1e-4

    def test_gap_decreasing_to_zero_in_separation(self):
        seps = np.geomspace(GEOM.tag.loop_gap, 100.0, 60)
        gaps = [cp.differential_coupling(GEOM.with_separation(s)) for s in seps]
        assert all(x > y for x, y in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-3

    def test_rear_term_vanishes_at_minimum_separation(self):
        # separation == loop_gap: the two line terms cancel exactly in k1
        tag = cp.TagGeometry(loop_length=0.01, loop_gap=0.003)
        geom = cp.TwinGeometry(tag, separation=0.003)
        k1, k2 = cp.twin_coupling_terms(geom, EX, 1e-3)
        assert k1 == pytest.approx(0.0, abs=1e-15)
        assert k2 > 0.0


class TestTagCurrents:
    def test_non_shadowing_placements_equal(self):
        for pl in (cp.Placement.E, cp.Placement.F, cp.Placement.G, cp.Placement.H):
            geom = cp.TwinGeometry(cp.TagGeometry(), placement=pl)
            rear, fore = cp.tag_currents(geom, EX, 20.0, 2.0)
            assert rear.magnitude == fore.magnitude

    def test_shadowing_strictly_unequal(self):
        rear, fore = cp.tag_currents(GEOM, EX, 20.0, 2.0)
        assert rear.magnitude < fore.magnitude

    def test_power_range_enforced(self):
        with pytest.raises(ValueError):
            cp.tag_currents(GEOM, EX, 9.0, 2.0)
        with pytest.raises(ValueError):
            cp.tag_currents(GEOM, EX, 33.0, 2.0)


class TestStructureObliviousBaseline:
    def test_always_equal(self):
        for p_tx in (10.0, 20.0, 32.5):
            for d in (0.5, 2.0, 5.0):
                i1, i2 = cp.structure_oblivious_currents(p_tx, d, EX, GEOM)
                assert i1 == i2

    def test_vanishes_with_power(self):
        i1a, _ = cp.structure_oblivious_currents(10.0, 1.0, EX, GEOM)
        i1b, _ = cp.structure_oblivious_currents(10.0, 100.0, EX, GEOM)
        assert i1b < i1a
        assert i1b < 1e-3

    def test_contrast_with_structure_aware(self):
        # same placement where the structure-aware model splits the pair
        i1, i2 = cp.structure_oblivious_currents(20.0, 2.0, EX, GEOM)
        rear, fore = cp.tag_currents(GEOM, EX, 20.0, 2.0)
        assert i1 == i2
        assert rear.magnitude != fore.magnitude


class TestMinActivationPower:
    def test_calibrated_gap_at_reference_point(self):
        fore = cp.min_activation_power(GEOM, EX, 2.0, "fore")
        rear = cp.min_activation_power(GEOM, EX, 2.0, "rear")
        assert 7.0 <= rear - fore <= 13.0

    def test_zero_threshold_hits_grid_floor(self):
        ex0 = cp.ExcitationModel(i_threshold=0.0, i_mutual=0.0)
        assert cp.min_activation_power(GEOM, ex0, 2.0, "fore") == 10.0
        assert cp.min_activation_power(GEOM, ex0, 2.0, "rear") == 10.0

    def test_unreachable_far_away(self):
        assert cp.min_activation_power(GEOM, EX, 50.0, "rear") is None

    def test_monotone_in_distance(self):
        dists = np.linspace(0.5, 5.5, 20)
        rears = [cp.min_activation_power(GEOM, EX, d, "rear") for d in dists]
        assert all(r is not None for r in rears)
        assert all(x <= y for x, y in zip(rears, rears[1:]))

    def test_monotone_in_link_gain(self):
        # better link (higher received power) never raises the requirement
        gains = np.linspace(0.0, 12.0, 10)
        mins = []
        for g in gains:
            ex = cp.ExcitationModel(gain_reader_dbi=g)
            mins.append(cp.min_activation_power(GEOM, ex, 2.0, "rear"))
        assert all(x >= y for x, y in zip(mins, mins[1:]))

    def test_bad_role(self):
        with pytest.raises(ValueError):
            cp.min_activation_power(GEOM, EX, 2.0, "front")


class TestCriticalWindow:
    def test_reference_window_nonempty(self):
        w = cp.critical_window(GEOM, EX, 2.0)
        assert w is not None
        lo, hi = w
        assert lo < hi

    def test_window_empty_beyond_cutoff_separation(self):
        for d in (0.015, 0.016, 0.018, 0.020, 0.026):
            assert cp.critical_window(GEOM.with_separation(d), EX, 2.0) is None

    def test_window_nonempty_below_cutoff(self):
        for d in (0.006, 0.008, 0.010, 0.012):
            assert cp.critical_window(GEOM.with_separation(d), EX, 2.0) is not None

    def test_window_empty_out_of_reach(self):
        assert cp.critical_window(GEOM, EX, 6.5) is None

    def test_window_empty_non_shadowing(self):
        geom = cp.TwinGeometry(cp.TagGeometry(), placement=cp.Placement.F)
        assert cp.critical_window(geom, EX, 2.0) is None

    def test_width_non_increasing_in_separation(self):
        widths = []
        for d in (0.006, 0.008, 0.010, 0.012):
            lo, hi = cp.critical_window(GEOM.with_separation(d), EX, 2.0)
            widths.append(hi - lo)
        assert all(x >= y for x, y in zip(widths, widths[1:]))


class TestCalibration:
    def test_shipped_defaults_reproduce(self):
        ex = cp.calibrate_excitation()
        assert ex.i_threshold == pytest.approx(EX.i_threshold, rel=1e-12)
        assert ex.i_mutual == pytest.approx(EX.i_mutual, rel=1e-12)
        assert ex.coupling_gate == EX.coupling_gate

    def test_reach_boundary_near_target(self):
        # last reachable distance for the rear tag sits at 5.8 m +- 0.5 m
        dists = np.arange(4.0, 7.01, 0.1)
        reach = [d for d in dists
                 if cp.min_activation_power(GEOM, EX, float(d), "rear") is not None]
        assert 5.3 <= max(reach) <= 6.3

    def test_infeasible_gap_target_rejected(self):
        with pytest.raises(ValueError):
            cp.calibrate_excitation(gap_target_db=40.0)


class TestGeometryValidation:
    def test_rejects_nonpositive_dims(self):
        with pytest.raises(ValueError):
            cp.TagGeometry(loop_width=0.0)
        with pytest.raises(ValueError):
            cp.TagGeometry(frequency=-1.0)

    def test_rejects_gap_beyond_length(self):
        with pytest.raises(ValueError):
            cp.TagGeometry(loop_length=0.005, loop_gap=0.006)

    def test_rejects_separation_below_gap(self):
        with pytest.raises(ValueError):
            cp.TwinGeometry(cp.TagGeometry(), separation=0.001)

    def test_phasor_magnitude(self):
        p = cp.PhasorCurrent(3.0, 4.0, 1.0)
        assert p.magnitude == 5.0
