"""Bump-family construction tests: profile quadrature, separation, counting."""

import math

import numpy as np
import pytest

from tvgpucb.adversary import (
    AdversaryFamily,
    FamilyConfigError,
    build_adversary,
    bump_profile,
    bump_spectrum,
    find_half_height_radius,
    member_count,
)

# Feasible construction scale used throughout: small amplitude, sub-unit
# lengthscale, narrow domain.
GAMMA, BOUND, LENGTH = 9e-5, 5.0, 0.15
DOMAIN = (0.0, 1.0)


@pytest.fixture(scope="module")
def family():
    return build_adversary(1, GAMMA, BOUND, LENGTH, domain=DOMAIN)


class TestProfile:
    def test_spectrum_support(self):
        xi = np.array([-1.5, -1.0, 0.0, 0.5, 1.0, 2.0])
        H = bump_spectrum(xi)
        assert np.all(H[np.abs(xi) >= 1] == 0.0)
        assert H[2] == pytest.approx(math.exp(-1.0))
        assert 0 < H[3] < H[2]

    def test_peak_positive_and_even(self):
        h = bump_profile([0.0, 1.3, -1.3])
        assert h[0] > 0
        assert h[1] == pytest.approx(h[2], rel=1e-12)
        assert h[1] < h[0]

    def test_half_height_radius_properties(self):
        zeta = find_half_height_radius(LENGTH)
        h0 = float(bump_profile(0.0)[0])
        xs = np.arange(zeta, 20 * LENGTH, LENGTH / 100)
        assert np.all(bump_profile(xs) < h0 / 2)

    def test_radius_needs_wide_enough_scan(self):
        with pytest.raises(FamilyConfigError):
            find_half_height_radius(0.05)


class TestMemberCount:
    def test_independent_calculator(self):
        rng = np.random.default_rng(0)
        zeta = find_half_height_radius(LENGTH)
        h0 = float(bump_profile(0.0)[0])
        for _ in range(10):
            gamma = float(rng.uniform(1e-8, 1e-4))
            B = float(rng.uniform(1.0, 10.0))
            l = float(rng.uniform(0.15, 0.3))
            arg = B * (2 * math.pi * l * l) ** 0.25 * h0 / (2 * gamma)
            ref = math.floor(math.sqrt(math.log(arg)) / (l * math.pi * zeta))
            assert member_count(gamma, B, l, zeta, h0) == ref

    def test_large_gamma_gives_zero(self):
        zeta = find_half_height_radius(LENGTH)
        h0 = float(bump_profile(0.0)[0])
        assert member_count(10.0, 1.0, LENGTH, zeta, h0) == 0


class TestFamily:
    def test_peak_height(self, family):
        for m in range(family.count):
            lo, hi = family.cell_bounds(m)
            xs = np.linspace(lo, hi, 2000)
            peak = float(np.max(family.member_values(m, xs)))
            assert peak == pytest.approx(2 * GAMMA, rel=0.01)

    def test_cross_cell_separation(self, family):
        for m in range(family.count):
            for other in range(family.count):
                if other == m:
                    continue
                lo, hi = family.cell_bounds(other)
                xs = np.linspace(lo, hi, 2000)
                assert float(np.max(family.member_values(m, xs))) <= GAMMA * (1 + 1e-9)

    def test_peaks_at_cell_centers(self, family):
        for m in range(family.count):
            lo, hi = family.cell_bounds(m)
            assert family.peaks[m] == pytest.approx((lo + hi) / 2)

    def test_norm_estimate_within_bound(self, family):
        for m in range(family.count):
            assert family.rkhs_norm_estimate(m) <= BOUND * 1.05

    def test_count_matches_formula(self, family):
        assert family.count == member_count(
            GAMMA, BOUND, LENGTH, family.zeta, family.h0
        )
        assert family.count >= 2

    def test_member_index_guard(self, family):
        with pytest.raises(IndexError):
            family.member_values(family.count, 0.0)


class TestErrors:
    def test_gamma_too_large(self):
        with pytest.raises(FamilyConfigError):
            build_adversary(1, 0.5, BOUND, LENGTH, domain=DOMAIN)

    def test_only_one_dimension(self):
        with pytest.raises(ValueError):
            build_adversary(2, GAMMA, BOUND, LENGTH, domain=DOMAIN)

    def test_bad_domain(self):
        with pytest.raises(ValueError):
            build_adversary(1, GAMMA, BOUND, LENGTH, domain=(1.0, 0.0))
