import cmath
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fanoguide.errors import DomainError
from fanoguide.fano import (
    FanoCoefficients,
    FastResonanceWarning,
    assemble_coefficients,
    compute_ell_m,
    compute_t_and_ell_row,
    fano_coefficients,
    fano_limit_matrix,
    fit_im_spp_mm,
    mode_m_coefficient,
    monomode_circle,
    mu_tilde,
    orthogonalize_zeta,
    scattering_solutions,
)
from fanoguide.fem import DiscreteField, line_projection, tail_inner
from fanoguide.geometry import ProfileH, bump_profile
from fanoguide.modal import ScatteringMatrix

from conftest import K0_LSHAPE

reals = st.floats(-1e3, 1e3)


@pytest.fixture(scope="module")
def zetas(coarse_lshape_trapped):
    return orthogonalize_zeta(scattering_solutions(coarse_lshape_trapped), coarse_lshape_trapped)


@pytest.fixture(scope="module")
def coeffs(coarse_lshape_trapped, coarse_lshape_profile):
    return fano_coefficients(coarse_lshape_trapped, coarse_lshape_profile)


def synthetic(ell_row=0.3 + 0.1j, t=0.8 - 0.2j, s=None):
    """Monomode coefficients; by default s is the value unitarity forces,
    s = conj(w)/w with w = ell_m t - ell_row."""
    ell_m = -2.0
    if s is None:
        w = ell_m * t - ell_row
        s = np.conj(w) / w
    return FanoCoefficients(ell_m, np.array([t]), np.array([ell_row]), 3.0, 1.5, np.array([[s]]), 6.0)


class TestEllM:
    def test_zero_profile(self, coarse_lshape_trapped, coarse_lshape_profile):
        H0 = ProfileH(coarse_lshape_profile.arc, lambda s: 0 * s, "zero")
        assert compute_ell_m(coarse_lshape_trapped, H0) == 0.0

    def test_linearity(self, coarse_lshape_trapped, coarse_lshape_profile):
        H = coarse_lshape_profile
        H2 = ProfileH(H.arc, lambda s: 2 * H(s), "double")
        a, b = compute_ell_m(coarse_lshape_trapped, H), compute_ell_m(coarse_lshape_trapped, H2)
        assert b == pytest.approx(2 * a, rel=1e-14)

    def test_lengthening_lowers_frequency(self, coarse_lshape_trapped, coarse_lshape_profile):
        # a longer branch lowers the trapped eigenvalue
        assert compute_ell_m(coarse_lshape_trapped, coarse_lshape_profile) < 0

    def test_nonconstant_profile(self, coarse_lshape_trapped, coarse_lshape_profile):
        arc = coarse_lshape_profile.arc
        bump = bump_profile(arc, 0.0, arc.length)
        val = compute_ell_m(coarse_lshape_trapped, bump)
        assert np.isfinite(val) and abs(val) < abs(compute_ell_m(coarse_lshape_trapped, coarse_lshape_profile))


class TestZeta:
    def test_packet_component_removed(self, zetas, coarse_lshape_trapped):
        for z in zetas:
            assert abs(mode_m_coefficient(z, coarse_lshape_trapped.m)) <= 1e-8

    def test_mode_m_absent_inside_guide(self, zetas):
        # after removal the slowest remaining harmonic is m+1, so the mode-m
        # coefficient vanishes on every vertical line beyond the junction
        for x0 in (1.5, 2.0):
            assert abs(line_projection(zetas[0], x0, 2)[1]) < 1e-5

    def test_idempotent(self, zetas, coarse_lshape_trapped):
        again = orthogonalize_zeta(zetas, coarse_lshape_trapped)
        assert np.max(np.abs(again[0].values - zetas[0].values)) < 1e-12

    def test_recovers_from_added_trapped_mode(self, zetas, coarse_lshape_trapped):
        u = coarse_lshape_trapped.field
        shifted = DiscreteField(zetas[0].values + 3 * u.values, u.mesh, u.lam)
        back = orthogonalize_zeta([shifted], coarse_lshape_trapped)[0]
        assert np.max(np.abs(back.values - zetas[0].values)) < 1e-8 * np.max(np.abs(zetas[0].values))

    def test_branch_resonator_solution_is_cosine(self, zetas, coarse_lshape_trapped):
        # the branch width pi/k0 makes cos(k0 x) an exact Neumann solution:
        # w_0^- + w_0^+ = 2 (2 alpha_0)^(-1/2) cos(k0 x)
        x = zetas[0].mesh.nodes[:, 0]
        oracle = 2 * (2 * K0_LSHAPE) ** -0.5 * np.cos(K0_LSHAPE * x)
        assert np.max(np.abs(zetas[0].values - oracle)) < 2e-3 * np.max(np.abs(oracle))

    def test_needs_decay_amplitude(self, coarse_lshape_trapped, zetas):
        from dataclasses import replace
        with pytest.raises(DomainError):
            orthogonalize_zeta(zetas, replace(coarse_lshape_trapped, K=0.0))


class TestTAndEllRow:
    def test_self_overlap_is_one(self, coarse_lshape_trapped, coarse_lshape_profile):
        rec = coarse_lshape_trapped
        t, ell = compute_t_and_ell_row(rec, [rec.field], coarse_lshape_profile)
        assert abs(t[0] - 1) < 1e-10
        assert abs(ell[0] - compute_ell_m(rec, coarse_lshape_profile)) < 1e-10

    def test_zero_profile(self, coarse_lshape_trapped, zetas, coarse_lshape_profile):
        H0 = ProfileH(coarse_lshape_profile.arc, lambda s: 0 * s, "zero")
        _, ell = compute_t_and_ell_row(coarse_lshape_trapped, zetas, H0)
        assert np.all(ell == 0)

    def test_tail_correction_bound(self, coarse_lshape_trapped, zetas, coarse_lshape_profile):
        rec = coarse_lshape_trapped
        geo = rec.field.mesh.meta["geometry"]
        bound = math.exp(-2 * rec.alpha_m * (geo["R_trunc"] - geo["d"]))
        assert abs(tail_inner(rec.field, rec.field)) <= bound
        t, _ = compute_t_and_ell_row(rec, zetas, coarse_lshape_profile)
        assert abs(tail_inner(rec.field, zetas[0])) <= bound * abs(t[0])

    def test_cosine_oracle_gives_zero_coupling(self, coeffs):
        # integrating by parts against cos(k0 x) leaves [u sin(k0 x)] at the
        # branch walls, which vanishes
        assert abs(coeffs.ell_row[0]) < 1e-4 * abs(coeffs.ell_m)


class TestCoefficients:
    def test_identity_re_spp(self, coeffs):
        sp = coeffs.sprime_mrow(coeffs.ell_m)
        assert abs(coeffs.re_spp_mm - np.sum(np.abs(sp) ** 2) / 2) < 1e-10
        assert coeffs.re_spp_mm >= 0

    def test_packet_derivative_vanishes_at_center(self, coeffs):
        assert coeffs.sprime_mm(coeffs.ell_m) == 0

    def test_half_guide_reflection_is_one(self, coeffs):
        assert abs(coeffs.s[0, 0] - 1) < 2e-3

    def test_unitarity_consistency(self, coeffs):
        sp = coeffs.sprime_mrow(coeffs.ell_m)[0]
        assert abs(sp ** 2 / abs(sp) ** 2 - coeffs.s[0, 0]) < 2e-3

    def test_values_round_trip_to_dict(self, coeffs):
        d = coeffs.to_dict()
        assert d["ell_m"] == coeffs.ell_m and d["re_spp_mm"] == coeffs.re_spp_mm
        assert d["K"] > 0

    def test_center(self, coeffs):
        assert coeffs.center(0.05) == coeffs.lambda0 + 0.05 * coeffs.ell_m

    def test_fast_resonance_flag(self, coarse_lshape_trapped):
        s = ScatteringMatrix(np.array([[1.0 + 0j]]), coarse_lshape_trapped.lambda0)
        with pytest.warns(FastResonanceWarning):
            assemble_coefficients(coarse_lshape_trapped, [0.5], -4.0, [-2.0], s)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assemble_coefficients(coarse_lshape_trapped, [0.5], -4.0, [0.0], s)

    @given(reals)
    def test_packet_derivative_imaginary(self, lam_prime):
        c = synthetic()
        assert c.sprime_mm(lam_prime).real == 0

    @given(st.complex_numbers(max_magnitude=10), st.complex_numbers(max_magnitude=10), st.floats(-3, 3))
    def test_identity_synthetic(self, ell, t, ph):
        c = synthetic(ell, t, cmath.exp(1j * ph))
        sp = c.sprime_mrow(c.ell_m)
        assert abs(c.re_spp_mm - np.sum(np.abs(sp) ** 2) / 2) < 1e-10 * max(1.0, c.re_spp_mm)


class TestLimit:
    @pytest.mark.parametrize("mu", [1e6, -1e6])
    def test_far_detuning_returns_background(self, coeffs, mu):
        out = fano_limit_matrix(coeffs, mu, 0.3)
        assert np.max(np.abs(out.entries - coeffs.s)) < 1e-5

    @settings(max_examples=100)
    @given(reals, st.floats(-5, 5))
    def test_unit_modulus(self, mu, im):
        c = synthetic()
        assert abs(abs(fano_limit_matrix(c, mu, im).entries[0, 0]) - 1) < 1e-12

    @settings(max_examples=50)
    @given(reals, st.floats(-5, 5))
    def test_matrix_agrees_with_circle(self, mu, im):
        c = synthetic()
        a = fano_limit_matrix(c, mu, im).entries[0, 0]
        b = monomode_circle(c, mu_tilde(c, mu, im))
        assert abs(a - b) < 1e-12

    def test_winding_counter_clockwise(self, coeffs):
        mus = np.concatenate([-np.logspace(6, -6, 2000), np.logspace(-6, 6, 2000)])
        z = np.array([fano_limit_matrix(coeffs, mu, 0.0).entries[0, 0] for mu in mus])
        ph = np.unwrap(np.angle(z / coeffs.s[0, 0]))
        assert ph[-1] - ph[0] == pytest.approx(2 * math.pi, abs=1e-3)

    def test_circle_special_values(self):
        c = synthetic()
        s = c.s[0, 0]
        assert abs(monomode_circle(c, 0.0) + s) < 1e-14
        assert abs(monomode_circle(c, 1e12) - s) < 1e-10
        assert abs(monomode_circle(c, -1e12) - s) < 1e-10

    def test_circle_random(self):
        c = synthetic()
        rng = np.random.default_rng(7)
        for mt in rng.standard_normal(100) * 10:
            assert abs(abs(monomode_circle(c, mt)) - 1) < 1e-14

    def test_circle_monomode_only(self):
        c = FanoCoefficients(0.0, np.ones(2), np.zeros(2), 1.0, 1.0, np.eye(2), 30.0)
        with pytest.raises(DomainError):
            monomode_circle(c, 0.0)


class TestFitImaginary:
    def test_synthetic_sample(self):
        eps = 0.05
        S_mm = -1 + eps ** 2 * (0.02 - 0.13j)
        assert fit_im_spp_mm(synthetic(), eps, S_mm) == pytest.approx(-0.13)

    def test_zero_epsilon(self):
        with pytest.raises(DomainError):
            fit_im_spp_mm(synthetic(), 0.0, -1)
