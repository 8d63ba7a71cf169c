import math

import numpy as np
import pytest

from fanoguide.errors import DomainError, NotFoundError
from fanoguide.fem import DiscreteField, mass_inner
from fanoguide.geometry import straight_geometry
from fanoguide.mesh import generate_mesh
from fanoguide.modal import build_mode_set
from fanoguide.trapped import (
    TRAPPED_TOL,
    ZeroDecayAmplitudeError,
    extract_K,
    frequency_family,
    lshape_length_family,
    locate_trapped,
    mode_m_residual,
)

from conftest import COARSE_LSHAPE_H, K0_LSHAPE

LAM0 = K0_LSHAPE ** 2


def l2(fld_values, like):
    f = DiscreteField(fld_values, like.mesh, like.lam)
    return math.sqrt(mass_inner(f, f).real)


class TestLShape:
    def test_located_length(self, coarse_lshape_trapped):
        rec = coarse_lshape_trapped
        assert rec.param_name == "L"
        assert abs(rec.param_value - 2.5524) < 2e-3
        assert rec.residual <= TRAPPED_TOL
        assert rec.lambda0 == pytest.approx(LAM0)
        assert rec.m == 1 and rec.alpha_m == pytest.approx(math.sqrt(math.pi ** 2 - LAM0))

    def test_record_invariants(self, coarse_lshape_trapped):
        rec = coarse_lshape_trapped
        assert rec.K > 0
        u = rec.field.values
        # phase fixed: the field is real up to solver noise
        assert np.max(np.abs(u.imag)) < 1e-6 * np.max(np.abs(u.real))
        assert rec.null_residual < 1e-4
        assert set(rec.summary()) >= {"lambda0", "L", "K", "residual"}

    def test_sharp_localization(self, coarse_lshape_trapped):
        rec = coarse_lshape_trapped
        family = lshape_length_family(COARSE_LSHAPE_H, K0_LSHAPE)
        for dp in (-0.05, 0.05):
            mesh, lam = family(rec.param_value + dp)
            assert mode_m_residual(mesh, lam)[0] > 10 * max(rec.residual, 1e-12)
            assert mode_m_residual(mesh, lam)[0] > 10 * TRAPPED_TOL

    def test_augmented_solution_is_trapped_mode(self, coarse_lshape_trapped):
        rec = coarse_lshape_trapped
        Z = rec.augmented_fields[-1]
        expected = 1j / rec.K * math.sqrt(2 / rec.alpha_m) * rec.field.values
        # global phase alignment (the identity fixes it, so this is close to 1)
        c = np.vdot(expected, Z.values) / np.vdot(expected, expected)
        assert abs(abs(c) - 1) < 2e-3
        assert l2(Z.values - c * expected, Z) / l2(Z.values, Z) < 2e-3
        assert abs(rec.S.S_mm + 1) < TRAPPED_TOL

    def test_scan_table_recorded(self, coarse_lshape_trapped):
        scan = coarse_lshape_trapped.scan
        assert len(scan) == 11
        assert scan[0][0] == pytest.approx(2.5) and scan[-1][0] == pytest.approx(2.6)

    def test_edge_minimum_is_not_found(self):
        family = lshape_length_family(COARSE_LSHAPE_H, K0_LSHAPE)
        with pytest.raises(NotFoundError) as info:
            locate_trapped(family, (2.3, 2.45), n_scan=5)
        assert len(info.value.table) == 5

    def test_empty_window(self):
        with pytest.raises(DomainError):
            locate_trapped(lshape_length_family(COARSE_LSHAPE_H), (2.6, 2.5))


class TestDisk:
    def test_located_frequency(self, coarse_disk_trapped):
        rec = coarse_disk_trapped
        assert rec.param_name == "k"
        assert abs(rec.param_value - 2.7403) < 5e-3
        assert rec.residual <= TRAPPED_TOL and rec.K > 0


def test_straight_strip_has_no_trapped_mode():
    family = frequency_family(generate_mesh(straight_geometry(), 0.1))
    with pytest.raises(NotFoundError):
        locate_trapped(family, (2.0, 3.0), n_scan=7)


@pytest.fixture(scope="module")
def fine_strip():
    return generate_mesh(straight_geometry(), 0.0125)


class TestExtractK:
    def test_analytic_field(self, fine_strip):
        lam = LAM0
        al = build_mode_set(lam).alpha_m
        x, y = fine_strip.nodes.T
        fld = DiscreteField((3.0 * np.exp(-al * x) * np.cos(math.pi * y)).astype(complex), fine_strip, lam)
        assert abs(extract_K(fld) - 3.0) < 1e-8
        assert abs(extract_K(fld, d=0.75) - 3.0) < 1e-8

    def test_orthogonal_profile_flagged(self, fine_strip):
        lam = LAM0
        beta = math.sqrt(4 * math.pi ** 2 - lam)
        x, y = fine_strip.nodes.T
        fld = DiscreteField((np.exp(-beta * x) * np.cos(2 * math.pi * y)).astype(complex), fine_strip, lam)
        with pytest.raises(ZeroDecayAmplitudeError):
            extract_K(fld)

    def test_abscissa_invariance_coarse(self, coarse_lshape_trapped):
        u = coarse_lshape_trapped.field
        K = [extract_K(u, d=d) for d in (1.25, 1.75)]
        assert abs(K[0] - K[1]) < 1e-4 * K[0]


def test_decay_amplitude_abscissa_invariance(desk_lshape_trapped):
    u = desk_lshape_trapped.field
    K1, K2 = extract_K(u, d=1.25), extract_K(u, d=1.75)
    print(f"K(1.25)={K1:.10f} K(1.75)={K2:.10f}")
    assert abs(K1 - K2) <= 1e-6
