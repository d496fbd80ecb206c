import math

import pytest
from hypothesis import given, strategies as st

from aquid import units


ROW1_YAML = """
trap:
  V0_nK: 82.0
  r0_um: 3.85
  w_um: 1.7065
barrier:
  Vb_nK: 42.0
  lambda_b_um: 1.26118
condensate:
  omega_z_rad_s: 1866.1061700000927
  N: 3000
numerics:
  grid_points_per_axis: 129
  box_half_length_um: 10.676
  dt_imag_s: 1.0e-05
  dt_real_s: 2.0e-05
  convergence_tol: 1.0e-06
"""


class TestConstants:
    def test_hbar_over_kB(self):
        c = units.constants()
        assert c.hbar_over_kB == pytest.approx(7.6382e-3, rel=1e-4)

    def test_hbar2_over_2mkB(self):
        # CODATA arithmetic with m = 86.909180520 u
        c = units.constants()
        assert c.hbar2_over_2mkB == pytest.approx(2.790772, rel=1e-5)

    def test_scattering_length(self):
        c = units.constants()
        assert c.scattering_length_a == pytest.approx(5.238e-3, rel=1e-3)
        assert c.scattering_length_a == pytest.approx(98.98 * c.bohr_radius, rel=1e-12)

    def test_hbar_over_m_consistency(self):
        c = units.constants()
        # hbar/m = 2 (hbar^2/2m kB)/(hbar/kB)
        assert c.hbar_over_m == pytest.approx(
            2.0 * c.hbar2_over_2mkB / c.hbar_over_kB, rel=1e-14)


class TestCoupling2d:
    def test_reference_value(self):
        g = units.coupling_2d(units.constants(), 2.0 * math.pi * 297.0)
        assert g.g2d == pytest.approx(0.2341, rel=2e-3)

    def test_sqrt_scaling(self):
        c = units.constants()
        wz = 2.0 * math.pi * 297.0
        assert units.coupling_2d(c, 4.0 * wz).g2d == pytest.approx(
            2.0 * units.coupling_2d(c, wz).g2d, rel=1e-12)

    def test_noninteracting_limit(self):
        c = units.constants()
        c0 = units.PhysConsts(c.hbar_over_kB, c.hbar2_over_2mkB, 0.0,
                              c.bohr_radius, c.mass_m)
        assert units.coupling_2d(c0, 100.0).g2d == 0.0

    def test_rejects_bad_omega(self):
        with pytest.raises(ValueError):
            units.coupling_2d(units.constants(), 0.0)

    @given(st.floats(min_value=1.0, max_value=1e5),
           st.floats(min_value=1.0, max_value=1e5))
    def test_monotone_in_omega_z(self, w1, w2):
        c = units.constants()
        g1 = units.coupling_2d(c, w1).g2d
        g2 = units.coupling_2d(c, w2).g2d
        assert (g1 <= g2) == (w1 <= w2) or math.isclose(g1, g2)


class TestF0OneDim:
    @pytest.mark.parametrize("r0,ref", [(3.85, 7.773), (4.82, 4.960), (8.00, 1.800)])
    def test_tabulated_values(self, r0, ref):
        # the tabulated 1D estimates carry a ~1% constant-set uncertainty
        assert units.f0_one_dim(units.constants(), r0) == pytest.approx(ref, rel=1.5e-2)

    def test_inverse_square_scaling(self):
        c = units.constants()
        assert units.f0_one_dim(c, 2.0 * 3.85) == pytest.approx(
            units.f0_one_dim(c, 3.85) / 4.0, rel=1e-12)


class TestScenario:
    def test_load_row1(self):
        cfg = units.load_scenario(ROW1_YAML)
        assert cfg.V0 == 82.0 and cfg.Vb == 42.0
        assert cfg.r0 == 3.85 and cfg.w == 1.7065
        assert cfg.N == 3000 and cfg.grid_points_per_axis == 129

    def test_round_trip(self):
        cfg = units.load_scenario(ROW1_YAML)
        assert units.load_scenario(units.serialize_scenario(cfg)) == cfg

    def test_rejects_odd_N(self):
        with pytest.raises(units.ScenarioError, match="even"):
            units.load_scenario(ROW1_YAML.replace("N: 3000", "N: 3001"))

    def test_rejects_barrier_above_depth(self):
        with pytest.raises(units.ScenarioError, match="barrier below ring depth"):
            units.load_scenario(ROW1_YAML.replace("Vb_nK: 42.0", "Vb_nK: 90.0"))

    def test_rejects_even_grid(self):
        with pytest.raises(units.ScenarioError, match="odd"):
            units.load_scenario(
                ROW1_YAML.replace("grid_points_per_axis: 129",
                                  "grid_points_per_axis: 128"))

    def test_rejects_missing_field(self):
        with pytest.raises(units.ScenarioError, match="w_um"):
            units.load_scenario(ROW1_YAML.replace("  w_um: 1.7065\n", ""))

    def test_rejects_garbage(self):
        with pytest.raises(units.ScenarioError):
            units.load_scenario("trap: [not, a, mapping]")
