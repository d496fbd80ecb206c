"""GBH parameter extraction: mode construction, inversion formulas, curves.

The period-based calibration is validated in closed loop against the
semiclassical integrator: trajectories generated with known parameters must
invert back to those parameters.  The GP-coupled sweep itself is exercised by
the acceptance suite.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aquid import gbh, gp2d, qspec, tmdyn, units
from aquid.units import ScenarioConfig

C = units.constants()
HBAR = C.hbar_over_kB

CFG = ScenarioConfig(
    V0=82.0, r0=3.85, w=1.7065, Vb=42.0, lambda_b=1.26118,
    omega_z=2 * math.pi * 297.0, N=3000, grid_points_per_axis=65,
    box_half_length=10.676, dt_imag=2e-5, dt_real=2e-5,
    convergence_tol=1e-8).validate()
G2D = units.coupling_2d(C, CFG.omega_z).g2d

# junction parameters of the r0 = 3.85 um ring (Tables 2-3 scale)
K0 = 2 * HBAR * 0.39067
UEFF = 0.01435 * 0.8192
PEFF_MID = -0.0462 * 0.01549


def ring_halves(phase_pi: float = 0.0, tilt: float = 0.0):
    """Synthetic stationary 0- and pi-states from two half-ring blobs."""
    grid = gp2d.make_grid(CFG)
    x, y = grid.mesh()
    dx2 = grid.dx**2
    up = np.exp(-((x / 2.2) ** 2 + ((y - CFG.r0) / 1.1) ** 2))
    lo = np.exp(-((x / 2.2) ** 2 + ((y + CFG.r0) / 1.1) ** 2))
    up /= math.sqrt(float(np.sum(up**2)) * dx2)
    lo /= math.sqrt(float(np.sum(lo**2)) * dx2)
    p0 = (up + lo) / math.sqrt(2.0) * np.exp(1j * tilt)
    ppi = (up - lo) / math.sqrt(2.0) * np.exp(1j * phase_pi)

    def wrap(psi):
        op = gp2d.OrderParameter(grid, psi, 0.0)
        return gp2d.StationaryState(psi=op, mu=30.0, energy_per_particle=26.0,
                                    winding=0, phase_label="zero",
                                    residual=0.0, steps=0)

    return wrap(p0), wrap(ppi), up, lo


class TestLocalizedModes:
    @pytest.mark.parametrize("gamma", [0.0, 1.3, -2.9])
    def test_recovers_half_ring_modes(self, gamma):
        s0, spi, up, lo = ring_halves(phase_pi=gamma)
        m = gbh.localized_modes(s0, spi)
        dx2 = m.grid.dx**2
        assert abs(np.sum(np.conj(m.psi_u) * up)) * dx2 == pytest.approx(1.0, abs=1e-9)
        assert abs(np.sum(np.conj(m.psi_l) * lo)) * dx2 == pytest.approx(1.0, abs=1e-9)

    def test_global_phase_of_zero_state_irrelevant_to_density(self):
        s0, spi, up, lo = ring_halves(tilt=0.7)
        m = gbh.localized_modes(s0, spi)
        y = m.grid.axis[None, :]
        assert float(np.sum(y * np.abs(m.psi_u) ** 2)) > 0
        assert float(np.sum(y * np.abs(m.psi_l) ** 2)) < 0
        # orthonormal within the gp2d tolerance
        gp2d._check_orthonormal(m, m.grid.dx, tol=1e-6)

    def test_rejects_overlapping_states(self):
        s0, _, _, _ = ring_halves()
        with pytest.raises(gbh.GbhError, match="overlap"):
            gbh.localized_modes(s0, s0)

    def test_rejects_mixed_rotation_rates(self):
        s0, spi, _, _ = ring_halves()
        other = gp2d.StationaryState(
            psi=gp2d.OrderParameter(spi.psi.grid, spi.psi.psi, 1.0),
            mu=30.0, energy_per_particle=26.0, winding=0,
            phase_label="zero", residual=0.0, steps=0)
        with pytest.raises(gbh.GbhError, match="rotation rates"):
            gbh.localized_modes(s0, other)


class TestIntegrals:
    def setup_method(self):
        s0, spi, _, _ = ring_halves()
        self.modes = gbh.localized_modes(s0, spi)

    def test_matches_direct_quadrature(self):
        ints = gbh.gbh_integrals(self.modes, CFG, G2D)
        dx2 = self.modes.grid.dx**2
        u_direct = 0.5 * G2D * float(
            np.sum(np.abs(self.modes.psi_u) ** 4
                   + np.abs(self.modes.psi_l) ** 4)) * dx2
        assert ints.U == pytest.approx(u_direct, rel=1e-12)
        assert ints.U > 0

    def test_real_modes_have_p_equal_pprime(self):
        ints = gbh.gbh_integrals(self.modes, CFG, G2D)
        assert ints.P == pytest.approx(ints.P_prime, rel=1e-9)

    def test_pprime_bounds_p(self):
        m = gbh.LocalizedModes(grid=self.modes.grid,
                               psi_u=self.modes.psi_u * np.exp(0.5j),
                               psi_l=self.modes.psi_l, omega=0.0)
        ints = gbh.gbh_integrals(m, CFG, G2D)
        assert abs(ints.P) <= ints.P_prime * (1 + 1e-12)

    def test_k_split_arithmetic(self):
        assert gbh.k_from_energy_split(26.0, 26.012) == pytest.approx(0.006)
        assert gbh.k_from_energy_split(5.0, 5.0) == 0.0


class TestInversionFormulas:
    def test_u_eff_round_trip(self):
        k, p, n, ueff = K0, PEFF_MID, 3000, UEFF
        t0 = math.pi * HBAR / math.sqrt(n * ueff * (k - p) / 2.0)
        assert gbh.u_eff_from_period(t0, k, p, n) == pytest.approx(ueff, rel=1e-12)

    @given(st.floats(1e-4, 1e-1), st.floats(1e-4, 1e-1), st.floats(0.1, 10.0))
    @settings(max_examples=50, deadline=None)
    def test_u_eff_round_trip_property(self, k, ueff, scale):
        n = 2000
        p = -k * 0.3
        t0 = math.pi * HBAR * scale / math.sqrt(n * ueff * (k - p) / 2.0)
        back = gbh.u_eff_from_period(t0, k, p, n)
        assert back == pytest.approx(ueff / scale**2, rel=1e-9)

    def test_u_eff_guards(self):
        with pytest.raises(ValueError, match="positive"):
            gbh.u_eff_from_period(0.0, 1.0, 0.0, 100)
        with pytest.raises(ValueError, match="K must exceed P"):
            gbh.u_eff_from_period(1.0, 0.0, 1.0, 100)

    def test_p_eff_round_trip_both_modes(self):
        k, peff, n, ueff = 1e-5, PEFF_MID, 3000, UEFF
        tp = math.pi * HBAR / math.sqrt(n * ueff * (k - peff) / 2.0)
        tm_ = math.pi * HBAR / math.sqrt(n * ueff * (-k - peff) / 2.0)
        mean, spread = gbh.p_eff_from_periods(tp, tm_, k, ueff, n)
        assert mean == pytest.approx(peff, rel=1e-10)
        assert spread < 1e-12

    def test_p_eff_single_mode(self):
        k, peff, n, ueff = K0, PEFF_MID, 3000, UEFF
        tp = math.pi * HBAR / math.sqrt(n * ueff * (k - peff) / 2.0)
        mean, spread = gbh.p_eff_from_periods(tp, None, k, ueff, n)
        assert mean == pytest.approx(peff, rel=1e-10)
        assert spread == 0.0

    def test_p_eff_disagreement_flagged(self):
        k, peff, n, ueff = 1e-5, PEFF_MID, 3000, UEFF
        tp = math.pi * HBAR / math.sqrt(n * ueff * (k - peff) / 2.0)
        tm_ = math.pi * HBAR / math.sqrt(n * ueff * (-k - peff) / 2.0)
        with pytest.raises(gbh.GbhError, match="disagree"):
            gbh.p_eff_from_periods(tp * 1.2, tm_, k, ueff, n)

    def test_p_eff_requires_a_period(self):
        with pytest.raises(ValueError, match="at least one"):
            gbh.p_eff_from_periods(None, None, 1.0, 1.0, 100)

    def test_p_eff_sign_structure(self):
        # a finite period always implies P_eff below +-K of the seeded mode
        k, n, ueff = 5e-3, 3000, UEFF
        for t in (0.05, 0.5, 5.0):
            mean, _ = gbh.p_eff_from_periods(t, None, k, ueff, n)
            assert mean < k
            mean, _ = gbh.p_eff_from_periods(None, t, k, ueff, n)
            assert mean < -k


class TestClosedLoopAgainstIntegrator:
    """Generate Z(t) with known parameters, re-extract them via the
    measurement protocol (period_estimate + inversion formulas)."""

    def measured_period(self, params: tmdyn.TmParams, phi_min: float) -> float:
        ci = tmdyn.critical_imbalance(params)
        zc = (ci.zc_zero if phi_min == 0.0 else ci.zc_pi)
        if zc is None:
            zc = ci.single
        sign = 1.0 if phi_min == 0.0 else -1.0
        t_pred = math.pi * HBAR / math.sqrt(
            params.N * params.U_eff * (sign * params.K - params.P_eff) / 2.0)
        traj = tmdyn.integrate_tm(
            tmdyn.TmState(z=zc / 20.0, phi=phi_min, t=0.0), params,
            t_final=4.2 * t_pred)
        return gp2d.period_estimate(traj.t, traj.z)

    def test_u_eff_recovery(self):
        params = tmdyn.TmParams(K=K0, U_eff=UEFF, P_eff=1.59e-4, N=3000)
        t0 = self.measured_period(params, 0.0)
        back = gbh.u_eff_from_period(t0, params.K, params.P_eff, params.N)
        assert back == pytest.approx(UEFF, rel=5e-3)

    def test_p_eff_recovery_both_modes(self):
        params = tmdyn.TmParams(K=0.0, U_eff=UEFF, P_eff=PEFF_MID, N=3000)
        tp = self.measured_period(params, 0.0)
        tm_ = self.measured_period(params, math.pi)
        mean, spread = gbh.p_eff_from_periods(tp, tm_, params.K, UEFF, params.N)
        assert mean == pytest.approx(PEFF_MID, rel=5e-3)
        assert spread < 0.01 * abs(PEFF_MID)


def synthetic_curve(peff_const: float = PEFF_MID, n_samples: int = 9):
    xs = np.linspace(0.0, 1.0, n_samples)
    samples = tuple(
        gbh.GbhParams(f_over_f0=float(x), K=K0 * math.cos(math.pi * x),
                      U=UEFF / 0.8192, P=-0.04, P_prime=0.05,
                      U_eff=UEFF, P_eff=peff_const, N=3000)
        for x in xs)
    k_of = lambda x: K0 * math.cos(math.pi * x)
    lo, hi = gbh.central_interval_from_interps(k_of, lambda x: peff_const)
    return gbh.GbhCurve(samples=samples, central_interval=(lo, hi), f0=7.9650)


class TestCurve:
    def test_central_interval_analytic(self):
        curve = synthetic_curve()
        lo, hi = curve.central_interval
        p = abs(PEFF_MID)
        assert lo == pytest.approx(math.acos(p / K0) / math.pi, abs=1e-9)
        assert hi == pytest.approx(math.acos(-p / K0) / math.pi, abs=1e-9)
        assert lo + hi == pytest.approx(1.0, abs=1e-9)

    def test_central_interval_needs_negative_peff(self):
        with pytest.raises(gbh.GbhError, match="not negative"):
            gbh.central_interval_from_interps(
                lambda x: K0 * math.cos(math.pi * x), lambda x: 1e-4)

    def test_samples_must_increase(self):
        curve = synthetic_curve()
        with pytest.raises(ValueError, match="strictly increasing"):
            gbh.GbhCurve(samples=curve.samples[::-1],
                         central_interval=curve.central_interval, f0=7.9650)

    def test_param_curve_adapter(self):
        curve = synthetic_curve()
        pc = curve.param_curve()
        assert isinstance(pc, qspec.ParamCurve)
        assert pc.K(0.5) == pytest.approx(0.0, abs=1e-12)
        assert pc.K(0.25) == pytest.approx(K0 * math.cos(math.pi * 0.25), rel=1e-3)
        assert pc.P_eff(0.5) == pytest.approx(PEFF_MID)
        spec = pc.spectrum(0.5)
        q = spec.hamiltonian.q
        assert q == pytest.approx(3000 * abs(PEFF_MID) / (8 * UEFF), rel=1e-12)
        assert spec.energies[1] > spec.energies[0]

    def test_tm_params_accessor(self):
        s = synthetic_curve().samples[0]
        tp = s.tm()
        assert (tp.K, tp.U_eff, tp.P_eff, tp.N) == (s.K, s.U_eff, s.P_eff, s.N)


class TestArtifacts:
    def test_write_gbh_curve(self, tmp_path):
        curve = synthetic_curve()
        path = tmp_path / "gbh_curve.csv"
        gbh.write_gbh_curve(path, curve)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == ("f_over_f0,K_nK,U_nK,P_nK,Pprime_nK,Ueff_nK,"
                            "Peff_nK,in_central_interval")
        assert len(lines) == 1 + len(curve.samples)
        rows = [ln.split(",") for ln in lines[1:]]
        flags = [int(r[-1]) for r in rows]
        # only the samples nearest f0/2 sit inside the central interval
        assert flags[4] == 1 and flags[0] == 0 and flags[-1] == 0
        assert float(rows[4][1]) == pytest.approx(0.0, abs=1e-12)

    def test_summary_fields(self):
        curve = synthetic_curve()
        s = gbh.summary(curve)
        assert s["Ueff_over_U"] == pytest.approx(0.8192, rel=1e-12)
        assert s["delta_f_over_f0"] == pytest.approx(
            curve.central_interval[1] - curve.central_interval[0])
        assert s["f0_Hz"] == pytest.approx(7.9650)
        assert s["K0_nK"] == pytest.approx(K0)


class TestSweepGuards:
    def test_f_samples_must_include_midpoint(self):
        with pytest.raises(ValueError, match="include 0.5"):
            gbh.sweep(CFG, G2D, 7.9650, [0.0, 0.4, 0.6])

    def test_f_samples_must_lie_in_unit_interval(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            gbh.sweep(CFG, G2D, 7.9650, [-0.2, 0.5, 1.2])
