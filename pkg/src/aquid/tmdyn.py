"""Semiclassical two-mode dynamics of the double-junction ring.

State variables are the population imbalance Z between the upper and lower
half-ring modes and their phase difference phi; (N Z/2, phi) is a canonical
pair.  The per-particle energy landscape

    E_TM = N U_eff (1 + Z^2)/4 - K sqrt(1-Z^2) cos(phi)
           + (P_eff/4)(1-Z^2) cos(2 phi)

drives pendulum-like dynamics with a second harmonic from pair tunneling.
This module provides the modified equations of motion, a symplectic
integrator, stationary-point classification, the critical imbalance/current
formulas and the Sagnac interference decomposition of the junction currents.

All energies in nK, currents per particle in 1/s.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .units import constants

_HBAR = constants().hbar_over_kB  # nK s


@dataclass(frozen=True)
class TmParams:
    """Two-mode parameter set at one rotation frequency."""

    K: float       # nK, single-particle tunneling
    U_eff: float   # nK, calibrated on-site interaction
    P_eff: float   # nK, calibrated pair tunneling
    N: int

    def inside_central_interval(self) -> bool:
        return self.P_eff < 0 and abs(self.K) < abs(self.P_eff)


@dataclass(frozen=True)
class TmState:
    z: float
    phi: float
    t: float = 0.0

    def __post_init__(self):
        if abs(self.z) > 1.0:
            raise ValueError(f"|Z| must not exceed 1, got {self.z}")


def tm_energy(z: float, phi: float, p: TmParams) -> float:
    """Per-particle TM energy E_TM(Z, phi) in nK."""
    z2 = z * z
    return (p.N * p.U_eff * (1.0 + z2) / 4.0
            - p.K * math.sqrt(max(1.0 - z2, 0.0)) * math.cos(phi)
            + 0.25 * p.P_eff * (1.0 - z2) * math.cos(2.0 * phi))


def tm_rhs(state: TmState, p: TmParams) -> tuple[float, float]:
    """Modified TM equations: (dZ/dt, dphi/dt) in (1/s, rad/s).

    hbar dZ/dt = -2K sqrt(1-Z^2) sin(phi) + P_eff (1-Z^2) sin(2 phi)
    hbar dphi/dt = N U_eff Z
    """
    z, phi = state.z, state.phi
    if abs(z) >= 1.0:
        raise ValueError("tm_rhs is singular at |Z| = 1")
    root = math.sqrt(1.0 - z * z)
    zdot = (-2.0 * p.K * root * math.sin(phi)
            + p.P_eff * (1.0 - z * z) * math.sin(2.0 * phi)) / _HBAR
    phidot = p.N * p.U_eff * z / _HBAR
    return zdot, phidot


def _canonical_rhs(z: float, phi: float, p: TmParams) -> tuple[float, float]:
    # exact Hamiltonian flow of E_TM; keeps the integrator energy-conserving
    root = math.sqrt(1.0 - z * z)
    zdot = (-2.0 * p.K * root * math.sin(phi)
            + p.P_eff * (1.0 - z * z) * math.sin(2.0 * phi)) / _HBAR
    phidot = (p.N * p.U_eff * z
              + 2.0 * p.K * z * math.cos(phi) / root
              - p.P_eff * z * math.cos(2.0 * phi)) / _HBAR
    return zdot, phidot


@dataclass(frozen=True)
class TmTrajectory:
    t: np.ndarray
    z: np.ndarray
    phi: np.ndarray        # unwrapped
    energy: np.ndarray     # nK per particle

    def energy_drift(self) -> float:
        scale = max(abs(self.energy[0]), 1e-30)
        return float(np.max(np.abs(self.energy - self.energy[0])) / scale)


def integrate_tm(state0: TmState, p: TmParams, t_final: float,
                 dt: float | None = None) -> TmTrajectory:
    """Integrate the canonical TM flow with the implicit midpoint rule.

    The midpoint rule is symplectic, so the energy error stays bounded at
    O(dt^2) for arbitrarily long runs.  The default step resolves the
    small-oscillation period T0 by a factor 500.
    """
    if dt is None:
        kp = p.K - p.P_eff
        if p.N * p.U_eff * kp > 0:
            t0 = math.pi * _HBAR / math.sqrt(p.N * p.U_eff * kp / 2.0)
            dt = min(t0 / 500.0, 1e-4)
        else:
            dt = 1e-4
    steps = max(int(round(t_final / dt)), 1)
    t = np.empty(steps + 1)
    zs = np.empty(steps + 1)
    phis = np.empty(steps + 1)
    z, phi = state0.z, state0.phi
    t[0], zs[0], phis[0] = state0.t, z, phi
    for i in range(1, steps + 1):
        zm, pm = z, phi
        for _ in range(50):
            fz, fp = _canonical_rhs(zm, pm, p)
            zn = z + 0.5 * dt * fz
            pn = phi + 0.5 * dt * fp
            if abs(zn) >= 1.0:
                raise ValueError(
                    f"step rejected at t={t[i-1]:.6g}: |Z| reached 1")
            if abs(zn - zm) < 1e-15 and abs(pn - pm) < 1e-15:
                zm, pm = zn, pn
                break
            zm, pm = zn, pn
        z = 2.0 * zm - z
        phi = 2.0 * pm - phi
        t[i] = state0.t + i * dt
        zs[i], phis[i] = z, phi
    energy = np.array([tm_energy(zz, pp, p) for zz, pp in zip(zs, phis)])
    return TmTrajectory(t=t, z=zs, phi=phis, energy=energy)


# ---------------------------------------------------------------------------
# stationary points and critical values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StationaryPoint:
    phi: float
    kind: str  # "minimum" or "saddle"


@dataclass(frozen=True)
class StationaryPointReport:
    points: tuple[StationaryPoint, ...]

    def kind_at(self, phi: float, tol: float = 1e-9) -> str:
        for pt in self.points:
            if abs(pt.phi - phi) < tol:
                return pt.kind
        raise KeyError(f"no stationary point at phi = {phi}")


def classify_stationary(p: TmParams) -> StationaryPointReport:
    """Z = 0 stationary points of E_TM and their character.

    phi = 0 is a minimum iff K > P_eff, phi = pi iff K < -P_eff; the pair at
    +-arccos(K/P_eff) exists iff |K/P_eff| < 1 and its character follows the
    sign of the phase curvature V'' = (P_eff^2 - K^2)/P_eff.
    """
    pts = [
        StationaryPoint(0.0, "minimum" if p.K > p.P_eff else "saddle"),
        StationaryPoint(math.pi, "minimum" if p.K < -p.P_eff else "saddle"),
        StationaryPoint(-math.pi, "minimum" if p.K < -p.P_eff else "saddle"),
    ]
    if p.P_eff != 0.0 and abs(p.K / p.P_eff) < 1.0:
        phi_s = math.acos(p.K / p.P_eff)
        kind = "minimum" if (p.P_eff**2 - p.K**2) / p.P_eff > 0 else "saddle"
        pts += [StationaryPoint(phi_s, kind), StationaryPoint(-phi_s, kind)]
    return StationaryPointReport(points=tuple(pts))


@dataclass(frozen=True)
class CriticalImbalance:
    inside: bool
    zc_zero: float | None   # 0-mode value (None if that mode is not a minimum)
    zc_pi: float | None

    @property
    def single(self) -> float:
        vals = [v for v in (self.zc_zero, self.zc_pi) if v is not None]
        if len(vals) != 1:
            raise ValueError("both modes present; use zc_zero / zc_pi")
        return vals[0]


def critical_imbalance(p: TmParams) -> CriticalImbalance:
    """Largest imbalance of bounded (librating) motion around each minimum.

    Outside the central interval Z_c = sqrt(8|K|/(N U_eff)) for the single
    minimum; inside it Z_c = sqrt(-2 (K -+ P_eff)^2/(P_eff N U_eff)) per mode.
    """
    if p.inside_central_interval():
        zc0 = math.sqrt(-2.0 * (p.K - p.P_eff) ** 2 / (p.P_eff * p.N * p.U_eff))
        zcpi = math.sqrt(-2.0 * (p.K + p.P_eff) ** 2 / (p.P_eff * p.N * p.U_eff))
        return CriticalImbalance(inside=True, zc_zero=zc0, zc_pi=zcpi)
    if p.P_eff >= 0 and abs(p.K) < abs(p.P_eff):
        raise ValueError("inside-interval branch requires P_eff < 0")
    zc = math.sqrt(8.0 * abs(p.K) / (p.N * p.U_eff))
    if p.K > 0:
        return CriticalImbalance(inside=False, zc_zero=zc, zc_pi=None)
    return CriticalImbalance(inside=False, zc_zero=None, zc_pi=zc)


@dataclass(frozen=True)
class JunctionCurrentParams:
    I0_per_N: float  # s^-1
    alpha0: float


def current_params(K0: float, P_eff0: float, N: int) -> JunctionCurrentParams:
    """Zero-rotation junction amplitudes: I0/N = K0/(2 hbar), alpha0 = -P_eff0/(2 K0)."""
    if K0 <= 0:
        raise ValueError(f"K0 must be positive, got {K0}")
    return JunctionCurrentParams(I0_per_N=K0 / (2.0 * _HBAR),
                                 alpha0=-P_eff0 / (2.0 * K0))


def junction_current(phi_k: float, jp: JunctionCurrentParams) -> float:
    """Current-phase relation I_k/N = (I0/N)[sin(phi_k) + alpha0 sin(2 phi_k)]."""
    return jp.I0_per_N * (math.sin(phi_k) + jp.alpha0 * math.sin(2.0 * phi_k))


def _extremal_cosines(ratio: float) -> tuple[float, float]:
    # stationary points of a sin(phi) + b sin(2 phi), ratio = a/(4 b)
    root = math.sqrt(0.5 + ratio * ratio)
    return ratio + root, ratio - root


@dataclass(frozen=True)
class CriticalCurrent:
    inside: bool
    ic_zero: float | None   # per particle, s^-1
    ic_pi: float | None

    @property
    def single(self) -> float:
        vals = [v for v in (self.ic_zero, self.ic_pi) if v is not None]
        if len(vals) != 1:
            raise ValueError("both modes present; use ic_zero / ic_pi")
        return vals[0]


def critical_current_gbh(p: TmParams) -> CriticalCurrent:
    """Critical junction current from the extremal phases of the modified
    Z equation at Z = 0.

    The two candidate phases cos(phi) = K/(4 P_eff) +- sqrt(1/2 + (K/4P_eff)^2)
    split between the 0- and pi-wells; inside the central interval both are
    valid, outside only the global maximum survives.
    """
    if p.P_eff == 0.0:
        # sinusoidal junction: max of |2K sin(phi)|/2 at phi = pi/2
        ic = abs(p.K) / _HBAR
        if p.K > 0:
            return CriticalCurrent(inside=False, ic_zero=ic, ic_pi=None)
        return CriticalCurrent(inside=False, ic_zero=None, ic_pi=ic)

    def zdot_mag(c: float) -> float:
        s = math.sqrt(max(1.0 - c * c, 0.0))
        return abs(-2.0 * p.K * s + 2.0 * p.P_eff * s * c) / _HBAR

    cands = [c for c in _extremal_cosines(p.K / (4.0 * p.P_eff)) if abs(c) <= 1.0]
    if not cands:
        raise ValueError("no real extremal phase")
    if p.inside_central_interval():
        # the candidate inside the 0-well (cos phi > K/P_eff) belongs to it
        ic0 = icpi = None
        for c in cands:
            val = zdot_mag(c) / 2.0
            if c > p.K / p.P_eff:
                ic0 = val
            else:
                icpi = val
        return CriticalCurrent(inside=True, ic_zero=ic0, ic_pi=icpi)
    ic = max(zdot_mag(c) for c in cands) / 2.0
    if p.K > 0:
        return CriticalCurrent(inside=False, ic_zero=ic, ic_pi=None)
    return CriticalCurrent(inside=False, ic_zero=None, ic_pi=ic)


def critical_current_sagnac(jp: JunctionCurrentParams,
                            f_over_f0: float) -> tuple[float, float]:
    """Critical current from the Sagnac interference picture.

    Returns (exact-in-alpha0, alpha0 -> 0 approximation), both per particle.
    The Sagnac phase xi = 2 n pi - pi f/f0 modulates the junction harmonics:
    hbar dZ/dt = -4 hbar (I0/N)[cos(pi f/f0) sin phi
                               + alpha0 cos(2 pi f/f0) sin 2 phi].
    """
    a = math.cos(math.pi * f_over_f0)
    b = jp.alpha0 * math.cos(2.0 * math.pi * f_over_f0)

    def mag(c: float) -> float:
        s = math.sqrt(max(1.0 - c * c, 0.0))
        return abs(a * s + 2.0 * b * s * c)

    if b == 0.0:
        best = abs(a)
    else:
        best = max(mag(c) for c in _extremal_cosines(a / (4.0 * b)) if abs(c) <= 1.0)
    exact = 2.0 * jp.I0_per_N * best
    approx = 2.0 * jp.I0_per_N * abs(a)
    return exact, approx


def interference_decomposition(phi: float, xi: float, jp: JunctionCurrentParams,
                               n: int = 0) -> tuple[float, float]:
    """Per-junction currents (I_l, I_r) at phase difference phi and Sagnac
    phase xi; phi_r = xi + phi - 2 n pi, phi_l = xi - phi."""
    return (junction_current(xi - phi, jp),
            junction_current(xi + phi - 2.0 * math.pi * n, jp))


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

def write_critical_curves(path, samples, jp: JunctionCurrentParams) -> None:
    """critical_curves.csv from (f_over_f0, TmParams) samples; jp carries the
    zero-rotation junction amplitudes for the Sagnac columns.  Modes without a
    minimum at a given frequency leave their columns empty."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["f_over_f0", "Zc_0", "Zc_pi", "Ic_0_perN", "Ic_pi_perN",
                     "Ic_sagnac_perN", "Ic_sagnac_alpha0_perN"])
        for x, p in samples:
            zc = critical_imbalance(p)
            ic = critical_current_gbh(p)
            sag = critical_current_sagnac(jp, x)
            wr.writerow([f"{x:.8g}",
                         _fmt(zc.zc_zero), _fmt(zc.zc_pi),
                         _fmt(ic.ic_zero), _fmt(ic.ic_pi),
                         f"{sag[0]:.8g}", f"{sag[1]:.8g}"])


def write_interference(path, f_samples, jp: JunctionCurrentParams) -> None:
    """interference.csv: left and (negated) right junction currents at the
    critical phase of the Sagnac picture, winding n = 0."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["f_over_f0", "Il_perN", "minus_Ir_perN"])
        for x in f_samples:
            a = math.cos(math.pi * x)
            b = jp.alpha0 * math.cos(2.0 * math.pi * x)
            if b == 0.0:
                phi_c = math.pi / 2.0
            else:
                cands = [c for c in _extremal_cosines(a / (4.0 * b)) if abs(c) <= 1.0]
                phi_c = math.acos(max(
                    cands,
                    key=lambda c: abs(a * math.sqrt(1 - c * c)
                                      + 2.0 * b * math.sqrt(1 - c * c) * c)))
            il, ir = interference_decomposition(phi_c, -math.pi * x, jp)
            wr.writerow([f"{x:.8g}", f"{il:.8g}", f"{-ir:.8g}"])


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.8g}"
