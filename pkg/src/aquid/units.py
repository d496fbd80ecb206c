"""Unit system, physical constants and scenario configuration.

Working units throughout the package: energies are E/k_B in nK, lengths in
micrometres, times in seconds, frequencies in Hz.  Planck's constant only ever
appears as hbar/k_B (nK s).  The atomic species is fixed to 87Rb.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import yaml
from scipy import constants as _codata

RB87_MASS_U = 86.909180520  # atomic mass of 87Rb in u
SCATTERING_LENGTH_IN_A0 = 98.98


class ScenarioError(ValueError):
    """Raised when a scenario document fails to parse or violates an invariant."""


@dataclass(frozen=True)
class PhysConsts:
    """CODATA-derived constants in the package unit system."""

    hbar_over_kB: float      # nK s
    hbar2_over_2mkB: float   # nK um^2, for 87Rb
    scattering_length_a: float  # um
    bohr_radius: float       # um
    mass_m: float            # kg, kept for current formulas

    @property
    def hbar_over_m(self) -> float:
        """hbar/m in um^2/s."""
        return 2.0 * self.hbar2_over_2mkB / self.hbar_over_kB


@dataclass(frozen=True)
class EffectiveCoupling:
    """Quasi-2D interaction coupling, multiplying N |psi|^2 in the GP equation."""

    g2d: float  # nK um^2


@dataclass(frozen=True)
class ScenarioConfig:
    """Trap, barrier and condensate parameters plus numerical controls."""

    V0: float                 # nK, ring depth
    r0: float                 # um, ring radius
    w: float                  # um, 1/e^2 ring width
    Vb: float                 # nK, barrier height
    lambda_b: float           # um, barrier 1/e width
    omega_z: float            # rad/s, vertical trap frequency
    N: int                    # particle count
    grid_points_per_axis: int
    box_half_length: float    # um
    dt_imag: float            # s
    dt_real: float            # s
    convergence_tol: float    # relative energy change per unit imaginary time, 1/s

    def validate(self) -> "ScenarioConfig":
        if not self.V0 > self.Vb > 0:
            raise ScenarioError(
                f"require V0 > Vb > 0 (barrier below ring depth); got V0={self.V0}, Vb={self.Vb}")
        if not self.r0 > self.w > 0:
            raise ScenarioError(
                f"require r0 > w > 0; got r0={self.r0}, w={self.w}")
        if self.N < 2 or self.N % 2 != 0:
            raise ScenarioError(
                f"N must be even and >= 2 (number-parity analysis); got N={self.N}")
        if self.grid_points_per_axis % 2 == 0:
            raise ScenarioError(
                f"grid_points_per_axis must be odd (centre point on axis); got {self.grid_points_per_axis}")
        for name in ("lambda_b", "omega_z", "box_half_length", "dt_imag", "dt_real",
                     "convergence_tol"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"{name} must be positive; got {getattr(self, name)}")
        return self


def constants() -> PhysConsts:
    """Fixed constant record for 87Rb in package units."""
    kB = _codata.k
    hbar = _codata.hbar
    m = RB87_MASS_U * _codata.u
    a0_um = _codata.physical_constants["Bohr radius"][0] * 1e6
    return PhysConsts(
        hbar_over_kB=hbar / kB * 1e9,
        hbar2_over_2mkB=hbar**2 / (2.0 * m * kB) * 1e21,
        scattering_length_a=SCATTERING_LENGTH_IN_A0 * a0_um,
        bohr_radius=a0_um,
        mass_m=m,
    )


def coupling_2d(consts: PhysConsts, omega_z: float) -> EffectiveCoupling:
    """Effective 2D coupling g = g3D sqrt(m omega_z / 2 pi hbar), in nK um^2.

    g3D = 4 pi hbar^2 a / m; the vertical direction is integrated out over the
    harmonic-oscillator ground state of frequency omega_z.
    """
    if omega_z <= 0:
        raise ValueError(f"omega_z must be positive, got {omega_z}")
    g3d = 4.0 * math.pi * (2.0 * consts.hbar2_over_2mkB) * consts.scattering_length_a
    # m omega_z / (2 pi hbar) in um^-2:  omega_z / (2 pi * (hbar/m))
    inv_lz2 = omega_z / (2.0 * math.pi * consts.hbar_over_m)
    return EffectiveCoupling(g2d=g3d * math.sqrt(inv_lz2))


def f0_one_dim(consts: PhysConsts, r0: float) -> float:
    """One-dimensional estimate hbar/(2 pi m r0^2) of the current period, in Hz."""
    if r0 <= 0:
        raise ValueError(f"r0 must be positive, got {r0}")
    return consts.hbar_over_m / (2.0 * math.pi * r0**2)


_SCHEMA = {
    "trap": {"V0_nK": "V0", "r0_um": "r0", "w_um": "w"},
    "barrier": {"Vb_nK": "Vb", "lambda_b_um": "lambda_b"},
    "condensate": {"omega_z_rad_s": "omega_z", "N": "N"},
    "numerics": {
        "grid_points_per_axis": "grid_points_per_axis",
        "box_half_length_um": "box_half_length",
        "dt_imag_s": "dt_imag",
        "dt_real_s": "dt_real",
        "convergence_tol": "convergence_tol",
    },
}


def load_scenario(text: str) -> ScenarioConfig:
    """Parse a YAML scenario document and validate every invariant.

    The document must contain the sections trap/barrier/condensate/numerics
    with the exact keys of the schema; units are fixed by the key suffixes.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"scenario document does not parse: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping of sections")
    fields = {}
    for section, keys in _SCHEMA.items():
        if section not in doc or not isinstance(doc[section], dict):
            raise ScenarioError(f"missing section '{section}'")
        for key, field in keys.items():
            if key not in doc[section]:
                raise ScenarioError(f"missing field '{section}.{key}'")
            value = doc[section][key]
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ScenarioError(f"field '{section}.{key}' must be a number, got {value!r}")
            fields[field] = value
    fields["N"] = int(fields["N"])
    fields["grid_points_per_axis"] = int(fields["grid_points_per_axis"])
    return ScenarioConfig(**fields).validate()


def serialize_scenario(config: ScenarioConfig) -> str:
    """Emit the YAML document for a config; inverse of load_scenario."""
    values = asdict(config)
    doc = {section: {key: values[field] for key, field in keys.items()}
           for section, keys in _SCHEMA.items()}
    return yaml.safe_dump(doc, sort_keys=False)
