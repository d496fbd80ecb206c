"""Quantized phase Hamiltonian of the ring junction pair.

The semiclassical energy in the conjugate pair (phase difference, transferred
boson number) quantizes to a periodic Schroedinger operator

    H = -U_eff d^2/dphi^2 - N K cos(phi) + (N P_eff / 4) cos(2 phi)

acting on 2 pi periodic functions.  At K = 0 this is the Mathieu equation with
q = N |P_eff| / (8 U_eff); with both harmonics present it is a Whittaker-Hill
problem.  Everything here is solved in a trigonometric basis where the
cosine-like and sine-like sectors decouple, which keeps the eigenfunctions
real and the momentum-parity structure explicit.

Energies are in nK, currents per particle in 1/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eig_banded
from scipy.optimize import brentq

from .units import constants

_HBAR = constants().hbar_over_kB  # nK s


class SpectrumError(RuntimeError):
    pass


@dataclass(frozen=True)
class PhaseHamiltonian:
    """Banded plane-wave realization of the quantized phase Hamiltonian."""

    U_eff: float   # nK
    K: float       # nK
    P_eff: float   # nK
    N: int
    n_max: int     # plane waves e^{i n phi}, n in [-n_max, n_max]

    @property
    def q(self) -> float:
        """Mathieu parameter N |P_eff| / (8 U_eff)."""
        return self.N * abs(self.P_eff) / (8.0 * self.U_eff)

    def momentum_grid(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def dense(self) -> np.ndarray:
        """Full Hermitian matrix in the plane-wave basis (mostly for tests)."""
        n = self.momentum_grid()
        dim = n.size
        h = np.zeros((dim, dim))
        h[np.arange(dim), np.arange(dim)] = self.U_eff * n**2
        off1 = -self.N * self.K / 2.0
        off2 = self.N * self.P_eff / 8.0
        idx = np.arange(dim - 1)
        h[idx, idx + 1] = h[idx + 1, idx] = off1
        idx = np.arange(dim - 2)
        h[idx, idx + 2] = h[idx + 2, idx] = off2
        return h


def build_matrix(U_eff: float, K: float, P_eff: float, N: int, n_max: int = 32) -> PhaseHamiltonian:
    if n_max < 12:
        raise ValueError(f"n_max must be at least 12, got {n_max}")
    if U_eff <= 0:
        raise ValueError(f"U_eff must be positive, got {U_eff}")
    return PhaseHamiltonian(U_eff=U_eff, K=K, P_eff=P_eff, N=N, n_max=n_max)


# ---------------------------------------------------------------------------
# trigonometric-block eigensolver
#
# cos sector: basis 1/sqrt(2 pi), cos(m phi)/sqrt(pi), m = 1..n_max
# sin sector: basis sin(m phi)/sqrt(pi), m = 1..n_max
# cos(phi) and cos(2 phi) are even, so the sectors never mix; at K = 0 the
# remaining cos(2 phi) coupling only links m with m +- 2 and each sector
# splits further into even- and odd-momentum blocks.
# ---------------------------------------------------------------------------

def _sector_matrix(h: PhaseHamiltonian, sector: str) -> np.ndarray:
    c1 = -h.N * h.K
    c2 = h.N * h.P_eff / 4.0
    if sector == "cos":
        m = np.arange(0, h.n_max + 1)
        dim = m.size
        a = np.zeros((dim, dim))
        a[np.arange(dim), np.arange(dim)] = h.U_eff * m.astype(float) ** 2
        for k, c in ((1, c1), (2, c2)):
            if c == 0.0:
                continue
            for i in range(dim):
                j = i + k
                if j < dim:
                    v = c / math.sqrt(2.0) if i == 0 else c / 2.0
                    a[i, j] += v
                    a[j, i] += v
            if k == 2 and dim > 1:
                a[1, 1] += c / 2.0   # <cos phi| cos 2phi |cos phi>
    elif sector == "sin":
        m = np.arange(1, h.n_max + 1)
        dim = m.size
        a = np.zeros((dim, dim))
        a[np.arange(dim), np.arange(dim)] = h.U_eff * m.astype(float) ** 2
        for k, c in ((1, c1), (2, c2)):
            if c == 0.0:
                continue
            for i in range(dim - k):
                a[i, i + k] += c / 2.0
                a[i + k, i] += c / 2.0
            if k == 2 and dim > 0:
                a[0, 0] -= c / 2.0   # <sin phi| cos 2phi |sin phi>
    else:
        raise ValueError(sector)
    return a


def _solve_block(a: np.ndarray, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sub = a[np.ix_(indices, indices)]
    dim = sub.shape[0]
    band = np.zeros((3, dim))
    for d in range(3):
        band[d, : dim - d] = np.diagonal(sub, -d)
    vals, vecs = eig_banded(band, lower=True)
    return vals, vecs


@dataclass(frozen=True)
class QSpectrum:
    """Ascending eigenpairs of one PhaseHamiltonian.

    Eigenfunctions are real; `coef[j]` holds the trigonometric coefficients of
    state j in its own sector basis, `sector[j]` is "cos" or "sin".
    """

    hamiltonian: PhaseHamiltonian
    energies: np.ndarray               # (count,), nK
    coef: tuple[np.ndarray, ...]       # per state, sector-basis coefficients
    sector: tuple[str, ...]
    f_over_f0: float | None = None

    @property
    def count(self) -> int:
        return self.energies.size

    def momentum_grid(self) -> np.ndarray:
        return self.hamiltonian.momentum_grid()

    def zeta(self, j: int) -> np.ndarray:
        """Momentum-representation amplitudes zeta_j(n) on momentum_grid()."""
        n_max = self.hamiltonian.n_max
        z = np.zeros(2 * n_max + 1, dtype=complex)
        c = self.coef[j]
        if self.sector[j] == "cos":
            z[n_max] = c[0]
            for m in range(1, n_max + 1):
                z[n_max + m] = z[n_max - m] = c[m] / math.sqrt(2.0)
        else:
            for m in range(1, n_max + 1):
                z[n_max + m] = c[m - 1] / (1j * math.sqrt(2.0))
                z[n_max - m] = -c[m - 1] / (1j * math.sqrt(2.0))
        return z

    def phase_function(self, j: int, phi: np.ndarray) -> np.ndarray:
        """Real eigenfunction psi_j evaluated at the given phases."""
        phi = np.asarray(phi, dtype=float)
        c = self.coef[j]
        if self.sector[j] == "cos":
            out = np.full_like(phi, c[0] / math.sqrt(2.0 * math.pi))
            for m in range(1, c.size):
                out += c[m] * np.cos(m * phi) / math.sqrt(math.pi)
        else:
            out = np.zeros_like(phi)
            for m in range(1, c.size + 1):
                out += c[m - 1] * np.sin(m * phi) / math.sqrt(math.pi)
        return out

    def overlap_cos_phi(self, j: int, k: int) -> float:
        """<psi_j | cos(phi) | psi_k>; zero across sectors."""
        if self.sector[j] != self.sector[k]:
            return 0.0
        cj, ck = self.coef[j], self.coef[k]
        if self.sector[j] == "cos":
            total = (cj[0] * ck[1] + cj[1] * ck[0]) / math.sqrt(2.0)
            total += 0.5 * float(np.dot(cj[1:-1], ck[2:]) + np.dot(cj[2:], ck[1:-1]))
        else:
            total = 0.5 * float(np.dot(cj[:-1], ck[1:]) + np.dot(cj[1:], ck[:-1]))
        return total


def _solve_once(h: PhaseHamiltonian, count: int) -> QSpectrum:
    states = []
    for sector in ("cos", "sin"):
        a = _sector_matrix(h, sector)
        dim = a.shape[0]
        if h.K == 0.0:
            index_sets = [np.arange(0, dim, 2), np.arange(1, dim, 2)]
        else:
            index_sets = [np.arange(dim)]
        for indices in index_sets:
            if indices.size == 0:
                continue
            vals, vecs = _solve_block(a, indices)
            for r in range(indices.size):
                full = np.zeros(dim)
                full[indices] = vecs[:, r]
                states.append((vals[r], sector, full))
    states.sort(key=lambda s: s[0])
    states = states[:count]
    coefs = []
    sectors = []
    energies = np.empty(len(states))
    for j, (val, sector, vec) in enumerate(states):
        energies[j] = val
        # deterministic sign: psi(0) > 0 for cos states, psi'(0) > 0 for sin
        if sector == "cos":
            probe = vec[0] / math.sqrt(2.0) + vec[1:].sum()
        else:
            probe = float(np.dot(np.arange(1, vec.size + 1), vec))
        if probe < 0:
            vec = -vec
        coefs.append(vec)
        sectors.append(sector)
    return QSpectrum(hamiltonian=h, energies=energies, coef=tuple(coefs),
                     sector=tuple(sectors))


def eigensolve(h: PhaseHamiltonian, count: int = 8,
               f_over_f0: float | None = None) -> QSpectrum:
    """Lowest `count` eigenpairs, with the basis cutoff doubled until the
    eigenvalues are converged to 1e-10 relative."""
    if count > 2 * h.n_max - 3:
        raise ValueError(f"count={count} too large for n_max={h.n_max}")
    n_max = h.n_max
    prev = None
    for _ in range(8):
        cur = _solve_once(PhaseHamiltonian(h.U_eff, h.K, h.P_eff, h.N, n_max), count)
        if prev is not None:
            scale = np.maximum(np.abs(cur.energies), h.U_eff)
            if np.all(np.abs(cur.energies - prev.energies) / scale < 1e-10):
                return QSpectrum(cur.hamiltonian, cur.energies, cur.coef,
                                 cur.sector, f_over_f0)
        prev = cur
        n_max *= 2
    raise SpectrumError(
        f"eigenvalues not converged at n_max={n_max // 2}; "
        f"last change {np.max(np.abs(cur.energies - prev.energies)):.3e} nK")


# ---------------------------------------------------------------------------
# Mathieu helpers (K = 0)
# ---------------------------------------------------------------------------

_MATHIEU_LABEL = {
    ("cos", 0): lambda k: f"ce{2 * k}",
    ("cos", 1): lambda k: f"se{2 * k + 1}",
    ("sin", 1): lambda k: f"ce{2 * k + 1}",
    ("sin", 0): lambda k: f"se{2 * k + 2}",
}


def mathieu_characteristics(q: float, count: int = 8) -> tuple[np.ndarray, list[str]]:
    """Ascending Mathieu characteristic numbers with ce/se labels.

    Solves the K = 0 phase Hamiltonian with the energy axis rescaled by U_eff,
    i.e. the classic a - 2 q cos(2 v) eigenproblem.
    """
    if q < 0:
        raise ValueError(f"q must be non-negative, got {q}")
    n_max = max(32, int(4 * math.sqrt(max(q, 1.0))) + 16)
    # U_eff = 1, N P_eff / 4 = -2 q  (attractive double well at phi = 0, pi)
    h = PhaseHamiltonian(U_eff=1.0, K=0.0, P_eff=-8.0 * q, N=1, n_max=n_max)
    spec = eigensolve(h, count)
    labels = []
    counters: dict[tuple[str, int], int] = {}
    for j in range(count):
        c = spec.coef[j]
        if spec.sector[j] == "cos":
            even_w = c[0] ** 2 + float(np.sum(c[2::2] ** 2))
            odd_w = float(np.sum(c[1::2] ** 2))
        else:
            odd_w = float(np.sum(c[0::2] ** 2))   # m = 1, 3, ...
            even_w = float(np.sum(c[1::2] ** 2))
        parity = 0 if even_w >= odd_w else 1
        key = (spec.sector[j], parity)
        k = counters.get(key, 0)
        counters[key] = k + 1
        labels.append(_MATHIEU_LABEL[key](k))
    return spec.energies.copy(), labels


def asymptotic_gap(q: float) -> float:
    """Large-q approximation of the lowest Mathieu gap a1 - a0."""
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    return 4.0 * math.sqrt(2.0 / math.pi) * (16.0 * q) ** 0.75 * math.exp(-4.0 * math.sqrt(q))


# ---------------------------------------------------------------------------
# observables and qubit machinery
# ---------------------------------------------------------------------------

def momentum_distribution(spec: QSpectrum, j: int) -> dict:
    """|zeta_j(n)|^2 on the integer momentum grid plus parity weights."""
    z = spec.zeta(j)
    n = spec.momentum_grid()
    prob = np.abs(z) ** 2
    even = float(prob[n % 2 == 0].sum())
    odd = float(prob[n % 2 != 0].sum())
    return {"n": n, "prob": prob, "even_weight": even, "odd_weight": odd}


@dataclass(frozen=True)
class PersistentState:
    """Localized superposition of the two lowest eigenstates."""

    spec: QSpectrum
    sign: int  # +1: (psi0 + psi1)/sqrt(2), localized at phi = 0

    def phase_function(self, phi: np.ndarray) -> np.ndarray:
        return (self.spec.phase_function(0, phi)
                + self.sign * self.spec.phase_function(1, phi)) / math.sqrt(2.0)

    def zeta(self) -> np.ndarray:
        return (self.spec.zeta(0) + self.sign * self.spec.zeta(1)) / math.sqrt(2.0)

    def circular_mean(self) -> float:
        phi = np.linspace(-math.pi, math.pi, 4097, endpoint=False)
        dens = self.phase_function(phi) ** 2
        return float(np.angle(np.sum(dens * np.exp(1j * phi))))


def persistent_states(spec: QSpectrum) -> tuple[PersistentState, PersistentState]:
    """(psi_minus, psi_plus): localized near phi = 0 and phi = pi.

    Requires a K = 0 spectrum; the sign conventions of eigensolve put the
    plus combination at phi = 0.
    """
    if spec.hamiltonian.K != 0.0:
        raise ValueError("persistent states are defined from the K = 0 spectrum")
    return PersistentState(spec, +1), PersistentState(spec, -1)


@dataclass(frozen=True)
class TwoLevelBlock:
    """2x2 reduction of one near-degenerate pair over the K = 0 basis."""

    e0: float          # lower unperturbed level, nK
    e1: float          # upper unperturbed level, nK
    coupling: float    # off-diagonal element E_{j,j+1}, nK
    energies: tuple[float, float]
    A: float           # weight of psi_minus in the perturbed ground state


def _pair_block(spec0: QSpectrum, K: float, N: int, j: int) -> TwoLevelBlock:
    e0, e1 = float(spec0.energies[j]), float(spec0.energies[j + 1])
    eps = -N * K * spec0.overlap_cos_phi(j, j + 1)
    delta = e1 - e0
    root = math.sqrt(delta**2 + 4.0 * eps**2)
    lo = 0.5 * (e0 + e1) - 0.5 * root
    hi = 0.5 * (e0 + e1) + 0.5 * root
    denom = math.sqrt(delta**2 + (2.0 * eps + root) ** 2)
    A = delta / denom if denom > 0 else 1.0 / math.sqrt(2.0)
    return TwoLevelBlock(e0=e0, e1=e1, coupling=eps, energies=(lo, hi), A=A)


def block_reduction(spec0: QSpectrum, K: float, N: int,
                    max_coupling_ratio: float = 0.5) -> tuple[TwoLevelBlock, TwoLevelBlock]:
    """Two-level blocks for the (0,1) and (2,3) level pairs at finite K.

    spec0 must be the K = 0 spectrum at the same U_eff and P_eff.  The
    reduction is only meaningful while the pair coupling stays small against
    the distance to the next pair.
    """
    b01 = _pair_block(spec0, K, N, 0)
    gap = float(spec0.energies[2] - spec0.energies[1])
    ratio = abs(b01.coupling) / gap if gap > 0 else math.inf
    if ratio > max_coupling_ratio:
        raise SpectrumError(
            f"pair (0,1) does not decouple: |E01|/(E2-E1) = {ratio:.3g}")
    b23 = _pair_block(spec0, K, N, 2)
    return b01, b23


def mean_currents(A: float, I_p_per_N: float) -> tuple[float, float]:
    """Mean per-particle currents of the two tilted qubit states."""
    if not 0.0 <= A <= 1.0:
        raise ValueError(f"A must lie in [0, 1], got {A}")
    i0 = I_p_per_N * (1.0 - 2.0 * A**2)
    return i0, -i0


# ---------------------------------------------------------------------------
# frequency sweeps: level tracking, currents, qubit report
# ---------------------------------------------------------------------------

class ParamCurve:
    """Frequency dependence of the junction parameters feeding the spectra.

    Subclasses provide K and P_eff as functions of x = f/f0; U_eff is treated
    as frequency independent.
    """

    U_eff: float
    N: int
    f0: float

    def K(self, x: float) -> float:
        raise NotImplementedError

    def P_eff(self, x: float) -> float:
        raise NotImplementedError

    def spectrum(self, x: float, count: int = 8, n_max: int = 32) -> QSpectrum:
        h = build_matrix(self.U_eff, self.K(x), self.P_eff(x), self.N, n_max)
        return eigensolve(h, count, f_over_f0=x)


@dataclass
class CosineParamCurve(ParamCurve):
    """Sinusoidal junction model: K = K0 cos(pi x), constant P_eff.

    This is the fast route used when only the zero-rotation tunneling K0 and
    the midpoint pair tunneling are known.
    """

    K0: float
    P_eff_mid: float
    U_eff: float
    N: int
    f0: float

    def K(self, x: float) -> float:
        return self.K0 * math.cos(math.pi * x)

    def P_eff(self, x: float) -> float:
        return self.P_eff_mid


def track_levels(spectra: Sequence[QSpectrum], ambiguity_tol: float = 1e-3) -> np.ndarray:
    """Follow eigenvectors across a frequency-ordered list of spectra.

    Returns an index array `order` with shape (len(spectra), count): column b
    of row i gives which eigenstate of spectra[i] continues branch b.  Levels
    are matched by momentum-representation overlap, not by energy order, so
    crossings are followed.
    """
    count = spectra[0].count
    n_pad = max(s.hamiltonian.n_max for s in spectra)

    def padded(spec: QSpectrum, j: int) -> np.ndarray:
        z = spec.zeta(j)
        extra = n_pad - spec.hamiltonian.n_max
        return np.pad(z, (extra, extra)) if extra else z

    order = np.zeros((len(spectra), count), dtype=int)
    order[0] = np.arange(count)
    for i in range(1, len(spectra)):
        prev, cur = spectra[i - 1], spectra[i]
        taken = set()
        for b in range(count):
            zp = padded(prev, order[i - 1, b])
            overlaps = np.array([abs(np.vdot(zp, padded(cur, j))) for j in range(count)])
            for j in taken:
                overlaps[j] = -1.0
            best = int(np.argmax(overlaps))
            rest = np.delete(overlaps, best)
            if rest.size and overlaps[best] - rest.max() < ambiguity_tol:
                # comparable overlaps are harmless when the contenders are
                # quasi-degenerate: any assignment within that subspace gives
                # the same energies to within the splitting itself
                runner = int(np.argsort(overlaps)[-2])
                e = cur.energies
                span = float(e[-1] - e[0]) or 1.0
                if abs(e[best] - e[runner]) > 1e-3 * span:
                    raise SpectrumError(
                        f"ambiguous level tracking at sample {i}, branch {b}: "
                        f"overlaps {overlaps[best]:.6f} vs {rest.max():.6f}")
            order[i, b] = best
            taken.add(best)
    return order


def level_currents(spectra: Sequence[QSpectrum], j: int,
                   tracking: str = "overlap") -> np.ndarray:
    """Per-particle stationary current of tracked branch j versus f/f0.

    I_j / N = -(1/(2 pi hbar N)) dE_j/d(f/f0), central differences inside the
    grid and one-sided at the ends.  tracking="overlap" follows eigenvector
    character across samples (diabatic through avoided crossings);
    tracking="energy" keeps the adiabatic, energy-ordered branches.
    """
    if len(spectra) < 3:
        raise ValueError("need at least 3 frequency samples")
    xs = np.array([s.f_over_f0 for s in spectra], dtype=float)
    if np.any(np.diff(xs) <= 0):
        raise ValueError("spectra must be ordered in f/f0")
    if tracking == "energy":
        order = np.tile(np.arange(spectra[0].count), (len(spectra), 1))
    elif tracking == "overlap":
        order = track_levels(spectra)
    else:
        raise ValueError(f"unknown tracking mode {tracking!r}")
    e = np.array([spectra[i].energies[order[i, j]] for i in range(len(spectra))])
    dedx = np.gradient(e, xs)
    N = spectra[0].hamiltonian.N
    return -dedx / (2.0 * math.pi * _HBAR * N)


@dataclass(frozen=True)
class QubitReport:
    q: float
    Q: float
    T_osc: float                 # s
    delta_f_eqd_over_f0: float
    delta_f_pp_over_f0: float
    product_Q_dfpp: float
    I_p_per_N: float             # s^-1, measured branch slope
    I_p_per_N_analytic: float    # s^-1, from dK/df
    current_fraction: float


def _imbalance_1m2A2(curve: ParamCurve, spec0: QSpectrum, x: float) -> float:
    """Signed localization measure 1 - 2 A^2 of the tilted ground state."""
    b01, _ = block_reduction(spec0, curve.K(x), curve.N, max_coupling_ratio=math.inf)
    eps, delta = b01.coupling, b01.e1 - b01.e0
    return 2.0 * eps / math.sqrt(delta**2 + 4.0 * eps**2)


def _window_edges(curve: ParamCurve, spec0: QSpectrum, x_c: float,
                  fraction: float, scan: float) -> tuple[float, float]:
    """Roots of |1 - 2 A^2| = fraction on both sides of the K zero at x_c."""
    def g(x: float) -> float:
        return abs(_imbalance_1m2A2(curve, spec0, x)) - fraction

    edges = []
    for direction in (-1.0, +1.0):
        step = 1e-12
        lo = x_c
        while step < scan:
            hi = x_c + direction * step
            if g(hi) > 0:
                break
            lo = hi
            step *= 4.0
        else:
            raise SpectrumError(
                f"no |1-2A^2| = {fraction} crossing within {scan} of f/f0 = {x_c}")
        a, b = sorted((lo, hi))
        edges.append(brentq(g, a, b, xtol=1e-16, rtol=8.0 * np.finfo(float).eps))
    return edges[0], edges[1]


def qubit_report(curve: ParamCurve, count: int = 8, n_max: int = 32,
                 current_fraction: float = 0.6) -> QubitReport:
    """All qubit metrics of one scenario from its parameter curve.

    The central frequency is the zero of K(x); the equidistance interval comes
    from the full eigensolve, the parity-protection window and plateau
    current from the two-level reduction of the K = 0 spectrum.
    """
    x_c = brentq(curve.K, 0.05, 0.95, xtol=1e-16)
    h0 = build_matrix(curve.U_eff, 0.0, curve.P_eff(x_c), curve.N, n_max)
    spec0 = eigensolve(h0, count)
    d1 = float(spec0.energies[1] - spec0.energies[0])
    d2 = float(spec0.energies[2] - spec0.energies[0])
    Q = d2 / d1
    T_osc = math.pi * _HBAR / d1

    # equidistance: (E2 - E1) - (E1 - E0) = 0 on both sides of x_c
    def eqd(x: float) -> float:
        s = curve.spectrum(x, count=3, n_max=n_max)
        return float(s.energies[2] - 2.0 * s.energies[1] + s.energies[0])

    scan = 0.4
    sign_c = math.copysign(1.0, eqd(x_c))
    edges = []
    for direction in (-1.0, +1.0):
        step = d1 / max(abs(curve.K(x_c + 0.01) - curve.K(x_c)) * 100.0 * curve.N, 1e-12)
        step = max(min(step, 0.01), 1e-13)
        lo = x_c
        while step < scan:
            hi = x_c + direction * step
            if math.copysign(1.0, eqd(hi)) != sign_c:
                break
            lo = hi
            step *= 3.0
        else:
            raise SpectrumError("equidistance root not bracketed inside the sweep range")
        a, b = sorted((lo, hi))
        edges.append(brentq(eqd, a, b, xtol=1e-16, rtol=8.0 * np.finfo(float).eps))
    delta_f_eqd = edges[1] - edges[0]

    pp_lo, pp_hi = _window_edges(curve, spec0, x_c, current_fraction, scan)
    delta_f_pp = pp_hi - pp_lo

    # plateau current: branch slope just outside the 0.9 localization window
    loc_lo, loc_hi = _window_edges(curve, spec0, x_c, 0.9, scan)
    slopes = []
    for x_edge, direction in ((loc_lo, -1.0), (loc_hi, +1.0)):
        dx = max(abs(x_edge - x_c) * 0.25, 1e-13)
        xs = (x_edge + direction * dx, x_edge + 2.0 * direction * dx)
        es = []
        for x in xs:
            b01, _ = block_reduction(spec0, curve.K(x), curve.N,
                                     max_coupling_ratio=math.inf)
            es.append(b01.energies[0])
        slopes.append(abs((es[1] - es[0]) / (xs[1] - xs[0])))
    I_p = float(np.mean(slopes)) / (2.0 * math.pi * _HBAR * curve.N)
    dk = 1e-6
    I_p_analytic = abs(curve.K(x_c + dk) - curve.K(x_c - dk)) / (2.0 * dk) / (2.0 * math.pi * _HBAR)

    return QubitReport(
        q=h0.q, Q=Q, T_osc=T_osc,
        delta_f_eqd_over_f0=delta_f_eqd,
        delta_f_pp_over_f0=delta_f_pp,
        product_Q_dfpp=Q * delta_f_pp,
        I_p_per_N=I_p,
        I_p_per_N_analytic=I_p_analytic,
        current_fraction=current_fraction,
    )
