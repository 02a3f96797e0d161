"""Spin system definition, quadrupolar Hamiltonian and coherence bookkeeping.

Everything here is small dense linear algebra on a (2I+1)-dimensional level
space. Level index 0 corresponds to m_I = +I, indices descending in m_I, so
a hard pi pulse (m -> -m) is the antidiagonal permutation of the level
ladder.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# SI constants (exact by definition since the 2019 redefinition)
PLANCK_H = 6.62607015e-34       # J s
ELEMENTARY_CHARGE = 1.602176634e-19  # C

_ALLOWED_SPINS = (0.5, 1.5, 2.5, 3.5, 4.5)


def _check_half_integer_spin(spin_i: float) -> float:
    spin_i = float(spin_i)
    if not any(abs(spin_i - s) < 1e-12 for s in _ALLOWED_SPINS):
        raise ValueError(
            f"spin_i must be a positive half-integer in {_ALLOWED_SPINS}, got {spin_i}"
        )
    return spin_i


@dataclass(frozen=True)
class SpinSystem:
    """Static parameters of one nuclear-spin species in the rotating frame.

    Frequencies are plain Hz (not angular). nu_q is the first-order
    quadrupole splitting parameter; it may be negative. delta_nu0 is the
    detuning of the Larmor frequency from the rf carrier.
    """

    spin_i: float
    nu0: float
    nu_q: float = 0.0
    nu_rf: float = 0.0
    dim: int = field(init=False)
    delta_nu0: float = field(init=False)

    def __post_init__(self):
        spin_i = _check_half_integer_spin(self.spin_i)
        for name in ("nu0", "nu_q", "nu_rf"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        object.__setattr__(self, "spin_i", spin_i)
        object.__setattr__(self, "dim", int(round(2 * spin_i + 1)))
        object.__setattr__(self, "delta_nu0", self.nu0 - self.nu_rf)

    @property
    def m_values(self) -> np.ndarray:
        """Spin projections m_I ordered +I, +I-1, ..., -I (index 0 = +I)."""
        return self.spin_i - np.arange(self.dim)


@dataclass(frozen=True)
class QuadrupoleGeometry:
    """Electric-field-gradient geometry that fixes nu_q.

    v33 is the effective field gradient in V/m^2, q_moment the nuclear
    quadrupole moment in m^2 (the elementary charge is applied internally),
    theta the angle between B_z and the gradient principal axis.
    """

    v33: float
    q_moment: float
    theta: float
    gamma_n: float = 7.315e6   # Hz/T, 75As tabulated value
    b_z: float = 0.35          # T

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")

    @property
    def nu0(self) -> float:
        return self.gamma_n * self.b_z


class CoherenceKind(Enum):
    POPULATION = "population"
    CSQT = "cSQT"
    SSQT = "sSQT"
    DQT = "DQT"
    TQT = "TQT"
    HIGHER = "higher"


@dataclass(frozen=True)
class CoherenceLabel:
    """Classification of one density-matrix element (i, j)."""

    i: int
    j: int
    m_i: float
    m_j: float
    order_p: int
    kind: CoherenceKind


@dataclass(frozen=True)
class DeltaNuTable:
    """Rotating-frame evolution frequencies of all density-matrix elements.

    entries[i, j] = (H_rot[i, i] - H_rot[j, j]) / h in Hz. Each entry
    decomposes exactly as

        entries[i, j] = dnu0_coeff[i, j] * delta_nu0 + nuq_coeff[i, j] * nu_q

    with dnu0_coeff[i, j] = m_j - m_i (minus the coherence order, a
    consequence of the -nu0*I_z sign convention) and
    nuq_coeff[i, j] = (m_i^2 - m_j^2) / 2. Elements with nuq_coeff = 0
    (center SQT and the full-ladder coherence for spin 3/2) are immune to
    first-order quadrupole shifts.
    """

    entries: np.ndarray
    dnu0_coeff: np.ndarray
    nuq_coeff: np.ndarray


def spin_operators(spin_i: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (I_x, I_y, I_z) in the descending-m level basis."""
    spin_i = _check_half_integer_spin(spin_i)
    dim = int(round(2 * spin_i + 1))
    m = spin_i - np.arange(dim)
    iz = np.diag(m).astype(complex)
    # raising operator: <m+1| I+ |m> on the superdiagonal for descending m
    c = np.sqrt(spin_i * (spin_i + 1) - m[1:] * (m[1:] + 1))
    iplus = np.zeros((dim, dim), dtype=complex)
    iplus[np.arange(dim - 1), np.arange(1, dim)] = c
    iminus = iplus.conj().T
    ix = (iplus + iminus) / 2
    iy = (iplus - iminus) / 2j
    return ix, iy, iz


def build_hamiltonian(sys: SpinSystem) -> np.ndarray:
    """Diagonal of the lab-frame Hamiltonian, E(m)/h in Hz.

    E(m)/h = -nu0*m + (nu_q/2)*(m^2 - I(I+1)/3). For I = 3/2 the quadrupole
    offset I(I+1)/3 equals 5/4; the general form keeps the quadrupole term
    traceless for every spin.
    """
    m = sys.m_values
    quad_offset = sys.spin_i * (sys.spin_i + 1) / 3.0
    return -sys.nu0 * m + 0.5 * sys.nu_q * (m**2 - quad_offset)


def quadrupole_frequency(geom: QuadrupoleGeometry) -> float:
    """First-order quadrupole splitting nu_q in Hz.

    h*nu_q = (1/2) V33 e Q * (1/2)(3 cos^2 theta - 1); vanishes at the magic
    angle and is symmetric under theta -> pi - theta.
    """
    angular = 0.5 * (3.0 * np.cos(geom.theta) ** 2 - 1.0)
    return 0.5 * geom.v33 * ELEMENTARY_CHARGE * geom.q_moment * angular / PLANCK_H


def delta_nu_table(sys: SpinSystem) -> DeltaNuTable:
    """Evolution-frequency table in the frame rotating at nu_rf."""
    rot = SpinSystem(sys.spin_i, nu0=sys.delta_nu0, nu_q=sys.nu_q, nu_rf=0.0)
    diag = build_hamiltonian(rot)
    entries = diag[:, None] - diag[None, :]
    m = sys.m_values
    dnu0_coeff = m[None, :] - m[:, None]
    nuq_coeff = 0.5 * (m[:, None] ** 2 - m[None, :] ** 2)
    return DeltaNuTable(entries=entries, dnu0_coeff=dnu0_coeff, nuq_coeff=nuq_coeff)


def coherence_label(sys: SpinSystem, i: int, j: int) -> CoherenceLabel:
    """Classify element (i, j) by its coherence order p = m_i - m_j."""
    if not (0 <= i < sys.dim and 0 <= j < sys.dim):
        raise IndexError(f"level indices ({i}, {j}) out of range for dim {sys.dim}")
    m = sys.m_values
    m_i, m_j = m[i], m[j]
    order = int(round(m_i - m_j))
    if i == j:
        kind = CoherenceKind.POPULATION
    elif {m_i, m_j} == {0.5, -0.5}:
        kind = CoherenceKind.CSQT
    elif abs(order) == 1:
        kind = CoherenceKind.SSQT
    elif abs(order) == 2:
        kind = CoherenceKind.DQT
    elif abs(order) == 3:
        kind = CoherenceKind.TQT
    else:
        kind = CoherenceKind.HIGHER
    return CoherenceLabel(i=i, j=j, m_i=m_i, m_j=m_j, order_p=order, kind=kind)


def transition_frequency(sys: SpinSystem, i: int, j: int) -> float:
    """Observable transition frequency E(lower m) - E(higher m), in Hz.

    Positive for nu0 > 0; for spin 3/2 this puts the satellites at
    nu0 -/+ nu_q around the center line.
    """
    diag = build_hamiltonian(sys)
    lo, hi = (i, j) if i < j else (j, i)   # index hi has the lower m
    return diag[hi] - diag[lo]
