"""Ideal-pulse propagators, free evolution and sequence execution.

Two propagation paths exist on purpose. The fast path advances density
matrices element-wise with the rotating-frame phase factors (plus per
interval noise phases); `oracle_propagate` rebuilds every step from dense
matrix exponentials and serves as the independent cross-check.

Phase convention: rho_ij(t) = rho_ij(0) * exp(+i 2 pi dnu_ij t) with
dnu_ij = (H_rot_ii - H_rot_jj)/h, so the oracle delay unitary is
exp(+i 2 pi t H_rot / h).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence as SequenceT, Union

import numpy as np
from scipy.linalg import expm

from .spin import SpinSystem, delta_nu_table, spin_operators

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10
UNITARITY_TOL = 1e-12


class InvariantViolation(RuntimeError):
    """A density matrix drifted outside its contract (internal error)."""


# ---------------------------------------------------------------------------
# events


@dataclass(frozen=True)
class PulseEvent:
    """Instantaneous ideal rf rotation.

    Nonselective pulses rotate the full spin by `nutation_angle` about the
    axis (cos phase, sin phase) in the transverse plane. Selective pulses
    act as an exact spin-1/2 rotation on one adjacent-level subspace and as
    identity elsewhere.
    """

    nutation_angle: float
    phase: float = 0.0
    selective: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.nutation_angle < 0:
            raise ValueError("nutation_angle must be >= 0")


@dataclass(frozen=True)
class Delay:
    duration: float

    def __post_init__(self):
        if not 0 <= self.duration < np.inf:
            raise ValueError("delay duration must be finite and >= 0")


@dataclass(frozen=True)
class EnvironmentMarker:
    """Light or light+bias pulse: advances the clock and triggers charge bursts."""

    kind: str  # "light" | "light_and_bias"
    duration: float = 0.5e-3

    def __post_init__(self):
        if self.kind not in ("light", "light_and_bias"):
            raise ValueError(f"unknown marker kind {self.kind!r}")
        if not 0 <= self.duration < np.inf:
            raise ValueError("marker duration must be finite and >= 0")


SequenceEvent = Union[PulseEvent, Delay, EnvironmentMarker]


@dataclass(frozen=True)
class ReadoutSpec:
    """What to report at the detection point.

    mode "coherence": |rho_ij| (part="abs") or Re rho_ij (part="real").
    mode "population": rho_kk of `level`, optionally after one projection
    pulse.
    """

    mode: str
    i: int = 0
    j: int = 0
    part: str = "abs"
    level: int = 0
    projection: Optional[PulseEvent] = None

    @classmethod
    def coherence(cls, i: int, j: int, part: str = "abs") -> "ReadoutSpec":
        if part not in ("abs", "real"):
            raise ValueError("part must be 'abs' or 'real'")
        return cls(mode="coherence", i=i, j=j, part=part)

    @classmethod
    def population(cls, level: int, projection: Optional[PulseEvent] = None) -> "ReadoutSpec":
        return cls(mode="population", level=level, projection=projection)


@dataclass(frozen=True)
class Sequence:
    events: tuple[SequenceEvent, ...]
    detect: ReadoutSpec

    def __init__(self, events: SequenceT[SequenceEvent], detect: ReadoutSpec):
        object.__setattr__(self, "events", tuple(events))
        object.__setattr__(self, "detect", detect)

    @property
    def interval_durations(self) -> np.ndarray:
        """Durations of the free-evolution intervals (delays and markers)."""
        return np.array(
            [e.duration for e in self.events if not isinstance(e, PulseEvent)]
        )

    @property
    def total_duration(self) -> float:
        return float(self.interval_durations.sum()) if self.n_intervals else 0.0

    @property
    def n_intervals(self) -> int:
        return sum(1 for e in self.events if not isinstance(e, PulseEvent))

    def marker_times(self) -> list[tuple[float, str]]:
        """(start time, kind) of every environment marker."""
        out, t = [], 0.0
        for e in self.events:
            if isinstance(e, EnvironmentMarker):
                out.append((t, e.kind))
            if not isinstance(e, PulseEvent):
                t += e.duration
        return out


# ---------------------------------------------------------------------------
# states


def level_state(sys: SpinSystem, level: int) -> np.ndarray:
    """Density matrix of the pure level population |level><level|."""
    if not 0 <= level < sys.dim:
        raise IndexError(f"level {level} out of range for dim {sys.dim}")
    rho = np.zeros((sys.dim, sys.dim), dtype=complex)
    rho[level, level] = 1.0
    return rho


def superposition_state(sys: SpinSystem, i: int, j: int) -> np.ndarray:
    """Pure equal superposition (|i> + |j>)/sqrt(2): rho_ij = 1/2."""
    psi = np.zeros(sys.dim, dtype=complex)
    psi[i] = psi[j] = 1.0 / np.sqrt(2)
    return np.outer(psi, psi.conj())


def check_density(rho: np.ndarray, context: str = "") -> None:
    """Raise InvariantViolation if rho is not a valid density matrix."""
    herm = np.abs(rho - rho.conj().T).max()
    if herm > HERMITICITY_TOL:
        raise InvariantViolation(f"hermiticity drift {herm:.2e} {context}")
    tr = rho.trace()
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvariantViolation(f"trace drift {abs(tr - 1.0):.2e} {context}")
    evmin = np.linalg.eigvalsh(rho).min()
    if evmin < -POSITIVITY_TOL:
        raise InvariantViolation(f"negative eigenvalue {evmin:.2e} {context}")


# ---------------------------------------------------------------------------
# propagators


def pulse_propagator(sys: SpinSystem, p: PulseEvent) -> np.ndarray:
    """Unitary of one ideal pulse.

    Nonselective: exp(-i theta (I_x cos phi + I_y sin phi)), evaluated by
    eigendecomposition of the Hermitian generator. Selective: exact 2x2
    rotation embedded at the addressed adjacent-level pair.
    """
    theta, phi = p.nutation_angle, p.phase
    if p.selective is not None:
        i, j = p.selective
        if not (0 <= i < sys.dim and 0 <= j < sys.dim):
            raise IndexError(f"selective pulse levels ({i}, {j}) out of range")
        if abs(i - j) != 1:
            raise ValueError(
                f"selective pulse requires adjacent levels (|m_i - m_j| = 1), got ({i}, {j})"
            )
        hi, lo = (i, j) if i < j else (j, i)   # hi index = higher m
        u = np.eye(sys.dim, dtype=complex)
        c, s = np.cos(theta / 2), np.sin(theta / 2)
        u[hi, hi] = c
        u[lo, lo] = c
        u[hi, lo] = -1j * np.exp(-1j * phi) * s
        u[lo, hi] = -1j * np.exp(1j * phi) * s
        return u
    ix, iy, _ = spin_operators(sys.spin_i)
    gen = theta * (np.cos(phi) * ix + np.sin(phi) * iy)
    w, v = np.linalg.eigh(gen)
    return (v * np.exp(-1j * w)) @ v.conj().T


def free_evolution(
    sys: SpinSystem,
    rho: np.ndarray,
    t: float,
    noise_phase: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Element-wise rotating-frame evolution over a delay of length t.

    rho_ij <- rho_ij * exp(i (2 pi dnu_ij t + noise_phase_ij)); populations
    are untouched (dnu_ii = 0 and the noise phase matrix is antisymmetric).
    """
    if t < 0:
        raise ValueError("evolution time must be >= 0")
    phase = 2 * np.pi * delta_nu_table(sys).entries * t
    if noise_phase is not None:
        phase = phase + noise_phase
    return rho * np.exp(1j * phase)


def _detect(sys: SpinSystem, rho: np.ndarray, spec: ReadoutSpec) -> float:
    if spec.mode == "coherence":
        val = rho[spec.i, spec.j]
        return float(abs(val)) if spec.part == "abs" else float(val.real)
    if spec.mode == "population":
        if spec.projection is not None:
            u = pulse_propagator(sys, spec.projection)
            rho = u @ rho @ u.conj().T
        return float(rho[spec.level, spec.level].real)
    raise ValueError(f"unknown readout mode {spec.mode!r}")


def run_sequence(
    sys: SpinSystem,
    rho0: np.ndarray,
    seq: Sequence,
    noise=None,
) -> tuple[float, np.ndarray]:
    """Execute a sequence on one ensemble member.

    `noise` is an optional NoiseRealization (see quadecho.noise) carrying
    the accumulated field and quadrupole noise phases for each delay/marker
    interval; intervals are consumed in event order.
    """
    check_density(rho0, "(rho0)")
    table = delta_nu_table(sys)
    rho = rho0.astype(complex, copy=True)
    k = 0
    for ev in seq.events:
        if isinstance(ev, PulseEvent):
            u = pulse_propagator(sys, ev)
            rho = u @ rho @ u.conj().T
        else:
            phase = 2 * np.pi * table.entries * ev.duration
            if noise is not None:
                phase = phase + (
                    table.dnu0_coeff * noise.field_phase[k]
                    + table.nuq_coeff * noise.quad_phase[k]
                )
            rho = rho * np.exp(1j * phase)
            k += 1
    check_density(rho, "(after sequence)")
    return _detect(sys, rho, seq.detect), rho


def oracle_propagate(sys: SpinSystem, rho0: np.ndarray, seq: Sequence) -> np.ndarray:
    """Noise-free reference propagation by dense unitary products.

    Every pulse and delay unitary is rebuilt with scipy's expm, independent
    of the element-wise fast path and of the eigendecomposition used there.
    """
    from .spin import build_hamiltonian

    rot = SpinSystem(sys.spin_i, nu0=sys.delta_nu0, nu_q=sys.nu_q, nu_rf=0.0)
    h_rot = np.diag(build_hamiltonian(rot)).astype(complex)
    ix, iy, _ = spin_operators(sys.spin_i)
    rho = rho0.astype(complex, copy=True)
    for ev in seq.events:
        if isinstance(ev, PulseEvent):
            if ev.selective is not None:
                i, j = ev.selective
                if abs(i - j) != 1:
                    raise ValueError("selective pulse requires adjacent levels")
                hi, lo = (i, j) if i < j else (j, i)
                gen = np.zeros((sys.dim, sys.dim), dtype=complex)
                half = 0.5 * ev.nutation_angle
                gen[hi, lo] = half * np.exp(-1j * ev.phase)
                gen[lo, hi] = half * np.exp(1j * ev.phase)
                u = expm(-1j * gen)
            else:
                gen = ev.nutation_angle * (
                    np.cos(ev.phase) * ix + np.sin(ev.phase) * iy
                )
                u = expm(-1j * gen)
        else:
            u = expm(1j * 2 * np.pi * ev.duration * h_rot)
        rho = u @ rho @ u.conj().T
    return rho


# ---------------------------------------------------------------------------
# vectorized ensemble propagation (used by the protocol drivers)


@dataclass
class BatchPlan:
    """Precompiled sequence for ensemble propagation.

    unitaries[k] is applied between interval k-1 and k; phases are supplied
    per member at run time as the two channel factors X (detuning channel)
    and Y (quadrupole channel) so that phase_ij = dnu0_coeff*X + nuq_coeff*Y.
    """

    sys: SpinSystem
    ops: list  # list of ("U", ndarray) | ("D", interval_index)
    n_intervals: int
    dnu0_coeff: np.ndarray = field(init=False)
    nuq_coeff: np.ndarray = field(init=False)

    def __post_init__(self):
        table = delta_nu_table(self.sys)
        self.dnu0_coeff = table.dnu0_coeff
        self.nuq_coeff = table.nuq_coeff


def compile_sequence(sys: SpinSystem, seq: Sequence) -> BatchPlan:
    ops = []
    cache: dict = {}
    k = 0
    for ev in seq.events:
        if isinstance(ev, PulseEvent):
            if ev not in cache:
                cache[ev] = pulse_propagator(sys, ev)
            ops.append(("U", cache[ev]))
        else:
            ops.append(("D", k))
            k += 1
    return BatchPlan(sys=sys, ops=ops, n_intervals=k)


def propagate_batch(
    plan: BatchPlan,
    rho: np.ndarray,
    x_phases: np.ndarray,
    y_phases: np.ndarray,
) -> np.ndarray:
    """Propagate a stack of density matrices through a compiled sequence.

    Args:
        rho: (N, d, d) complex, modified out of place.
        x_phases: (N, K) total detuning-channel phase per interval,
            2 pi (delta_nu0_member * dt + integral of field noise).
        y_phases: (N, K) same for the quadrupole channel.
    """
    a = plan.dnu0_coeff[None, :, :]
    b = plan.nuq_coeff[None, :, :]
    for kind, payload in plan.ops:
        if kind == "U":
            u = payload
            rho = u @ rho @ u.conj().T
        else:
            k = payload
            phase = a * x_phases[:, k, None, None] + b * y_phases[:, k, None, None]
            rho = rho * np.exp(1j * phase)
    return rho
