"""Static ensemble disorder and dynamic noise processes.

Dynamic noise is represented as piecewise-constant frequency-shift
trajectories. Telegraph fluctuators modulate the detuning channel
("field" target) or the quadrupole splitting ("quadrupole" target);
light/bias markers trigger a charge-burst process that perturbs the
quadrupole channel only. Phases handed to the pulse engine are exact time
integrals of these trajectories, computed by the kernels backend, so
re-slicing an interval never changes a phase beyond float rounding.

Seeding: every sampler takes an integer seed or a numpy SeedSequence;
independent substreams are derived with SeedSequence spawn keys
(`child_rng`), which is the documented splitting rule for concurrent
ensemble generation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence as SequenceT

import numpy as np

from .kernels import piecewise_integrals

FIELD = "field"
QUADRUPOLE = "quadrupole"


def child_rng(seed, *key: int) -> np.random.Generator:
    """Deterministic substream `key` of the master seed."""
    if isinstance(seed, np.random.SeedSequence):
        base = seed.entropy
    else:
        base = seed
    return np.random.default_rng(np.random.SeedSequence(base, spawn_key=tuple(key)))


# ---------------------------------------------------------------------------
# parameter records


@dataclass(frozen=True)
class StaticDisorder:
    """Gaussian ensemble spreads of the detuning and of nu_q, both in Hz."""

    sigma_delta_nu0: float = 0.0
    sigma_nu_q: float = 0.0
    ensemble_size: int = 1

    def __post_init__(self):
        if self.sigma_delta_nu0 < 0 or self.sigma_nu_q < 0:
            raise ValueError("disorder sigmas must be >= 0")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be >= 1")


@dataclass(frozen=True)
class FluctuatorBath:
    """Ensemble of symmetric telegraph fluctuators with log-uniform rates.

    Each ensemble member sees `n_fluctuators` independent two-state
    fluctuators of amplitude +/- `coupling` (Hz); switching is Poisson with
    a per-fluctuator rate drawn log-uniformly from [rate_min, rate_max],
    which yields an approximately 1/f spectral density inside that band.
    """

    target: str
    n_fluctuators: int
    coupling: float
    rate_min: float
    rate_max: float

    def __post_init__(self):
        if self.target not in (FIELD, QUADRUPOLE):
            raise ValueError(f"target must be 'field' or 'quadrupole', got {self.target!r}")
        if self.n_fluctuators < 1:
            raise ValueError("n_fluctuators must be >= 1")
        if self.coupling < 0:
            raise ValueError("coupling must be >= 0")
        if not 0 <= self.rate_min <= self.rate_max:
            raise ValueError("need 0 <= rate_min <= rate_max")
        if self.rate_min == 0 and self.rate_max > 0:
            raise ValueError("log-uniform rates need rate_min > 0 (or rate_min == rate_max)")


@dataclass(frozen=True)
class ChargeBurstModel:
    """Light/bias-triggered trap ensemble perturbing the quadrupole channel.

    At each environment marker a Binomial(n_traps, activation) subset of
    traps activates; an active trap contributes a random-sign telegraph of
    amplitude coupling_q (Hz) switching at while_active_switch_rate, and
    deactivates permanently after an Exp(relax_rate) lifetime.
    """

    n_traps: int
    coupling_q: float
    activation: float
    relax_rate: float
    while_active_switch_rate: float = 0.0
    activation_light_and_bias: Optional[float] = None

    def __post_init__(self):
        if self.n_traps < 0:
            raise ValueError("n_traps must be >= 0")
        if self.coupling_q < 0 or self.relax_rate < 0 or self.while_active_switch_rate < 0:
            raise ValueError("rates and couplings must be >= 0")
        for a in (self.activation, self.activation_light_and_bias):
            if a is not None and not 0.0 <= a <= 1.0:
                raise ValueError("activation fractions must lie in [0, 1]")

    def activation_for(self, kind: str) -> float:
        if kind == "light_and_bias" and self.activation_light_and_bias is not None:
            return self.activation_light_and_bias
        return self.activation


@dataclass(frozen=True)
class NoiseRealization:
    """Per-interval accumulated noise phases for one ensemble member.

    field_phase[k] / quad_phase[k] hold 2*pi times the integral of the
    frequency-shift trajectory over the k-th free-evolution interval, i.e.
    the phase picked up by a unit-coefficient coherence. The engine scales
    them by the element-wise detuning/quadrupole coefficients.
    """

    seed: int
    field_phase: np.ndarray
    quad_phase: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.field_phase)) and np.all(np.isfinite(self.quad_phase))):
            raise ValueError("noise phases must be finite")


# ---------------------------------------------------------------------------
# trajectory batches


@dataclass
class TrajectorySegments:
    """Concatenated piecewise-constant segments for a batch of trajectories.

    A trajectory's shift is the sum of all its segments (one per fluctuator
    or trap). Layout matches the kernels contract; traj_of_seg maps each
    segment back to its trajectory for the reduction.
    """

    knots: np.ndarray
    values: np.ndarray
    offsets: np.ndarray
    traj_of_seg: np.ndarray
    n_traj: int

    def integrals(self, boundaries: np.ndarray) -> np.ndarray:
        """(n_traj, K) exact integrals between consecutive boundaries."""
        boundaries = np.asarray(boundaries, dtype=float)
        out = np.zeros((self.n_traj, boundaries.size - 1))
        if self.offsets.size <= 1:
            return out
        seg_ints = piecewise_integrals(self.knots, self.values, self.offsets, boundaries)
        for k in range(seg_ints.shape[1]):
            out[:, k] = np.bincount(
                self.traj_of_seg, weights=seg_ints[:, k], minlength=self.n_traj
            )
        return out


def _empty_segments(n_traj: int) -> TrajectorySegments:
    return TrajectorySegments(
        knots=np.empty(0),
        values=np.empty(0),
        offsets=np.zeros(1, dtype=np.intp),
        traj_of_seg=np.empty(0, dtype=np.intp),
        n_traj=n_traj,
    )


def _assemble_segments(
    start_values: np.ndarray,
    switch_counts: np.ndarray,
    switch_times: np.ndarray,
    start_times: np.ndarray,
    traj_of_seg: np.ndarray,
    n_traj: int,
    end_times: Optional[np.ndarray] = None,
) -> TrajectorySegments:
    """Build the CSR arrays for alternating-sign segments.

    Each segment starts at start_times with start_values, flips sign at its
    (sorted, concatenated) switch_times, and drops to zero at end_times when
    given (trap death). switch_times must be grouped by segment.
    """
    n_seg = start_values.size
    extra = 2 if end_times is not None else 1
    lens = switch_counts + extra
    offsets = np.zeros(n_seg + 1, dtype=np.intp)
    np.cumsum(lens, out=offsets[1:])
    nk = int(offsets[-1])
    knots = np.empty(nk)
    pos = np.arange(nk) - np.repeat(offsets[:-1], lens)
    is_start = pos == 0
    knots[is_start] = start_times
    if end_times is not None:
        is_end = pos == np.repeat(lens - 1, lens)
        knots[is_end] = end_times
        mid = ~is_start & ~is_end
        knots[mid] = switch_times
        parity = np.where(pos % 2 == 0, 1.0, -1.0)
        values = np.repeat(start_values, lens) * parity
        values[is_end] = 0.0
    else:
        knots[~is_start] = switch_times
        parity = np.where(pos % 2 == 0, 1.0, -1.0)
        values = np.repeat(start_values, lens) * parity
    return TrajectorySegments(
        knots=knots,
        values=values,
        offsets=offsets,
        traj_of_seg=traj_of_seg,
        n_traj=n_traj,
    )


def _sorted_uniform_times(counts: np.ndarray, span: float, rng: np.random.Generator) -> np.ndarray:
    """Concatenated per-segment sorted uniform event times on [0, span)."""
    total = int(counts.sum())
    times = rng.random(total) * span
    seg_ids = np.repeat(np.arange(counts.size), counts)
    return times[np.lexsort((times, seg_ids))]


def sample_telegraph_segments(
    bath: FluctuatorBath,
    n_traj: int,
    duration: float,
    rng: np.random.Generator,
) -> TrajectorySegments:
    """Draw bath trajectories for n_traj ensemble members over [0, duration]."""
    n_seg = n_traj * bath.n_fluctuators
    if bath.rate_min == bath.rate_max:
        rates = np.full(n_seg, bath.rate_min)
    else:
        rates = bath.rate_min * (bath.rate_max / bath.rate_min) ** rng.random(n_seg)
    signs = (rng.integers(0, 2, n_seg) * 2 - 1).astype(float)
    counts = rng.poisson(rates * duration)
    times = _sorted_uniform_times(counts, duration, rng)
    return _assemble_segments(
        start_values=bath.coupling * signs,
        switch_counts=counts,
        switch_times=times,
        start_times=np.zeros(n_seg),
        traj_of_seg=np.repeat(np.arange(n_traj), bath.n_fluctuators),
        n_traj=n_traj,
    )


def sample_burst_segments(
    model: ChargeBurstModel,
    n_traj: int,
    kind: str,
    horizon: float,
    rng: np.random.Generator,
) -> TrajectorySegments:
    """Draw trap trajectories in marker-relative time over [0, horizon].

    The marker fires at time 0 of this clock; callers integrate at
    boundaries shifted by the marker's position in their own timeline, so
    the same draw serves every waiting time (common random numbers).
    """
    p = model.activation_for(kind)
    n_active = rng.binomial(model.n_traps, p, size=n_traj)
    total = int(n_active.sum())
    if total == 0:
        return _empty_segments(n_traj)
    signs = (rng.integers(0, 2, total) * 2 - 1).astype(float)
    if model.relax_rate > 0:
        lifetimes = rng.exponential(1.0 / model.relax_rate, size=total)
    else:
        lifetimes = np.full(total, np.inf)
    window = np.minimum(lifetimes, horizon)
    counts = rng.poisson(model.while_active_switch_rate * window)
    # uniform times on [0, window) per trap: draw on [0,1) and scale
    raw = rng.random(int(counts.sum()))
    seg_ids = np.repeat(np.arange(total), counts)
    times = raw * window[seg_ids]
    times = times[np.lexsort((times, seg_ids))]
    dead = np.isfinite(lifetimes) & (lifetimes <= horizon)
    # traps living past the horizon get a zero-value sentinel just beyond it;
    # harmless since no boundary lies there
    end_times = np.where(dead, lifetimes, horizon * (1.0 + 1e-9) + 1.0)
    return _assemble_segments(
        start_values=model.coupling_q * signs,
        switch_counts=counts,
        switch_times=times,
        start_times=np.zeros(total),
        traj_of_seg=np.repeat(np.arange(n_traj), n_active),
        n_traj=n_traj,
        end_times=end_times,
    )


# ---------------------------------------------------------------------------
# spec-level sampling operations


def sample_static(d: StaticDisorder, seed) -> np.ndarray:
    """(ensemble_size, 2) Gaussian draws of (delta_nu0 offset, nu_q offset)."""
    rng = seed if isinstance(seed, np.random.Generator) else child_rng(seed, 0)
    draws = rng.standard_normal((d.ensemble_size, 2))
    draws[:, 0] *= d.sigma_delta_nu0
    draws[:, 1] *= d.sigma_nu_q
    return draws


def _boundaries_from_intervals(intervals: SequenceT[float]) -> np.ndarray:
    intervals = np.asarray(intervals, dtype=float)
    if np.any(intervals < 0):
        raise ValueError("interval durations must be >= 0")
    return np.concatenate([[0.0], np.cumsum(intervals)])


def simulate_telegraph_phase(bath: FluctuatorBath, intervals: SequenceT[float], seed) -> np.ndarray:
    """Accumulated unit-coefficient phase 2*pi*int(dnu dt) per interval, in rad.

    An order-p coherence under a field-target bath picks up exactly p times
    this phase (q times it for the quadrupole target), applied by the
    engine through the coefficient tables.
    """
    rng = seed if isinstance(seed, np.random.Generator) else child_rng(seed, 0)
    bounds = _boundaries_from_intervals(intervals)
    segs = sample_telegraph_segments(bath, 1, float(bounds[-1]), rng)
    return 2 * np.pi * segs.integrals(bounds)[0]


def simulate_charge_burst(
    model: ChargeBurstModel,
    marker_time: float,
    intervals: SequenceT[float],
    seed,
    kind: str = "light",
) -> np.ndarray:
    """Accumulated quadrupole-channel phase per interval for one burst."""
    rng = seed if isinstance(seed, np.random.Generator) else child_rng(seed, 0)
    bounds = _boundaries_from_intervals(intervals)
    horizon = max(float(bounds[-1]) - marker_time, 0.0)
    if horizon == 0.0:
        return np.zeros(bounds.size - 1)
    segs = sample_burst_segments(model, 1, kind, horizon, rng)
    return 2 * np.pi * segs.integrals(bounds - marker_time)[0]


def realize_for_sequence(
    seq,
    seed,
    field_baths: SequenceT[FluctuatorBath] = (),
    quad_baths: SequenceT[FluctuatorBath] = (),
    burst: Optional[ChargeBurstModel] = None,
) -> NoiseRealization:
    """Sample one NoiseRealization covering every interval of a sequence.

    Markers in the sequence trigger the burst model (when given); telegraph
    baths run for the whole sequence duration.
    """
    for bath, group in [(b, FIELD) for b in field_baths] + [(b, QUADRUPOLE) for b in quad_baths]:
        if bath.target != group:
            raise ValueError(f"bath with target {bath.target!r} passed to the {group} group")
    bounds = _boundaries_from_intervals(seq.interval_durations)
    k = bounds.size - 1
    field_phase = np.zeros(k)
    quad_phase = np.zeros(k)
    rng = child_rng(seed, 0)
    for bath in list(field_baths) + list(quad_baths):
        segs = sample_telegraph_segments(bath, 1, float(bounds[-1]), rng)
        phase = 2 * np.pi * segs.integrals(bounds)[0]
        if bath.target == FIELD:
            field_phase += phase
        else:
            quad_phase += phase
    if burst is not None:
        for t_marker, kind in seq.marker_times():
            horizon = max(float(bounds[-1]) - t_marker, 0.0)
            if horizon > 0:
                segs = sample_burst_segments(burst, 1, kind, horizon, rng)
                quad_phase += 2 * np.pi * segs.integrals(bounds - t_marker)[0]
    seed_val = seed.entropy if isinstance(seed, np.random.SeedSequence) else seed
    return NoiseRealization(
        seed=int(seed_val) if seed_val is not None else 0,
        field_phase=field_phase,
        quad_phase=quad_phase,
    )
