"""Protocol builders and analysis: echo decays, phase cycling, fits.

All protocols run seeded Monte-Carlo ensembles. Work is split into
fixed-size member chunks whose substreams depend only on (seed, chunk
index), so results are bit-identical for any worker count; chunks can be
farmed out to a process pool. Within a protocol the same noise
trajectories are evaluated for every grid point (common random numbers):
a trajectory is a physical environment history, independent of how long
the pulse sequence happens to observe it.

Timing convention of the noise clock: t = 0 at the first pulse of the
echo block. Intervals before it (initialization gap, environment marker,
waiting time) carry no noise phases, which is exact because the state is
still diagonal there; charge bursts are sampled marker-relative and
integrated at shifted boundaries.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence as SequenceT, Union

import numpy as np
from scipy.optimize import curve_fit

from .noise import (
    ChargeBurstModel,
    FluctuatorBath,
    StaticDisorder,
    child_rng,
    sample_burst_segments,
    sample_static,
    sample_telegraph_segments,
)
from .pulses import (
    Delay,
    EnvironmentMarker,
    InvariantViolation,
    PulseEvent,
    ReadoutSpec,
    Sequence,
    compile_sequence,
    level_state,
    propagate_batch,
    superposition_state,
)
from .spin import CoherenceLabel, SpinSystem, coherence_label

INIT_GAP = 5e-3            # s between initialization and the environment marker
MARKER_DURATION = 0.5e-3   # s, light / light+bias pulse length
CHUNK_SAMPLES = 8192       # fixed chunking => worker-count independent results

# substream tags for child_rng
_TAG_STATIC, _TAG_FIELD, _TAG_QUAD, _TAG_BURST = 0, 1, 2, 3


class FitError(RuntimeError):
    """A decay fit could not produce a trustworthy result."""


class DegenerateTraceError(FitError):
    """The trace carries no decay information (e.g. constant amplitudes)."""


# ---------------------------------------------------------------------------
# result records


@dataclass
class DecayTrace:
    """Echo amplitude versus total evolution time, normalized to ~1 at the start."""

    times: np.ndarray
    amplitudes: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.amplitudes.shape:
            raise ValueError("times and amplitudes must be 1-d arrays of equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.amplitudes)):
            raise ValueError("amplitudes must be finite")


@dataclass
class FitResult:
    """Stretched-exponential fit A*exp(-(t/T2)^alpha) of one decay trace."""

    t2: float
    alpha: float
    amplitude: float
    t2_stderr: float
    alpha_stderr: float
    amplitude_stderr: float
    residual_norm: float
    alpha_fixed: bool
    converged: bool = True
    message: str = ""


@dataclass
class PathwaySpectrum:
    """Phase-cycle record: signal vs pulse phase and its DFT components.

    components[k] is the complex amplitude of the coherence-transfer order
    orders[k]; for the real detected signal components at +/-dp are complex
    conjugates.
    """

    phases: np.ndarray
    amplitudes: np.ndarray
    orders: np.ndarray
    components: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    def magnitude(self, order: int) -> float:
        idx = np.nonzero(self.orders == order)[0]
        if idx.size == 0:
            raise KeyError(f"transfer order {order} outside the resolved range")
        return float(abs(self.components[idx[0]]))

    def synthesize(self) -> np.ndarray:
        """Reconstruct S(phi) from the components (DFT round trip)."""
        return np.real(
            self.components[None, :] * np.exp(1j * self.orders[None, :] * self.phases[:, None])
        ).sum(axis=1)


def pathway_components(phases: np.ndarray, amplitudes: np.ndarray, max_order: int):
    """DFT of a phase-cycled signal onto transfer orders -max..+max."""
    phases = np.asarray(phases, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=float)
    orders = np.arange(-max_order, max_order + 1)
    kernel = np.exp(-1j * orders[None, :] * phases[:, None])
    components = (amplitudes[:, None] * kernel).mean(axis=0)
    return orders, components


# ---------------------------------------------------------------------------
# fitting


def _stretched_exp(t, a, t2, alpha):
    return a * np.exp(-((t / t2) ** alpha))


def _failed_fit(alpha, message: str) -> FitResult:
    return FitResult(
        t2=float("nan"), alpha=float("nan"), amplitude=float("nan"),
        t2_stderr=float("nan"), alpha_stderr=float("nan"),
        amplitude_stderr=float("nan"), residual_norm=float("nan"),
        alpha_fixed=not isinstance(alpha, str), converged=False, message=message,
    )


def _fit_or_failure(trace: "DecayTrace", alpha) -> FitResult:
    """fit_decay, but degenerate traces come back as failure records.

    Scan drivers use this so one flat trace cannot abort a whole scan;
    partial results stay available to the caller.
    """
    try:
        return fit_decay(trace, alpha=alpha)
    except FitError as exc:
        return _failed_fit(alpha, str(exc))


def fit_decay(trace: DecayTrace, alpha: Union[float, str] = 1.0) -> FitResult:
    """Least-squares fit of A*exp(-(t/T2)^alpha).

    alpha may be a fixed exponent or "free" (bounded to [0.5, 4]). Returns
    a FitResult with covariance-based 1-sigma uncertainties; a fit that
    fails to converge comes back with converged=False rather than raising.
    """
    t = trace.times
    y = trace.amplitudes
    if t.size < 4:
        raise FitError(f"need at least 4 points to fit, got {t.size}")
    if np.ptp(y) <= 1e-12 * max(1.0, np.abs(y).max()):
        raise DegenerateTraceError("constant trace carries no decay information")
    free_alpha = isinstance(alpha, str)
    if free_alpha and alpha != "free":
        raise ValueError(f"alpha must be a number or 'free', got {alpha!r}")

    a0 = max(float(y.max()), 1e-6)
    # crude 1/e crossing for the T2 start value
    below = np.nonzero(y < a0 / math.e)[0]
    t2_0 = float(t[below[0]]) if below.size else float(t[-1])
    t2_0 = min(max(t2_0, float(t[0])), 100.0)

    try:
        if free_alpha:
            popt, pcov = curve_fit(
                _stretched_exp, t, y, p0=[a0, t2_0, 1.0],
                bounds=([0.0, 1e-7, 0.5], [10.0 * a0 + 1.0, 100.0, 4.0]),
                maxfev=20000,
            )
            a, t2, al = popt
            errs = np.sqrt(np.abs(np.diag(pcov)))
            a_err, t2_err, al_err = errs
        else:
            al = float(alpha)
            if not 0.0 < al <= 10.0:
                raise FitError(f"fixed alpha {al} out of range")
            fun = lambda tt, a, t2: _stretched_exp(tt, a, t2, al)  # noqa: E731
            popt, pcov = curve_fit(
                fun, t, y, p0=[a0, t2_0],
                bounds=([0.0, 1e-7], [10.0 * a0 + 1.0, 100.0]),
                maxfev=20000,
            )
            a, t2 = popt
            errs = np.sqrt(np.abs(np.diag(pcov)))
            a_err, t2_err = errs
            al_err = 0.0
    except RuntimeError as exc:
        return _failed_fit(alpha, str(exc))
    resid = y - _stretched_exp(t, a, t2, al)
    return FitResult(
        t2=float(t2), alpha=float(al), amplitude=float(a),
        t2_stderr=float(t2_err), alpha_stderr=float(al_err),
        amplitude_stderr=float(a_err),
        residual_norm=float(np.sqrt((resid**2).sum())),
        alpha_fixed=not free_alpha,
    )


# ---------------------------------------------------------------------------
# sequence builders


def _as_pair(transition) -> tuple[int, int]:
    if isinstance(transition, CoherenceLabel):
        return transition.i, transition.j
    i, j = transition
    return int(i), int(j)


def _require_sqt(sys: SpinSystem, transition) -> tuple[int, int]:
    i, j = _as_pair(transition)
    label = coherence_label(sys, i, j)
    if abs(label.order_p) != 1:
        raise ValueError(
            f"transition ({i}, {j}) has |order| = {abs(label.order_p)}, need a single-quantum transition"
        )
    return (i, j) if i < j else (j, i)


def cpmg_sequence(
    pair: tuple[int, int],
    n_pulses: int,
    total_time: float,
    prelude: SequenceT = (),
) -> Sequence:
    """pi/2 - [tau/2n - pi - tau/2n]^n - pi/2 on one selective transition.

    Refocusing pulses sit 90 degrees from the excitation pulse
    (Meiboom-Gill); n_pulses = 1 is the Hahn echo with 2*tau = total_time.
    """
    if n_pulses < 1:
        raise ValueError("need at least one refocusing pulse")
    i, j = pair
    half = total_time / (2 * n_pulses)
    events = list(prelude)
    events.append(PulseEvent(np.pi / 2, 0.0, selective=(i, j)))
    for _ in range(n_pulses):
        events.append(Delay(half))
        events.append(PulseEvent(np.pi, np.pi / 2, selective=(i, j)))
        events.append(Delay(half))
    events.append(PulseEvent(np.pi / 2, 0.0, selective=(i, j)))
    return Sequence(events, ReadoutSpec.population(j))


def three_pulse_sequence(init_level: int, tau1: float, tau2: float, phi: float) -> Sequence:
    """Nonselective 2pi/3 - tau1 - 2pi/3(phi) - tau2 - 2pi/3 echo sequence."""
    theta = 2 * np.pi / 3
    events = [
        PulseEvent(theta, 0.0),
        Delay(tau1),
        PulseEvent(theta, phi),
        Delay(tau2),
        PulseEvent(theta, 0.0),
    ]
    return Sequence(events, ReadoutSpec.population(init_level))


# ---------------------------------------------------------------------------
# chunked ensemble engine


@dataclass(frozen=True)
class _RunPoint:
    """One grid point: a sequence plus its noise-clock geometry."""

    events: tuple
    readout: ReadoutSpec
    echo_bounds: tuple          # noise-clock boundary times of echo intervals
    n_pre_intervals: int        # intervals before the echo block (no noise)
    marker_rel: Optional[float]  # marker start on the noise clock (negative)
    marker_kind: str = "light"


@dataclass(frozen=True)
class _EnsembleSpec:
    sys: SpinSystem
    init_level: int
    disorder: StaticDisorder
    baths: tuple
    burst: Optional[ChargeBurstModel]
    realizations: int
    seed: int


def _detect_batch(sys: SpinSystem, rho: np.ndarray, spec: ReadoutSpec) -> np.ndarray:
    if spec.mode == "coherence":
        return rho[:, spec.i, spec.j]
    if spec.projection is not None:
        from .pulses import pulse_propagator

        u = pulse_propagator(sys, spec.projection)
        rho = u @ rho @ u.conj().T
    return rho[:, spec.level, spec.level]


def _simulate_chunk(args) -> np.ndarray:
    """Propagate one member chunk through every run point.

    Returns (n_points,) complex sums of the detected value over the chunk's
    samples. Substreams depend only on (seed, chunk_index).
    """
    spec: _EnsembleSpec
    points: list[_RunPoint]
    spec, points, chunk_idx, m0, m1 = args
    sys = spec.sys
    r = spec.realizations
    n_members = m1 - m0
    ns = n_members * r

    dis = StaticDisorder(
        spec.disorder.sigma_delta_nu0, spec.disorder.sigma_nu_q, n_members
    )
    static = sample_static(dis, child_rng(spec.seed, _TAG_STATIC, chunk_idx))
    dnu0_s = np.repeat(sys.delta_nu0 + static[:, 0], r)
    nuq_s = np.repeat(sys.nu_q + static[:, 1], r)

    field_baths = [b for b in spec.baths if b.target == "field"]
    quad_baths = [b for b in spec.baths if b.target == "quadrupole"]

    window = max(pt.echo_bounds[-1] for pt in points)
    field_segs = [
        sample_telegraph_segments(b, ns, window, child_rng(spec.seed, _TAG_FIELD, bi, chunk_idx))
        for bi, b in enumerate(field_baths)
    ]
    quad_segs = [
        sample_telegraph_segments(b, ns, window, child_rng(spec.seed, _TAG_QUAD, bi, chunk_idx))
        for bi, b in enumerate(quad_baths)
    ]
    burst_segs = None
    if spec.burst is not None:
        marker_points = [pt for pt in points if pt.marker_rel is not None]
        if marker_points:
            kinds = {pt.marker_kind for pt in marker_points}
            if len(kinds) > 1:
                raise ValueError("one protocol run cannot mix marker kinds")
            horizon = max(pt.echo_bounds[-1] - pt.marker_rel for pt in marker_points)
            burst_segs = sample_burst_segments(
                spec.burst, ns, kinds.pop(), horizon, child_rng(spec.seed, _TAG_BURST, chunk_idx)
            )

    # one kernel walk over the union of all boundary times; per-point phase
    # integrals are then differences of the cumulative sums at the point's
    # own boundary indices
    union = np.unique(np.concatenate([np.asarray(pt.echo_bounds) for pt in points]))

    def _cumulative(seg_list, bounds):
        cum = np.zeros((ns, bounds.size))
        for segs in seg_list:
            cum[:, 1:] += segs.integrals(bounds)
        np.cumsum(cum, axis=1, out=cum)
        return cum

    field_cum = _cumulative(field_segs, union)
    quad_cum = _cumulative(quad_segs, union)
    burst_cum = {}
    if burst_segs is not None:
        for mr in {pt.marker_rel for pt in points if pt.marker_rel is not None}:
            burst_cum[mr] = _cumulative([burst_segs], union - mr)

    rho0 = np.broadcast_to(level_state(sys, spec.init_level), (ns, sys.dim, sys.dim)).copy()
    out = np.zeros(len(points), dtype=complex)
    for pi_, pt in enumerate(points):
        bounds = np.asarray(pt.echo_bounds)
        durations = np.diff(bounds)
        idx = np.searchsorted(union, bounds)
        phi0 = field_cum[:, idx[1:]] - field_cum[:, idx[:-1]]
        phiq = quad_cum[:, idx[1:]] - quad_cum[:, idx[:-1]]
        if pt.marker_rel is not None and burst_cum:
            bc = burst_cum[pt.marker_rel]
            phiq = phiq + (bc[:, idx[1:]] - bc[:, idx[:-1]])
        x = 2 * np.pi * (dnu0_s[:, None] * durations[None, :] + phi0)
        y = 2 * np.pi * (nuq_s[:, None] * durations[None, :] + phiq)
        if pt.n_pre_intervals:
            pre = np.zeros((ns, pt.n_pre_intervals))
            x = np.concatenate([pre, x], axis=1)
            y = np.concatenate([pre, y], axis=1)
        seq = Sequence(list(pt.events), pt.readout)
        plan = compile_sequence(sys, seq)
        rho = propagate_batch(plan, rho0.copy(), x, y)
        herm = np.abs(rho - rho.conj().transpose(0, 2, 1)).max()
        if herm > 1e-9:
            raise InvariantViolation(f"hermiticity drift {herm:.2e} in batch propagation")
        out[pi_] = _detect_batch(sys, rho, pt.readout).sum()
    return out


def _run_points(
    spec: _EnsembleSpec, points: list[_RunPoint], workers: int = 1
) -> np.ndarray:
    """Ensemble means of the detected value at every run point."""
    n = spec.disorder.ensemble_size
    r = spec.realizations
    chunk_members = max(1, CHUNK_SAMPLES // max(r, 1))
    tasks = []
    for ci, m0 in enumerate(range(0, n, chunk_members)):
        tasks.append((spec, points, ci, m0, min(m0 + chunk_members, n)))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            sums = list(ex.map(_simulate_chunk, tasks))
    else:
        sums = [_simulate_chunk(t) for t in tasks]
    total = np.sum(sums, axis=0)
    return total / (n * r)


# ---------------------------------------------------------------------------
# protocols


def _echo_points(
    pair: tuple[int, int],
    n_pulses: int,
    total_times: np.ndarray,
    marker: Optional[tuple[str, float]],
) -> list[_RunPoint]:
    points = []
    for tt in total_times:
        prelude: list = []
        marker_rel = None
        kind = "light"
        n_pre = 0
        if marker is not None:
            kind, t_space = marker
            prelude = [
                Delay(INIT_GAP),
                EnvironmentMarker(kind, MARKER_DURATION),
                Delay(t_space),
            ]
            marker_rel = -(t_space + MARKER_DURATION)
            n_pre = 3
        seq = cpmg_sequence(pair, n_pulses, tt, prelude=prelude)
        half = tt / (2 * n_pulses)
        bounds = np.concatenate([[0.0], np.cumsum(np.full(2 * n_pulses, half))])
        points.append(
            _RunPoint(
                events=seq.events,
                readout=seq.detect,
                echo_bounds=tuple(bounds),
                n_pre_intervals=n_pre,
                marker_rel=marker_rel,
                marker_kind=kind,
            )
        )
    return points


def _echo_amplitudes(
    sys: SpinSystem,
    pair: tuple[int, int],
    n_pulses: int,
    total_times: np.ndarray,
    disorder: StaticDisorder,
    baths: SequenceT[FluctuatorBath],
    burst: Optional[ChargeBurstModel],
    marker: Optional[tuple[str, float]],
    realizations: int,
    seed: int,
    workers: int,
) -> np.ndarray:
    points = _echo_points(pair, n_pulses, total_times, marker)
    spec = _EnsembleSpec(
        sys=sys,
        init_level=pair[0],
        disorder=disorder,
        baths=tuple(baths),
        burst=burst,
        realizations=realizations,
        seed=seed,
    )
    pops = _run_points(spec, points, workers=workers).real
    # full echo drives the addressed population to level j; dead echo leaves
    # the subspace populations equal, so 2*p_j - 1 maps echo -> 1, none -> 0
    return 2.0 * pops - 1.0


def hahn_echo_decay(
    sys: SpinSystem,
    transition,
    tau_list: SequenceT[float],
    disorder: StaticDisorder,
    baths: SequenceT[FluctuatorBath] = (),
    burst: Optional[ChargeBurstModel] = None,
    marker: Optional[tuple[str, float]] = None,
    realizations: int = 1,
    seed: int = 0,
    workers: int = 1,
    normalize: bool = True,
) -> DecayTrace:
    """Selective pi/2 - tau - pi - tau - pi/2 echo decay on one SQT.

    `marker`, when given as (kind, t_space), inserts a light or light+bias
    pulse 5 ms after initialization followed by the waiting time t_space
    before the echo block; the burst model then acts on the quadrupole
    channel. Returns the trace over total evolution time 2*tau.
    """
    pair = _require_sqt(sys, transition)
    taus = np.asarray(tau_list, dtype=float)
    total = 2.0 * taus
    amps = _echo_amplitudes(
        sys, pair, 1, total, disorder, baths, burst, marker, realizations, seed, workers
    )
    meta = {
        "protocol": "hahn",
        "transition": pair,
        "marker": marker,
        "seed": seed,
        "realizations": realizations,
        "ensemble": disorder.ensemble_size,
    }
    if normalize and amps[0] != 0:
        amps = amps / amps[0]
    return DecayTrace(times=total, amplitudes=amps, meta=meta)


def cpmg_scan(
    sys: SpinSystem,
    transition,
    n_list: SequenceT[int],
    total_time_grid: SequenceT[float],
    disorder: StaticDisorder,
    baths: SequenceT[FluctuatorBath] = (),
    burst: Optional[ChargeBurstModel] = None,
    marker: Optional[tuple[str, float]] = None,
    realizations: int = 1,
    seed: int = 0,
    workers: int = 1,
    alpha: Union[float, str] = "free",
) -> tuple[list[tuple[int, FitResult]], float, list[DecayTrace]]:
    """Carr-Purcell scan: fit T2 for each pulse number, then beta from log-log.

    n = 1 reproduces hahn_echo_decay bit for bit on the same grid and seed
    (identical sequence, substreams and reduction order).
    """
    pair = _require_sqt(sys, transition)
    grid = np.asarray(total_time_grid, dtype=float)
    points: list[_RunPoint] = []
    for n_pulses in n_list:
        points.extend(_echo_points(pair, int(n_pulses), grid, marker))
    spec = _EnsembleSpec(
        sys=sys, init_level=pair[0], disorder=disorder, baths=tuple(baths),
        burst=burst, realizations=realizations, seed=seed,
    )
    amps_all = 2.0 * _run_points(spec, points, workers=workers).real - 1.0
    results = []
    traces = []
    g = grid.size
    for idx, n_pulses in enumerate(n_list):
        amps = amps_all[idx * g:(idx + 1) * g]
        norm = amps[0] if amps[0] != 0 else 1.0
        trace = DecayTrace(
            times=grid,
            amplitudes=amps / norm,
            meta={"protocol": "cpmg", "n_pulses": int(n_pulses), "transition": pair, "seed": seed},
        )
        traces.append(trace)
        results.append((int(n_pulses), _fit_or_failure(trace, alpha)))
    ns = np.array([n for n, _ in results], dtype=float)
    t2s = np.array([f.t2 for _, f in results])
    good = np.isfinite(t2s) & (t2s > 0)
    if good.sum() > 1:
        beta = float(np.polyfit(np.log(ns[good]), np.log(t2s[good]), 1)[0])
    else:
        beta = float("nan")
    return results, beta, traces


def tspace_scan(
    sys: SpinSystem,
    transition,
    t_space_list: SequenceT[float],
    burst_kind: str,
    tau_list: SequenceT[float],
    disorder: StaticDisorder,
    baths: SequenceT[FluctuatorBath] = (),
    burst: Optional[ChargeBurstModel] = None,
    realizations: int = 1,
    seed: int = 0,
    workers: int = 1,
    alpha: Union[float, str] = 2.0,
) -> tuple[list[tuple[float, FitResult]], list[DecayTrace]]:
    """T2 versus waiting time after a light/bias pulse.

    Wraps hahn_echo_decay with the marker inserted 5 ms after
    initialization. All waiting times run against the same noise draws
    (one trap ensemble, sampled marker-relative), so the t_space dependence
    is purely the aging of the trap ensemble.
    """
    pair = _require_sqt(sys, transition)
    taus = np.asarray(tau_list, dtype=float)
    total = 2.0 * taus
    points: list[_RunPoint] = []
    for t_space in t_space_list:
        points.extend(_echo_points(pair, 1, total, (burst_kind, float(t_space))))
    spec = _EnsembleSpec(
        sys=sys, init_level=pair[0], disorder=disorder, baths=tuple(baths),
        burst=burst, realizations=realizations, seed=seed,
    )
    amps_all = 2.0 * _run_points(spec, points, workers=workers).real - 1.0
    results = []
    traces = []
    g = total.size
    for idx, t_space in enumerate(t_space_list):
        amps = amps_all[idx * g:(idx + 1) * g]
        norm = amps[0] if amps[0] != 0 else 1.0
        trace = DecayTrace(
            times=total,
            amplitudes=amps / norm,
            meta={
                "protocol": "tspace", "transition": pair, "seed": seed,
                "t_space": float(t_space), "marker_kind": burst_kind,
            },
        )
        traces.append(trace)
        results.append((float(t_space), _fit_or_failure(trace, alpha)))
    return results, traces


def _check_phase_steps(sys: SpinSystem, n_phase_steps: int) -> int:
    max_order = int(round(2 * (2 * sys.spin_i)))
    if n_phase_steps <= 2 * max_order + 1:
        raise ValueError(
            f"n_phase_steps = {n_phase_steps} aliases transfer orders up to {max_order}; "
            f"need more than {2 * max_order + 1}"
        )
    return max_order


def _phase_cycle_points(
    init_level: int, tau1: float, tau2: float, phis: np.ndarray
) -> list[_RunPoint]:
    bounds = (0.0, float(tau1), float(tau1) + float(tau2))
    points = []
    for phi in phis:
        seq = three_pulse_sequence(init_level, tau1, tau2, phi)
        points.append(
            _RunPoint(
                events=seq.events,
                readout=seq.detect,
                echo_bounds=bounds,
                n_pre_intervals=0,
                marker_rel=None,
            )
        )
    return points


def three_pulse_phase_cycle(
    sys: SpinSystem,
    init_level: int,
    tau1: float,
    tau2: float,
    n_phase_steps: int = 24,
    disorder: StaticDisorder = StaticDisorder(),
    baths: SequenceT[FluctuatorBath] = (),
    realizations: int = 1,
    seed: int = 0,
    workers: int = 1,
) -> PathwaySpectrum:
    """Phase-cycled three-pulse echo, Fourier-separated by transfer order.

    The middle pulse phase is stepped through k*2pi/n; a coherence pathway
    whose order changes by dp at that pulse modulates the detected signal
    as exp(i*phi*dp), so the DFT over phi resolves the pathways. Requires
    enough steps to hold every order |dp| <= 2*(2I) without aliasing.
    """
    max_order = _check_phase_steps(sys, n_phase_steps)
    phis = 2 * np.pi * np.arange(n_phase_steps) / n_phase_steps
    points = _phase_cycle_points(init_level, tau1, tau2, phis)
    spec = _EnsembleSpec(
        sys=sys,
        init_level=init_level,
        disorder=disorder,
        baths=tuple(baths),
        burst=None,
        realizations=realizations,
        seed=seed,
    )
    signal = _run_points(spec, points, workers=workers).real
    orders, components = pathway_components(phis, signal, max_order)
    return PathwaySpectrum(
        phases=phis,
        amplitudes=signal,
        orders=orders,
        components=components,
        meta={
            "protocol": "phase_cycle",
            "init_level": init_level,
            "tau1": float(tau1),
            "tau2": float(tau2),
            "seed": seed,
        },
    )


def multiquantum_decays(
    sys: SpinSystem,
    init_level: int,
    tau_list: SequenceT[float],
    disorder: StaticDisorder,
    baths: SequenceT[FluctuatorBath] = (),
    n_phase_steps: int = 24,
    realizations: int = 1,
    seed: int = 0,
    workers: int = 1,
) -> dict[str, DecayTrace]:
    """Echo decays of the SQT/DQT/TQT pathway components (dp = 2, 4, 6).

    Runs the phase cycle at tau = tau1 = tau2 for every tau against one
    shared set of noise trajectories and tracks the DFT magnitudes,
    normalized to the shortest tau.
    """
    max_order = _check_phase_steps(sys, n_phase_steps)
    taus = np.asarray(tau_list, dtype=float)
    phis = 2 * np.pi * np.arange(n_phase_steps) / n_phase_steps
    points: list[_RunPoint] = []
    for tau in taus:
        points.extend(_phase_cycle_points(init_level, tau, tau, phis))
    spec = _EnsembleSpec(
        sys=sys,
        init_level=init_level,
        disorder=disorder,
        baths=tuple(baths),
        burst=None,
        realizations=realizations,
        seed=seed,
    )
    signal_all = _run_points(spec, points, workers=workers).real
    comps = {2: [], 4: [], 6: []}
    for g in range(taus.size):
        signal = signal_all[g * n_phase_steps:(g + 1) * n_phase_steps]
        _, components = pathway_components(phis, signal, max_order)
        for dp in comps:
            comps[dp].append(components[max_order + dp])
    names = {2: "SQT", 4: "DQT", 6: "TQT"}
    out = {}
    for dp, series in comps.items():
        series = np.asarray(series)
        # the echo pathway has a fixed complex phase set by the pulse phases;
        # projecting onto it (taken from the strongest point) instead of
        # taking magnitudes avoids the |.|-estimator noise floor
        ref = series[0]
        phase = ref / abs(ref) if abs(ref) > 0 else 1.0
        signed = np.real(series * np.conj(phase))
        norm = signed[0] if signed[0] != 0 else 1.0
        out[names[dp]] = DecayTrace(
            times=2 * taus,
            amplitudes=signed / norm,
            meta={"protocol": "multiquantum", "delta_p": dp, "init_level": init_level, "seed": seed},
        )
    return out


def coherence_refocus_amplitude(
    sys: SpinSystem,
    pair: tuple[int, int],
    tau: float,
    disorder: StaticDisorder,
    refocus: Optional[PulseEvent] = None,
    seed: int = 0,
    workers: int = 1,
) -> float:
    """Normalized pi-refocused echo amplitude of one prepared coherence.

    Prepares (|i> + |j>)/sqrt(2), evolves tau - pi(nonselective) - tau over
    the static ensemble and reports |<rho_i'j'>| / 0.5 at the mirrored
    element. Exactly 1 for quadrupole-immune coherences; decays with the
    nu_q spread otherwise.
    """
    i, j = pair
    refocus = refocus or PulseEvent(np.pi, 0.0)
    i2, j2 = sys.dim - 1 - i, sys.dim - 1 - j
    seq_events = (Delay(tau), refocus, Delay(tau))
    readout = ReadoutSpec.coherence(i2, j2)
    n = disorder.ensemble_size
    static = sample_static(disorder, child_rng(seed, _TAG_STATIC, 0))
    dnu0_s = sys.delta_nu0 + static[:, 0]
    nuq_s = sys.nu_q + static[:, 1]
    durations = np.array([tau, tau], dtype=float)
    x = 2 * np.pi * dnu0_s[:, None] * durations[None, :]
    y = 2 * np.pi * nuq_s[:, None] * durations[None, :]
    rho0 = np.broadcast_to(superposition_state(sys, i, j), (n, sys.dim, sys.dim)).copy()
    plan = compile_sequence(sys, Sequence(list(seq_events), readout))
    rho = propagate_batch(plan, rho0, x, y)
    val = rho[:, i2, j2].mean()
    return float(abs(val) / 0.5)
