import numpy as np
import pytest

from quadecho.experiments import (
    DecayTrace,
    DegenerateTraceError,
    FitError,
    PathwaySpectrum,
    cpmg_scan,
    coherence_refocus_amplitude,
    fit_decay,
    hahn_echo_decay,
    multiquantum_decays,
    pathway_components,
    three_pulse_phase_cycle,
    tspace_scan,
)
from quadecho.noise import ChargeBurstModel, FluctuatorBath, StaticDisorder
from quadecho.spin import SpinSystem

SYS = SpinSystem(1.5, nu0=1e6, nu_q=0.0, nu_rf=1e6)
DIS = StaticDisorder(30.0, 45.0, ensemble_size=400)
TAUS = [1e-3, 3e-3, 6e-3, 10e-3, 15e-3]


# --- fitting -------------------------------------------------------------------


def test_fit_exponential_round_trip():
    t = np.linspace(2e-3, 0.2, 25)
    trace = DecayTrace(times=t, amplitudes=np.exp(-t / 48.3e-3))
    fit = fit_decay(trace, alpha=1.0)
    assert abs(fit.t2 - 48.3e-3) < 1e-3 * 48.3e-3
    assert fit.alpha == 1.0 and fit.alpha_fixed and fit.converged


def test_fit_gaussian_round_trip():
    t = np.linspace(0.2e-3, 12e-3, 25)
    trace = DecayTrace(times=t, amplitudes=np.exp(-((t / 4.4e-3) ** 2)))
    fit = fit_decay(trace, alpha=2.0)
    assert abs(fit.t2 - 4.4e-3) < 1e-3 * 4.4e-3
    free = fit_decay(trace, alpha="free")
    assert abs(free.alpha - 2.0) < 1e-3
    assert abs(free.t2 - 4.4e-3) < 1e-4 * 4.4e-3


def test_fit_constant_trace_raises():
    t = np.linspace(0, 1, 10)
    with pytest.raises(DegenerateTraceError):
        fit_decay(DecayTrace(times=t, amplitudes=np.ones(10)))


def test_fit_too_few_points():
    with pytest.raises(FitError):
        fit_decay(DecayTrace(times=[0.0, 1.0, 2.0], amplitudes=[1.0, 0.5, 0.2]))


def test_fit_scale_equivariance():
    rng = np.random.default_rng(0)
    t = np.linspace(1e-3, 0.1, 20)
    y = np.exp(-((t / 0.03) ** 1.4)) + rng.normal(0, 1e-3, t.size)
    base = fit_decay(DecayTrace(times=t, amplitudes=y), alpha="free")
    scaled = fit_decay(DecayTrace(times=t, amplitudes=7.3 * y), alpha="free")
    assert abs(scaled.t2 / base.t2 - 1) < 1e-9
    assert abs(scaled.alpha - base.alpha) < 1e-9
    assert abs(scaled.amplitude / base.amplitude - 7.3) < 1e-6


def test_fit_reports_uncertainties():
    rng = np.random.default_rng(1)
    t = np.linspace(1e-3, 0.15, 30)
    y = np.exp(-t / 0.05) + rng.normal(0, 0.01, t.size)
    fit = fit_decay(DecayTrace(times=t, amplitudes=y), alpha=1.0)
    assert 0 < fit.t2_stderr < 0.2 * fit.t2
    assert fit.residual_norm > 0


def test_trace_validation():
    with pytest.raises(ValueError):
        DecayTrace(times=[1e-3, 1e-3], amplitudes=[1.0, 0.9])
    with pytest.raises(ValueError):
        DecayTrace(times=[1e-3, 2e-3], amplitudes=[1.0, np.nan])


# --- DFT pathway machinery -------------------------------------------------------


def test_dft_identity_synthetic_cos4phi():
    n = 24
    phis = 2 * np.pi * np.arange(n) / n
    signal = np.cos(4 * phis)
    orders, comps = pathway_components(phis, signal, 6)
    mags = np.abs(comps)
    for k, dp in enumerate(orders):
        expect = 0.5 if abs(dp) == 4 else 0.0
        assert abs(mags[k] - expect) < 1e-12


def test_dft_round_trip_exact():
    rng = np.random.default_rng(2)
    n = 24
    phis = 2 * np.pi * np.arange(n) / n
    # real signal with components only inside the resolvable band
    signal = np.zeros(n)
    for dp in range(0, 7):
        a, b = rng.standard_normal(2)
        signal += a * np.cos(dp * phis) + b * np.sin(dp * phis)
    orders, comps = pathway_components(phis, signal, 6)
    spec = PathwaySpectrum(phases=phis, amplitudes=signal, orders=orders, components=comps)
    assert np.abs(spec.synthesize() - signal).max() < 1e-12


def test_phase_cycle_rejects_aliasing():
    with pytest.raises(ValueError, match="alias"):
        three_pulse_phase_cycle(SYS, 2, 1e-3, 1e-3, n_phase_steps=13, disorder=DIS, seed=0)


# --- protocol sanity ---------------------------------------------------------------


def test_noise_free_hahn_flat_at_one():
    trace = hahn_echo_decay(SYS, (1, 2), TAUS, DIS, seed=3)
    assert np.allclose(trace.amplitudes, 1.0, atol=1e-9)
    assert np.allclose(trace.times, 2 * np.asarray(TAUS))


def test_hahn_rejects_non_sqt():
    with pytest.raises(ValueError, match="single-quantum"):
        hahn_echo_decay(SYS, (0, 2), TAUS, DIS, seed=0)


def test_cpmg_n1_equals_hahn_bit_for_bit():
    bath = FluctuatorBath("field", 3, 5.0, 1.0, 1e3)
    hahn = hahn_echo_decay(SYS, (1, 2), TAUS, DIS, baths=[bath], realizations=2, seed=9)
    _, _, traces = cpmg_scan(
        SYS, (1, 2), [1], [2 * t for t in TAUS], DIS, baths=[bath], realizations=2, seed=9,
        alpha=1.0,
    )
    assert np.array_equal(hahn.amplitudes, traces[0].amplitudes)


def test_worker_count_does_not_change_results():
    bath = FluctuatorBath("field", 3, 5.0, 1.0, 1e3)
    big = StaticDisorder(30.0, 45.0, ensemble_size=9000)
    a = hahn_echo_decay(SYS, (1, 2), TAUS[:4], big, baths=[bath], seed=4, workers=1)
    b = hahn_echo_decay(SYS, (1, 2), TAUS[:4], big, baths=[bath], seed=4, workers=3)
    assert np.array_equal(a.amplitudes, b.amplitudes)


def test_multiquantum_flat_without_bath():
    taus = np.array([4e-3, 8e-3, 12e-3, 16e-3])
    traces = multiquantum_decays(SYS, 2, taus, StaticDisorder(100.0, 200.0, 10000), seed=5)
    # the SQT pathway amplitude is the smallest (~0.012), so the
    # finite-ensemble residual of dephased same-bin pathways (~1e-3 at
    # N = 1e4) shows up strongest there
    tol = {"SQT": 0.20, "DQT": 0.03, "TQT": 0.04}
    for name, trace in traces.items():
        assert np.abs(trace.amplitudes - 1.0).max() < tol[name], (name, trace.amplitudes)


def test_tspace_flat_without_burst():
    res, _ = tspace_scan(
        SYS, (0, 1), [1e-3, 0.1, 1.0], "light",
        tau_list=[1e-3, 4e-3, 8e-3, 14e-3, 22e-3],
        disorder=DIS, baths=[FluctuatorBath("field", 4, 12.0, 2e3, 6e3)],
        realizations=4, seed=6, alpha=1.0,
    )
    t2s = np.array([f.t2 for _, f in res])
    assert np.ptp(t2s) / t2s.mean() < 0.02


def test_tspace_burst_kind_selects_activation():
    burst = ChargeBurstModel(
        n_traps=40, coupling_q=30.0, activation=0.05, relax_rate=6.0,
        while_active_switch_rate=200.0, activation_light_and_bias=0.9,
    )
    kw = dict(
        tau_list=[1e-3, 3e-3, 6e-3, 10e-3, 16e-3], disorder=DIS,
        burst=burst, realizations=2, seed=8, alpha=2.0,
    )
    light, _ = tspace_scan(SYS, (0, 1), [1e-3], "light", **kw)
    bias, _ = tspace_scan(SYS, (0, 1), [1e-3], "light_and_bias", **kw)
    assert bias[0][1].t2 < light[0][1].t2


def test_quadrupole_bath_spares_center_sqt():
    # quadrupole-target fluctuators dephase the satellite SQT but leave
    # the center SQT exactly untouched (zero nu_q coefficient)
    qbath = FluctuatorBath("quadrupole", 6, 25.0, 10.0, 2e3)
    taus = [1e-3, 5e-3, 10e-3, 18e-3, 30e-3]
    satellite = hahn_echo_decay(SYS, (0, 1), taus, DIS, baths=[qbath], realizations=4, seed=12)
    center = hahn_echo_decay(SYS, (1, 2), taus, DIS, baths=[qbath], realizations=4, seed=12)
    assert satellite.amplitudes[-1] < 0.7
    assert np.abs(center.amplitudes - 1.0).max() < 1e-9


def test_refocus_amplitude_helper():
    dis = StaticDisorder(30.0, 45.016, ensemble_size=2000)
    assert coherence_refocus_amplitude(SYS, (1, 2), 10e-3, dis, seed=1) >= 0.999
    assert coherence_refocus_amplitude(SYS, (0, 1), 10e-3, dis, seed=1) < 0.05


def test_pathway_spectrum_magnitude_accessor():
    spec = three_pulse_phase_cycle(
        SYS, 2, 0.5e-3, 0.5e-3, n_phase_steps=16,
        disorder=StaticDisorder(0.0, 0.0, 1), seed=0,
    )
    assert spec.magnitude(4) > 0
    with pytest.raises(KeyError):
        spec.magnitude(9)
