import numpy as np
import pytest

from quadecho.noise import (
    ChargeBurstModel,
    FluctuatorBath,
    NoiseRealization,
    StaticDisorder,
    child_rng,
    realize_for_sequence,
    sample_burst_segments,
    sample_static,
    sample_telegraph_segments,
    simulate_charge_burst,
    simulate_telegraph_phase,
)
from quadecho.pulses import Delay, EnvironmentMarker, PulseEvent, ReadoutSpec, Sequence
from quadecho.spin import SpinSystem, delta_nu_table


# --- static disorder ----------------------------------------------------------


def test_zero_sigmas_give_exact_zeros():
    d = StaticDisorder(0.0, 0.0, ensemble_size=100)
    draws = sample_static(d, 7)
    assert np.all(draws == 0.0)


def test_sample_std_matches_sigma():
    d = StaticDisorder(12.0, 45.0, ensemble_size=10000)
    draws = sample_static(d, 3)
    assert abs(draws[:, 0].std() / 12.0 - 1) < 0.05
    assert abs(draws[:, 1].std() / 45.0 - 1) < 0.05


def test_static_determinism():
    d = StaticDisorder(10.0, 20.0, ensemble_size=64)
    assert np.array_equal(sample_static(d, 11), sample_static(d, 11))
    assert not np.array_equal(sample_static(d, 11), sample_static(d, 12))


def test_ensemble_fid_dephasing_time():
    # satellite-SQT FID under a nu_q spread: |<exp(i 2 pi dq t)>| = 1/e at
    # T2* = sqrt(2) / (2 pi sigma); calibrated so sigma = 45.016 Hz -> 5 ms
    sigma = 45.016
    d = StaticDisorder(0.0, sigma, ensemble_size=20000)
    dq = sample_static(d, 5)[:, 1]
    t2_star = np.sqrt(2.0) / (2 * np.pi * sigma)
    assert abs(t2_star - 5e-3) < 5e-6
    fid = abs(np.exp(1j * 2 * np.pi * dq * t2_star).mean())
    assert abs(fid - np.exp(-1)) < 0.2 * np.exp(-1)


def test_disorder_validation():
    with pytest.raises(ValueError):
        StaticDisorder(-1.0, 0.0, 10)
    with pytest.raises(ValueError):
        StaticDisorder(0.0, 0.0, 0)


# --- telegraph baths ----------------------------------------------------------


def test_zero_coupling_zero_phase():
    b = FluctuatorBath("field", 4, 0.0, 1.0, 1e3)
    assert np.all(simulate_telegraph_phase(b, [1e-3, 5e-3], 9) == 0.0)


def test_frozen_fluctuator_linear_phase():
    b = FluctuatorBath("field", 1, 7.0, 0.0, 0.0)
    intervals = [0.02, 0.05, 0.1]
    ph = simulate_telegraph_phase(b, intervals, 13)
    slope = ph / (2 * np.pi * np.asarray(intervals))
    assert np.allclose(np.abs(slope), 7.0, rtol=1e-12)
    assert len(set(np.sign(slope))) == 1


def test_telegraph_determinism_bit_exact():
    b = FluctuatorBath("quadrupole", 6, 3.0, 0.5, 2e3)
    a = simulate_telegraph_phase(b, [1e-3] * 8, 21)
    c = simulate_telegraph_phase(b, [1e-3] * 8, 21)
    assert np.array_equal(a, c)


def test_telegraph_reslicing_exact():
    b = FluctuatorBath("field", 5, 4.0, 1.0, 5e3)
    coarse = simulate_telegraph_phase(b, [0.004, 0.006], 33)
    fine = simulate_telegraph_phase(b, [0.002, 0.002, 0.003, 0.003], 33)
    assert abs(coarse[0] - fine[:2].sum()) < 1e-12
    assert abs(coarse[1] - fine[2:].sum()) < 1e-12


def test_telegraph_mean_square_phase():
    # frozen-limit variance check: for rate -> 0 the phase over t is
    # +-2*pi*c*t per fluctuator, so var = n * (2 pi c t)^2
    b = FluctuatorBath("field", 3, 2.0, 1e-6, 1e-6)
    rng = child_rng(2, 0)
    segs = sample_telegraph_segments(b, 4000, 0.01, rng)
    ints = segs.integrals(np.array([0.0, 0.01]))
    var = (2 * np.pi * ints[:, 0]).var()
    expect = 3 * (2 * np.pi * 2.0 * 0.01) ** 2
    assert abs(var / expect - 1) < 0.1


def test_bath_validation():
    with pytest.raises(ValueError):
        FluctuatorBath("field", 0, 1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        FluctuatorBath("field", 1, 1.0, 5.0, 2.0)
    with pytest.raises(ValueError):
        FluctuatorBath("field", 1, 1.0, 0.0, 2.0)  # log-uniform needs rate_min > 0
    with pytest.raises(ValueError):
        FluctuatorBath("elsewhere", 1, 1.0, 1.0, 2.0)


# --- charge bursts --------------------------------------------------------------


def test_burst_zero_activation():
    m = ChargeBurstModel(n_traps=50, coupling_q=30.0, activation=0.0, relax_rate=5.0)
    assert np.all(simulate_charge_burst(m, -0.005, [0.01, 0.01], 3) == 0.0)


def test_burst_instant_relax_is_silent():
    m = ChargeBurstModel(n_traps=50, coupling_q=30.0, activation=1.0, relax_rate=1e12)
    ph = simulate_charge_burst(m, -0.01, [0.01, 0.01], 3)
    assert np.abs(ph).max() < 1e-6


def test_burst_before_marker_is_silent():
    m = ChargeBurstModel(n_traps=20, coupling_q=30.0, activation=1.0, relax_rate=0.0)
    # marker fires after the observed window ends
    ph = simulate_charge_burst(m, 1.0, [0.01, 0.01], 3)
    assert np.all(ph == 0.0)


def test_burst_frozen_traps_full_window():
    # no relaxation, no switching: every active trap contributes +-cq for
    # the whole window
    m = ChargeBurstModel(n_traps=1, coupling_q=10.0, activation=1.0,
                         relax_rate=0.0, while_active_switch_rate=0.0)
    ph = simulate_charge_burst(m, 0.0, [0.02], 5)
    assert abs(abs(ph[0]) - 2 * np.pi * 10.0 * 0.02) < 1e-12


def test_burst_aging_reduces_mean_square_phase():
    m = ChargeBurstModel(n_traps=30, coupling_q=25.0, activation=0.8,
                         relax_rate=50.0, while_active_switch_rate=100.0)
    rng = child_rng(7, 0)
    horizon = 2.0
    segs = sample_burst_segments(m, 3000, "light", horizon, rng)
    early = segs.integrals(np.array([0.001, 0.011]))[:, 0]
    late = segs.integrals(np.array([0.5, 0.51]))[:, 0]
    assert (early**2).mean() > 50 * (late**2).mean()


def test_burst_light_vs_bias_activation():
    m = ChargeBurstModel(n_traps=40, coupling_q=10.0, activation=0.2,
                         relax_rate=0.0, activation_light_and_bias=0.9)
    rng_a = child_rng(9, 0)
    rng_b = child_rng(9, 0)
    a = sample_burst_segments(m, 2000, "light", 1.0, rng_a)
    b = sample_burst_segments(m, 2000, "light_and_bias", 1.0, rng_b)
    assert b.traj_of_seg.size > 2 * a.traj_of_seg.size


def test_burst_validation():
    with pytest.raises(ValueError):
        ChargeBurstModel(n_traps=5, coupling_q=1.0, activation=1.5, relax_rate=1.0)
    with pytest.raises(ValueError):
        ChargeBurstModel(n_traps=5, coupling_q=-1.0, activation=0.5, relax_rate=1.0)


# --- realization plumbing -------------------------------------------------------


def test_noise_realization_validates_finiteness():
    with pytest.raises(ValueError):
        NoiseRealization(seed=0, field_phase=np.array([np.inf]), quad_phase=np.array([0.0]))


def test_realize_for_sequence_intervals_and_burst():
    seq = Sequence(
        [
            Delay(5e-3),
            EnvironmentMarker("light", 0.5e-3),
            Delay(0.01),
            PulseEvent(np.pi / 2, 0.0, selective=(0, 1)),
            Delay(1e-3),
            PulseEvent(np.pi, 0.0, selective=(0, 1)),
            Delay(1e-3),
        ],
        ReadoutSpec.population(1),
    )
    bath = FluctuatorBath("field", 3, 2.0, 1.0, 100.0)
    burst = ChargeBurstModel(n_traps=10, coupling_q=20.0, activation=1.0,
                             relax_rate=0.1, while_active_switch_rate=50.0)
    real = realize_for_sequence(seq, 17, field_baths=[bath], burst=burst)
    assert real.field_phase.shape == (5,)
    assert real.quad_phase.shape == (5,)
    # burst phases exist only after the marker fires
    assert real.quad_phase[0] == 0.0
    assert np.any(real.quad_phase[1:] != 0.0)
    again = realize_for_sequence(seq, 17, field_baths=[bath], burst=burst)
    assert np.array_equal(real.field_phase, again.field_phase)
    assert np.array_equal(real.quad_phase, again.quad_phase)


def test_realize_rejects_mismatched_target():
    seq = Sequence([Delay(1e-3)], ReadoutSpec.population(0))
    bath = FluctuatorBath("quadrupole", 3, 2.0, 1.0, 100.0)
    with pytest.raises(ValueError, match="target"):
        realize_for_sequence(seq, 1, field_baths=[bath])


def test_field_noise_scales_with_order_quad_spares_csqt_tqt():
    # one frozen field fluctuator: every order-p element picks up exactly
    # p times the unit phase; a quadrupole fluctuator leaves the center
    # SQT and TQT untouched
    sys = SpinSystem(1.5, nu0=1e6, nu_q=0.0, nu_rf=1e6)
    table = delta_nu_table(sys)
    phase0 = 0.173
    for target, coeff in [("field", table.dnu0_coeff), ("quadrupole", table.nuq_coeff)]:
        ph = np.array([phase0])
        real = NoiseRealization(
            seed=0,
            field_phase=ph if target == "field" else np.zeros(1),
            quad_phase=ph if target == "quadrupole" else np.zeros(1),
        )
        from quadecho.pulses import run_sequence, superposition_state

        for (i, j) in [(1, 2), (0, 2), (0, 3), (0, 1)]:
            seq = Sequence([Delay(0.0)], ReadoutSpec.coherence(i, j))
            rho0 = superposition_state(sys, i, j)
            _, rho = run_sequence(sys, rho0, seq, noise=real)
            got = np.angle(rho[i, j] / rho0[i, j])
            expect = coeff[i, j] * phase0
            assert abs(np.exp(1j * got) - np.exp(1j * expect)) < 1e-12
    # explicit q = 0 statements
    assert table.nuq_coeff[1, 2] == 0.0
    assert table.nuq_coeff[0, 3] == 0.0
