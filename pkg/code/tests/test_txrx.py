"""OAM excitation, detection, ZC pilots, LS estimation and Monte Carlo BER."""

import math

import numpy as np
import pytest

from conftest import make_geometry, tuned
from src.channel import ChannelMatrix, channel_from_geometry
from src.errors import ChannelShapeError, ConfigError, RankDeficientError
from src.metrics import ber_oam_analytic
from src.txrx import (
    LinkBudget,
    PilotConfig,
    bpsk,
    detect_blind,
    detect_ls,
    dft_operator,
    estimate_channel_ls,
    estimation_error,
    gram_residual,
    mse_ls,
    mse_ls_limit,
    oam_excite,
    propagate,
    run_ber,
    zc_pilot,
)


def _bits(rng, n, size):
    return rng.integers(0, 2, size=(n, size))


# ----------------------------------------------------------------------------
# Excitation and blind detection
# ----------------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 7, 8, 16])
def test_dft_operator_is_unitary(n):
    w = dft_operator(n)
    np.testing.assert_allclose(w.adjoint @ w.matrix, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(w.matrix[:, 0], 1 / np.sqrt(n))
    if n > 1:
        assert w.matrix[1, 1] == pytest.approx(np.exp(2j * np.pi / n) / np.sqrt(n))


def test_excitation_length_checked():
    with pytest.raises(ChannelShapeError):
        oam_excite(np.ones(3), dft_operator(4))


def test_noiseless_blind_detection_is_exact(channel, budget, rng):
    constellation = bpsk(budget.symbol_amplitude(8))
    bits = _bits(rng, 8, 10_000)
    v_r = propagate(channel, oam_excite(constellation[bits], dft_operator(8)), 0.0)
    det = detect_blind(channel, v_r, constellation)
    np.testing.assert_array_equal(det.indices, bits)
    assert not det.undetectable.any()


def test_blind_detection_with_oversampled_receive_ring(budget, rng):
    geom = make_geometry(n_tx=4, n_rx=8)
    ch = channel_from_geometry(geom, tuned(geom))
    constellation = bpsk(budget.symbol_amplitude(4))
    bits = _bits(rng, 4, 2_000)
    v_r = propagate(ch, oam_excite(constellation[bits], dft_operator(4)), 0.0)
    np.testing.assert_array_equal(detect_blind(ch, v_r, constellation).indices, bits)


def test_blind_detection_needs_a_multiple_fold(budget):
    geom = make_geometry(n_rx=12)
    ch = channel_from_geometry(geom, tuned(geom))
    with pytest.raises(ChannelShapeError):
        detect_blind(ch, np.zeros(12), bpsk())


def test_noise_needs_a_generator(channel):
    with pytest.raises(ValueError):
        propagate(channel, np.ones(8), 0.1)
    with pytest.raises(ChannelShapeError):
        propagate(channel, np.ones(5), 0.0)


def test_noise_power(rng):
    ch = ChannelMatrix(h=np.zeros((4, 4)), source='imported', frequency=1e6)
    v_r = propagate(ch, np.ones((4, 50_000)), 0.3, rng)
    assert np.mean(np.abs(v_r) ** 2) == pytest.approx(0.3, rel=0.02)
    assert abs(np.mean(v_r.real * v_r.imag)) < 0.01


# ----------------------------------------------------------------------------
# Pilots and LS estimation
# ----------------------------------------------------------------------------

@pytest.mark.parametrize("length,root,n_t", [(11, 1, 8), (16, 3, 8), (17, 1, 8), (23, 5, 20)])
def test_zc_rows_are_orthogonal(length, root, n_t):
    pilot = zc_pilot(PilotConfig(length=length, root=root), n_t)
    assert pilot.shape == (n_t, length)
    np.testing.assert_allclose(np.abs(pilot), 1.0)
    assert gram_residual(pilot) < 1e-12


def test_zc_rows_are_cyclic_shifts():
    pilot = zc_pilot(PilotConfig(length=13, root=2), 4)
    for n in range(1, 4):
        np.testing.assert_allclose(pilot[n], np.roll(pilot[0], n), atol=1e-12)


def test_pilot_validation():
    with pytest.raises(ConfigError, match="coprime"):
        PilotConfig(length=16, root=2)
    with pytest.raises(ConfigError):
        PilotConfig(length=0)
    with pytest.raises(ConfigError):
        PilotConfig(pilot_snr=0.0)
    with pytest.raises(ChannelShapeError):
        zc_pilot(PilotConfig(length=7), 7)
    assert PilotConfig.from_db(17, 1, 30.0).pilot_snr == pytest.approx(1000.0)
    assert PilotConfig(pilot_snr=math.inf).perfect


def test_perfect_pilot_returns_the_channel(channel):
    h_est = estimate_channel_ls(channel, PilotConfig(length=3, pilot_snr=math.inf))
    np.testing.assert_array_equal(h_est, channel.h)
    assert h_est is not channel.h


def test_pilot_must_be_longer_than_both_rings(channel, rng):
    with pytest.raises(ChannelShapeError):
        estimate_channel_ls(channel, PilotConfig(length=7), rng)
    with pytest.raises(ValueError):
        estimate_channel_ls(channel, PilotConfig())


def test_high_snr_estimate_is_close(channel, rng):
    h_est = estimate_channel_ls(channel, PilotConfig(pilot_snr=1e12), rng)
    np.testing.assert_allclose(h_est, channel.h, atol=1e-5)


@pytest.mark.parametrize("pilot_snr", [10.0, 1000.0])
def test_estimation_error_matches_expectation(channel, rng, pilot_snr):
    cfg = PilotConfig(pilot_snr=pilot_snr)
    expected = 8 * 8 / (pilot_snr * 17)
    assert estimation_error(channel, cfg, rng, trials=4000) == pytest.approx(expected, rel=0.03)


def test_estimation_error_falls_one_decade_per_decade(channel, rng):
    snr = np.array([1.0, 10.0, 100.0, 1000.0])
    err = [estimation_error(channel, PilotConfig(pilot_snr=p), rng, trials=2000) for p in snr]
    slope = np.polyfit(np.log10(snr), np.log10(err), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.03)
    assert estimation_error(channel, PilotConfig(pilot_snr=math.inf), rng) == 0.0


def test_noiseless_ls_detection_is_exact(channel, budget, rng):
    constellation = bpsk(budget.symbol_amplitude(8))
    bits = _bits(rng, 8, 5_000)
    v_r = propagate(channel, oam_excite(constellation[bits], dft_operator(8)), 0.0)
    det = detect_ls(channel, channel.h, v_r, constellation)
    np.testing.assert_array_equal(det.indices, bits)
    assert det.condition >= 1.0


def test_ls_detection_under_misalignment(budget, rng):
    geom = make_geometry(n_rx=12, offset_x=6e-3, tilt_y=np.deg2rad(15))
    ch = channel_from_geometry(geom, tuned(geom))
    constellation = bpsk(budget.symbol_amplitude(8))
    bits = _bits(rng, 8, 2_000)
    v_r = propagate(ch, oam_excite(constellation[bits], dft_operator(8)), 0.0)
    np.testing.assert_array_equal(detect_ls(ch, ch.h, v_r, constellation).indices, bits)


def test_ls_recovers_four_modes_on_six_receive_coils(budget, rng):
    geom = make_geometry(n_tx=4, n_rx=6)
    ch = channel_from_geometry(geom, tuned(geom))
    assert ch.fold is None
    constellation = bpsk(budget.symbol_amplitude(4))
    bits = _bits(rng, 4, 5_000)
    v_r = propagate(ch, oam_excite(constellation[bits], dft_operator(4)), 0.0)
    np.testing.assert_array_equal(detect_ls(ch, ch.h, v_r, constellation).indices, bits)


def test_ls_beats_blind_on_the_same_draws_under_tilt(budget, rng):
    geom = make_geometry(tilt_x=np.deg2rad(20))
    ch = channel_from_geometry(geom, tuned(geom))
    point = budget.at_snr(30.0)
    constellation = bpsk(point.symbol_amplitude(8))
    bits = _bits(rng, 8, 20_000)
    v_r = propagate(ch, oam_excite(constellation[bits], dft_operator(8)), point.noise_power, rng)
    blind = np.mean(detect_blind(ch, v_r, constellation).indices != bits)
    ls = np.mean(detect_ls(ch, ch.h, v_r, constellation).indices != bits)
    assert blind > 0
    assert ls < blind


def test_rank_deficient_estimate_rejected(channel):
    with pytest.raises(RankDeficientError) as info:
        detect_ls(channel, np.zeros((8, 8)), np.zeros(8), bpsk())
    assert info.value.rank == 0
    with pytest.raises(ChannelShapeError):
        detect_ls(channel, np.zeros((4, 8)), np.zeros(8), bpsk())


def test_mse_approaches_its_limit(channel, budget, rng):
    cfg = PilotConfig.from_db(17, 1, 60.0)
    mse = mse_ls(channel, cfg, budget, rng, trials=3000)
    assert mse == pytest.approx(mse_ls_limit(channel, budget), rel=0.1)


def test_mse_limit_diagonal_form():
    h = np.diag([1.0, 2.0, 4.0]).astype(complex)
    ch = ChannelMatrix(h=h, source='imported', frequency=1e6)
    budget = LinkBudget(3.0, 0.3)
    full = mse_ls_limit(ch, budget)
    assert full == pytest.approx(0.1 * (1 + 0.25 + 0.0625))
    assert mse_ls_limit(ch, budget, diagonal_only=True) == pytest.approx(full)


# ----------------------------------------------------------------------------
# Link budget
# ----------------------------------------------------------------------------

def test_link_budget():
    budget = LinkBudget(8.0, 0.08)
    assert budget.snr == pytest.approx(100.0)
    assert budget.snr_db == pytest.approx(20.0)
    at = budget.at_snr(10.0)
    assert at.noise_power == pytest.approx(0.8)
    assert at.total_tx_power == 8.0
    assert budget.symbol_amplitude(8) == 1.0
    assert LinkBudget(0.0, 0.08).at_snr(10.0).noise_power == 0.08
    assert LinkBudget(8.0, 0.0).snr == math.inf
    with pytest.raises(ConfigError):
        LinkBudget(-1.0, 0.1)


# ----------------------------------------------------------------------------
# Monte Carlo BER
# ----------------------------------------------------------------------------

def test_dead_channel_guesses(budget):
    ch = ChannelMatrix(h=np.zeros((8, 8)), source='imported', frequency=13.56e6)
    curve = run_ber(ch, budget, 'blind', trials=20_000, rng=np.random.default_rng(3), snr_grid=[])
    assert curve.ber[0] == pytest.approx(0.5, abs=0.01)
    with pytest.raises(RankDeficientError):
        run_ber(ch, budget, 'ls', trials=10, rng=np.random.default_rng(3), snr_grid=[])


def test_ber_is_reproducible(channel, budget):
    a = run_ber(channel, budget, 'ls', trials=3_000, rng=np.random.default_rng(9),
                snr_grid=[0.0, 5.0], pilot=PilotConfig(), batch=700)
    b = run_ber(channel, budget, 'ls', trials=3_000, rng=np.random.default_rng(9),
                snr_grid=[0.0, 5.0], pilot=PilotConfig(), batch=700)
    np.testing.assert_array_equal(a.errors, b.errors)
    assert a.bits.tolist() == [24_000, 24_000]
    assert np.all(a.ci_low <= a.ber) and np.all(a.ber <= a.ci_high)


def test_ber_falls_with_snr(channel, budget, rng):
    curve = run_ber(channel, budget, 'blind', trials=5_000, rng=rng, snr_grid=[0.0, 10.0, 20.0])
    assert curve.ber[0] > curve.ber[1] > curve.ber[2]
    np.testing.assert_array_equal(curve.snr_db, [0.0, 10.0, 20.0])


def test_monte_carlo_agrees_with_analytic(channel, budget, rng):
    grid = np.arange(0.0, 60.0, 0.5)
    analytic = np.array([ber_oam_analytic(channel, budget.at_snr(s)) for s in grid])
    snr = float(grid[np.argmin(np.abs(np.log10(np.maximum(analytic, 1e-300)) + 2.0))])
    expected = ber_oam_analytic(channel, budget.at_snr(snr))
    curve = run_ber(channel, budget, 'blind', trials=20_000, rng=rng, snr_grid=[snr])
    sigma = math.sqrt(expected * (1 - expected) / curve.bits[0])
    assert abs(curve.ber[0] - expected) <= 3 * sigma


@pytest.mark.slow
@pytest.mark.parametrize("snr_db", [5.0, 8.0, 11.0])
def test_monte_carlo_within_three_sigma(channel, budget, snr_db):
    expected = ber_oam_analytic(channel, budget.at_snr(snr_db))
    if expected < 1e-4:
        pytest.skip(f"analytic BER {expected:.2e} needs more than 1e6 bits")
    curve = run_ber(channel, budget, 'blind', trials=125_000,
                    rng=np.random.default_rng(int(snr_db)), snr_grid=[snr_db])
    assert curve.bits[0] == 1_000_000
    sigma = math.sqrt(expected * (1 - expected) / curve.bits[0])
    assert abs(curve.ber[0] - expected) <= 3 * sigma


def test_unknown_detector(channel, budget):
    with pytest.raises(ValueError):
        run_ber(channel, budget, 'mmse', trials=1)
