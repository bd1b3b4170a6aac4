"""Mutual information, threshold, and key-rate bound tests."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hdqkd import security
from hdqkd.channel import ChannelParams
from hdqkd.security import RateParams

# Published disturbance limits (percent): N -> (two-basis individual, coherent)
PUBLISHED_LIMITS = {
    2: (14.64, 11.00),
    3: (21.13, 15.95),
    4: (25.00, 18.93),
    5: (27.64, 20.99),
    8: (32.32, 24.70),
}


def iab_oracle(f, n):
    """Direct evaluation of log2 N + F log2 F + (1-F) log2((1-F)/(N-1))."""
    total = math.log2(n)
    if f > 0:
        total += f * math.log2(f)
    if f < 1:
        total += (1 - f) * math.log2((1 - f) / (n - 1))
    return total


def test_mutual_info_ab_examples():
    assert security.mutual_info_ab(1.0, 4) == pytest.approx(2.0, abs=1e-15)
    assert security.mutual_info_ab(0.25, 4) == pytest.approx(0.0, abs=1e-12)
    assert security.mutual_info_ab(0.75, 4) == pytest.approx(0.7924812503605781, abs=1e-12)
    assert security.mutual_info_ab(0.75, 4) == pytest.approx(iab_oracle(0.75, 4), abs=1e-15)


def test_mutual_info_ab_clamps_below_floor():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value = security.mutual_info_ab(0.1, 4)
    assert caught
    assert value == pytest.approx(0.0, abs=1e-12)


@given(st.sampled_from([2, 3, 4, 5, 8]))
def test_mutual_info_ab_monotone_and_bounded(n):
    grid = np.linspace(1.0 / n, 1.0, 200)
    values = [security.mutual_info_ab(float(f), n) for f in grid]
    assert values[0] == pytest.approx(0.0, abs=1e-9)
    assert values[-1] == pytest.approx(math.log2(n), abs=1e-12)
    assert all(b > a - 1e-12 for a, b in zip(values, values[1:]))
    assert all(0.0 <= v <= math.log2(n) + 1e-12 for v in values)


def test_eve_fidelity_examples():
    assert security.eve_fidelity(1.0, 4) == pytest.approx(0.25, abs=1e-15)
    assert security.eve_fidelity(0.75, 4) == pytest.approx(0.75, abs=1e-12)
    fstar = (1.0 + 1.0 / math.sqrt(2.0)) / 2.0
    assert security.eve_fidelity(fstar, 2) == pytest.approx(fstar, abs=1e-12)


@given(st.sampled_from([2, 3, 4, 5, 8]))
def test_eve_fidelity_fixed_point(n):
    fstar = (1.0 + 1.0 / math.sqrt(n)) / 2.0
    assert security.eve_fidelity(fstar, n) == pytest.approx(fstar, abs=1e-9)


@given(st.sampled_from([2, 3, 4, 5, 8]))
def test_eve_fidelity_increases_with_disturbance(n):
    grid = np.linspace(0.0, 0.5, 100)
    values = [security.eve_fidelity(1.0 - d, n) for d in grid]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_mutual_info_ae():
    assert security.mutual_info_ae(1.0, 4) == pytest.approx(0.0, abs=1e-12)
    assert security.mutual_info_ae(0.75, 4) == pytest.approx(
        security.mutual_info_ab(0.75, 4), abs=1e-9
    )
    assert security.mutual_info_ae(0.9, 2) < security.mutual_info_ab(0.9, 2)


def test_secret_rate_ideal():
    assert security.secret_rate_ideal(0.0, 4) == pytest.approx(2.0, abs=1e-12)
    assert security.secret_rate_ideal(0.25, 4) == pytest.approx(0.0, abs=1e-6)
    assert security.secret_rate_ideal(0.13, 4) > 0.0
    assert security.secret_rate_ideal(0.4, 4) == 0.0


@pytest.mark.parametrize("n", sorted(PUBLISHED_LIMITS))
def test_thresholds_match_published_table(n):
    d2, dcoh = PUBLISHED_LIMITS[n]
    assert abs(security.threshold_individual_2mub(n) - d2) <= 0.02
    assert abs(security.threshold_coherent(n) - dcoh) <= 0.02


@pytest.mark.parametrize("n", sorted(PUBLISHED_LIMITS))
def test_threshold_matches_closed_form(n):
    closed = 50.0 * (1.0 - 1.0 / math.sqrt(n))
    assert abs(security.threshold_individual_2mub(n) - closed) <= 1e-6


def test_threshold_table_rows_and_ordering():
    table = security.threshold_table()
    assert table.row(3) == pytest.approx((21.13, 22.67, 15.95), abs=0.02)
    assert table.row(5) == pytest.approx((27.64, 29.23, 20.99), abs=0.02)
    for i, n in enumerate(table.dims):
        assert table.d2_individual_pct[i] < table.d_nplus1_individual_pct[i]
    for col in (table.d2_individual_pct, table.d_nplus1_individual_pct, table.d_coherent_pct):
        assert all(b > a for a, b in zip(col, col[1:]))


def zero_length_channel():
    return ChannelParams(length_km=0.0)


def test_gain_and_error_examples():
    ch = zero_length_channel()
    y0 = 4 * ch.p_dark
    q, e = security.gain_and_error(0.0, ch, 4, e_det=0.0)
    assert q == pytest.approx(y0, rel=1e-12)
    assert e == pytest.approx(0.75, abs=1e-12)
    q, e = security.gain_and_error(0.5, ChannelParams(length_km=0.0, p_dark=0.0), 4, e_det=0.0)
    assert e == 0.0
    q, _ = security.gain_and_error(0.45, ch, 4, e_det=0.0)
    expected = 1.0 - (1.0 - y0) * math.exp(-0.045)
    assert q == pytest.approx(expected, rel=1e-12)
    assert q == pytest.approx(0.0440, abs=2e-4)
    with pytest.raises(ValueError):
        security.gain_and_error(0.0, ChannelParams(length_km=0.0, p_dark=0.0), 4, e_det=0.0)


def forward_yields(params, n_dim):
    """Exact Poisson forward model used as the soundness oracle."""
    eta = security.transmittance(params)
    y0 = n_dim * params.p_dark
    y1_true = 1.0 - (1.0 - y0) * (1.0 - eta)
    return eta, y0, y1_true


def test_decoy_bounds_sound_and_tight():
    mu, nu = 0.45, 0.15
    for length in np.linspace(0.0, 100.0, 21):
        params = ChannelParams(length_km=float(length))
        eta, y0, y1_true = forward_yields(params, 4)
        q_mu, e_mu = security.gain_and_error(mu, params, 4, e_det=0.0)
        q_nu, e_nu = security.gain_and_error(nu, params, 4, e_det=0.0)
        y1, e1 = security.decoy_bounds(q_mu, e_mu, q_nu, e_nu, mu, nu, y0, 4)
        assert y1 <= y1_true + 1e-15
        assert abs(y1 - eta) / eta < 0.05
        assert 0.0 <= e1 <= 1.0


def test_decoy_bounds_dark_only_channel_stays_sound():
    # with vacuum-only clicks the true single-photon yield equals y0; the
    # bound must stay at or below it
    y0 = 8e-8
    y1, e1 = security.decoy_bounds(y0, 0.75, y0, 0.75, 0.45, 0.15, y0, 4)
    assert 0.0 <= y1 <= y0
    assert 0.0 <= e1 <= 1.0


def test_decoy_bounds_clamp_on_degenerate_statistics():
    # decoy gain at the dark floor while the signal gain is huge drives the
    # linear combination negative; the bound clamps to (0, 1)
    y1, e1 = security.decoy_bounds(0.05, 0.01, 1e-8, 0.75, 0.45, 0.15, 8e-8, 4)
    assert y1 == 0.0
    assert e1 == 1.0


def test_decoy_bounds_rejects_degenerate_intensities():
    with pytest.raises(ValueError):
        security.decoy_bounds(0.1, 0.01, 0.05, 0.01, 0.45, 0.0, 0.0, 4)
    with pytest.raises(ValueError):
        security.decoy_bounds(0.1, 0.01, 0.05, 0.01, 0.15, 0.45, 0.0, 4)


def make_params(n_dim):
    return RateParams(n_dim=n_dim, channel=zero_length_channel())


DISTANCES = np.arange(0.0, 420.0, 2.0)


def test_key_rate_curves_nonnegative_monotone_bounded():
    for n in (2, 4):
        for mode in security.RATE_MODES:
            curve = security.key_rate_vs_distance(make_params(n), mode, DISTANCES)
            rates = np.array(curve.rates_bits_per_pulse)
            assert np.all(rates >= 0.0)
            assert np.all(rates <= math.log2(n))
            assert np.all(np.diff(rates) <= 1e-12)


def test_key_rate_dimension_and_decoy_orderings():
    decoy4 = security.key_rate_vs_distance(make_params(4), "decoy", DISTANCES)
    decoy2 = security.key_rate_vs_distance(make_params(2), "decoy", DISTANCES)
    bare4 = security.key_rate_vs_distance(make_params(4), "wcp_no_decoy", DISTANCES)
    bare2 = security.key_rate_vs_distance(make_params(2), "wcp_no_decoy", DISTANCES)
    assert decoy4.rates_bits_per_pulse[0] > decoy2.rates_bits_per_pulse[0]
    assert decoy4.cutoff_km() > decoy2.cutoff_km()
    assert decoy4.cutoff_km() > 1.5 * bare4.cutoff_km()
    assert decoy2.cutoff_km() > 1.5 * bare2.cutoff_km()


def test_mutual_info_curves_cross_at_threshold():
    rows = security.mutual_info_curves([2, 4], n_points=501)
    for n in (2, 4):
        sub = [(d, iab, iae) for (nn, d, iab, iae) in rows if nn == n]
        assert sub[0][1] == pytest.approx(math.log2(n), abs=1e-12)
        assert sub[0][2] == pytest.approx(0.0, abs=1e-12)
        crossing = next(d for d, iab, iae in sub if iae >= iab)
        assert crossing == pytest.approx(security.threshold_individual_2mub(n) / 100.0, abs=0.002)


def test_rate_params_validation():
    with pytest.raises(ValueError):
        RateParams(nu=0.5, mu=0.4)
    with pytest.raises(ValueError):
        RateParams(error_correction_efficiency=0.9)
    with pytest.raises(ValueError):
        RateParams(n_dim=1)
