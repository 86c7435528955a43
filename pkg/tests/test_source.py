import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from pairforge.errors import DomainError
from pairforge.source import (PumpConfig, SourceParams, bernoulli_positions, effective_power, emit_batch,
                              mean_pairs_per_window, sample_occupied_windows, sample_pairs)


def test_effective_power_examples():
    assert effective_power(0.0, 0.1) == 0.0
    assert effective_power(0.1, 0.1) == pytest.approx(0.05)
    p = 1e-4
    assert (p - effective_power(p, 1.0)) / p == pytest.approx(p / 1.0, rel=1e-3)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(1e-3, 1))
def test_effective_power_monotone_and_bounded(a, b, psat):
    lo, hi = sorted((a, b))
    assert effective_power(lo, psat) <= effective_power(hi, psat) <= psat


def test_mu_zero_power():
    assert mean_pairs_per_window(PumpConfig(average_power_w=0.0), SourceParams()) == 0.0


def test_mu_quadratic_at_low_power():
    src = SourceParams(p_sat_w=1.0)
    powers = np.logspace(-5, -4, 6)  # well below p_sat / 100
    mu = [mean_pairs_per_window(PumpConfig(mode="cw", average_power_w=p), src) for p in powers]
    slope = np.polyfit(np.log(powers), np.log(mu), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.01)
    r = mean_pairs_per_window(PumpConfig(mode="cw", average_power_w=2e-7), src) / mean_pairs_per_window(
        PumpConfig(mode="cw", average_power_w=1e-7), src)
    assert r == pytest.approx(4.0, rel=1e-6)


@given(st.floats(0, 1), st.floats(0, 1))
def test_mu_monotone(a, b):
    src = SourceParams(p_sat_w=0.05)
    lo, hi = sorted((a, b))
    assert (mean_pairs_per_window(PumpConfig(average_power_w=lo), src)
            <= mean_pairs_per_window(PumpConfig(average_power_w=hi), src))


def test_pulsed_uses_peak_power_and_pulse_window():
    pump = PumpConfig(mode="pulsed", average_power_w=1e-3, pulse_width_s=2.5e-9, rep_rate_hz=8e6)
    assert pump.duty_cycle == pytest.approx(0.02)
    assert pump.peak_power_w == pytest.approx(0.05)
    src = SourceParams(p_sat_w=1e9)
    expected = (src.gamma_eff * 0.05 * src.length_eff_m) ** 2 * 2.5
    assert mean_pairs_per_window(pump, src) == pytest.approx(expected)


def test_pump_validation():
    with pytest.raises(DomainError):
        PumpConfig(average_power_w=-1)
    with pytest.raises(DomainError):
        PumpConfig(mode="pulsed", pulse_width_s=1e-6, rep_rate_hz=8e6)


def test_sample_pairs_zero_mean():
    rng = np.random.default_rng(0)
    assert not sample_pairs(0.0, "poisson", rng, size=1000).any()
    assert not sample_pairs(0.0, "thermal", rng, size=1000).any()


def test_poisson_mean():
    n = sample_pairs(0.5, "poisson", np.random.default_rng(1), size=10**6)
    assert abs(n.mean() - 0.5) < 3 * math.sqrt(0.5 / 1e6)


def test_thermal_single_mode_variance():
    n = sample_pairs(0.5, "thermal", np.random.default_rng(2), size=10**6, modes=1)
    # variance of the sample variance for a geometric law: (mu4 - sigma^4) / N
    dist = stats.nbinom(1, 1 / 1.5)
    mu4 = dist.moment(4) - 4 * dist.mean() * dist.moment(3) + 6 * dist.mean() ** 2 * dist.moment(2) - 3 * dist.mean() ** 4
    se = math.sqrt((mu4 - 0.75**2) / 1e6)
    assert abs(n.var() - 0.75) < 3 * se


@pytest.mark.parametrize("stat, modes", [("poisson", 1), ("thermal", 1), ("thermal", 4)])
def test_mean_matches_mu(stat, modes):
    mu = 0.3
    n = sample_pairs(mu, stat, np.random.default_rng(3), size=10**6, modes=modes)
    var = mu if stat == "poisson" else mu * (1 + mu / modes)
    assert abs(n.mean() - mu) < 4 * math.sqrt(var / 1e6)


def test_sample_pairs_reproducible():
    a = sample_pairs(0.2, "thermal", np.random.default_rng(9), size=1000, modes=3)
    b = sample_pairs(0.2, "thermal", np.random.default_rng(9), size=1000, modes=3)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("stat", ["poisson", "thermal"])
def test_sparse_sampler_matches_dense_law(stat):
    mu, n = 0.05, 2 * 10**6
    idx, counts = sample_occupied_windows(mu, stat, n, np.random.default_rng(4))
    assert np.all(np.diff(idx) > 0) and idx.min() >= 0 and idx.max() < n and counts.min() >= 1
    hist = np.bincount(counts, minlength=4)[:4].astype(float)
    hist[0] = n - idx.size
    law = stats.poisson(mu) if stat == "poisson" else stats.nbinom(1, 1 / (1 + mu))
    for k in range(4):
        p = law.pmf(k)
        assert abs(hist[k] - n * p) <= 4 * math.sqrt(n * p * (1 - p)) + 1


@given(st.floats(1e-5, 0.99), st.integers(0, 20000), st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_bernoulli_positions_valid(p, n, seed):
    pos = bernoulli_positions(p, n, np.random.default_rng(seed))
    assert pos.dtype == np.int64
    assert np.all(np.diff(pos) > 0)
    if pos.size:
        assert 0 <= pos[0] and pos[-1] < n


def test_bernoulli_positions_rate():
    n, p = 10**7, 1e-3
    k = bernoulli_positions(p, n, np.random.default_rng(5)).size
    assert abs(k - n * p) < 4 * math.sqrt(n * p)


def test_emit_batch():
    pump = PumpConfig(mode="pulsed", average_power_w=1e-3, pulse_width_s=2.5e-9, rep_rate_hz=8e6)
    empty = emit_batch(7, 0, pump, np.random.default_rng(0))
    assert empty.n_pairs == 0 and empty.window_index == 7
    b = emit_batch(3, 10**5, pump, np.random.default_rng(1))
    assert b.window_index == 3 and b.n_pairs == 10**5
    assert b.pair_times_ps.min() >= 0 and b.pair_times_ps.max() < 2500
    assert stats.kstest(b.pair_times_ps / 2500.0, "uniform").pvalue > 0.01
    cw = emit_batch(0, 1000, PumpConfig(mode="cw"), np.random.default_rng(2))
    assert cw.pair_times_ps.max() < 20000


@pytest.mark.parametrize("p", [5e-324, 1e-300, 1e-20])
def test_bernoulli_positions_tiny_probability_terminates(p):
    assert bernoulli_positions(p, 10**6, np.random.default_rng(0)).size == 0
