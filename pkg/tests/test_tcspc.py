import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pairforge.errors import DomainError
from pairforge.spad import ClickStream
from pairforge.tcspc import (ACCIDENTAL_DELAYS_PS, car_estimate, correlate, g2_estimate, g2_from_counts, output_refer,
                             per_gate_to_rate)


def cs(label, times, gates=None):
    times = np.asarray(times, dtype=np.int64)
    return ClickStream(label, times, np.arange(times.size) if gates is None else gates)


def test_correlate_trivial_cases():
    assert correlate([1000], [1000], 512, (0,))[0] == 1
    h = correlate([0], [1_000_000], 512, (0, 1_000_000))
    assert h[0] == 0 and h[1_000_000] == 1


def test_correlate_bin_edges_half_open():
    h = correlate([10_000] * 1, [10_000 - 256], 512, (0,))
    assert h[0] == 1
    assert correlate([10_000], [10_000 + 256], 512, (0,))[0] == 0


def test_correlate_rejects_unsorted():
    with pytest.raises(DomainError):
        correlate([5, 1], [1], 512)


def test_correlate_zero_offset_shifts_bin():
    assert correlate([0], [3000], 512, (0,), zero_delay_offset_ps=3000)[0] == 1


def brute(x, y, lo, hi):
    d = np.subtract.outer(np.asarray(y), np.asarray(x))
    return int(np.count_nonzero((d >= lo) & (d < hi)))


@given(st.lists(st.integers(0, 50_000), max_size=60), st.lists(st.integers(0, 50_000), max_size=60),
       st.integers(-5, 5))
def test_correlate_matches_brute_force(x, y, k):
    x, y = sorted(x), sorted(y)
    tau = k * 512
    assert correlate(x, y, 512, (tau,))[tau] == brute(x, y, tau - 256, tau + 256)


@given(st.lists(st.integers(0, 10**6), max_size=80), st.lists(st.integers(0, 10**6), max_size=80),
       st.integers(-20, 20))
def test_correlate_swap_symmetry(x, y, k):
    x = sorted(q * 512 for q in x)
    y = sorted(q * 512 for q in y)
    tau = k * 512
    assert correlate(x, y, 512, (tau,))[tau] == correlate(y, x, 512, (-tau,))[-tau]


def test_poisson_streams_flat_background():
    rng = np.random.default_rng(0)
    r, T = 2e-6, 2e10  # per ps, ps
    x = np.sort(rng.integers(0, int(T), rng.poisson(r * T)))
    y = np.sort(rng.integers(0, int(T), rng.poisson(r * T)))
    counts = correlate(x, y, 512, ACCIDENTAL_DELAYS_PS).counts(ACCIDENTAL_DELAYS_PS)
    expect = r * r * T * 512
    assert abs(counts.mean() - expect) < 4 * math.sqrt(expect / 30)


def test_car_fixture():
    res = car_estimate(100, [50] * 30, [10] * 30)
    assert (res.c, res.a, res.car, res.car_sigma) == (50, 40, 1.25, 0.0)


def test_dark_subtraction_fixture():
    res = car_estimate(16.0, [1.0] * 30, [0.370] * 30)
    assert res.raw_car == pytest.approx(15.0)
    assert res.car == pytest.approx(23.8, abs=0.05)


def test_car_undefined_when_darks_exceed_accidentals():
    res = car_estimate(10, [5] * 30, [6] * 30)
    assert not res.defined and math.isnan(res.car)


def test_car_sigma_propagation():
    acc = [50 + (i % 3) for i in range(30)]
    res = car_estimate(100, acc, [10] * 30, c_raw_sigma=10.0)
    s_a = np.std(acc, ddof=1) / math.sqrt(30)
    a, c = res.a, res.c
    expected = math.sqrt((10 / a) ** 2 + ((1 / a + c / a**2) * s_a) ** 2)
    assert res.car_sigma == pytest.approx(expected)
    assert res.a_raw_sigma == pytest.approx(s_a)


def test_car_consistent_with_one_on_identical_bins():
    rng = np.random.default_rng(1)
    z = []
    for _ in range(200):
        bins = rng.poisson(400, 31)
        res = car_estimate(bins[0] + 400, bins[1:], [0] * 30, c_raw_sigma=math.sqrt(bins[0]))
        z.append((res.car - 1.0) / res.car_sigma)
    assert np.all(np.abs(z) < 4.5)
    assert abs(np.mean(z)) < 4 / math.sqrt(200) + 0.1


def test_g2_counts_examples():
    assert g2_from_counts(1000, 50, 60, 0).g2 == 0.0
    assert g2_from_counts(10_000, 500, 200, 10).g2 == 1.0
    assert g2_from_counts(10**6, 5000, 5000, 4.75).g2 == pytest.approx(0.19)
    assert not g2_from_counts(100, 0, 5, 0).defined


def test_g2_sigma_first_order():
    r = g2_from_counts(10**6, 5000, 4000, 25)
    rel = math.sqrt(1 / 25 + 1 / 10**6 + 1 / 5000 + 1 / 4000)
    assert r.g2_sigma == pytest.approx(r.g2 * rel)


def test_g2_triple_window():
    a = cs("A", [100_000, 200_000, 300_000])
    b = cs("B", [100_000 + 5_000 - 1_000, 200_000 + 5_000, 300_000 + 5_000])
    c = cs("C", [100_000 + 5_000 + 1_000, 200_000 + 5_000 + 2_000, 300_000 + 5_000 - 1_249])
    r = g2_estimate(a, b, c, 2500, center_offset_ps=5_000)
    assert r.n_abc == 2  # the 200 ns herald's C click is outside +-1.25 ns
    gate_level = g2_estimate(a, cs("B", [1, 2, 3], [0, 1, 2]), cs("C", [1, 3], [0, 2]), None)
    assert gate_level.n_abc == 2


def test_g2_coherent_source_gives_one():
    rng = np.random.default_rng(2)
    n = 10**6
    heralds = np.arange(n) * 1_000_000
    pb = pc = 0.05
    hit_b = rng.random(n) < pb
    hit_c = rng.random(n) < pc
    r = g2_estimate(cs("A", heralds), cs("B", heralds[hit_b] + 5000, np.flatnonzero(hit_b)),
                    cs("C", heralds[hit_c] + 5000, np.flatnonzero(hit_c)), 2500, 5000)
    assert abs(r.g2 - 1.0) < 4 * r.g2_sigma


def test_rate_bookkeeping():
    assert per_gate_to_rate(1.5e-3, 20e-9) == pytest.approx(75e3)
    assert per_gate_to_rate(0.0, 1e-9) == 0.0
    assert per_gate_to_rate(3.0, 1.0) == 3.0
    assert output_refer(100.0, 1.0, 1.0) == 100.0
    assert output_refer(100.0, 0.5, 0.5) == 400.0
    assert output_refer(100.0, 0.5, 0.5, live_fraction=0.5) == 800.0
    with pytest.raises(DomainError):
        output_refer(1.0, 0.0, 0.3)
    with pytest.raises(DomainError):
        per_gate_to_rate(1.0, 0.0)
