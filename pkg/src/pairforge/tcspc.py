"""Counting protocols: coincidence histograms, CAR and heralded g2 estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DomainError

ACCIDENTAL_DELAYS_PS = tuple(k * 1_000_000 for k in range(1, 31))


@dataclass
class Histogram:
    bin_width_ps: int
    bins: dict = field(default_factory=dict)  # delay_ps -> count
    zero_delay_offset_ps: int = 0

    def __getitem__(self, delay_ps):
        return self.bins[delay_ps]

    def counts(self, delays):
        return np.array([self.bins[d] for d in delays], dtype=np.int64)


@dataclass(frozen=True)
class CoincidenceResult:
    c_raw: float
    a_raw: float
    a_raw_sigma: float
    d: float
    d_sigma: float
    c: float
    a: float
    car: float
    car_sigma: float
    raw_car: float  # C / A_raw, i.e. without dark subtraction
    defined: bool
    integration_time_s: float = 0.0

    def csv_row(self, power_w):
        return [power_w, self.c_raw, self.a_raw, self.d, self.c, self.a, self.car, self.car_sigma, self.integration_time_s]


CAR_CSV_HEADER = ["power_w", "c_raw", "a_raw", "d", "c", "a", "car", "car_sigma", "integration_s"]
G2_CSV_HEADER = ["power_w", "n_a", "n_ab", "n_ac", "n_abc", "g2", "g2_sigma", "herald_rate_hz"]


@dataclass(frozen=True)
class G2Result:
    n_a: int
    n_ab: int
    n_ac: int
    n_abc: int
    g2: float
    g2_sigma: float
    defined: bool

    def csv_row(self, power_w, herald_rate_hz):
        return [power_w, self.n_a, self.n_ab, self.n_ac, self.n_abc, self.g2, self.g2_sigma, herald_rate_hz]


def _check_sorted(times, name):
    if times.size > 1 and np.any(np.diff(times) < 0):
        raise DomainError(f"{name} is not sorted by time")


@numba.njit(cache=True)
def _window_count(x, y, lo, hi):
    # pairs with lo <= y - x < hi; both pointers only move forward
    n_y = y.size
    j0 = 0
    j1 = 0
    total = 0
    for i in range(x.size):
        a = x[i] + lo
        b = x[i] + hi
        while j0 < n_y and y[j0] < a:
            j0 += 1
        if j1 < j0:
            j1 = j0
        while j1 < n_y and y[j1] < b:
            j1 += 1
        total += j1 - j0
    return total


def correlate(stream_x, stream_y, bin_width_ps=512, delays_ps=(0,), zero_delay_offset_ps=0) -> Histogram:
    """Cross-correlation counts at the requested delays.

    A pair ``(x, y)`` counts toward delay ``tau`` when
    ``y - x`` lies in ``[tau - bin/2, tau + bin/2)`` after shifting by the
    zero-delay offset.
    """
    x = np.ascontiguousarray(getattr(stream_x, "time_ps", stream_x), dtype=np.int64)
    y = np.ascontiguousarray(getattr(stream_y, "time_ps", stream_y), dtype=np.int64)
    _check_sorted(x, "stream_x")
    _check_sorted(y, "stream_y")
    if bin_width_ps <= 0:
        raise DomainError("bin_width_ps must be > 0")
    half = bin_width_ps // 2
    hist = Histogram(bin_width_ps=bin_width_ps, zero_delay_offset_ps=zero_delay_offset_ps)
    for tau in delays_ps:
        centre = tau + zero_delay_offset_ps
        hist.bins[tau] = int(_window_count(x, y, centre - half, centre - half + bin_width_ps))
    return hist


def _mean_and_sigma(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DomainError("need at least one bin")
    sigma = v.std(ddof=1) / math.sqrt(v.size) if v.size > 1 else 0.0
    return float(v.mean()), float(sigma)


def car_estimate(c_raw, accidental_bins, dark_bins, integration_time_s=0.0, c_raw_sigma=0.0) -> CoincidenceResult:
    """Coincidence-to-accidental ratio with delayed-bin accidentals and darks.

    ``A_raw`` and ``D`` are bin means with standard errors of the mean; their
    uncertainties are propagated to first order.  ``c_raw_sigma`` defaults to
    zero; pass ``sqrt(c_raw)`` to include counting noise on the zero-delay bin.
    """
    a_raw, s_a = _mean_and_sigma(accidental_bins)
    d, s_d = _mean_and_sigma(dark_bins)
    c = c_raw - a_raw
    a = a_raw - d
    raw_car = c / a_raw if a_raw > 0 else math.nan
    if a <= 0:
        return CoincidenceResult(c_raw, a_raw, s_a, d, s_d, c, a, math.nan, math.nan, raw_car, False, integration_time_s)
    car = c / a
    dc = 1.0 / a
    da = -1.0 / a - c / a**2
    dd = c / a**2
    sigma = math.sqrt((dc * c_raw_sigma) ** 2 + (da * s_a) ** 2 + (dd * s_d) ** 2)
    return CoincidenceResult(c_raw, a_raw, s_a, d, s_d, c, a, car, sigma, raw_car, True, integration_time_s)


def car_from_streams(signal, idler, dark_signal, dark_idler, bin_width_ps=512,
                     accidental_delays_ps=ACCIDENTAL_DELAYS_PS, zero_delay_offset_ps=0, integration_time_s=0.0):
    """Full CW protocol: zero-delay bin, thirty delayed bins, matched dark run."""
    delays = (0,) + tuple(accidental_delays_ps)
    h = correlate(signal, idler, bin_width_ps, delays, zero_delay_offset_ps)
    hd = correlate(dark_signal, dark_idler, bin_width_ps, accidental_delays_ps, zero_delay_offset_ps)
    return car_estimate(h[0], h.counts(accidental_delays_ps), hd.counts(accidental_delays_ps), integration_time_s)


def g2_from_counts(n_a, n_ab, n_ac, n_abc) -> G2Result:
    """``N_ABC N_A / (N_AB N_AC)`` with first-order Poisson error propagation."""
    if n_ab * n_ac == 0:
        return G2Result(n_a, n_ab, n_ac, n_abc, math.nan, math.nan, False)
    k = n_a / (n_ab * n_ac)
    g2 = n_abc * k
    rel = sum(1.0 / n for n in (n_a, n_ab, n_ac) if n > 0)
    sigma = math.sqrt(k * k * n_abc + g2 * g2 * rel)
    return G2Result(int(n_a), int(n_ab), int(n_ac), int(n_abc), g2, sigma, True)


def _has_click_near(centres, times, lo, hi):
    i0 = np.searchsorted(times, centres + lo, side="left")
    i1 = np.searchsorted(times, centres + hi, side="left")
    return i1 > i0


def g2_estimate(clicks_a, clicks_b, clicks_c, triple_bin_ps=2500, center_offset_ps=0) -> G2Result:
    """Heralded g2 from the three click streams of the HBT setup.

    ``N_AB`` and ``N_AC`` are the full B and C click counts (their gates open
    only on heralds).  A triple needs both B and C within the triple bin
    centred ``center_offset_ps`` after the herald click.  With
    ``triple_bin_ps=None`` a triple is instead any herald whose B and C gates
    both fired, which is the gate-level count the window oracle predicts.
    """
    ta = np.asarray(clicks_a.time_ps, dtype=np.int64)
    tb = np.asarray(clicks_b.time_ps, dtype=np.int64)
    tc = np.asarray(clicks_c.time_ps, dtype=np.int64)
    for t, name in ((ta, "clicks_a"), (tb, "clicks_b"), (tc, "clicks_c")):
        _check_sorted(t, name)
    if triple_bin_ps is None:
        n_abc = np.intersect1d(clicks_b.gate_index, clicks_c.gate_index).size
    else:
        half = triple_bin_ps / 2
        lo, hi = center_offset_ps - half, center_offset_ps + half
        n_abc = int(np.count_nonzero(_has_click_near(ta, tb, lo, hi) & _has_click_near(ta, tc, lo, hi)))
    return g2_from_counts(ta.size, tb.size, tc.size, int(n_abc))


def per_gate_to_rate(counts_per_gate, gate_width_s):
    """CW bookkeeping: a per-gate count expressed as a rate over the gate width."""
    if gate_width_s <= 0:
        raise DomainError("gate_width_s must be > 0")
    return counts_per_gate / gate_width_s


def output_refer(measured_rate, chain_transmission, detector_efficiency, live_fraction=1.0):
    """Refer a detected rate back to the waveguide output.

    ``live_fraction`` (share of scheduled gates actually opened) undoes
    dead-time suppression; leave it at 1 to reproduce the plain correction.
    """
    denom = chain_transmission * detector_efficiency * live_fraction
    if denom <= 0:
        raise DomainError("chain transmission, efficiency and live fraction must be > 0")
    return measured_rate / denom
