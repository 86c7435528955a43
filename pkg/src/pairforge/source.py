"""Pump drive to pair number: saturable SFWM scaling and pair sampling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DomainError

# reference duration that makes the pair-generation constant dimensionless
T_REF_S = 1e-9


@dataclass(frozen=True)
class PumpConfig:
    mode: str = "pulsed"  # "cw" or "pulsed"
    average_power_w: float = 1.7e-3
    wavelength_nm: float = 1549.6
    pulse_width_s: float = 2.5e-9
    rep_rate_hz: float = 8e6

    def __post_init__(self):
        if self.mode not in ("cw", "pulsed"):
            raise DomainError(f"unknown pump mode {self.mode!r}")
        if self.average_power_w < 0:
            raise DomainError("average_power_w must be >= 0")
        if self.mode == "pulsed":
            if self.pulse_width_s <= 0 or self.rep_rate_hz <= 0:
                raise DomainError("pulsed pump needs positive pulse width and rate")
            if self.pulse_width_s * self.rep_rate_hz > 1:
                raise DomainError("duty cycle exceeds 1")

    @property
    def duty_cycle(self):
        return self.pulse_width_s * self.rep_rate_hz if self.mode == "pulsed" else 1.0

    @property
    def peak_power_w(self):
        return self.average_power_w / self.duty_cycle


@dataclass(frozen=True)
class SourceParams:
    gamma_eff: float = 4100.0  # 1/(W m)
    length_eff_m: float = 7e-4
    pair_gen_calibration: float = 1.0
    p_sat_w: float = 0.1  # compared against peak power
    statistics: str = "poisson"  # or "thermal"
    thermal_modes: int = 1

    def __post_init__(self):
        for name in ("gamma_eff", "length_eff_m", "pair_gen_calibration", "p_sat_w"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be > 0")
        if self.statistics not in ("poisson", "thermal"):
            raise DomainError(f"unknown statistics {self.statistics!r}")
        if self.thermal_modes < 1:
            raise DomainError("thermal_modes must be >= 1")


@dataclass
class PairBatch:
    window_index: int
    n_pairs: int
    pair_times_ps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        if self.n_pairs != len(self.pair_times_ps):
            raise ValueError("n_pairs must equal the number of timestamps")


def effective_power(p_in, p_sat):
    """Saturable drive ``p_in / (1 + p_in / p_sat)`` standing in for TPA/FCA."""
    if p_sat <= 0:
        raise DomainError("p_sat must be > 0")
    p_in = np.asarray(p_in, dtype=float)
    if np.any(p_in < 0):
        raise DomainError("p_in must be >= 0")
    out = p_in / (1.0 + p_in / p_sat)
    return float(out) if out.ndim == 0 else out


def window_duration_s(pump: PumpConfig, gate_width_s: float) -> float:
    """Pair-generation window: one pulse, or one detector gate under CW drive."""
    return pump.pulse_width_s if pump.mode == "pulsed" else gate_width_s


def mean_pairs_per_window(pump: PumpConfig, src: SourceParams, gate_width_s: float = 20e-9) -> float:
    """Mean pair number per window, quadratic in the (saturated) peak power."""
    p_eff = effective_power(pump.peak_power_w, src.p_sat_w)
    phase = src.gamma_eff * p_eff * src.length_eff_m
    return src.pair_gen_calibration * phase**2 * window_duration_s(pump, gate_width_s) / T_REF_S


def number_distribution(mu, statistics="poisson", modes=1):
    """Frozen scipy distribution of the pair number in one window."""
    if mu < 0:
        raise DomainError("mu must be >= 0")
    if statistics == "poisson":
        return stats.poisson(mu)
    if statistics == "thermal":
        # M equally populated thermal modes -> negative binomial, mean mu
        return stats.nbinom(modes, modes / (modes + mu))
    raise DomainError(f"unknown statistics {statistics!r}")


def sample_pairs(mu, statistics, rng, size=None, modes=1):
    """Draw pair numbers with mean ``mu`` (Poisson or M-mode thermal)."""
    if mu < 0:
        raise DomainError("mu must be >= 0")
    if statistics == "poisson":
        return rng.poisson(mu, size=size)
    if statistics == "thermal":
        return rng.negative_binomial(modes, modes / (modes + mu), size=size)
    raise DomainError(f"unknown statistics {statistics!r}")


def sample_occupied_windows(mu, statistics, n_windows, rng, modes=1):
    """Sparse equivalent of ``sample_pairs(..., size=n_windows)``.

    Returns ``(window_indices, counts)`` for the windows holding at least one
    pair.  Occupied windows form a Bernoulli process (geometric gaps) and the
    counts follow the zero-truncated number law, so the joint law matches
    independent per-window draws without touching empty windows.
    """
    empty = (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    if mu <= 0 or n_windows <= 0:
        return empty
    dist = number_distribution(mu, statistics, modes)
    p0 = float(dist.pmf(0))
    p_occ = 1.0 - p0
    if p_occ <= 0:
        return empty
    idx = bernoulli_positions(p_occ, n_windows, rng)
    if idx.size == 0:
        return empty
    n_top = int(dist.isf(1e-16)) + 2
    cdf = np.cumsum(dist.pmf(np.arange(n_top + 1)))
    u = p0 + rng.random(idx.size) * p_occ
    counts = np.searchsorted(cdf, u, side="left").astype(np.int64)
    np.clip(counts, 1, n_top, out=counts)
    return idx, counts


def bernoulli_positions(p, n, rng):
    """Sorted indices in ``[0, n)`` that succeed in ``n`` Bernoulli(p) trials."""
    if p <= 0 or n <= 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(n, dtype=np.int64)
    if p > 0.2:
        return np.flatnonzero(rng.random(n) < p).astype(np.int64)
    parts = []
    last = -1
    while True:
        expected = (n - 1 - last) * p
        k = int(expected + 6 * np.sqrt(expected) + 16)
        # clip so tiny p cannot overflow the running sum
        pos = last + np.cumsum(np.minimum(rng.geometric(p, size=k), n + 1))
        parts.append(pos[pos < n])
        if pos[-1] >= n:
            break
        last = int(pos[-1])
    return np.concatenate(parts).astype(np.int64)


def emit_batch(window_index, n, pump: PumpConfig, rng, gate_width_s=20e-9) -> PairBatch:
    """Timestamp ``n`` pairs uniformly within the pulse (or gate, for CW)."""
    if n < 0:
        raise DomainError("n must be >= 0")
    width_ps = int(round(window_duration_s(pump, gate_width_s) * 1e12))
    times = np.sort(rng.integers(0, width_ps, size=n, dtype=np.int64))
    return PairBatch(window_index=window_index, n_pairs=int(n), pair_times_ps=times)
