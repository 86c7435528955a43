"""Gated InGaAs/InP SPAD model: gates, efficiency, per-gate darks, dead time."""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConfigError, DomainError
from .source import bernoulli_positions

PHOTON, DARK = 0, 1
_NEVER = np.iinfo(np.int64).min // 4


@dataclass(frozen=True)
class DetectorParams:
    label: str
    efficiency: float
    gate_width_ps: int
    dead_time_ps: int = 0
    dark_prob_per_gate: float = 0.0
    trigger: str = "clock"  # "clock" or "herald"
    rate_hz: float = 1e6  # clock trigger only
    gate_offset_ps: int = 0  # clock trigger only: gate opening within each period
    herald_source: str = ""  # herald trigger only
    herald_delay_ps: int = 0  # herald trigger only
    timing_resolution_ps: int = 512

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError(f"{self.label}: efficiency must lie in [0, 1]")
        if not 0.0 <= self.dark_prob_per_gate < 1.0:
            raise DomainError(f"{self.label}: dark_prob_per_gate must lie in [0, 1)")
        if self.gate_width_ps <= 0:
            raise DomainError(f"{self.label}: gate_width_ps must be > 0")
        if self.dead_time_ps < 0 or self.timing_resolution_ps <= 0:
            raise DomainError(f"{self.label}: bad dead time or resolution")
        if self.trigger not in ("clock", "herald"):
            raise DomainError(f"{self.label}: unknown trigger {self.trigger!r}")
        if self.trigger == "clock" and self.rate_hz <= 0:
            raise DomainError(f"{self.label}: clock trigger needs rate_hz > 0")

    @property
    def period_ps(self):
        return int(round(1e12 / self.rate_hz))


@dataclass
class GateSchedule:
    """Gate openings; periodic schedules stay implicit so 1e10 gates cost nothing."""

    width_ps: int
    n_gates: int
    period_ps: int = 0
    offset_ps: int = 0
    starts: np.ndarray | None = None

    @classmethod
    def clock(cls, period_ps, width_ps, n_gates, offset_ps=0):
        return cls(width_ps=int(width_ps), n_gates=int(n_gates), period_ps=int(period_ps), offset_ps=int(offset_ps))

    @classmethod
    def explicit(cls, starts, width_ps):
        starts = np.asarray(starts, dtype=np.int64)
        return cls(width_ps=int(width_ps), n_gates=int(starts.size), starts=starts)

    @property
    def periodic(self):
        return self.starts is None

    def start_of(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        if self.periodic:
            return self.offset_ps + idx * self.period_ps
        return self.starts[idx]

    def locate(self, times):
        """Gate index holding each time, or -1 when the time falls between gates."""
        times = np.asarray(times, dtype=np.int64)
        if self.periodic:
            idx = (times - self.offset_ps) // self.period_ps
        else:
            idx = np.searchsorted(self.starts, times, side="right") - 1
        ok = (idx >= 0) & (idx < self.n_gates)
        inside = np.zeros(times.shape, dtype=bool)
        inside[ok] = times[ok] < self.start_of(idx[ok]) + self.width_ps
        return np.where(inside, idx, -1)

    def count_starting_before(self, limit):
        """Number of gates whose start is strictly below ``limit``."""
        if self.periodic:
            n = -(-(limit - self.offset_ps) // self.period_ps)
            return int(min(max(n, 0), self.n_gates))
        return int(np.searchsorted(self.starts, limit, side="left"))


@dataclass
class ClickStream:
    label: str
    time_ps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    gate_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    cause: np.ndarray | None = None  # simulation-only: PHOTON or DARK
    n_gates_scheduled: int = 0
    n_gates_open: int = 0

    def __post_init__(self):
        self.time_ps = np.asarray(self.time_ps, dtype=np.int64)
        self.gate_index = np.asarray(self.gate_index, dtype=np.int64)
        if self.cause is None:
            self.cause = np.zeros(self.time_ps.size, dtype=np.uint8)

    def __len__(self):
        return int(self.time_ps.size)

    @property
    def live_fraction(self):
        return self.n_gates_open / self.n_gates_scheduled if self.n_gates_scheduled else 1.0


@dataclass(frozen=True)
class ClickRecord:
    detector_label: str
    time_ps: int
    gate_index: int
    cause: int


def quantize(times, resolution_ps):
    return (np.asarray(times, dtype=np.int64) // resolution_ps) * resolution_ps


def quantize_in_gate(times, gate_starts, resolution_ps):
    """Floor to the timing grid, but never before the first grid point of the gate."""
    first = -(-np.asarray(gate_starts, dtype=np.int64) // resolution_ps) * resolution_ps
    return np.maximum(quantize(times, resolution_ps), first)


@numba.njit(cache=True)
def _dead_time_filter(gate_start_q, click_q, dead, last_q):
    n = click_q.size
    keep = np.zeros(n, dtype=np.bool_)
    for k in range(n):
        if gate_start_q[k] >= last_q + dead:
            keep[k] = True
            last_q = click_q[k]
    return keep, last_q


def generate_gates(params: DetectorParams, run_duration_s=None, herald_clicks=None, n_gates=None):
    """Nominal gate schedule for a clock- or herald-triggered detector.

    Dead-time suppression depends on the detector's own clicks and is applied
    by :class:`GatedDetector` as the stream is processed.
    """
    if params.trigger == "clock":
        if n_gates is None:
            if run_duration_s is None:
                raise ConfigError(f"{params.label}: need run_duration_s or n_gates")
            n_gates = int(round(run_duration_s * params.rate_hz))
        return GateSchedule.clock(params.period_ps, params.gate_width_ps, n_gates, params.gate_offset_ps)
    if herald_clicks is None:
        raise ConfigError(f"{params.label}: herald trigger needs the {params.herald_source or 'herald'} click stream")
    starts = np.asarray(herald_clicks.time_ps, dtype=np.int64) + params.herald_delay_ps
    return GateSchedule.explicit(starts, params.gate_width_ps)


class GatedDetector:
    """Streams photon arrivals through one detector in time order.

    Feed consecutive gate ranges with :meth:`process`; dead-time state carries
    across calls so chunked and one-shot processing give identical clicks for
    the same random draws.
    """

    def __init__(self, params: DetectorParams, schedule: GateSchedule):
        self.params = params
        self.schedule = schedule
        self._last_q = _NEVER
        self._times, self._gates, self._causes = [], [], []
        self._suppressed = 0

    def process(self, gate_lo, gate_hi, arrival_times, rng):
        """Detect arrivals falling into gates ``[gate_lo, gate_hi)``.

        Returns the gate indices that produced a click.
        """
        p = self.params
        sched = self.schedule
        arrival_times = np.asarray(arrival_times, dtype=np.int64)
        gidx = sched.locate(arrival_times)
        inside = (gidx >= gate_lo) & (gidx < gate_hi)
        conv = inside & (rng.random(arrival_times.size) < p.efficiency)
        ph_t, ph_g = arrival_times[conv], gidx[conv]

        dk_g = gate_lo + bernoulli_positions(p.dark_prob_per_gate, gate_hi - gate_lo, rng)
        dk_t = sched.start_of(dk_g) + rng.integers(0, p.gate_width_ps, size=dk_g.size, dtype=np.int64)

        t = np.concatenate([ph_t, dk_t])
        g = np.concatenate([ph_g, dk_g])
        c = np.concatenate([np.full(ph_t.size, PHOTON, np.uint8), np.full(dk_t.size, DARK, np.uint8)])
        if t.size == 0:
            return np.zeros(0, dtype=np.int64)
        order = np.lexsort((t, g))
        t, g, c = t[order], g[order], c[order]
        first = np.ones(t.size, dtype=bool)
        first[1:] = g[1:] != g[:-1]
        t, g, c = t[first], g[first], c[first]

        res = p.timing_resolution_ps
        q = quantize_in_gate(t, sched.start_of(g), res)
        if p.dead_time_ps > 0:
            start_q = quantize(sched.start_of(g), res)
            keep, self._last_q = _dead_time_filter(start_q, q, p.dead_time_ps, self._last_q)
            q, g, c = q[keep], g[keep], c[keep]
            self._count_suppressed(q, g)
        self._times.append(q)
        self._gates.append(g)
        self._causes.append(c)
        return g

    def _count_suppressed(self, q, g):
        if q.size == 0:
            return
        res = self.params.timing_resolution_ps
        limits = ((q + self.params.dead_time_ps - 1) // res) * res + res
        if self.schedule.periodic:
            s = self.schedule
            n_before = np.clip(-(-(limits - s.offset_ps) // s.period_ps), 0, s.n_gates)
        else:
            n_before = np.searchsorted(self.schedule.starts, limits, side="left")
        self._suppressed += int(np.sum(np.maximum(n_before - (g + 1), 0)))

    def finish(self) -> ClickStream:
        def cat(parts, dtype):
            return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)

        n = self.schedule.n_gates
        return ClickStream(
            label=self.params.label,
            time_ps=cat(self._times, np.int64),
            gate_index=cat(self._gates, np.int64),
            cause=cat(self._causes, np.uint8),
            n_gates_scheduled=n,
            n_gates_open=n - self._suppressed,
        )


def detect_stream(params: DetectorParams, schedule: GateSchedule, arrival_times, rng) -> ClickStream:
    """One-shot detection of a whole arrival stream."""
    det = GatedDetector(params, schedule)
    det.process(0, schedule.n_gates, np.sort(np.asarray(arrival_times, dtype=np.int64)), rng)
    return det.finish()


def detect(gate_start_ps, arrival_times, params: DetectorParams, rng, gate_index=0):
    """Single-gate click decision; returns a ClickRecord or None.

    Each photon converts with the detector efficiency, a dark count may fire
    uniformly inside the gate, and the earliest avalanche wins.  Dead time is
    a property of the stream and lives in :class:`GatedDetector`.
    """
    arrival_times = np.asarray(arrival_times, dtype=np.int64)
    end = gate_start_ps + params.gate_width_ps
    inside = arrival_times[(arrival_times >= gate_start_ps) & (arrival_times < end)]
    converted = inside[rng.random(inside.size) < params.efficiency]
    candidates = [(int(t), PHOTON) for t in converted]
    if rng.random() < params.dark_prob_per_gate:
        candidates.append((int(gate_start_ps + rng.integers(0, params.gate_width_ps)), DARK))
    if not candidates:
        return None
    t, cause = min(candidates)
    q = int(quantize_in_gate(t, gate_start_ps, params.timing_resolution_ps))
    return ClickRecord(params.label, q, gate_index, cause)


def dark_only_run(params: DetectorParams, n_gates, rng, chunk=1 << 22) -> ClickStream:
    """Clock-gated run with the pump off; feeds the dark-coincidence term."""
    if n_gates < 1:
        raise DomainError("n_gates must be >= 1")
    sched = GateSchedule.clock(params.period_ps, params.gate_width_ps, n_gates, params.gate_offset_ps)
    det = GatedDetector(params, sched)
    empty = np.zeros(0, dtype=np.int64)
    for lo in range(0, n_gates, chunk):
        det.process(lo, min(lo + chunk, n_gates), empty, rng)
    return det.finish()
