"""End-to-end Monte Carlo runs of the CW pair and pulsed heralded experiments.

Random streams are derived from the master seed through
``SeedSequence(seed, spawn_key=(row, stage, chunk))`` so every stage of every
chunk of every sweep row owns an independent generator.  Results therefore
do not depend on thread scheduling, and adding a sweep value leaves the
other rows untouched because the row key is a hash of the swept value.
"""
from __future__ import annotations

import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chain import chain_transmission
from .config import ExperimentConfig, get_param, set_param
from .errors import ConfigError, PairforgeError
from .source import mean_pairs_per_window, sample_occupied_windows
from .spad import ClickStream, DetectorParams, GatedDetector, detect_stream, generate_gates
from .tcspc import (CAR_CSV_HEADER, G2_CSV_HEADER, CoincidenceResult, G2Result, car_from_streams, g2_estimate,
                    output_refer)


def _key(part):
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode())


def derive_rng(seed, *keys):
    """Generator for the stream addressed by ``keys`` under the master ``seed``."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def row_key(value):
    """Stable sweep-row key derived from the swept value itself."""
    return f"row:{float(value)!r}"


RUN_KEY = "run"


@dataclass
class CwRun:
    result: CoincidenceResult
    mu: float
    n_gates: int
    streams: dict = field(default_factory=dict)  # label -> ClickStream
    dark_streams: dict = field(default_factory=dict)


@dataclass
class PulsedRun:
    g2: G2Result
    g2_gate_level: G2Result
    mu: float
    n_pulses: int
    herald_rate_hz: float  # detected SPAD A click rate
    herald_rate_output_hz: float  # referred to the waveguide output
    streams: dict = field(default_factory=dict)


def _pair_arrivals(cfg, mu, lo, hi, window_period_ps, offset_ps, duration_ps, rng):
    """Timestamps (one per pair) for windows ``[lo, hi)``, sorted."""
    src = cfg.source
    idx, counts = sample_occupied_windows(mu, src.statistics, hi - lo, rng, src.thermal_modes)
    win = np.repeat(idx + lo, counts)
    times = win * window_period_ps + offset_ps + rng.integers(0, duration_ps, size=win.size, dtype=np.int64)
    order = np.argsort(times, kind="stable")
    return times[order], win[order]


def _thin_mask(n, transmission, rng):
    return rng.random(n) < transmission


def run_cw_pair_experiment(cfg: ExperimentConfig, key=RUN_KEY, keep_streams=True) -> CwRun:
    """Clock-gated signal/idler detection of CW pairs plus a matched dark run."""
    if cfg.experiment != "cw":
        raise ConfigError("run_cw_pair_experiment needs a cw config")
    sig_p, idl_p = cfg.detector("signal"), cfg.detector("idler")
    n_gates = int(round(cfg.integration_time_s * sig_p.rate_hz))
    if n_gates < 1:
        raise ConfigError("integration time shorter than one gate")
    mu = mean_pairs_per_window(cfg.pump, cfg.source, sig_p.gate_width_ps * 1e-12)
    t_sig = chain_transmission(cfg.chain_signal, "signal")
    t_idl = chain_transmission(cfg.chain_idler, "idler")

    def run(with_pump, tag):
        dets = {p.label: GatedDetector(p, generate_gates(p, n_gates=n_gates)) for p in (sig_p, idl_p)}
        step = cfg.chunk_windows
        for chunk, lo in enumerate(range(0, n_gates, step)):
            hi = min(lo + step, n_gates)
            empty = np.zeros(0, dtype=np.int64)
            times_s = times_i = empty
            if with_pump and mu > 0:
                times, _ = _pair_arrivals(cfg, mu, lo, hi, sig_p.period_ps, sig_p.gate_offset_ps,
                                          sig_p.gate_width_ps, derive_rng(cfg.seed, key, tag, "source", chunk))
                rng_c = derive_rng(cfg.seed, key, tag, "chain", chunk)
                times_s = times[_thin_mask(times.size, t_sig, rng_c)]
                times_i = times[_thin_mask(times.size, t_idl, rng_c)]
            dets["signal"].process(lo, hi, times_s, derive_rng(cfg.seed, key, tag, "det:signal", chunk))
            dets["idler"].process(lo, hi, times_i, derive_rng(cfg.seed, key, tag, "det:idler", chunk))
        return {lab: d.finish() for lab, d in dets.items()}

    live = run(True, "live")
    dark = run(False, "dark")
    res = car_from_streams(live["signal"], live["idler"], dark["signal"], dark["idler"],
                           bin_width_ps=cfg.bin_width_ps, zero_delay_offset_ps=cfg.zero_offset_ps,
                           integration_time_s=cfg.integration_time_s)
    if not keep_streams:
        live, dark = {}, {}
    return CwRun(result=res, mu=mu, n_gates=n_gates, streams=live, dark_streams=dark)


def herald_center_offset(cfg):
    """Delay from a herald click to the centre of the B/C gates it opens."""
    b = cfg.detector("B")
    return b.herald_delay_ps + b.gate_width_ps // 2


def run_pulsed_heralded_experiment(cfg: ExperimentConfig, key=RUN_KEY, keep_streams=True) -> PulsedRun:
    """Pulsed pumping, SPAD A clocked at the pump rate, SPADs B/C heralded by A."""
    if cfg.experiment != "pulsed":
        raise ConfigError("run_pulsed_heralded_experiment needs a pulsed config")
    a_p, b_p, c_p = cfg.detector("A"), cfg.detector("B"), cfg.detector("C")
    n_pulses = int(round(cfg.integration_time_s * cfg.pump.rep_rate_hz))
    if n_pulses < 1:
        raise ConfigError("integration time shorter than one pulse")
    mu = mean_pairs_per_window(cfg.pump, cfg.source)
    t_sig = chain_transmission(cfg.chain_signal, "signal")
    t_idl = chain_transmission(cfg.chain_idler, "idler")
    period = a_p.period_ps
    duration = int(round(cfg.pump.pulse_width_s * 1e12))

    det_a = GatedDetector(a_p, generate_gates(a_p, n_gates=n_pulses))
    sig_b, sig_c = [], []
    step = cfg.chunk_windows
    for chunk, lo in enumerate(range(0, n_pulses, step)):
        hi = min(lo + step, n_pulses)
        times = win = np.zeros(0, dtype=np.int64)
        if mu > 0:
            times, win = _pair_arrivals(cfg, mu, lo, hi, period, a_p.gate_offset_ps + cfg.pulse_offset_ps,
                                        duration, derive_rng(cfg.seed, key, "source", chunk))
        rng_c = derive_rng(cfg.seed, key, "chain", chunk)
        keep_i = _thin_mask(times.size, t_idl, rng_c)
        keep_s = _thin_mask(times.size, t_sig, rng_c)
        to_b = rng_c.random(times.size) < 0.5
        new_gates = det_a.process(lo, hi, times[keep_i], derive_rng(cfg.seed, key, "det:A", chunk))
        # only signal photons in heralded pulses can ever reach an open B/C gate
        heralded = np.isin(win, new_gates)
        sig_b.append(times[keep_s & to_b & heralded])
        sig_c.append(times[keep_s & ~to_b & heralded])
    clicks_a = det_a.finish()

    streams = {"A": clicks_a}
    for p, arrivals in ((b_p, sig_b), (c_p, sig_c)):
        sched = generate_gates(p, herald_clicks=clicks_a)
        arr = np.sort(np.concatenate(arrivals)) if arrivals else np.zeros(0, np.int64)
        streams[p.label] = detect_stream(p, sched, arr, derive_rng(cfg.seed, key, f"det:{p.label}"))
    g2 = g2_estimate(streams["A"], streams["B"], streams["C"], cfg.triple_bin_ps, herald_center_offset(cfg))
    g2_gate = g2_estimate(streams["A"], streams["B"], streams["C"], None)
    rate = len(clicks_a) / cfg.integration_time_s
    rate_out = output_refer(rate, t_idl, a_p.efficiency, clicks_a.live_fraction) if len(clicks_a) else 0.0
    return PulsedRun(g2=g2, g2_gate_level=g2_gate, mu=mu, n_pulses=n_pulses, herald_rate_hz=rate,
                     herald_rate_output_hz=rate_out, streams=streams if keep_streams else {})


def run_experiment(cfg, key=RUN_KEY, keep_streams=False):
    if cfg.experiment == "cw":
        return run_cw_pair_experiment(cfg, key, keep_streams)
    return run_pulsed_heralded_experiment(cfg, key, keep_streams)


@dataclass
class SweepRow:
    value: float
    run: CwRun | PulsedRun | None
    wall_clock_s: float
    error: str = ""


def run_sweep(cfg: ExperimentConfig, threads=1):
    """Run the configured experiment once per sweep value, rows in sweep order."""
    if cfg.sweep is None:
        raise ConfigError("config has no [sweep] block")
    get_param(cfg, cfg.sweep.param_path)
    kind = type(get_param(cfg, cfg.sweep.param_path))

    def one(value):
        t0 = time.perf_counter()
        try:
            row_cfg = set_param(cfg, cfg.sweep.param_path, kind(value))
            run = run_experiment(row_cfg, key=row_key(value))
            return SweepRow(value, run, time.perf_counter() - t0)
        except PairforgeError as exc:
            return SweepRow(value, None, time.perf_counter() - t0, error=str(exc))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, cfg.sweep.values))
    return [one(v) for v in cfg.sweep.values]


def sweep_table(rows, experiment):
    """CSV-ready rows in the tcspc schemas; failed rows are NaN-filled.

    Wall-clock time and error text stay out of the table so identical seeds
    give identical files.
    """
    out = []
    for r in rows:
        if r.run is None:
            n = len(CAR_CSV_HEADER if experiment == "cw" else G2_CSV_HEADER) - 1
            out.append([r.value] + [math.nan] * n)
        elif experiment == "cw":
            out.append(r.run.result.csv_row(r.value))
        else:
            out.append(r.run.g2.csv_row(r.value, r.run.herald_rate_output_hz))
    return out


# -- window-level Monte Carlo for oracle instances -----------------------------------

_PROBE_PERIOD_PS = 10_000
_PROBE_GATE_PS = 1_000


def _probe(label, dark):
    return DetectorParams(label=label, efficiency=1.0, gate_width_ps=_PROBE_GATE_PS, dead_time_ps=0,
                          dark_prob_per_gate=dark, trigger="clock", rate_hz=1e12 / _PROBE_PERIOD_PS)


def mc_window_probabilities(inst, n_windows, seed, key="oracle", chunk=1 << 22):
    """Estimate every oracle window probability by simulation.

    Pairs go through the regular source sampler and gated detectors (dead
    time off, unit detector efficiency, losses applied as chain thinning).
    Detectors ``s``/``i`` form the pair setup, ``a``/``b``/``c`` the HBT
    setup; ``i`` and ``a`` both watch the same idler photons.
    """
    from .oracle import OBSERVABLES  # local: oracle is otherwise independent of the simulator

    dark = {"s": inst.d_s, "i": inst.d_i, "a": inst.d_a, "b": inst.d_b, "c": inst.d_c}
    dets = {k: GatedDetector(_probe(k, d), generate_gates(_probe(k, d), n_gates=n_windows)) for k, d in dark.items()}
    for ci, lo in enumerate(range(0, n_windows, chunk)):
        hi = min(lo + chunk, n_windows)
        idx, counts = sample_occupied_windows(inst.mu, inst.statistics, hi - lo, derive_rng(seed, key, "source", ci),
                                              inst.modes)
        win = np.repeat(idx + lo, counts)
        rng = derive_rng(seed, key, "chain", ci)
        base = win * _PROBE_PERIOD_PS
        t_idl = base + rng.integers(0, _PROBE_GATE_PS, size=win.size)
        t_sig = base + rng.integers(0, _PROBE_GATE_PS, size=win.size)
        if not inst.correlated:
            # signal photons from an unrelated window draw
            idx2, counts2 = sample_occupied_windows(inst.mu, inst.statistics, hi - lo,
                                                    derive_rng(seed, key, "source2", ci), inst.modes)
            win2 = np.repeat(idx2 + lo, counts2)
            t_sig = np.sort(win2 * _PROBE_PERIOD_PS + rng.integers(0, _PROBE_GATE_PS, size=win2.size))
        t_idl = np.sort(t_idl)
        t_sig = np.sort(t_sig)
        u = rng.random(t_sig.size)
        arrivals = {
            "i": t_idl[rng.random(t_idl.size) < inst.eta_i],
            "s": t_sig[rng.random(t_sig.size) < inst.eta_s],
            "b": t_sig[u < inst.eta_b],
            "c": t_sig[(u >= inst.eta_b) & (u < inst.eta_b + inst.eta_c)],
        }
        arrivals["a"] = arrivals["i"]
        for k, det in dets.items():
            det.process(lo, hi, arrivals[k], derive_rng(seed, key, f"det:{k}", ci))
    gates = {k: d.finish().gate_index for k, d in dets.items()}

    def joint(name):
        g = gates[name[0]]
        for k in name[1:]:
            g = np.intersect1d(g, gates[k], assume_unique=True)
        return g.size

    return {obs: joint(obs[2:]) / n_windows for obs in OBSERVABLES}
