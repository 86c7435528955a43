"""Experiment configuration: dataclasses, defaults, and the v1 INI format.

The file format is plain ``configparser`` INI.  Sections::

    [pairforge]        version, experiment (cw|pulsed), integration_time_s, seed, ...
    [crow] [source] [pump]
    [chain.signal]     one ``name = loss_db`` line per element, in order
    [chain.idler]
    [detector.<label>] DetectorParams fields
    [sweep]            param_path, values (comma separated)
"""
from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field, replace

from .chain import ChainElement
from .crow import CrowParams
from .errors import ConfigError
from .source import PumpConfig, SourceParams
from .spad import DetectorParams

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Sweep:
    param_path: str
    values: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "cw"
    crow: CrowParams = field(default_factory=CrowParams)
    source: SourceParams = field(default_factory=SourceParams)
    pump: PumpConfig = field(default_factory=PumpConfig)
    chain_signal: tuple = ()
    chain_idler: tuple = ()
    detectors: tuple = ()
    integration_time_s: float = 1.0
    seed: int = 0
    sweep: Sweep | None = None
    bin_width_ps: int = 512
    triple_bin_ps: int = 2500
    zero_offset_ps: int = 0
    pulse_offset_ps: int = 3750  # pulse start inside each pump period (pulsed)
    chunk_windows: int = 1 << 22

    def __post_init__(self):
        validate(self)

    def detector(self, label):
        for d in self.detectors:
            if d.label == label:
                return d
        raise ConfigError(f"no detector labelled {label!r}")

    @property
    def labels(self):
        return tuple(d.label for d in self.detectors)


def validate(cfg: ExperimentConfig):
    if cfg.experiment not in ("cw", "pulsed"):
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    if cfg.integration_time_s <= 0:
        raise ConfigError("integration_time_s must be > 0")
    labels = [d.label for d in cfg.detectors]
    if len(set(labels)) != len(labels):
        raise ConfigError("detector labels must be unique")
    for d in cfg.detectors:
        if d.trigger == "herald" and d.herald_source not in labels:
            raise ConfigError(f"detector {d.label} heralded by unknown detector {d.herald_source!r}")
    if not cfg.detectors:
        return
    if cfg.experiment == "cw":
        if cfg.pump.mode != "cw":
            raise ConfigError("cw experiment needs a cw pump")
        for lab in ("signal", "idler"):
            if lab not in labels:
                raise ConfigError(f"cw experiment needs a detector labelled {lab!r}")
            if cfg.detector(lab).trigger != "clock":
                raise ConfigError(f"detector {lab} must be clock-triggered")
        s, i = cfg.detector("signal"), cfg.detector("idler")
        if (s.rate_hz, s.gate_width_ps, s.gate_offset_ps) != (i.rate_hz, i.gate_width_ps, i.gate_offset_ps):
            raise ConfigError("signal and idler gates must coincide")
    else:
        if cfg.pump.mode != "pulsed":
            raise ConfigError("pulsed experiment needs a pulsed pump")
        for lab in ("A", "B", "C"):
            if lab not in labels:
                raise ConfigError(f"pulsed experiment needs a detector labelled {lab!r}")
        a = cfg.detector("A")
        if a.trigger != "clock" or abs(a.rate_hz - cfg.pump.rep_rate_hz) > 1e-6 * cfg.pump.rep_rate_hz:
            raise ConfigError("SPAD A must be clock-gated at the pump repetition rate")
        for lab in ("B", "C"):
            if cfg.detector(lab).trigger != "herald" or cfg.detector(lab).herald_source != "A":
                raise ConfigError(f"SPAD {lab} must be herald-triggered by A")
        width_ps = cfg.pump.pulse_width_s * 1e12
        if cfg.pulse_offset_ps < 0 or cfg.pulse_offset_ps + width_ps > a.gate_width_ps + 1e-6:
            raise ConfigError("pump pulse must fall inside the SPAD A gate")


# -- measured defaults ---------------------------------------------------------

def default_chains(wdm_loss_db=1.5):
    signal = (
        ChainElement("output_coupler", 5.0, "signal"),
        ChainElement("pump_rejection_wdm", wdm_loss_db, "signal"),
        ChainElement("c_band_wdm", wdm_loss_db, "signal"),
    )
    idler = (
        ChainElement("output_coupler", 5.0, "idler"),
        ChainElement("pump_rejection_wdm", wdm_loss_db, "idler"),
        ChainElement("l_band_wdm", wdm_loss_db, "idler"),
    )
    return signal, idler


# Fitted by calibration.calibrate_cw / calibrate_pulsed; see tests/test_calibration.py.
CW_PAIR_GEN = 0.0609
CW_P_SAT_W = 0.0614
CW_DARK = 0.0289
PULSED_PAIR_GEN = 0.775
PULSED_P_SAT_W = 0.0887
PULSED_DARK_A = 1e-9
PULSED_DARK_BC = 5.79e-4

CW_SWEEP_DBM = (4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0)
PULSED_SWEEP_W = (0.2e-3, 0.5e-3, 1.0e-3, 1.7e-3, 3.0e-3, 6.0e-3, 12e-3, 25e-3)


def default_cw_config(**overrides):
    """CW pair experiment: two clocked SPADs at 1 MHz, 20 ns gates."""
    sig, idl = default_chains()
    det = dict(efficiency=0.10, gate_width_ps=20_000, dead_time_ps=10_000_000, dark_prob_per_gate=CW_DARK,
               trigger="clock", rate_hz=1e6, timing_resolution_ps=512)
    cfg = ExperimentConfig(
        experiment="cw",
        source=SourceParams(pair_gen_calibration=CW_PAIR_GEN, p_sat_w=CW_P_SAT_W),
        pump=PumpConfig(mode="cw", average_power_w=10 ** (12 / 10) * 1e-3, wavelength_nm=1549.6),
        chain_signal=sig,
        chain_idler=idl,
        detectors=(DetectorParams(label="signal", **det), DetectorParams(label="idler", **det)),
        integration_time_s=10.0,
        sweep=Sweep("pump.average_power_w", tuple(round(10 ** (x / 10) * 1e-3, 9) for x in CW_SWEEP_DBM)),
    )
    return replace(cfg, **overrides)


def default_pulsed_config(**overrides):
    """Pulsed heralded experiment: herald A clocked with the pump, B and C gated by A."""
    sig, idl = default_chains()
    a = DetectorParams(label="A", efficiency=0.30, gate_width_ps=10_000, dead_time_ps=10_000_000,
                       dark_prob_per_gate=PULSED_DARK_A, trigger="clock", rate_hz=8e6)
    bc = dict(efficiency=0.20, gate_width_ps=20_000, dead_time_ps=0, dark_prob_per_gate=PULSED_DARK_BC,
              trigger="herald", herald_source="A", herald_delay_ps=-10_000)
    cfg = ExperimentConfig(
        experiment="pulsed",
        source=SourceParams(pair_gen_calibration=PULSED_PAIR_GEN, p_sat_w=PULSED_P_SAT_W),
        pump=PumpConfig(mode="pulsed", average_power_w=1.7e-3, pulse_width_s=2.5e-9, rep_rate_hz=8e6),
        chain_signal=sig,
        chain_idler=idl,
        detectors=(a, DetectorParams(label="B", **bc), DetectorParams(label="C", **bc)),
        integration_time_s=30.0,
        sweep=Sweep("pump.average_power_w", PULSED_SWEEP_W),
    )
    return replace(cfg, **overrides)


# -- parameter paths -----------------------------------------------------------------

def get_param(cfg, path):
    parts = path.split(".")
    if parts[0] == "detector":
        return getattr(cfg.detector(parts[1]), parts[2])
    obj = cfg
    for p in parts:
        if not hasattr(obj, p):
            raise ConfigError(f"unknown parameter path {path!r}")
        obj = getattr(obj, p)
    return obj


def set_param(cfg, path, value):
    """Return a copy of ``cfg`` with the dotted ``path`` set to ``value``.

    ``detector.<label>.<field>`` addresses one detector; ``detector.*.<field>``
    sets the field on every detector.
    """
    parts = path.split(".")
    if parts[0] == "detector":
        if len(parts) != 3:
            raise ConfigError(f"bad detector path {path!r}")
        _, label, name = parts
        dets = tuple(replace(d, **{name: value}) if label in ("*", d.label) else d for d in cfg.detectors)
        if label != "*":
            cfg.detector(label)
        return replace(cfg, detectors=dets)
    if len(parts) == 1:
        if not hasattr(cfg, parts[0]):
            raise ConfigError(f"unknown parameter path {path!r}")
        return replace(cfg, **{parts[0]: value})
    if len(parts) == 2 and hasattr(cfg, parts[0]) and dataclasses.is_dataclass(getattr(cfg, parts[0])):
        sub = getattr(cfg, parts[0])
        if not hasattr(sub, parts[1]):
            raise ConfigError(f"unknown parameter path {path!r}")
        return replace(cfg, **{parts[0]: replace(sub, **{parts[1]: value})})
    raise ConfigError(f"unknown parameter path {path!r}")


# -- INI round trip ------------------------------------------------------------------

_TOP_KEYS = ("experiment", "integration_time_s", "seed", "bin_width_ps", "triple_bin_ps",
             "zero_offset_ps", "pulse_offset_ps", "chunk_windows")


def _coerce(text, kind):
    text = text.strip()
    if kind is bool:
        return text.lower() in ("1", "true", "yes", "on")
    if kind is int:
        return int(float(text)) if "e" in text.lower() else int(text)
    if kind is float:
        return float(text)
    return text


def _kind(hint):
    for k in (bool, int, float):
        if hint is k or hint == k.__name__:
            return k
    return str


def _section_to_dataclass(cls, section, name):
    kinds = {f.name: _kind(f.type) for f in dataclasses.fields(cls)}
    kwargs = {}
    try:
        for key, text in section.items():
            if key not in kinds:
                raise ConfigError(f"[{name}] unknown key {key!r}")
            kwargs[key] = _coerce(text, kinds[key])
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def loads(text) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if "pairforge" not in cp:
        raise ConfigError("missing [pairforge] section")
    top = cp["pairforge"]
    version = int(top.get("version", "0"))
    if version != FORMAT_VERSION:
        raise ConfigError(f"unsupported config version {version}; expected {FORMAT_VERSION}")
    proto = ExperimentConfig.__dataclass_fields__
    kwargs = {}
    for key in _TOP_KEYS:
        if key in top:
            try:
                kwargs[key] = _coerce(top[key], _kind(proto[key].type))
            except ValueError as exc:
                raise ConfigError(f"[pairforge] {key}: {exc}") from None
    unknown = set(top) - set(_TOP_KEYS) - {"version"}
    if unknown:
        raise ConfigError(f"[pairforge] unknown keys {sorted(unknown)}")
    for name, cls in (("crow", CrowParams), ("source", SourceParams), ("pump", PumpConfig)):
        if name in cp:
            kwargs[name] = _section_to_dataclass(cls, cp[name], name)
    for channel in ("signal", "idler"):
        sec = f"chain.{channel}"
        if sec in cp:
            kwargs[f"chain_{channel}"] = tuple(ChainElement(k, float(v), channel) for k, v in cp[sec].items())
    dets = []
    for sec in cp.sections():
        if sec.startswith("detector."):
            label = sec.split(".", 1)[1]
            fields = dict(cp[sec])
            fields["label"] = label
            dets.append(_section_to_dataclass(DetectorParams, fields, sec))
    kwargs["detectors"] = tuple(dets)
    if "sweep" in cp:
        sw = cp["sweep"]
        try:
            values = tuple(float(v) for v in sw["values"].split(","))
            kwargs["sweep"] = Sweep(sw["param_path"].strip(), values)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"[sweep] {exc}") from None
    return ExperimentConfig(**kwargs)


def load(path) -> ExperimentConfig:
    with open(path) as fh:
        return loads(fh.read())


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def dumps(cfg: ExperimentConfig) -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["pairforge"] = {"version": str(FORMAT_VERSION), **{k: _fmt(getattr(cfg, k)) for k in _TOP_KEYS}}
    for name in ("crow", "source", "pump"):
        obj = getattr(cfg, name)
        cp[name] = {f.name: _fmt(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    cp["chain.signal"] = {e.name: _fmt(e.transmission_db) for e in cfg.chain_signal}
    cp["chain.idler"] = {e.name: _fmt(e.transmission_db) for e in cfg.chain_idler}
    for d in cfg.detectors:
        cp[f"detector.{d.label}"] = {f.name: _fmt(getattr(d, f.name)) for f in dataclasses.fields(d) if f.name != "label"}
    if cfg.sweep is not None:
        cp["sweep"] = {"param_path": cfg.sweep.param_path, "values": ", ".join(_fmt(v) for v in cfg.sweep.values)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def dump(cfg, path):
    with open(path, "w") as fh:
        fh.write(dumps(cfg))
