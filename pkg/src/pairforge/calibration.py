"""Fitting the unstated constants of an experiment config to reported observables.

Both fits run against the window oracle, never against Monte Carlo output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .chain import chain_transmission
from .config import ExperimentConfig, set_param
from .oracle import (CalibrationResult, OracleInstance, Target, calibrate, predict_car, predict_g2,
                     window_click_probabilities)
from .source import mean_pairs_per_window


def dbm_to_w(dbm):
    return 10 ** (dbm / 10) * 1e-3


def p_sat_for_excess_loss(power_w, excess_db):
    """Saturation power at which ``power_w`` sees ``excess_db`` of nonlinear loss."""
    return power_w / (10 ** (excess_db / 10) - 1)


# -- CW pair experiment --------------------------------------------------------------

def cw_instance(cfg: ExperimentConfig, **over) -> OracleInstance:
    s, i = cfg.detector("signal"), cfg.detector("idler")
    mu = mean_pairs_per_window(cfg.pump, cfg.source, s.gate_width_ps * 1e-12)
    kw = dict(mu=mu,
              eta_s=chain_transmission(cfg.chain_signal, "signal") * s.efficiency,
              eta_i=chain_transmission(cfg.chain_idler, "idler") * i.efficiency,
              d_s=s.dark_prob_per_gate, d_i=i.dark_prob_per_gate,
              statistics=cfg.source.statistics, modes=cfg.source.thermal_modes)
    kw.update(over)
    return OracleInstance(**kw)


def cw_bin_fraction(cfg):
    """Chance that two independent clicks in aligned gates share a coincidence bin."""
    return cfg.bin_width_ps / cfg.detector("signal").gate_width_ps


def cw_observables(cfg):
    inst = cw_instance(cfg)
    pred = predict_car(inst, bin_fraction=cw_bin_fraction(cfg))
    return {
        "car": pred.car,
        "raw_car": pred.raw_car,
        "coincidences_per_gate_output": pred.c / (inst.eta_s * inst.eta_i),
        "c_per_gate": pred.c,
        "a_per_gate": pred.a,
    }


@dataclass
class Calibrated:
    config: ExperimentConfig
    fit: CalibrationResult


def calibrate_cw(cfg: ExperimentConfig, car=10.4, coincidences_per_gate=1.5e-3, power_dbm=12.0,
                 excess_loss_db=1.0, tolerance=0.01) -> Calibrated:
    """Fit the pair-generation constant and a shared per-gate dark probability.

    The saturation power is not fitted: it is set so that ``power_dbm`` sits
    at ``excess_loss_db`` of nonlinear loss.
    """
    p_w = dbm_to_w(power_dbm)
    base = set_param(cfg, "pump.average_power_w", p_w)
    base = set_param(base, "source.p_sat_w", p_sat_for_excess_loss(p_w, excess_loss_db))

    def apply(params):
        c = set_param(base, "source.pair_gen_calibration", params["eta_pg"])
        return set_param(c, "detector.*.dark_prob_per_gate", params["dark"])

    fit = calibrate(lambda p: cw_observables(apply(p)),
                    [Target("car", car), Target("coincidences_per_gate_output", coincidences_per_gate)],
                    {"eta_pg": (1e-4, 1e-12, 1e6), "dark": (1e-3, 1e-9, 0.5)}, tolerance=tolerance)
    return Calibrated(set_param(apply(fit.params), "pump.average_power_w", cfg.pump.average_power_w), fit)


# -- pulsed heralded experiment ------------------------------------------------------

def hbt_instance(cfg: ExperimentConfig, **over) -> OracleInstance:
    a, b, c = cfg.detector("A"), cfg.detector("B"), cfg.detector("C")
    t_s = chain_transmission(cfg.chain_signal, "signal")
    kw = dict(mu=mean_pairs_per_window(cfg.pump, cfg.source),
              eta_i=chain_transmission(cfg.chain_idler, "idler") * a.efficiency,
              eta_b=0.5 * t_s * b.efficiency, eta_c=0.5 * t_s * c.efficiency,
              d_a=a.dark_prob_per_gate, d_b=b.dark_prob_per_gate, d_c=c.dark_prob_per_gate,
              statistics=cfg.source.statistics, modes=cfg.source.thermal_modes)
    kw.update(over)
    return OracleInstance(**kw)


def pulsed_car_instance(hbt: OracleInstance) -> OracleInstance:
    """Pair-form instance for pulsed CAR: idler on A, signal on either HBT arm."""
    return replace(hbt, eta_s=hbt.eta_b + hbt.eta_c, d_s=1 - (1 - hbt.d_b) * (1 - hbt.d_c), d_i=hbt.d_a,
                   eta_b=0.0, eta_c=0.0)


def herald_rate_output(cfg, inst=None):
    """Oracle herald rate referred to the waveguide output (dead time excluded)."""
    inst = inst or hbt_instance(cfg)
    p_a = window_click_probabilities(inst).p_a
    return p_a * cfg.pump.rep_rate_hz / inst.eta_i


def saturated_mu(cfg):
    """Pair number per pulse in the limit of infinite pump power."""
    src = cfg.source
    phase = src.gamma_eff * src.p_sat_w * src.length_eff_m
    return src.pair_gen_calibration * phase**2 * cfg.pump.pulse_width_s / 1e-9


def pulsed_observables(cfg):
    inst = hbt_instance(cfg)
    car = predict_car(pulsed_car_instance(inst), subtraction="dark_involved")
    return {
        "herald_rate_output_hz": herald_rate_output(cfg, inst),
        "raw_car": car.raw_car,
        "car": car.car,
        "saturated_herald_rate_output_hz": herald_rate_output(cfg, replace(inst, mu=saturated_mu(cfg))),
        "g2": predict_g2(inst),
        "mu": inst.mu,
    }


def calibrate_pulsed(cfg: ExperimentConfig, herald_rate_hz=220e3, raw_car=15.0, car=23.8, car_sigma=5.6,
                     saturated_rate_hz=1e6, power_w=1.7e-3, rel_sigma=0.1, tolerance=2.0) -> Calibrated:
    """Fit pair constant, saturation power and A / B,C dark probabilities.

    Targets: output-referred herald rate at ``power_w``, raw and
    dark-subtracted CAR there, and the saturated herald rate.  Residuals are
    in units of the target uncertainty (``car_sigma`` for the subtracted CAR,
    ``rel_sigma`` times the value otherwise).  g2 is left as a prediction.
    """
    base = set_param(cfg, "pump.average_power_w", power_w)

    def apply(p):
        c = set_param(base, "source.pair_gen_calibration", p["eta_pg"])
        c = set_param(c, "source.p_sat_w", p["p_sat_w"])
        c = set_param(c, "detector.A.dark_prob_per_gate", p["dark_a"])
        c = set_param(c, "detector.B.dark_prob_per_gate", p["dark_bc"])
        return set_param(c, "detector.C.dark_prob_per_gate", p["dark_bc"])

    targets = [
        Target("herald_rate_output_hz", herald_rate_hz, rel_sigma * herald_rate_hz),
        Target("raw_car", raw_car, rel_sigma * raw_car),
        Target("car", car, car_sigma),
        Target("saturated_herald_rate_output_hz", saturated_rate_hz, rel_sigma * saturated_rate_hz),
    ]
    free = {"eta_pg": (1e-3, 1e-12, 1e6), "p_sat_w": (0.1, 1e-4, 100.0),
            "dark_a": (1e-4, 1e-9, 0.1), "dark_bc": (1e-4, 1e-9, 0.1)}
    fit = calibrate(lambda p: pulsed_observables(apply(p)), targets, free, tolerance=tolerance)
    return Calibrated(set_param(apply(fit.params), "pump.average_power_w", cfg.pump.average_power_w), fit)
