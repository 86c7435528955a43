"""Calibrate the CW pair experiment, then sweep pump power and watch CAR.

Run with ``python demos/cw_car_sweep.py``.  Each point uses 2e7 gates, which
is enough to see the coincidence peak but not to pin down the accidentals:
with the calibrated dark probability the delayed bins are almost all
dark-dark coincidences.
"""
import math

from pairforge import config as cfgmod
from pairforge.calibration import calibrate_cw, cw_observables
from pairforge.experiments import run_sweep

cal = calibrate_cw(cfgmod.default_cw_config())
print("fitted constants:", {k: f"{v:.4g}" for k, v in cal.fit.params.items()})

cfg = cfgmod.replace(cal.config, integration_time_s=20.0)
print(f"\n{'dBm':>5} {'C_raw':>7} {'A_raw':>8} {'D':>8} {'CAR':>8} {'model CAR':>10}")
for row in run_sweep(cfg):
    r = row.run.result
    model = cw_observables(cfgmod.set_param(cfg, "pump.average_power_w", row.value))["car"]
    dbm = 10 * math.log10(row.value / 1e-3)
    print(f"{dbm:5.0f} {r.c_raw:7d} {r.a_raw:8.1f} {r.d:8.1f} {r.car:8.3g} {model:10.3g}")
