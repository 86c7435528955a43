"""Exact window-level predictions by enumeration over the pair number.

A window (gate or pulse) is a single yes/no detection cell per detector.
For ``n`` pairs in the window, detector set ``S`` stays silent with
probability ``q_S**n * prod(1 - d_k)``; joint click probabilities follow by
inclusion-exclusion.  The HBT arms share the signal photon, so one photon
reaches at most one of B and C.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

from .errors import CalibrationError, DomainError, TruncationError
from .source import number_distribution

OBSERVABLES = ("p_s", "p_i", "p_si", "p_a", "p_b", "p_c", "p_ab", "p_ac", "p_abc")


@dataclass(frozen=True)
class OracleInstance:
    mu: float
    eta_s: float = 0.0
    eta_i: float = 0.0
    eta_b: float = 0.0
    eta_c: float = 0.0
    d_a: float = 0.0
    d_b: float = 0.0
    d_c: float = 0.0
    d_s: float = 0.0
    d_i: float = 0.0
    statistics: str = "poisson"
    modes: int = 1
    n_max: int = 40
    tail_bound: float = 1e-6
    correlated: bool = True  # False: idler and signal photons from independent windows

    def __post_init__(self):
        if self.mu < 0:
            raise DomainError("mu must be >= 0")
        for name in ("eta_s", "eta_i", "eta_b", "eta_c", "d_a", "d_b", "d_c", "d_s", "d_i"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1]")
        if self.eta_b + self.eta_c > 1.0:
            raise DomainError("eta_b + eta_c cannot exceed 1")
        if self.n_max < 3:
            raise DomainError("n_max must be >= 3")


@dataclass(frozen=True)
class WindowProbabilities:
    p_s: float
    p_i: float
    p_si: float
    p_a: float
    p_b: float
    p_c: float
    p_ab: float
    p_ac: float
    p_abc: float
    tail: float

    def as_dict(self):
        return {k: getattr(self, k) for k in OBSERVABLES}


_IDLER_SIDE = {"i", "a"}


def _pmf(inst):
    dist = number_distribution(inst.mu, inst.statistics, inst.modes)
    n = np.arange(inst.n_max + 1)
    pmf = dist.pmf(n)
    tail = max(0.0, 1.0 - float(pmf.sum()))
    if tail > inst.tail_bound:
        raise TruncationError(f"P(n > {inst.n_max}) = {tail:.3g} exceeds {inst.tail_bound:g}; raise n_max")
    return n, pmf, tail


def _silent(inst, subset, n, pmf):
    eta = {"s": inst.eta_s, "i": inst.eta_i, "a": inst.eta_i, "b": inst.eta_b, "c": inst.eta_c}
    dark = {"s": inst.d_s, "i": inst.d_i, "a": inst.d_a, "b": inst.d_b, "c": inst.d_c}
    q_idler = 1.0 - (inst.eta_i if _IDLER_SIDE & set(subset) else 0.0)
    q_signal = 1.0 - sum(eta[k] for k in subset if k not in _IDLER_SIDE)
    no_dark = math.prod(1.0 - dark[k] for k in subset)
    if inst.correlated:
        return no_dark * float(np.dot(pmf, (q_idler * q_signal) ** n))
    return no_dark * float(np.dot(pmf, q_idler**n)) * float(np.dot(pmf, q_signal**n))


def _all_click(inst, dets, n, pmf):
    total = 0.0
    for r in range(len(dets) + 1):
        for sub in itertools.combinations(dets, r):
            total += (-1) ** r * _silent(inst, sub, n, pmf)
    return max(total, 0.0)


def window_click_probabilities(inst: OracleInstance) -> WindowProbabilities:
    n, pmf, tail = _pmf(inst)
    p = {name: _all_click(inst, name[2:], n, pmf) for name in OBSERVABLES}
    return WindowProbabilities(tail=tail, **p)


def photon_click_probability(inst, detector):
    """Click probability from photons alone (darks switched off)."""
    n, pmf, _ = _pmf(inst)
    eta = {"s": inst.eta_s, "i": inst.eta_i, "a": inst.eta_i, "b": inst.eta_b, "c": inst.eta_c}[detector]
    return 1.0 - float(np.dot(pmf, (1.0 - eta) ** n))


@dataclass(frozen=True)
class CarPrediction:
    c: float
    a_raw: float
    d: float
    a: float
    car: float
    raw_car: float


def predict_car(inst: OracleInstance, bin_fraction=1.0, subtraction="dark_run") -> CarPrediction:
    """Expected CAR per window between the signal (s) and idler (i) detectors.

    ``bin_fraction`` is the chance that two uncorrelated clicks from the same
    pair of gates land in one coincidence bin (1 at window level).  With
    ``subtraction="dark_run"`` the dark term is the dark-dark coincidence of
    a pump-off run; ``"dark_involved"`` also removes dark-photon accidentals.
    """
    w = window_click_probabilities(inst)
    c = w.p_si - w.p_s * w.p_i
    a_raw = bin_fraction * w.p_s * w.p_i
    if subtraction == "dark_run":
        d = bin_fraction * inst.d_s * inst.d_i
    elif subtraction == "dark_involved":
        d = a_raw - bin_fraction * photon_click_probability(inst, "s") * photon_click_probability(inst, "i")
    else:
        raise DomainError(f"unknown subtraction {subtraction!r}")
    a = a_raw - d
    if a_raw <= 0 or a <= 0:
        raise DomainError("accidental probability is zero; CAR undefined")
    return CarPrediction(c=c, a_raw=a_raw, d=d, a=a, car=c / a, raw_car=c / a_raw)


def predict_g2(inst: OracleInstance) -> float:
    w = window_click_probabilities(inst)
    denom = w.p_ab * w.p_ac
    if denom <= 0:
        raise DomainError("p_ab * p_ac is zero; g2 undefined")
    return w.p_abc * w.p_a / denom


def with_mu(inst, mu):
    return replace(inst, mu=mu)


@dataclass(frozen=True)
class Target:
    observable: str
    value: float
    sigma: float | None = None  # residual scale; defaults to |value|


@dataclass
class CalibrationResult:
    params: dict
    residuals: dict
    predictions: dict
    cost: float


def calibrate(model, targets, free_params, tolerance=0.05, max_nfev=400):
    """Fit positive free parameters so ``model(params)`` meets the targets.

    ``model`` maps a parameter dict to a dict of observables; ``free_params``
    maps names to ``(initial, lower, upper)``.  The fit runs in log space on
    scaled residuals ``(pred - value) / sigma``.  Raises CalibrationError,
    carrying the best parameters found, when any scaled residual exceeds
    ``tolerance``.
    """
    targets = list(targets)
    if len(targets) < len(free_params):
        raise DomainError("need at least as many targets as free parameters")
    for t in targets:
        if not math.isfinite(t.value):
            raise CalibrationError(f"target {t.observable} = {t.value} cannot be met")
    names = list(free_params)
    x0 = np.log([free_params[k][0] for k in names])
    lo = np.log([free_params[k][1] for k in names])
    hi = np.log([free_params[k][2] for k in names])

    def unpack(x):
        return dict(zip(names, np.exp(x)))

    def residuals(x):
        try:
            pred = model(unpack(x))
        except (DomainError, TruncationError):
            return np.full(len(targets), 1e6)
        out = []
        for t in targets:
            scale = t.sigma if t.sigma else abs(t.value)
            out.append((pred[t.observable] - t.value) / scale)
        return np.asarray(out, dtype=float)

    sol = least_squares(residuals, x0, bounds=(lo, hi), max_nfev=max_nfev, diff_step=1e-4,
                        xtol=1e-12, ftol=1e-12, gtol=1e-12)
    params = unpack(sol.x)
    res = residuals(sol.x)
    res_d = {t.observable: float(r) for t, r in zip(targets, res)}
    try:
        pred = model(params)
    except (DomainError, TruncationError):
        pred = {}
    if not np.all(np.abs(res) <= tolerance):
        raise CalibrationError(f"calibration did not converge: residuals {res_d}", best=params, residuals=res_d)
    return CalibrationResult(params=params, residuals=res_d, predictions=pred, cost=float(sol.cost))
