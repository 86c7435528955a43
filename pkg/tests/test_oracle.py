import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from pairforge.errors import CalibrationError, DomainError, TruncationError
from pairforge.experiments import mc_window_probabilities
from pairforge.oracle import (OBSERVABLES, OracleInstance, Target, calibrate, predict_car, predict_g2,
                              window_click_probabilities)


def brute_force(inst):
    """Enumerate photon fates per pair number with multinomial weights."""
    pmf = stats.poisson(inst.mu).pmf if inst.statistics == "poisson" else stats.nbinom(
        inst.modes, inst.modes / (inst.modes + inst.mu)).pmf
    out = dict.fromkeys(OBSERVABLES, 0.0)
    for n in range(inst.n_max + 1):
        w = pmf(n)
        if w < 1e-18:
            continue
        # pair setup: idler detected k_i times, signal k_s times, independent per photon
        pi = 1 - (1 - inst.eta_i) ** n
        ps = 1 - (1 - inst.eta_s) ** n
        ci = pi + (1 - pi) * inst.d_i
        cs_ = ps + (1 - ps) * inst.d_s
        ca = pi + (1 - pi) * inst.d_a
        out["p_i"] += w * ci
        out["p_s"] += w * cs_
        out["p_si"] += w * ci * cs_
        out["p_a"] += w * ca
        # HBT: each signal photon goes to B, C or is lost (multinomial)
        pb_any = pc_any = pbc = 0.0
        for nb in range(n + 1):
            for nc in range(n - nb + 1):
                m = math.comb(n, nb) * math.comb(n - nb, nc) * inst.eta_b**nb * inst.eta_c**nc * (
                    1 - inst.eta_b - inst.eta_c) ** (n - nb - nc)
                fb = 1.0 if nb else inst.d_b
                fc = 1.0 if nc else inst.d_c
                pb_any += m * fb
                pc_any += m * fc
                pbc += m * fb * fc
        out["p_b"] += w * pb_any
        out["p_c"] += w * pc_any
        out["p_ab"] += w * ca * pb_any
        out["p_ac"] += w * ca * pc_any
        out["p_abc"] += w * ca * pbc
    return out


grid = st.builds(
    OracleInstance,
    mu=st.sampled_from([0.0, 1e-3, 0.05, 0.3]),
    eta_s=st.floats(0, 1), eta_i=st.floats(0, 1),
    eta_b=st.floats(0, 0.5), eta_c=st.floats(0, 0.5),
    d_a=st.floats(0, 0.05), d_b=st.floats(0, 0.05), d_c=st.floats(0, 0.05),
    d_s=st.floats(0, 0.05), d_i=st.floats(0, 0.05),
    n_max=st.just(14),
)


@given(grid)
@settings(max_examples=40, deadline=None)
def test_inclusion_exclusion_matches_multinomial_enumeration(inst):
    exact = window_click_probabilities(inst).as_dict()
    bf = brute_force(inst)
    for k in OBSERVABLES:
        assert exact[k] == pytest.approx(bf[k], abs=1e-10, rel=1e-8), k


def test_vacuum_no_darks():
    w = window_click_probabilities(OracleInstance(mu=0.0, eta_s=0.3, eta_i=0.3, eta_b=0.1, eta_c=0.1))
    assert all(v == 0 for v in w.as_dict().values())


def test_vacuum_darks_factorize():
    w = window_click_probabilities(OracleInstance(mu=0.0, d_a=1e-3, d_b=2e-3, d_c=3e-3))
    assert w.p_a == pytest.approx(1e-3)
    assert w.p_ab == pytest.approx(2e-6)
    assert w.p_abc == pytest.approx(6e-9)


def test_p_si_against_large_monte_carlo():
    inst = OracleInstance(mu=0.01, eta_s=0.02, eta_i=0.02, d_s=1e-4, d_i=1e-4, d_a=1e-4, d_b=1e-4, d_c=1e-4,
                          eta_b=0.01, eta_c=0.01)
    n = 10**8
    mc = mc_window_probabilities(inst, n, seed=11)
    p = window_click_probabilities(inst).p_si
    assert abs(mc["p_si"] - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_truncation_guard_and_robustness():
    with pytest.raises(TruncationError):
        window_click_probabilities(OracleInstance(mu=5.0, eta_s=0.1, n_max=5))
    inst = OracleInstance(mu=0.3, eta_s=0.2, eta_i=0.3, eta_b=0.1, eta_c=0.1, d_a=1e-3, d_b=1e-3, d_c=1e-3,
                          n_max=12, statistics="thermal", modes=2)
    a = window_click_probabilities(inst)
    b = window_click_probabilities(replace(inst, n_max=24))
    assert a.tail < inst.tail_bound
    for k in OBSERVABLES:
        assert abs(getattr(a, k) - getattr(b, k)) < inst.tail_bound


def test_instance_validation():
    with pytest.raises(DomainError):
        OracleInstance(mu=-1)
    with pytest.raises(DomainError):
        OracleInstance(mu=0.1, eta_b=0.6, eta_c=0.6)
    with pytest.raises(DomainError):
        OracleInstance(mu=0.1, n_max=2)


def test_car_darks_dominant_is_small():
    inst = OracleInstance(mu=1e-4, eta_s=0.01, eta_i=0.01, d_s=0.05, d_i=0.05)
    assert predict_car(inst).car < 0.1


def test_car_diverges_as_mu_vanishes():
    cars = [predict_car(OracleInstance(mu=mu, eta_s=0.1, eta_i=0.1), subtraction="dark_involved").car
            for mu in (0.1, 0.03, 0.01, 0.003, 0.001)]
    assert all(b > a for a, b in zip(cars, cars[1:]))
    assert cars[-1] > 500


def test_car_undefined_without_accidentals():
    with pytest.raises(DomainError):
        predict_car(OracleInstance(mu=0.0, eta_s=0.1, eta_i=0.1))


def test_g2_limits():
    assert predict_g2(OracleInstance(mu=1e-5, eta_i=0.1, eta_b=0.05, eta_c=0.05)) < 1e-4
    uncorrelated = OracleInstance(mu=0.05, eta_i=0.1, eta_b=0.05, eta_c=0.05, d_a=1e-3, d_b=1e-3, d_c=1e-3,
                                  correlated=False)
    assert predict_g2(uncorrelated) == pytest.approx(1.0, rel=1e-6)
    w = window_click_probabilities(uncorrelated)
    assert w.p_ab == pytest.approx(w.p_a * w.p_b)


def test_g2_two_mu_rule():
    mu = 0.028
    g = predict_g2(OracleInstance(mu=mu, eta_i=0.047, eta_b=0.0316, eta_c=0.0316))
    assert g == pytest.approx(2 * mu, rel=0.1)
    with_darks = predict_g2(OracleInstance(mu=mu, eta_i=0.047, eta_b=0.0316, eta_c=0.0316, d_b=6e-4, d_c=6e-4))
    assert with_darks > g


@given(st.floats(1e-3, 0.2), st.floats(1e-3, 0.2))
@settings(max_examples=30, deadline=None)
def test_g2_monotone_in_mu_with_clean_herald(m1, m2):
    lo, hi = sorted((m1, m2))
    base = OracleInstance(mu=lo, eta_i=0.05, eta_b=0.03, eta_c=0.03, d_a=0.0, d_b=5e-4, d_c=5e-4)
    assert predict_g2(base) <= predict_g2(replace(base, mu=hi)) + 1e-12


def test_calibrate_single_target_exact():
    def model(p):
        return {"per_pulse": p["k"] * 0.028 / 3.0}

    fit = calibrate(model, [Target("per_pulse", 0.028)], {"k": (1.0, 1e-6, 1e6)}, tolerance=1e-9)
    assert fit.params["k"] == pytest.approx(3.0)
    assert abs(fit.residuals["per_pulse"]) < 1e-9


def test_calibrate_infeasible():
    with pytest.raises(CalibrationError):
        calibrate(lambda p: {"car": 1.0 / p["mu"]}, [Target("car", math.inf)], {"mu": (0.1, 1e-9, 1)})
    with pytest.raises(CalibrationError) as info:
        calibrate(lambda p: {"x": p["a"]}, [Target("x", 50.0)], {"a": (1.0, 0.1, 2.0)})
    assert info.value.best["a"] == pytest.approx(2.0)


def test_calibrate_needs_enough_targets():
    with pytest.raises(DomainError):
        calibrate(lambda p: {}, [Target("x", 1.0)], {"a": (1, 0.1, 2), "b": (1, 0.1, 2)})


def test_herald_darks_give_interior_g2_minimum():
    base = OracleInstance(mu=1e-3, eta_i=0.05, eta_b=0.03, eta_c=0.03, d_a=1e-4, d_b=5e-4, d_c=5e-4)
    mus = np.logspace(-5, -0.5, 30)
    g = np.array([predict_g2(replace(base, mu=m)) for m in mus])
    k = int(np.argmin(g))
    assert 0 < k < len(mus) - 1
