"""Monte Carlo window probabilities against exact enumeration on a few grid instances.

z scores mean little when fewer than about ten events are expected, as for p_abc here.
"""
from pairforge.cli import oracle_grid
from pairforge.experiments import mc_window_probabilities
from pairforge.oracle import window_click_probabilities

N = 2 * 10**6
for k in (4, 13, 26):
    inst = oracle_grid()[k]
    exact = window_click_probabilities(inst).as_dict()
    mc = mc_window_probabilities(inst, N, seed=1, key=f"demo:{k}")
    print(f"instance {k}: mu={inst.mu:g} eta={inst.eta_s:g} dark={inst.d_a:g}")
    for name in ("p_s", "p_si", "p_ab", "p_abc"):
        se = (exact[name] * (1 - exact[name]) / N) ** 0.5
        z = (mc[name] - exact[name]) / se if se else 0.0
        print(f"  {name:6s} exact {exact[name]:.4e}  mc {mc[name]:.4e}  z {z:+.2f}")
