"""The full two-user block-Markov construction, end to end.

Small enough to evaluate exactly: every seed bit, sampled bit, and channel
transition is enumerated, giving the exact distance between the induced
output law over all k blocks and the i.i.d. target.  Then a larger
Monte-Carlo run shows the windowed proxies shrinking as N grows.

The analysis-scale epsilon makes hash lengths clamp to zero at desk-scale N
(the plan is flagged asymptotic-only), so these runs use idealized length
overrides to exercise the recycling machinery.
"""

import numpy as np

from macresolve import Dist, IdealizedOverrides, achieved_rates, build_mac_code, \
    make_rng, run_trials, tv_exhaustive, tv_monte_carlo
from macresolve.evaluator import exact_report, independence_diagnostics
from macresolve.probcore import Alphabet, MacChannel

transition = np.zeros((2, 2, 3))
for x in range(2):
    for y in range(2):
        transition[x, y, x + y] = 1.0
adder = MacChannel((Alphabet(2), Alphabet(2)), Alphabet(3), transition)
inputs = [Dist.bernoulli(0.5), Dist.bernoulli(0.5)]

# exact mode at a tiny size
code = build_mac_code(adder, inputs, block_len=2, k=2, xi=0.05,
                      idealized=IdealizedOverrides(), rng=make_rng(3))
print("streams:", [(s.name, s.hash_len, s.seed_len_first, s.seed_len_rest)
                   for s in code.plan.streams])
print("exact joint output distance:", tv_exhaustive(code))
for row in exact_report(code):
    print(f"  {row.name:38s} {row.value:.6f}")

rates = achieved_rates(code.plan)
print("achieved rates:", {k: str(v["rate"]) for k, v in
                          rates["per_stream"].items()})
print("k->inf limits :", {k: round(v["limit"], 4) for k, v in
                          rates["per_stream"].items()})

# Monte-Carlo proxies across block lengths
print("\nwindowed proxies (100k trials, k=5):")
for n in (8, 16, 32):
    code = build_mac_code(adder, inputs, block_len=n, k=5, xi=0.05,
                          idealized=IdealizedOverrides(), rng=make_rng(100 + n))
    bt = run_trials(code, 100_000, make_rng(7))
    rows = {m.name: m for m in tv_monte_carlo(code, 0, make_rng(8),
                                              transcript=bt, n_boot=200)}
    ind = {m.name: m for m in independence_diagnostics(bt, code, make_rng(9),
                                                       n_boot=200)}
    w = rows["windowed_tv_w2"]
    d = ind["recycled_independence_tv_mean"]
    print(f"  N={n:2d}: windowed TV {w.value:.4f} [{w.ci_lo:.4f}, {w.ci_hi:.4f}]"
          f"  recycling dependence {d.value:.4f} (noise floor)")
