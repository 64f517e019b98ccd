"""
How noisy is the estimate?  An online bootstrap
===============================================

Each replicate reweights every record by an independent Poisson(1) draw,
which needs only one pass over the data.
"""

from cfeval import (
    RandomizationScheme,
    ScoreThresholdPolicy,
    bootstrap_vs_analytic,
    collect,
    generate_scenario,
    ips_estimate,
    online_bootstrap,
)

env = generate_scenario(60, 4, seed=3).to_environment()
log = collect(env, RandomizationScheme("sigmoid-subset", lambda1=4.0, lambda2=-0.5), 100_000, master_seed=5)
pol = ScoreThresholdPolicy(0.5)

res = online_bootstrap(log, pol, B=1000, seed=11, bins=20)
est = ips_estimate(log, pol)
row = bootstrap_vs_analytic(res, est)
print(f"skewness {res.skewness:+.3f}, excess kurtosis {res.excess_kurtosis:+.3f}")
print(f"bootstrap std {row.bootstrap_std:.5f} vs analytic stderr {row.analytic_stderr:.5f} (ratio {row.ratio:.3f})")

# A text histogram of the replicates.
peak = max(c for _, _, c in res.histogram)
for lo, hi, c in res.histogram:
    print(f"{lo:.4f}-{hi:.4f} {'#' * round(40 * c / peak)}")
