"""
Checking that logged propensities are trustworthy
=================================================

Three tests: the observed frequency of an action against its mean logged
probability, the harmonic identity whose expectation is exactly 2, and
replay of every action from its logged seed.
"""

from cfeval import (
    RandomizationScheme,
    arithmetic_mean_test,
    collect,
    corrupt_propensities,
    generate_scenario,
    harmonic_mean_test,
    replay_verify,
)

env = generate_scenario(40, 3, seed=4).to_environment()
scheme = RandomizationScheme("sigmoid-subset", lambda1=3.0)
clean = collect(env, scheme, 100_000, master_seed=2)

# Pretend a logging bug inflated the probability of sending only the top candidate.
dirty = corrupt_propensities(clean, {0: 1.2})

for name, log in (("clean", clean), ("corrupted", dirty)):
    a = arithmetic_mean_test(log, 0)
    h = harmonic_mean_test(log, 0)
    r = replay_verify(log)
    print(f"{name}:")
    print(f"  arithmetic  freq {a.statistic:.4f} vs logged {a.expected:.4f} (bound {a.deviation_bound:.4f}) -> {a.passed}")
    print(f"  harmonic    mean {h.statistic:.4f} vs 2 (bound {h.deviation_bound:.4f}) -> {h.passed}")
    print(f"  replay      {int(r.statistic)} mismatched records -> {r.passed}")
