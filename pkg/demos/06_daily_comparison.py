"""
Offline estimates against simulated online traffic
==================================================

Each simulated day collects its own exploration log and, separately, runs
the target policy live.  The unbiased estimate tracks the live value; the
matched average does not.
"""

from cfeval import RandomizationScheme, ScoreThresholdPolicy, daily_comparison, generate_scenario, true_value

env = generate_scenario(60, 4, seed=9, violation_rate=0.3).to_environment()
pol = ScoreThresholdPolicy(0.4)
rows = daily_comparison(env, RandomizationScheme("sigmoid-subset", lambda1=4.0, lambda2=-0.5), pol, 20_000, seed=1)

print(f"oracle value {true_value(pol, env):.4f}")
print("day  online   IPS      matched  CI width")
for r in rows:
    print(f"{r.period:3d}  {r.online_value:.4f}  {r.ips_value:.4f}  {r.biased_value:.4f}  {r.ci_width:.4f}")
