"""Command-line pipeline: scenario -> log -> checks -> estimates -> selection.

Every subcommand writes its artifact to ``--out`` and a manifest
``<out>.manifest.json`` echoing the configuration, seeds and format
versions, so reruns with the same manifest reproduce identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bootstrap import DEFAULT_B, DEFAULT_BINS, bootstrap_vs_analytic, online_bootstrap, write_histogram_csv
from .collector import RandomizationScheme, collect
from .core import ENV_SCHEMA, Action, EnvironmentSpec, true_value
from .diagnostics import arithmetic_mean_test, harmonic_mean_test, replay_verify, sweep
from .errors import DataIntegrityError, InsufficientDataError, LogFormatError
from .estimator import (
    ClipConfig,
    biased_estimate,
    daily_comparison,
    ips_estimate,
    streaming_ips_estimate,
    write_comparison_csv,
    write_estimates_csv,
)
from .logio import LOG_SCHEMA, iter_log_chunks, load_log, save_log
from .optimizer import PolicyFamily, grid_select, linear_family, split, threshold_family, validate_selection
from .policy import Policy, ScoreThresholdPolicy, policy_from_dict
from .speller import generate_scenario

FORMATS = {"log_schema": LOG_SCHEMA, "env_schema": ENV_SCHEMA, "report_schema": 1}


def _json_arg(value: str):
    text = value.strip()
    if text.startswith(("{", "[")):
        return json.loads(text)
    return json.loads(Path(value).read_text())


def parse_policy(value: str) -> Policy:
    """``score-threshold:TAU``, an inline JSON policy, or a path to one."""
    if value.startswith("score-threshold:"):
        return ScoreThresholdPolicy(float(value.split(":", 1)[1]))
    return policy_from_dict(_json_arg(value))


def parse_grid(value: str) -> PolicyFamily:
    """``score-threshold:0.1,0.2,...[@CAPACITY]``, inline JSON, or a JSON file.

    JSON grids look like ``{"family": "score-threshold", "grid": [0.1, 0.2],
    "capacity": 2.0}``; linear-argmax grids list ``[weights, bias]`` pairs.
    """
    if value.startswith("score-threshold:"):
        body = value.split(":", 1)[1]
        cap = None
        if "@" in body:
            body, c = body.split("@", 1)
            cap = float(c)
        return threshold_family([float(t) for t in body.split(",") if t], cap)
    doc = _json_arg(value)
    fam = doc.get("family")
    cap = doc.get("capacity")
    if fam == "score-threshold":
        return threshold_family([g[0] if isinstance(g, list) else g for g in doc["grid"]], cap)
    if fam == "linear-argmax":
        return linear_family([tuple(g) for g in doc["grid"]], doc.get("mode", "atomic"), cap)
    raise ValueError(f"unknown grid family {fam!r}")


def load_env(path: str) -> EnvironmentSpec:
    return EnvironmentSpec.from_json(Path(path).read_text())


def _scheme(args) -> RandomizationScheme:
    return RandomizationScheme(args.scheme, args.lambda1, args.lambda2, args.clip_low, args.clip_high)


def _clip(args) -> ClipConfig | None:
    return None if args.p_min is None else ClipConfig(args.p_min)


def write_manifest(args, extra: dict | None = None) -> Path:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    doc = {
        "command": args.command,
        "config": config,
        "seeds": {k: v for k, v in config.items() if "seed" in k and v is not None},
        "formats": FORMATS,
        "version": __version__,
    }
    if extra:
        doc["results"] = extra
    path = Path(str(args.out) + ".manifest.json")
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def cmd_gen_scenario(args) -> int:
    sc = generate_scenario(args.queries, args.L, args.seed, violation_rate=args.violation_rate, noise=args.noise)
    Path(args.out).write_text(sc.to_json() + "\n")
    write_manifest(args)
    return 0


def cmd_collect(args) -> int:
    env = load_env(args.env)
    log = collect(env, _scheme(args), args.n, args.seed)
    save_log(log, args.out)
    write_manifest(args, {"records": len(log)})
    return 0


def cmd_verify(args) -> int:
    log = load_log(args.log)
    reports = []
    if args.target is not None:
        t = Action.from_json(json.loads(args.target))
        reports += [arithmetic_mean_test(log, t, args.alpha), harmonic_mean_test(log, t, args.alpha)]
    else:
        reports += sweep(log, args.alpha)
    if log.has_seed:
        reports.append(replay_verify(log))
    ok = all(r.passed for r in reports)
    doc = {"passed": ok, "reports": [r.to_dict() for r in reports]}
    Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    write_manifest(args, {"passed": ok})
    failed = [r for r in reports if not r.passed]
    for r in failed:
        print(f"FAIL {r.test_name} target={r.target_action!r} stat={r.statistic:.6g} "
              f"expected={r.expected:.6g} bound={r.deviation_bound:.3g}", file=sys.stderr)
    print("verify:", "passed" if ok else f"{len(failed)} test(s) failed")
    return 0 if ok else 1


def cmd_evaluate(args) -> int:
    policy = parse_policy(args.policy)
    clip = _clip(args)
    with open(args.log, encoding="utf-8") as fp:
        est = streaming_ips_estimate(iter_log_chunks(fp), policy, clip, args.level)
    rows = [(policy.policy_id, est)]
    if args.biased:
        rows.append((policy.policy_id, biased_estimate(load_log(args.log), policy, args.level)))
    with open(args.out, "w", encoding="utf-8", newline="") as fp:
        write_estimates_csv(fp, rows)
    write_manifest(args)
    print(f"{policy.policy_id}: {est.point:.6f} ± {est.ci_high - est.point:.6f} (n={est.n})")
    return 0


def cmd_bootstrap(args) -> int:
    log = load_log(args.log)
    policy = parse_policy(args.policy)
    clip = _clip(args)
    res = online_bootstrap(log, policy, args.B, args.seed, clip=clip, bins=args.bins)
    est = ips_estimate(log, policy, clip, args.level)
    row = bootstrap_vs_analytic(res, est)
    with open(args.out, "w", encoding="utf-8", newline="") as fp:
        write_histogram_csv(fp, res.histogram)
    summary = res.summary()
    summary.update(analytic_stderr=row.analytic_stderr, ratio=row.ratio, flagged=row.flagged, point=est.point)
    Path(str(args.out) + ".summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(args)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    env = load_env(args.env)
    policy = parse_policy(args.policy)
    rows = daily_comparison(env, _scheme(args), policy, args.n, args.seed, args.days, _clip(args), args.level)
    with open(args.out, "w", encoding="utf-8", newline="") as fp:
        write_comparison_csv(fp, rows)
    write_manifest(args)
    return 0


def cmd_optimize(args) -> int:
    log = load_log(args.log)
    family = parse_grid(args.grid)
    train, held_out = split(log, args.train_fraction, args.seed)
    report = grid_select(family, train, _clip(args), args.level)
    out = Path(args.out)
    out.write_text(report.to_json() + "\n")
    with open(str(out) + ".csv", "w", encoding="utf-8", newline="") as fp:
        report.write_csv(fp)
    extra = {"selected": None if report.selected is None else list(report.selected)}
    print("selected:", extra["selected"], f"({report.selection_rule})")
    if report.selected is not None and args.env:
        val = validate_selection(report, held_out, load_env(args.env), _clip(args), args.level)
        extra["validation"] = {
            "eval_estimate": val.eval_estimate.point,
            "ci_low": val.eval_estimate.ci_low,
            "ci_high": val.eval_estimate.ci_high,
            "true_value": val.true_value,
            "covered": val.covered,
        }
        print("validation:", json.dumps(extra["validation"], sort_keys=True))
    write_manifest(args, extra)
    return 0 if report.selected is not None else 3


def _add_scheme(p):
    p.add_argument("--scheme", default="uniform", choices=("uniform", "sigmoid-subset"))
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--lambda2", type=float, default=0.0)
    p.add_argument("--clip-low", type=float, default=0.1)
    p.add_argument("--clip-high", type=float, default=0.9)


def _add_estimator(p):
    p.add_argument("--p-min", type=float, default=None)
    p.add_argument("--level", type=float, default=0.95)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfeval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scenario", help="generate a synthetic query-rewrite environment")
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--L", type=int, default=4)
    p.add_argument("--violation-rate", type=float, default=0.0)
    p.add_argument("--noise", choices=("bernoulli", "fixed"), default="bernoulli")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_scenario)

    p = sub.add_parser("collect", help="simulate randomized exploration and write a log")
    p.add_argument("--env", required=True)
    _add_scheme(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("verify", help="check logged propensities (exit 1 on failure)")
    p.add_argument("log")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--target", default=None, help="JSON action, e.g. 2 or [1,3]; default sweeps all")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("evaluate", help="offline value estimate of a policy")
    p.add_argument("log")
    p.add_argument("--policy", required=True)
    _add_estimator(p)
    p.add_argument("--biased", action="store_true", help="also report the matched-average estimate")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bootstrap", help="online bootstrap histogram of the estimate")
    p.add_argument("log")
    p.add_argument("--policy", required=True)
    p.add_argument("--B", type=int, default=DEFAULT_B)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--seed", type=int, required=True)
    _add_estimator(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("compare", help="per-day online vs offline scatter table")
    p.add_argument("--env", required=True)
    _add_scheme(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--n", type=int, required=True, help="records per day")
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--seed", type=int, required=True)
    _add_estimator(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("optimize", help="select policy parameters offline")
    p.add_argument("log")
    p.add_argument("--grid", required=True)
    p.add_argument("--env", default=None, help="environment for oracle validation")
    p.add_argument("--train-fraction", type=float, default=2 / 3)
    p.add_argument("--seed", type=int, required=True)
    _add_estimator(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LogFormatError, DataIntegrityError, InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
