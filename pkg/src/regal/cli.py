"""Command-line entry point: ``regal analyze|run|bench|validate|plot``."""
from __future__ import annotations

import argparse
import json
import sys

from .diameters import analyze
from .envs import LowerBoundParams, emit_mdp, load_mdp, make_lower_bound
from .harness import ConfigError, ExperimentConfig, run_experiment, write_plot
from .mdp import ConvergenceError, MdpError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _cmd_analyze(args) -> int:
    report = analyze(load_mdp(args.mdp))
    if args.json:
        print(json.dumps(report.to_dict(), indent=1))
    else:
        print(report.format_text())
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.out:
        cfg.output_dir = args.out
    summary = run_experiment(cfg, workers=args.workers)
    d = summary.diagnostics
    T = cfg.horizon
    print(f"seeds={len(summary.seeds)} T={T} lambda*={summary.lambda_star:.10g} "
          f"sp(h*)={summary.span_star:.6g}")
    print(f"mean regret at T: {summary.mean_at(T):.6g} (std {summary.std[-1]:.6g})"
          if T in summary.checkpoints else "")
    print(f"episodes: mean {sum(summary.episode_counts) / len(summary.episode_counts):.2f}, "
          f"max {max(summary.episode_counts)}; membership rate {d['membership_rate']:.4f}; "
          f"optimism violations {d['optimism_violations']}")
    if cfg.output_dir:
        print(f"wrote {cfg.output_dir}")
    for msg in summary.failures:
        print(f"diagnostic failure: {msg}", file=sys.stderr)
    return EXIT_OK if summary.passed else EXIT_FAIL


def _cmd_make_lb(args) -> int:
    params = LowerBoundParams(S=args.S, A=args.A, d_ow=args.dow, T=args.T,
                              good_copy=args.good_copy, a_star=args.a_star, seed=args.seed)
    text = emit_mdp(make_lower_bound(params))
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .validate import Suite

    results = Suite(workers=args.workers).run(include_regret=args.regret, echo=print)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def _cmd_plot(args) -> int:
    dat, svg = write_plot(args.summary, args.out)
    print(f"wrote {dat} and {svg}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regal", description="Span-regularized optimistic RL lab")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    a = sub.add_parser("analyze", help="gain, span and diameters of an MDP document")
    a.add_argument("mdp")
    a.add_argument("--json", action="store_true", help="print JSON instead of text")
    a.set_defaults(func=_cmd_analyze)

    r = sub.add_parser("run", help="run a seeded experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--workers", type=int, help="worker processes (default: REGAL_WORKERS or CPU count)")
    r.set_defaults(func=_cmd_run)

    b = sub.add_parser("bench", help="benchmark MDP generators")
    bsub = b.add_subparsers(dest="bench_command", metavar="generator")
    bsub.required = True
    lb = bsub.add_parser("make-lb", help="emit a lower-bound family instance")
    lb.add_argument("--S", type=int, required=True)
    lb.add_argument("--A", type=int, required=True)
    lb.add_argument("--dow", type=float, required=True)
    lb.add_argument("--T", type=int, required=True)
    lb.add_argument("--seed", type=int, default=0)
    lb.add_argument("--good-copy", type=int)
    lb.add_argument("--a-star", type=int)
    lb.add_argument("-o", "--output")
    lb.set_defaults(func=_cmd_make_lb)

    v = sub.add_parser("validate", help="run the acceptance checks")
    v.add_argument("--regret", action="store_true", help="include the long regret-growth check")
    v.add_argument("--workers", type=int)
    v.set_defaults(func=_cmd_validate)

    pl = sub.add_parser("plot", help="write .dat and .svg files from a summary.json")
    pl.add_argument("summary")
    pl.add_argument("--out", help="output path prefix (default: regret next to the summary)")
    pl.set_defaults(func=_cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, MdpError, ValueError, OSError) as exc:
        print(f"regal {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"regal {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
