"""Command-line interface.

Exit codes: 0 pass, 1 verification failure, 2 configuration error,
3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, InputError, NumericalError
from .harness import load_config, monte_carlo, run, sweep, sweep_table, verify
from .harness.config import parse_config
from .harness.trace import RunTrace
from .harness.verify import parse_selectors
from .oracle import best_fixed_common_subset, best_fixed_expected

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _emit(text, path=None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _report_text(report):
    return json.dumps(report.to_dict(), indent=2) + "\n"


def _summary(report):
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}: max violation {c.max_violation:.3e} (tol {c.tolerance:.0e}, {c.checked} checked)",
              file=sys.stderr)


def _overrides(pairs):
    out = {}
    for item in pairs or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"expected key=value, got {item!r}", path="--constant")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            raise ConfigError(f"value for {key} is not valid JSON", path="--constant") from None
    return out


def cmd_run(args):
    config = load_config(args.config)
    trace = run(config)
    out = args.output or str(Path(args.config).with_suffix(".trace.jsonl"))
    trace.write(out)
    summary = {"trace": out, "slots": len(trace), "digest": trace.digest()}
    if len(trace):
        summary["f_avg"] = float(trace.f_sum[-1] / len(trace))
        summary["g_avg"] = (trace.g_sum[-1] / len(trace)).tolist()
    print(json.dumps(summary))
    return EXIT_OK


def cmd_verify(args):
    try:
        trace = RunTrace.read(args.trace)
    except OSError as exc:
        raise ConfigError(f"cannot read trace: {exc}", path=args.trace) from None
    constants = None
    extra = _overrides(args.constant)
    if extra:
        base = parse_config(trace.metadata["config"]).constants
        unknown = set(extra) - {"D", "F", "G", "eta", "mu", "f_star"}
        if unknown:
            raise ConfigError(f"unknown constants {sorted(unknown)}", path="--constant")
        try:
            constants = replace(base, **extra)
        except InputError as exc:
            raise ConfigError(str(exc), path="--constant") from None
    report = verify(trace, constants, parse_selectors(args.theorems), lemma_slots=args.lemma_slots)
    _emit(_report_text(report), args.report)
    _summary(report)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_mc(args):
    config = load_config(args.config)
    result = monte_carlo(config, args.trials, workers=args.workers)
    _emit(_report_text(result.report), args.report)
    if args.csv:
        Path(args.csv).write_text(result.table())
    _summary(result.report)
    return EXIT_OK if result.report.passed else EXIT_FAIL


def cmd_sweep(args):
    config = load_config(args.config)
    _emit(sweep_table(sweep(config, args.eps)), args.csv)
    return EXIT_OK


def cmd_oracle(args):
    config = load_config(args.config)
    spec, dset = config.spec, config.dset
    if spec.stochastic:
        sol = best_fixed_expected(spec, dset, mc_slots=args.mc_slots)
    else:
        if spec.horizon < 1:
            raise ConfigError("the oracle needs horizon >= 1", path="horizon")
        sol = best_fixed_common_subset(spec, dset, spec.horizon)
    print(json.dumps(sol.to_dict(), indent=2))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="vqoco", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a config and write its trace")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="trace path (default: <config>.trace.jsonl)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="check a trace against the envelopes")
    v.add_argument("trace")
    v.add_argument("--theorems", default="all", help="comma list of t1,t2,t3,lemmas,doubling,zinkevich or all")
    v.add_argument("--constant", action="append", metavar="KEY=VALUE",
                   help="override a declared constant, e.g. eta=2.0 (repeatable)")
    v.add_argument("--lemma-slots", type=int, default=None, help="only run per-slot lemma checks below this slot")
    v.add_argument("--report", help="write the JSON report here instead of stdout")
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("mc", help="Monte Carlo check of a model1/model2 config")
    m.add_argument("config")
    m.add_argument("--trials", type=int, required=True)
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--report")
    m.add_argument("--csv", help="per-trial table")
    m.set_defaults(func=cmd_mc)

    s = sub.add_parser("sweep", help="convergence slot per epsilon")
    s.add_argument("config")
    s.add_argument("--eps", type=float, nargs="+", required=True)
    s.add_argument("--csv", help="write the table here instead of stdout")
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="hindsight comparator for a config")
    o.add_argument("config")
    o.add_argument("--mc-slots", type=int, default=None, help="Monte Carlo expectations instead of closed form")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
