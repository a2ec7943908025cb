"""Command-line front end: ``gmix <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from pathlib import Path

from . import experiments as ex
from .dist import BudgetExceeded
from .finite_field import field_of_order
from .group import GroupTooLarge
from .report import ExperimentReport


class UsageError(ValueError):
    pass


def _q(args) -> int:
    if args.q is not None and (args.p is not None or args.e is not None):
        raise UsageError("give either --q or --p/--e, not both")
    if args.q is not None:
        return args.q
    if args.p is not None:
        return args.p ** (args.e or 1)
    return args.default_q


def _common(sp: argparse.ArgumentParser, default_q: int | None = 3, q: bool = True) -> None:
    if q:
        sp.add_argument("--q", type=int, help="field order (prime power)")
        sp.add_argument("--p", type=int, help="field characteristic (with --e)")
        sp.add_argument("--e", type=int, help="extension degree")
    sp.set_defaults(default_q=default_q)
    sp.add_argument("--seed", type=int, help="RNG seed; a random one is drawn and recorded if omitted")
    sp.add_argument("--out", default="reports", help="report directory (default ./reports)")
    sp.add_argument("--format", choices=("json", "text"), default="text", help="stdout format")


def _mode(sp: argparse.ArgumentParser, choices=("exact", "mc"), default="exact") -> None:
    sp.add_argument("--mode", choices=choices, default=default)
    sp.add_argument("--samples", type=float, default=None, help="Monte-Carlo sample count N")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gmix", description="Mixing experiments in SL(2, q).")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("group-info", help="order and conjugacy-class census")
    _common(sp, default_q=None)

    sp = sub.add_parser("counterexamples", help="exact zeros of the non-mixing constructions")
    _common(sp)
    sp.add_argument("--r", type=int, default=3, help="number of diagonal convolutions")

    sp = sub.add_parser("mix2", help="interleaved product of two dense sets")
    _common(sp)
    sp.add_argument("--t", type=int, default=1)
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--beta", type=float, default=0.5)
    sp.add_argument("--trials", type=int, default=20)
    _mode(sp, ("exact", "mc", "auto"), "auto")

    sp = sub.add_parser("boost", help="pairwise-uniform inputs boosted to full goodness")
    _common(sp)
    sp.add_argument("--m", type=int, default=3)
    sp.add_argument("--max-r", type=int, default=40)

    sp = sub.add_parser("nof", help="s-tuple law, goodness in t and protocol discrepancy")
    _common(sp)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--t", type=int, nargs="+", default=[1, 2, 4])
    sp.add_argument("--protocols", type=int, default=50)
    sp.add_argument("--bits", type=int, default=2)
    sp.add_argument("--protocol-t", type=int, default=None)
    sp.add_argument("--samples", type=float, default=None)

    sp = sub.add_parser("multiset", help="products of several dense sets or class-restricted sets")
    _common(sp)
    sp.add_argument("--mode", choices=("sets", "classes"), default="sets")
    sp.add_argument("--density", type=float, default=0.5)

    sp = sub.add_parser("trace", help="trace law of A u B u^{-1}")
    _common(sp, default_q=5)
    sp.add_argument("--v", type=int)
    sp.add_argument("--w", type=int)
    _mode(sp)

    sp = sub.add_parser("polycount", help="point counts of the trace quartic")
    _common(sp, default_q=5)
    sp.add_argument("--v", type=int)
    sp.add_argument("--w", type=int)

    sp = sub.add_parser("collision", help="collision statistic of products of conjugacy classes")
    _common(sp)
    sp.add_argument("--a", type=int, default=None, help="fixed element index (default: average over a)")
    _mode(sp)

    sp = sub.add_parser("reduction-check", help="incidence-matrix reduction chain")
    _common(sp)
    sp.add_argument("--pairs", type=int, default=100)

    sp = sub.add_parser("run-all", help="smoke or full suite")
    _common(sp, q=False)
    sp.add_argument("--profile", choices=("smoke", "full"), default="smoke")

    sp = sub.add_parser("batch", help="run JSON-lines configurations")
    _common(sp, q=False)
    sp.add_argument("file", help="JSON-lines file ('-' for stdin)")
    return ap


def _samples(args, default: int) -> int:
    return int(args.samples) if getattr(args, "samples", None) is not None else default


def _check_mode(args) -> None:
    if getattr(args, "samples", None) is not None and getattr(args, "mode", None) == "exact":
        raise UsageError("--samples contradicts --mode exact")


def dispatch(args) -> list[ExperimentReport]:
    """Route parsed arguments to exactly one driver."""
    cmd = args.command
    if cmd in ("run-all", "batch"):
        raise UsageError(f"{cmd} is not a single experiment")
    _check_mode(args)
    q = _q(args)
    if q is None:
        raise UsageError("--q (or --p/--e) is required")
    field_of_order(q)
    seed = args.seed
    if cmd == "group-info":
        return [ex.run_group_info(q, seed=seed)]
    if cmd == "counterexamples":
        return [ex.run_counterexamples(q, seed=seed, diag_r=args.r)]
    if cmd == "mix2":
        return [ex.run_mix2(q, args.t, args.alpha, args.beta, args.trials, seed, args.mode,
                            _samples(args, ex.th.DEFAULT_SAMPLES))]
    if cmd == "boost":
        return [ex.run_boost(q, args.m, seed, args.max_r)]
    if cmd == "nof":
        return [ex.run_nof(q, args.k, tuple(args.t), seed, args.protocols, args.bits, args.protocol_t,
                           _samples(args, ex.th.DEFAULT_SAMPLES))]
    if cmd == "multiset":
        return [ex.run_multiset(q, args.mode, seed, args.density)]
    if cmd == "trace":
        if (args.v is None) != (args.w is None):
            raise UsageError("give both --v and --w, or neither")
        return [ex.run_trace(q, args.v, args.w, args.mode, seed, _samples(args, ex.th.DEFAULT_SAMPLES))]
    if cmd == "polycount":
        if (args.v is None) != (args.w is None):
            raise UsageError("give both --v and --w, or neither")
        return [ex.run_polycount(q, args.v, args.w, seed)]
    if cmd == "collision":
        return [ex.run_collision(q, args.a, args.mode, _samples(args, 10**7), seed)]
    if cmd == "reduction-check":
        if q != 3:
            raise UsageError("reduction-check runs at q = 3 only")
        return [ex.run_reduction(q, seed, args.pairs)]
    raise UsageError(f"unknown command {cmd!r}")


def _emit(reps: list[ExperimentReport], args) -> None:
    for r in reps:
        path = r.write(args.out)
        if args.format == "json":
            sys.stdout.write(r.to_json())
        else:
            status = "ok" if r.ok else ("FAIL(hard)" if not r.hard_ok else "FAIL")
            failed = ",".join(r.failed())
            print(f"{status:10s} {r.experiment} q={r.params.get('q')} seed={r.seed} -> {path}"
                  + (f"  [{failed}]" if failed else ""))


def _status(reps: list[ExperimentReport]) -> int:
    return 0 if all(r.hard_ok for r in reps) else 1


def run_batch(path: str, args) -> int:
    """Each line is a JSON object {"command": ..., option: value, ...}."""
    parser = build_parser()
    fh = sys.stdin if path == "-" else open(path)
    failures = 0
    count = 0
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                cfg = json.loads(line)
                if not isinstance(cfg, dict) or "command" not in cfg:
                    raise UsageError("expected an object with a 'command' key")
                argv = [str(cfg.pop("command"))]
                for key, val in cfg.items():
                    flag = "--" + key.replace("_", "-")
                    if isinstance(val, list):
                        argv += [flag, *map(str, val)]
                    else:
                        argv += [flag, str(val)]
                if "seed" not in cfg and args.seed is not None:
                    argv += ["--seed", str(args.seed)]
                if "out" not in cfg:
                    argv += ["--out", args.out]
                sub = _parse(parser, argv)
                if sub.command in ("batch", "run-all"):
                    raise UsageError(f"{sub.command} cannot be nested in a batch")
                reps = dispatch(sub)
                _emit(reps, sub)
                count += len(reps)
                failures += _status(reps)
            except (UsageError, ValueError, BudgetExceeded, GroupTooLarge, json.JSONDecodeError) as exc:
                failures += 1
                print(f"line {lineno}: error: {exc}", file=sys.stderr)
    print(f"batch: {count} reports, {failures} failures", file=sys.stderr)
    return 1 if failures else 0


def _parse(parser: argparse.ArgumentParser, argv: list[str]):
    """Parse without exiting, for batch lines."""
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        raise UsageError(f"invalid arguments {' '.join(argv)!r}") from exc
    _fill_seed(ns)
    return ns


def _fill_seed(ns) -> None:
    if getattr(ns, "seed", None) is None:
        ns.seed = secrets.randbits(31)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _fill_seed(args)
    try:
        if args.command == "batch":
            return run_batch(args.file, args)
        if args.command == "run-all":
            reps = ex.run_all(args.profile, args.seed, out_dir=Path(args.out))
            _emit_summary(reps, args)
            return ex.suite_status(reps)
        reps = dispatch(args)
    except (UsageError, BudgetExceeded, GroupTooLarge, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"gmix: error: {exc}", file=sys.stderr)
        return 2
    _emit(reps, args)
    return _status(reps)


def _emit_summary(reps: list[ExperimentReport], args) -> None:
    for r in reps:
        if args.format == "json":
            sys.stdout.write(r.to_json())
        else:
            status = "ok" if r.ok else ("FAIL(hard)" if not r.hard_ok else "FAIL")
            failed = ",".join(r.failed())
            print(f"{status:10s} {r.experiment} q={r.params.get('q')}" + (f"  [{failed}]" if failed else ""))
    print(f"seed={args.seed} reports={len(reps)} hard_failures={sum(not r.hard_ok for r in reps)}")


if __name__ == "__main__":
    sys.exit(main())
