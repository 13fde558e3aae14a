"""Command line: ``rhosi {run,sweep,oracle,validate}``."""
from __future__ import annotations

import argparse
import sys

from .ao import AoOptions, run_rhosi, verify_monotone
from .bench import SweepSpec, emit_results, evaluate, oracle_grid_search, run_baseline, run_sweep, VARIANTS, AXES
from .scenario import ScenarioError, default_scenario, load_scenario_file, validate_scenario


def _parse_values(text: str) -> list[float]:
    """``4,5,6`` or an inclusive range ``4..9`` (step 1)."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = (float(x) for x in part.split(".."))
            n = int(round(hi - lo))
            out.extend(lo + i for i in range(n + 1))
        elif part:
            out.append(float(part))
    if not out:
        raise argparse.ArgumentTypeError("no values given")
    return out


def _parse_seeds(text: str) -> list[int]:
    """A count ``10`` means seeds 0..9; a list ``3,5`` is taken literally."""
    if "," in text or ".." in text:
        return [int(v) for v in _parse_values(text)]
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("seeds must be at least 1")
    return list(range(n))


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        key, _, val = item.partition("=")
        if not _:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        try:
            out[key] = int(val)
        except ValueError:
            out[key] = float(val)
    return out


def _base(args):
    return load_scenario_file(args.scenario) if args.scenario else None


def _config(args, seed):
    base = _base(args)
    over = _parse_set(args.set)
    if "horizon_slots" in over and "total_time" not in over:
        dt = base.slot_duration if base else 1.0
        over["total_time"] = over["horizon_slots"] * dt
    if base is not None:
        return base.replace(**over) if over else base
    return default_scenario(seed, **over)


def cmd_run(args) -> int:
    seeds = args.seeds or [0]
    opts = AoOptions(max_outer=args.max_outer, log=sys.stdout if args.verbose else None)
    ok = True
    for seed in seeds:
        cfg = _config(args, seed)
        if args.variant == "rhosi":
            tr = run_rhosi(cfg, opts)
            if args.out:
                path = args.out if len(seeds) == 1 else f"{args.out}.{seed}"
                tr.write_log(path)
            if tr.solution is None or tr.status == "failed":
                print(f"seed={cfg.seed} status={tr.status} {tr.diagnostic}")
                ok = False
                continue
            mono, where = verify_monotone(tr, 1e-6 * tr.initial_objective) if tr.records else (True, None)
            obj, rate, echo = evaluate(tr.solution, tr.channels, cfg)
            print(f"seed={cfg.seed} status={tr.status} iterations={len(tr)} objective_w={obj:.6f} "
                  f"sum_rate_bpshz={rate:.4f} echo_sinr_db={echo:.3f} monotone={mono}")
        else:
            sol, chs, info = run_baseline(args.variant, cfg, cfg.seed, opts, random_phases=args.random_phases)
            if sol is None:
                print(f"seed={cfg.seed} variant={args.variant} failed: {info}")
                ok = False
                continue
            obj, rate, echo = evaluate(sol, chs, cfg)
            print(f"seed={cfg.seed} variant={args.variant} objective_w={obj:.6f} sum_rate_bpshz={rate:.4f} "
                  f"echo_sinr_db={echo:.3f}")
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    if not args.axis or not args.values:
        print("sweep needs --axis and --values", file=sys.stderr)
        return 2
    spec = SweepSpec(axis=args.axis, values=args.values, seeds=args.seeds or list(range(10)), variant=args.variant,
                     overrides=_parse_set(args.set), base=_base(args), options=AoOptions(max_outer=args.max_outer),
                     workers=args.workers, random_phases=args.random_phases)
    res = run_sweep(spec)
    out = args.out or f"sweep_{args.axis}_{args.variant}.csv"
    for p in emit_results(res, out, args.format, timings=args.timings):
        print(f"wrote {p}")
    attr = "objective_w" if args.axis == "antennas" else "sum_rate_bpshz"
    mean = res.mean(attr)
    for v in res.values():
        print(f"{args.axis}={v:g} mean_{attr}={mean[v]:.6f}")
    for v in res.failed_points():
        print(f"point {args.axis}={v:g} infeasible for every seed", file=sys.stderr)
    return 0 if res.complete else 1


def cmd_oracle(args) -> int:
    seed = (args.seeds or [0])[0]
    if args.scenario:
        cfg = _config(args, seed)
    else:
        cfg = default_scenario(seed, num_antennas=2, num_users=1, num_elements=2, horizon_slots=1, total_time=1.0,
                               **_parse_set(args.set))
    res = oracle_grid_search(cfg, args.resolution)
    if not res.feasible:
        print("oracle: empty feasible set on the grid")
        return 1
    tr = run_rhosi(cfg, AoOptions(max_outer=args.max_outer))
    print(f"oracle objective_w={res.objective:.6f} transmit_w={res.transmit_power:.6g} "
          f"position={res.position.round(2).tolist()} candidates={res.evaluated}")
    if tr.solution is not None:
        print(f"rhosi  objective_w={tr.final_objective:.6f} ratio={tr.final_objective / res.objective:.6f}")
    return 0


def cmd_validate(args) -> int:
    from .soundness import run_all

    try:
        cfg = _config(args, (args.seeds or [0])[0])
    except ScenarioError as exc:
        print(f"scenario: {exc}")
        return 1
    problems = validate_scenario(cfg)
    for p in problems:
        print(f"scenario: {p}")
    if not problems:
        print("scenario: ok")
    checks = run_all(n=args.samples)
    for c in checks:
        print(c)
    return 0 if not problems and all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rhosi", description="Anti-jamming RHS-aided UAV ISAC power minimisation")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario file (key: value, SI units, *_db/*_dbm converted)")
    common.add_argument("--seeds", type=_parse_seeds, help="seed count N (0..N-1) or list a,b,c")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="scenario override, repeatable")
    common.add_argument("--variant", choices=VARIANTS, default="rhosi")
    common.add_argument("--max-outer", type=int, default=20)
    common.add_argument("--random-phases", action="store_true",
                        help="random_deployment only: draw the surface phases at random too")
    common.add_argument("--out", help="output path (trace log for run, CSV/chart stem for sweep)")

    p = sub.add_parser("run", parents=[common], help="one optimisation run per seed")
    p.add_argument("-v", "--verbose", action="store_true", help="print the per-iteration log")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="sweep antennas or jamming power")
    p.add_argument("--axis", choices=sorted(AXES))
    p.add_argument("--values", type=_parse_values, help="comma list or inclusive range a..b")
    p.add_argument("--format", choices=("csv", "chart"), default="csv")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timings", action="store_true", help="record wall time in the CSV (breaks byte identity)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", parents=[common], help="grid-search oracle on the tiny instance")
    p.add_argument("--resolution", type=int, default=8)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate", parents=[common], help="scenario checks and surrogate-bound suites")
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
