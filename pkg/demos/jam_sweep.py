"""Sum rate versus jamming power for the three variants, written as CSV plus SVG chart."""
import sys

from rhosi.ao import AoOptions
from rhosi.bench import SweepResult, SweepSpec, emit_results, run_sweep

out = sys.argv[1] if len(sys.argv) > 1 else "jam_sweep"
seeds = [0, 1, 2]
rows = []
for variant in ("rhosi", "discrete_phases", "random_deployment"):
    spec = SweepSpec("jam_power", [1.0, 4.0, 7.0, 10.0], seeds=seeds, variant=variant,
                     overrides={"horizon_slots": 1, "total_time": 1.0}, options=AoOptions(max_outer=10))
    res = run_sweep(spec)
    rows.extend(res.rows)
    print(variant, {v: round(m, 3) for v, m in res.mean("sum_rate_bpshz").items()})
for path in emit_results(SweepResult(None, rows), out, fmt="chart"):
    print("wrote", path)
