"""One AO run on a short-horizon default scenario, printing the per-iteration log."""
import sys

from rhosi import AoOptions, default_scenario, run_rhosi, verify_monotone
from rhosi.bench import evaluate

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
cfg = default_scenario(seed, horizon_slots=5, total_time=5.0)
trace = run_rhosi(cfg, AoOptions(max_outer=10, log=sys.stdout))
print(f"status={trace.status} monotone={verify_monotone(trace, 1e-6 * trace.initial_objective)[0]}")
obj, rate, echo = evaluate(trace.solution, trace.channels, cfg)
print(f"objective {obj:.4f} W, full-power sum rate {rate:.3f} bps/Hz, echo SINR {echo:.2f} dB")
print("positions (m):", trace.solution.positions.round(2).tolist())
