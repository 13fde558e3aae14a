"""Compare the AO result with exhaustive grid search on the tiny instance."""
from rhosi import AoOptions, default_scenario, run_rhosi
from rhosi.bench import oracle_grid_search

for seed in range(3):
    cfg = default_scenario(seed, num_antennas=2, num_users=1, num_elements=2, horizon_slots=1, total_time=1.0)
    best = oracle_grid_search(cfg, 12)
    trace = run_rhosi(cfg, AoOptions(max_outer=10))
    print(f"seed {seed}: oracle {best.objective:.6f} W, rhosi {trace.final_objective:.6f} W, "
          f"ratio {trace.final_objective / best.objective:.6f}")
