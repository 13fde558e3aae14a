"""Run the random-sample checks of every convex bound used by the three sub-solvers."""
import sys

from rhosi.soundness import run_all

n = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
checks = run_all(n=n)
for c in checks:
    print(c)
sys.exit(0 if all(c.passed for c in checks) else 1)
