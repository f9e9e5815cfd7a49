"""Small version of the 25-map benchmark; pass a run count (default 3) to scale it up."""
import sys
import time

from sapoa import generate_suite, run_suite, summarize, summary_csv

runs = int(sys.argv[1]) if len(sys.argv) > 1 else 3
t0 = time.perf_counter()
records = run_suite(generate_suite(0), runs_per_map=runs)
print(summary_csv(summarize(records)), end="")
print(f"{len(records)} runs in {time.perf_counter() - t0:.1f}s")
