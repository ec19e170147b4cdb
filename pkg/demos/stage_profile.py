"""Where the time goes: per-stage timing on a uniform grid, then a thread sweep."""
import os

from firegrid import bench

inst = bench.homogeneous_instance(600, hours=24)
timing = bench.profile_stages(inst)
print(bench.timing_csv(timing), end="")

threads = [1, 2, 4]
report = bench.strong_scaling(inst, threads, repeats=3)
print(f"\n{os.cpu_count()} CPU(s) visible")
print(report.to_csv(), end="")
