"""Monte Carlo burn probability on a random fuel mosaic with a lake in the middle."""
import numpy as np

from firegrid import IgnitionSpec, SimConfig, run_replications
from firegrid.bench import BENCH_FUELS, BENCH_MODEL, NON_FUEL
from firegrid.landscape import AsciiGrid, load_landscape
from firegrid.outputs import aggregate_runs
from firegrid.weather import constant_weather

rng = np.random.default_rng(3)
codes = rng.choice([f.grid_value for f in BENCH_FUELS], size=(60, 60))
codes[25:35, 20:40] = NON_FUEL.grid_value
grid = load_landscape(AsciiGrid(codes, cellsize=100.0), list(BENCH_FUELS) + [NON_FUEL])

cfg = SimConfig(max_hours=2, ros_cv=0.2, seed=11, scenario_draws=40)
runs = run_replications(grid, constant_weather(3, ws=15, wd=270), IgnitionSpec(uniform=True), BENCH_MODEL, cfg)
pmap, agg = aggregate_runs(runs)

print(f"{agg.runs} runs, burned cells {agg.burned_mean:.1f} +/- {agg.burned_std:.1f}")
print(f"lake cells ever burned: {int((pmap.probs[25:35, 20:40] > 0).sum())}")
print("burn probability by row band:")
for band in range(0, 60, 10):
    print(f"  rows {band:2d}-{band + 9:2d}: {pmap.probs[band:band + 10].mean():.3f}")
