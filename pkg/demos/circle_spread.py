"""Windless fire on a uniform grid: compare the burned area with the octile ball.

Run with ``python3 demos/circle_spread.py``.
"""
import math

import numpy as np

from firegrid import (FuelModelEntry, FuelRecord, IgnitionSpec, ParametricSpreadModel, SimConfig,
                      homogeneous_landscape, run_simulation)
from firegrid.outputs import STATUS_PALETTE, render_scar_image
from firegrid.weather import constant_weather

SIDE = 81
RATE = 8.0  # m/min in every direction
HOURS = 3

spruce = FuelRecord(2, 2, "Boreal Spruce", "C-2")
grid = homogeneous_landscape(SIDE, SIDE, spruce, cellsize=100.0)
model = ParametricSpreadModel([FuelModelEntry("C-2", RATE)])
centre = grid.cell_id(SIDE // 2, SIDE // 2)

res = run_simulation(grid, constant_weather(HOURS + 1), IgnitionSpec.single(centre), model,
                     SimConfig(max_hours=HOURS))

r, c = np.indices((SIDE, SIDE)) - SIDE // 2
dr, dc = np.abs(r), np.abs(c)
octile = 100.0 * (np.maximum(dr, dc) + (math.sqrt(2) - 1) * np.minimum(dr, dc))
ball = octile <= RATE * 60 * HOURS

print(f"{res.ending_reason.value} after {res.periods} periods")
for h, scar in enumerate(res.hourly_scars, start=1):
    print(f"hour {h}: {int(scar.sum())} cells burned")
print(f"octile ball: {int(ball.sum())} cells, engine: {int(res.final_scar.sum())} cells")
print(f"cells outside the ball: {int((res.final_scar & ~ball).sum())}")

with open("circle_spread.ppm", "wb") as fh:
    fh.write(render_scar_image(res.final_status, STATUS_PALETTE, scale=4))
print("wrote circle_spread.ppm")
