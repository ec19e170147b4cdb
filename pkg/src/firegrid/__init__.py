"""Cell-based wildfire growth simulation on raster landscapes.

Fire spreads between neighbouring cells along eight axes at rates taken
from a per-cell fire ellipse.  Burning cells send ignition messages to the
neighbours they reach; messaged cells start burning if their own rate of
spread is high enough.
"""
from firegrid.engine import EndingReason, FireSimulation, SimConfig, SimResult, run_replications, run_simulation
from firegrid.landscape import (CellStatus, FuelRecord, IgnitionSpec, LandscapeGrid, homogeneous_landscape,
                                load_ignitions, load_landscape, load_landscape_folder)
from firegrid.metrics import evolution_report, frobenius, mse, ssim
from firegrid.spread import FuelModelEntry, ParametricSpreadModel, fit_ellipse, ros_at_angle
from firegrid.weather import constant_weather, parse_weather

__all__ = [
    "CellStatus", "EndingReason", "FireSimulation", "FuelModelEntry", "FuelRecord", "IgnitionSpec",
    "LandscapeGrid", "ParametricSpreadModel", "SimConfig", "SimResult", "constant_weather",
    "evolution_report", "fit_ellipse", "frobenius", "homogeneous_landscape", "load_ignitions",
    "load_landscape", "load_landscape_folder", "mse", "parse_weather", "ros_at_angle",
    "run_replications", "run_simulation", "ssim",
]
