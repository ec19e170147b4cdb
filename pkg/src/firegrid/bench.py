"""Stage profiling and strong/weak scaling on synthetic instances.

Instances are either a single homogeneous fuel or a seeded random mosaic of
fuels with a share of non-fuel cells.  Each measurement is the median wall
time of ``repeats`` runs; the spread is kept alongside.
"""
from __future__ import annotations

import csv
import io
import math
import statistics
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from firegrid import _kernels
from firegrid.engine import SimConfig, StageTiming, run_simulation
from firegrid.landscape import (AsciiGrid, FuelRecord, IgnitionSpec, LandscapeGrid, homogeneous_landscape,
                                load_landscape)
from firegrid.spread import FuelModelEntry, ParametricSpreadModel
from firegrid.weather import WeatherScenario, constant_weather

HETEROGENEOUS_WARNING = ("weak scaling on heterogeneous instances is not meaningful: "
                         "the workload does not grow in proportion to the grid")

BENCH_FUELS = (
    FuelRecord(1, 1, "Spruce-Lichen Woodland", "C-1"),
    FuelRecord(2, 2, "Boreal Spruce", "C-2"),
    FuelRecord(7, 7, "Ponderosa Pine", "C-7"),
    FuelRecord(31, 31, "Matted Grass", "O-1a"),
)
NON_FUEL = FuelRecord(102, 102, "Water", "WA")

BENCH_MODEL = ParametricSpreadModel([
    FuelModelEntry("C-1", 10.0, 0.02, 0.5, 1.0, 0.02, 0.01, 40.0),
    FuelModelEntry("C-2", 15.0, 0.02, 0.5, 1.0, 0.02, 0.01, 60.0),
    FuelModelEntry("C-7", 8.0, 0.02, 0.5, 1.0, 0.02, 0.01, 30.0),
    FuelModelEntry("O-1a", 25.0, 0.03, 0.4, 1.0, 0.03, 0.01, 15.0),
])


@dataclass
class BenchInstance:
    grid: LandscapeGrid
    scenario: WeatherScenario
    spec: IgnitionSpec
    model: object
    config: SimConfig
    label: str = ""

    @property
    def n(self) -> int:
        return self.grid.size


def homogeneous_instance(side: int = 1000, hours: int = 48, ws: float = 10.0, wd: float = 270.0,
                         config: SimConfig | None = None) -> BenchInstance:
    """Single-fuel square grid burning from its centre under a steady wind."""
    grid = homogeneous_landscape(side, side, BENCH_FUELS[1])
    cfg = replace(config or SimConfig(), max_hours=hours)
    return BenchInstance(grid, constant_weather(hours, ws=ws, wd=wd),
                         IgnitionSpec.single(grid.cell_id(side // 2, side // 2)),
                         BENCH_MODEL, cfg, f"homogeneous-{side}")


def mosaic_instance(side: int = 1000, seed: int = 0, nonfuel_frac: float = 0.2, hours: int = 48,
                    ws: float = 10.0, wd: float = 270.0, config: SimConfig | None = None) -> BenchInstance:
    """Seeded random fuel mosaic; ``nonfuel_frac`` of cells are water."""
    if not 0 <= nonfuel_frac < 1:
        raise ValueError("nonfuel_frac must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    fuels = list(BENCH_FUELS) + [NON_FUEL]
    p = np.r_[np.full(len(BENCH_FUELS), (1 - nonfuel_frac) / len(BENCH_FUELS)), nonfuel_frac]
    codes = np.array([f.grid_value for f in fuels])[rng.choice(len(fuels), size=(side, side), p=p)]
    codes[side // 2, side // 2] = BENCH_FUELS[1].grid_value
    grid = load_landscape(AsciiGrid(codes, cellsize=100.0), fuels)
    centre = grid.cell_id(side // 2, side // 2) - 1
    cfg = replace(config or SimConfig(), max_hours=hours)
    return BenchInstance(grid, constant_weather(hours, ws=ws, wd=wd),
                         IgnitionSpec.single(centre + 1), BENCH_MODEL, cfg, f"mosaic-{side}-s{seed}")


def profile_stages(instance: BenchInstance, threads: int | None = None) -> StageTiming:
    """Cumulative per-stage wall time over one full run."""
    _kernels.warmup()
    cfg = instance.config if threads is None else replace(instance.config, threads=threads)
    result = run_simulation(instance.grid, instance.scenario, instance.spec, instance.model, cfg,
                            profile=True)
    return result.timing


def time_run(instance: BenchInstance, threads: int, repeats: int = 5) -> list[float]:
    """Wall times in ms of ``repeats`` runs after one untimed warm-up run."""
    _kernels.warmup()
    cfg = replace(instance.config, threads=threads)
    args = (instance.grid, instance.scenario, instance.spec, instance.model, cfg)
    run_simulation(*args)
    out = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        run_simulation(*args)
        out.append((time.perf_counter() - t0) * 1e3)
    return out


@dataclass(frozen=True)
class ScalingRow:
    n: int
    threads: int
    wall_ms: float
    speedup: float
    strong_eff: float
    weak_eff: float
    wall_std_ms: float = 0.0


@dataclass
class ScalingReport:
    rows: list[ScalingRow]
    kind: str
    warning: str | None = None
    instances: list[str] = field(default_factory=list)

    def row(self, threads: int) -> ScalingRow:
        return next(r for r in self.rows if r.threads == threads)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "threads", "wall_ms", "speedup", "strong_eff", "weak_eff"])
        fmt = lambda v: "" if math.isnan(v) else f"{v:.6f}"  # noqa: E731
        for r in self.rows:
            w.writerow([r.n, r.threads, f"{r.wall_ms:.3f}", fmt(r.speedup), fmt(r.strong_eff),
                        fmt(r.weak_eff)])
        return buf.getvalue()


def _check_threads(thread_counts) -> list[int]:
    counts = [int(k) for k in thread_counts]
    if not counts or any(k < 1 for k in counts):
        raise ValueError(f"thread counts must be >= 1, got {thread_counts}")
    return counts


def strong_scaling(instance: BenchInstance, thread_counts, repeats: int = 5) -> ScalingReport:
    """Fixed instance; ``speedup = T(1)/T(k)``, ``strong_eff = speedup/k``."""
    counts = _check_threads(thread_counts)
    if 1 not in counts:
        raise ValueError("strong scaling needs a 1-thread baseline")
    times = {k: time_run(instance, k, repeats) for k in sorted(set(counts))}
    base = statistics.median(times[1])
    rows = []
    for k in counts:
        med = statistics.median(times[k])
        speedup = 1.0 if k == 1 else base / med
        rows.append(ScalingRow(instance.n, k, med, speedup, speedup / k, math.nan,
                               statistics.pstdev(times[k])))
    return ScalingReport(rows, "strong", instances=[instance.label])


def weak_scaling(base_side: int, thread_counts, heterogeneous: bool = False, seed: int = 0,
                 repeats: int = 5, **instance_kwargs) -> ScalingReport:
    """Grow the grid with the thread count: ``k`` threads get about ``k`` times the cells.

    ``weak_eff = T(1, n) / T(k, k n)``.  Heterogeneous families are measured
    but flagged with a warning.
    """
    counts = _check_threads(thread_counts)
    if 1 not in counts:
        raise ValueError("weak scaling needs a 1-thread baseline")
    make = (lambda s: mosaic_instance(s, seed=seed, **instance_kwargs)) if heterogeneous \
        else (lambda s: homogeneous_instance(s, **instance_kwargs))
    measured = {}
    labels = []
    for k in sorted(set(counts)):
        inst = make(int(round(base_side * math.sqrt(k))))
        labels.append(inst.label)
        measured[k] = (inst.n, time_run(inst, k, repeats))
    base = statistics.median(measured[1][1])
    rows = []
    for k in counts:
        n, times = measured[k]
        med = statistics.median(times)
        eff = 1.0 if k == 1 else base / med
        rows.append(ScalingRow(n, k, med, k * eff, math.nan, eff, statistics.pstdev(times)))
    warning = None
    if heterogeneous:
        warning = HETEROGENEOUS_WARNING
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    return ScalingReport(rows, "weak", warning, labels)


def timing_csv(timing: StageTiming) -> str:
    """``stage,ms,share`` rows; "copy" is the burn-out merge between periods."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["stage", "ms", "share"])
    shares = timing.shares()
    for stage in ("ignite", "send", "receive", "copy"):
        w.writerow([stage, f"{getattr(timing, stage + '_ms'):.3f}", f"{shares[stage]:.6f}"])
    residual = max(0.0, timing.total_ms - sum(getattr(timing, s + "_ms") for s in shares))
    w.writerow(["other", f"{residual:.3f}", f"{residual / (timing.total_ms or 1.0):.6f}"])
    w.writerow(["total", f"{timing.total_ms:.3f}", "1.000000"])
    return buf.getvalue()
