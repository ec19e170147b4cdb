"""Burn grids, run statistics, burn-probability maps and scar images."""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

import numpy as np

from firegrid.engine import SimResult
from firegrid.landscape import AsciiGrid, CellStatus, LandscapeGrid, write_ascii_grid


class OutputError(ValueError):
    pass


# Default colours per cell status.
STATUS_PALETTE: dict[int, tuple[int, int, int]] = {
    CellStatus.AVAILABLE: (34, 139, 34),
    CellStatus.BURNING: (255, 69, 0),
    CellStatus.BURNED: (40, 40, 40),
    CellStatus.HARVESTED: (210, 180, 140),
    CellStatus.NON_FUEL: (128, 128, 128),
}


@dataclass(frozen=True)
class RunStatistics:
    burned_count: int
    available_count: int
    nonfuel_count: int
    harvested_count: int
    messages_total: int
    ending_reason: str

    @property
    def total(self) -> int:
        return self.burned_count + self.available_count + self.nonfuel_count + self.harvested_count

    @property
    def burned_pct(self) -> float:
        return 100.0 * self.burned_count / self.total

    @property
    def available_pct(self) -> float:
        return 100.0 * self.available_count / self.total

    @classmethod
    def from_result(cls, result: SimResult) -> "RunStatistics":
        s = result.final_status
        burned = int(np.count_nonzero((s == CellStatus.BURNING) | (s == CellStatus.BURNED)))
        return cls(
            burned_count=burned,
            available_count=int(np.count_nonzero(s == CellStatus.AVAILABLE)),
            nonfuel_count=int(np.count_nonzero(s == CellStatus.NON_FUEL)),
            harvested_count=int(np.count_nonzero(s == CellStatus.HARVESTED)),
            messages_total=int(result.messages.shape[0]),
            ending_reason=result.ending_reason.value,
        )


@dataclass(frozen=True)
class BurnProbabilityMap:
    probs: np.ndarray
    draws: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape


@dataclass(frozen=True)
class RunAggregates:
    """Mean and population standard deviation over runs."""
    runs: int
    burned_mean: float
    burned_std: float
    available_mean: float
    available_std: float
    burned_pct_mean: float
    available_pct_mean: float


def aggregate_runs(results: list[SimResult]) -> tuple[BurnProbabilityMap, RunAggregates]:
    if not results:
        raise OutputError("no runs to aggregate")
    shape = (results[0].nrows, results[0].ncols)
    counts = np.zeros(shape, dtype=np.int64)
    for r in results:
        if (r.nrows, r.ncols) != shape:
            raise OutputError(f"run grid {(r.nrows, r.ncols)} differs from {shape}")
        counts += r.final_scar
    stats = [RunStatistics.from_result(r) for r in results]
    burned = np.array([s.burned_count for s in stats], dtype=np.float64)
    avail = np.array([s.available_count for s in stats], dtype=np.float64)
    agg = RunAggregates(
        runs=len(results),
        burned_mean=float(burned.mean()),
        burned_std=float(burned.std()),
        available_mean=float(avail.mean()),
        available_std=float(avail.std()),
        burned_pct_mean=float(np.mean([s.burned_pct for s in stats])),
        available_pct_mean=float(np.mean([s.available_pct for s in stats])),
    )
    return BurnProbabilityMap(counts / len(results), len(results)), agg


def _like(grid: LandscapeGrid | AsciiGrid | None, values: np.ndarray) -> AsciiGrid:
    if grid is None:
        return AsciiGrid(values)
    if values.shape != (grid.nrows, grid.ncols):
        raise OutputError(f"grid of shape {values.shape} does not match landscape "
                          f"{(grid.nrows, grid.ncols)}")
    if isinstance(grid, AsciiGrid):
        return AsciiGrid(values, grid.xllcorner, grid.yllcorner, grid.cellsize, grid.nodata_value)
    return grid.to_ascii(values)


def _write(path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_burn_grid(scar, path, like: LandscapeGrid | AsciiGrid | None = None) -> None:
    """Write a 0/1 scar as an ESRI ASCII grid georeferenced like ``like``."""
    scar = np.asarray(scar)
    if scar.ndim != 2 or not np.all((scar == 0) | (scar == 1)):
        raise OutputError("scar must be a 2-D grid of 0/1 values")
    _write(path, write_ascii_grid(_like(like, scar.astype(np.int64))))


def write_probability_map(pmap: BurnProbabilityMap, path, like=None) -> None:
    _write(path, write_ascii_grid(_like(like, pmap.probs.astype(np.float64))))


def stats_csv(results: list[SimResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "burned", "available", "nonfuel", "harvested", "burned_pct", "messages",
                "ending_reason"])
    for i, r in enumerate(results, start=1):
        s = RunStatistics.from_result(r)
        w.writerow([i, s.burned_count, s.available_count, s.nonfuel_count, s.harvested_count,
                    f"{s.burned_pct:.6f}", s.messages_total, s.ending_reason])
    return buf.getvalue()


def message_log_csv(result: SimResult) -> str:
    buf = io.StringIO()
    buf.write("period,sender,receiver\n")
    np.savetxt(buf, result.messages, fmt="%d", delimiter=",")
    return buf.getvalue()


def ignition_log_csv(result: SimResult) -> str:
    buf = io.StringIO()
    buf.write("cell,period\n")
    np.savetxt(buf, np.column_stack([result.ignition_cells, result.ignition_periods]),
               fmt="%d", delimiter=",")
    return buf.getvalue()


def parse_palette(text: str) -> dict[int, tuple[int, int, int]]:
    """Read a ``code,r,g,b`` palette CSV."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["code", "r", "g", "b"]:
        raise OutputError("palette header must be code,r,g,b")
    palette = {}
    for row in reader:
        rgb = tuple(int(row[k]) for k in ("r", "g", "b"))
        if not all(0 <= c <= 255 for c in rgb):
            raise OutputError(f"palette colour {rgb} outside 0..255")
        palette[int(row["code"])] = rgb
    return palette


def render_scar_image(values, palette: dict[int, tuple[int, int, int]] | None = None,
                      scale: int = 1) -> bytes:
    """Binary PPM (P6) with one ``scale`` x ``scale`` block per cell.

    ``values`` holds cell status codes (or fuel codes with a matching
    palette).  Codes missing from the palette raise :class:`OutputError`.
    """
    values = np.asarray(values)
    if values.ndim != 2:
        raise OutputError("image source must be 2-D")
    if scale < 1:
        raise OutputError("pixel scale must be >= 1")
    palette = STATUS_PALETTE if palette is None else palette
    codes = np.unique(values)
    missing = [int(c) for c in codes if int(c) not in palette]
    if missing:
        raise OutputError(f"no colour for cell codes {missing}")
    lut_codes = np.array(sorted(palette), dtype=np.int64)
    lut = np.array([palette[c] for c in lut_codes], dtype=np.uint8)
    rgb = lut[np.searchsorted(lut_codes, values.astype(np.int64))]
    rgb = np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)
    header = f"P6\n{rgb.shape[1]} {rgb.shape[0]}\n255\n".encode("ascii")
    return header + rgb.tobytes()


def read_ppm(data: bytes) -> np.ndarray:
    """Decode a P6 image written by :func:`render_scar_image` to ``(h, w, 3)``."""
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise OutputError("not a binary PPM")
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)


def write_run_outputs(result: SimResult, folder, like: LandscapeGrid | None = None,
                      image_scale: int = 1, palette=None) -> list[str]:
    """Write every per-run file to ``folder``; returns their names."""
    os.makedirs(folder, exist_ok=True)
    names = []
    for h, scar in enumerate(result.hourly_scars, start=1):
        name = f"scar_h{h}.asc"
        write_burn_grid(scar, os.path.join(folder, name), like)
        names.append(name)
    write_burn_grid(result.final_scar, os.path.join(folder, "final_scar.asc"), like)
    _write(os.path.join(folder, "stats.csv"), stats_csv([result]))
    _write(os.path.join(folder, "ignitions.csv"), ignition_log_csv(result))
    _write(os.path.join(folder, "messages.csv"), message_log_csv(result))
    with open(os.path.join(folder, "final_scar.ppm"), "wb") as fh:
        fh.write(render_scar_image(result.final_status, palette, image_scale))
    names += ["final_scar.asc", "stats.csv", "ignitions.csv", "messages.csv", "final_scar.ppm"]
    return names
