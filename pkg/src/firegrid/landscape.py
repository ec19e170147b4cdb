"""Raster landscape ingestion.

Reads ESRI ASCII grids (and headerless ``.csv`` layers), fuel-type
dictionaries and ignition files into a :class:`LandscapeGrid`.

Cells are identified by 1-based row-major ids.  Internally every per-cell
array is indexed by ``id - 1``.
"""
from __future__ import annotations

import csv
import enum
import io
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")

# Neighbour offsets (drow, dcol) in axis order 0, 45, ..., 315 degrees,
# 0 = East, counter-clockwise, row index growing southward.
AXIS_OFFSETS = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))
AXIS_ANGLES = np.deg2rad(np.arange(0.0, 360.0, 45.0))

NON_FUEL_TYPES = frozenset({"NF", "WA", "NON-FUEL", "NONFUEL", "WATER"})


class LandscapeError(ValueError):
    """Invalid landscape, dictionary or ignition input."""


class GridFormatError(LandscapeError):
    pass


class GridDimensionError(LandscapeError):
    pass


class UnknownFuelError(LandscapeError):
    pass


class CellStatus(enum.IntEnum):
    AVAILABLE = 0
    BURNING = 1
    BURNED = 2
    HARVESTED = 3
    NON_FUEL = 4


@dataclass(frozen=True)
class FuelRecord:
    grid_value: int
    export_value: int
    descriptive_name: str
    fuel_type: str

    @property
    def flammable(self) -> bool:
        return self.fuel_type.strip().upper() not in NON_FUEL_TYPES


@dataclass
class AsciiGrid:
    """A single raster layer with its ESRI header."""

    values: np.ndarray
    xllcorner: float = 0.0
    yllcorner: float = 0.0
    cellsize: float = 1.0
    nodata_value: float = -9999.0

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    @property
    def nodata_mask(self) -> np.ndarray:
        return self.values == self.nodata_value

    def with_values(self, values) -> "AsciiGrid":
        return AsciiGrid(np.asarray(values), self.xllcorner, self.yllcorner,
                         self.cellsize, self.nodata_value)


def _parse_number(token: str):
    try:
        return int(token)
    except ValueError:
        return float(token)


def parse_ascii_grid(text: str) -> AsciiGrid:
    """Parse the contents of an ESRI ASCII grid.

    Header keys are matched case-insensitively.  Raises
    :class:`GridFormatError` naming the first missing header token and
    :class:`GridDimensionError` when the body does not hold exactly
    ``nrows * ncols`` values.
    """
    lines = text.splitlines()
    header = {}
    pos = 0
    while pos < len(lines) and len(header) < len(HEADER_KEYS):
        parts = lines[pos].split()
        if not parts:
            pos += 1
            continue
        key = parts[0].lower()
        if key not in HEADER_KEYS:
            break
        if len(parts) < 2:
            raise GridFormatError(f"header token {parts[0]!r} has no value")
        header[key] = _parse_number(parts[1])
        pos += 1
    for key in HEADER_KEYS:
        if key not in header:
            name = "NODATA_value" if key == "nodata_value" else key
            raise GridFormatError(f"missing header token {name!r}")

    nrows, ncols = int(header["nrows"]), int(header["ncols"])
    if nrows <= 0 or ncols <= 0:
        raise GridFormatError(f"non-positive grid dimensions {nrows}x{ncols}")
    tokens = " ".join(lines[pos:]).split()
    expected = nrows * ncols
    if len(tokens) != expected:
        raise GridDimensionError(
            f"expected {expected} values for a {nrows}x{ncols} grid, got {len(tokens)}")
    numbers = [_parse_number(t) for t in tokens]
    dtype = np.int64 if all(isinstance(v, int) for v in numbers) else np.float64
    values = np.array(numbers, dtype=dtype).reshape(nrows, ncols)
    return AsciiGrid(values, float(header["xllcorner"]), float(header["yllcorner"]),
                     float(header["cellsize"]), header["nodata_value"])


def _format_value(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def write_ascii_grid(grid: AsciiGrid, fmt: str | None = None) -> str:
    """Serialise ``grid`` as ESRI ASCII text.

    With ``fmt=None`` values are written in their shortest exact form so that
    ``parse_ascii_grid(write_ascii_grid(g))`` reproduces ``g.values``.
    """
    out = io.StringIO()
    out.write(f"ncols {grid.ncols}\n")
    out.write(f"nrows {grid.nrows}\n")
    out.write(f"xllcorner {_format_value(grid.xllcorner)}\n")
    out.write(f"yllcorner {_format_value(grid.yllcorner)}\n")
    out.write(f"cellsize {_format_value(grid.cellsize)}\n")
    out.write(f"NODATA_value {_format_value(grid.nodata_value)}\n")
    conv = _format_value if fmt is None else (lambda x: format(x, fmt))
    for row in np.asarray(grid.values).tolist():
        out.write(" ".join(conv(v) for v in row))
        out.write("\n")
    return out.getvalue()


def read_layer(path: str | os.PathLike, like: AsciiGrid | None = None) -> AsciiGrid:
    """Read a raster layer from ``.asc`` or headerless ``.csv``.

    A ``.csv`` layer borrows its georeferencing from ``like`` (normally the
    fuel layer) and must match its dimensions.
    """
    path = os.fspath(path)
    with open(path) as fh:
        text = fh.read()
    if not path.lower().endswith(".csv"):
        return parse_ascii_grid(text)
    rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    values = np.array([[_parse_number(c.strip()) for c in r] for r in rows], dtype=np.float64)
    if like is None:
        return AsciiGrid(values)
    if values.shape != like.values.shape:
        raise GridDimensionError(
            f"{path}: layer shape {values.shape} differs from fuel layer {like.values.shape}")
    return like.with_values(values)


def parse_fuel_dictionary(text: str) -> list[FuelRecord]:
    """Parse a fuel dictionary CSV (``grid_value,export_value,descriptive_name,fuel_type``)."""
    reader = csv.DictReader(io.StringIO(text))
    required = {"grid_value", "export_value", "descriptive_name", "fuel_type"}
    if reader.fieldnames is None or not required <= {f.strip() for f in reader.fieldnames}:
        raise LandscapeError(f"fuel dictionary header must contain {sorted(required)}")
    records = []
    seen = set()
    for row in reader:
        row = {k.strip(): (v or "").strip() for k, v in row.items()}
        rec = FuelRecord(int(row["grid_value"]), int(row["export_value"]),
                         row["descriptive_name"], row["fuel_type"])
        if not rec.fuel_type:
            raise LandscapeError(f"empty fuel_type for grid_value {rec.grid_value}")
        if rec.grid_value in seen:
            raise LandscapeError(f"duplicate grid_value {rec.grid_value}")
        seen.add(rec.grid_value)
        records.append(rec)
    return records


@dataclass
class Cell:
    """Read-only view of one cell of a :class:`LandscapeGrid`."""

    id: int
    fuel: FuelRecord | None
    elevation: float
    slope_pct: float
    slope_azimuth: float
    latitude: float
    longitude: float
    curing: float
    status: CellStatus


@dataclass
class LandscapeGrid:
    """Column-oriented landscape: one numpy array per cell attribute.

    ``fuel_index`` points into ``fuels`` (-1 for NODATA).  ``status`` holds
    the initial :class:`CellStatus` of every cell.
    """

    nrows: int
    ncols: int
    cellsize: float
    fuels: list[FuelRecord]
    fuel_index: np.ndarray
    elevation: np.ndarray
    slope_pct: np.ndarray
    slope_azimuth: np.ndarray
    status: np.ndarray
    xllcorner: float = 0.0
    yllcorner: float = 0.0
    nodata_value: float = -9999.0
    latitude: np.ndarray | None = None
    longitude: np.ndarray | None = None
    curing: np.ndarray | None = None
    _neighbors: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.nrows * self.ncols

    @property
    def origin(self) -> tuple[float, float]:
        return (self.xllcorner, self.yllcorner)

    def cell_id(self, row: int, col: int) -> int:
        """1-based id of the cell at 0-based ``(row, col)``."""
        return row * self.ncols + col + 1

    def row_col(self, cell_id: int) -> tuple[int, int]:
        return divmod(cell_id - 1, self.ncols)

    def cell(self, cell_id: int) -> Cell:
        if not 1 <= cell_id <= self.size:
            raise LandscapeError(f"cell {cell_id} outside 1..{self.size}")
        k = cell_id - 1
        fi = int(self.fuel_index[k])
        return Cell(
            id=cell_id,
            fuel=self.fuels[fi] if fi >= 0 else None,
            elevation=float(self.elevation[k]),
            slope_pct=float(self.slope_pct[k]),
            slope_azimuth=float(self.slope_azimuth[k]),
            latitude=float(self.latitude[k]) if self.latitude is not None else math.nan,
            longitude=float(self.longitude[k]) if self.longitude is not None else math.nan,
            curing=float(self.curing[k]) if self.curing is not None else math.nan,
            status=CellStatus(int(self.status[k])),
        )

    @property
    def neighbors(self) -> np.ndarray:
        """``(size, 8)`` int32 table of 0-based neighbour indices, -1 off-grid."""
        if self._neighbors is None:
            self._neighbors = neighbor_table(self.nrows, self.ncols)
        return self._neighbors

    def adjacency(self, cell_id: int) -> list[int]:
        """Ids of all on-grid neighbours of ``cell_id`` (any status)."""
        return [int(j) + 1 for j in self.neighbors[cell_id - 1] if j >= 0]

    @property
    def axis_distances(self) -> np.ndarray:
        """Centre-to-centre distance along each of the 8 axes."""
        diag = self.cellsize * math.sqrt(2.0)
        return np.array([self.cellsize if k % 2 == 0 else diag for k in range(8)])

    def flammable_mask(self) -> np.ndarray:
        return self.status == CellStatus.AVAILABLE

    def to_ascii(self, values) -> AsciiGrid:
        return AsciiGrid(np.asarray(values).reshape(self.nrows, self.ncols),
                         self.xllcorner, self.yllcorner, self.cellsize, self.nodata_value)


def neighbor_table(nrows: int, ncols: int) -> np.ndarray:
    rows, cols = np.divmod(np.arange(nrows * ncols), ncols)
    table = np.full((nrows * ncols, 8), -1, dtype=np.int32)
    for k, (dr, dc) in enumerate(AXIS_OFFSETS):
        r, c = rows + dr, cols + dc
        ok = (r >= 0) & (r < nrows) & (c >= 0) & (c < ncols)
        table[ok, k] = (r[ok] * ncols + c[ok]).astype(np.int32)
    return table


def _optional_layer(layer, fuel_layer: AsciiGrid, name: str, default: float) -> np.ndarray:
    shape = fuel_layer.values.shape
    if layer is None:
        return np.full(shape[0] * shape[1], default, dtype=np.float64)
    values = layer.values if isinstance(layer, AsciiGrid) else np.asarray(layer)
    if values.shape != shape:
        raise GridDimensionError(f"{name} layer shape {values.shape} differs from fuel layer {shape}")
    out = values.astype(np.float64).ravel().copy()
    if isinstance(layer, AsciiGrid):
        out[layer.nodata_mask.ravel()] = default
    return out


def load_landscape(
    fuel_layer: AsciiGrid,
    dictionary: list[FuelRecord],
    elevation=None,
    slope=None,
    azimuth=None,
    *,
    harvest=None,
    curing=None,
    latitude=None,
    longitude=None,
) -> LandscapeGrid:
    """Build a :class:`LandscapeGrid` from a fuel layer and optional layers.

    Missing layers default to elevation 0 m, slope 0 % and azimuth 0 rad.
    Azimuth is read in radians, grid frame (0 = East, counter-clockwise).
    Cells whose code is NODATA or maps to a non-fuel type start ``NON_FUEL``;
    cells flagged 1 in ``harvest`` start ``HARVESTED``.
    """
    by_code = {rec.grid_value: i for i, rec in enumerate(dictionary)}
    codes = fuel_layer.values.ravel()
    nodata = fuel_layer.nodata_mask.ravel()
    fuel_index = np.full(codes.shape, -1, dtype=np.int32)
    for k in np.flatnonzero(~nodata):
        code = codes[k]
        if float(code).is_integer() and int(code) in by_code:
            fuel_index[k] = by_code[int(code)]
        else:
            raise UnknownFuelError(f"fuel code {code!r} at cell {k + 1} is not in the dictionary")

    flammable = np.array([rec.flammable for rec in dictionary] + [False])
    status = np.where(flammable[fuel_index], CellStatus.AVAILABLE, CellStatus.NON_FUEL).astype(np.int8)

    if slope is not None and azimuth is None:
        log.warning("slope layer given without azimuth; azimuth defaults to 0 rad")
    slope_pct = _optional_layer(slope, fuel_layer, "slope", 0.0)
    if np.any(slope_pct < 0):
        raise LandscapeError("slope percent must be non-negative")
    az = np.mod(_optional_layer(azimuth, fuel_layer, "azimuth", 0.0), 2 * math.pi)

    if harvest is not None:
        harvested = _optional_layer(harvest, fuel_layer, "harvest", 0.0) == 1
        status[harvested & (status == CellStatus.AVAILABLE)] = CellStatus.HARVESTED

    return LandscapeGrid(
        nrows=fuel_layer.nrows,
        ncols=fuel_layer.ncols,
        cellsize=fuel_layer.cellsize,
        fuels=list(dictionary),
        fuel_index=fuel_index,
        elevation=_optional_layer(elevation, fuel_layer, "elevation", 0.0),
        slope_pct=slope_pct,
        slope_azimuth=az,
        status=status,
        xllcorner=fuel_layer.xllcorner,
        yllcorner=fuel_layer.yllcorner,
        nodata_value=fuel_layer.nodata_value,
        latitude=None if latitude is None else _optional_layer(latitude, fuel_layer, "latitude", math.nan),
        longitude=None if longitude is None else _optional_layer(longitude, fuel_layer, "longitude", math.nan),
        curing=None if curing is None else _optional_layer(curing, fuel_layer, "curing", math.nan),
    )


def homogeneous_landscape(nrows: int, ncols: int, fuel: FuelRecord, cellsize: float = 100.0) -> LandscapeGrid:
    """Single-fuel landscape, handy for tests and scaling studies."""
    layer = AsciiGrid(np.full((nrows, ncols), fuel.grid_value, dtype=np.int64), cellsize=cellsize)
    return load_landscape(layer, [fuel])


LAYER_FILES = {
    "fuels": ("fuels.asc", "fuels.csv"),
    "elevation": ("elevation.asc", "elevation.csv"),
    "slope": ("slope.asc", "slope.csv"),
    "azimuth": ("saz.asc", "azimuth.asc", "saz.csv", "azimuth.csv"),
    "curing": ("cur.asc", "curing.asc", "cur.csv"),
    "harvest": ("harvest.asc", "harvest.csv"),
}


def _find(folder: str, names) -> str | None:
    for name in names:
        path = os.path.join(folder, name)
        if os.path.exists(path):
            return path
    return None


def load_landscape_folder(folder: str | os.PathLike) -> LandscapeGrid:
    """Load a landscape folder holding ``fuels.asc`` and ``fbp_lookup_table.csv``.

    Optional layers: ``elevation``, ``slope``, ``saz`` (azimuth), ``cur``
    (curing) and ``harvest``, each as ``.asc`` or ``.csv``.
    """
    folder = os.fspath(folder)
    fuel_path = _find(folder, LAYER_FILES["fuels"])
    if fuel_path is None:
        raise LandscapeError(f"{folder}: no fuels.asc or fuels.csv")
    fuel_layer = read_layer(fuel_path)
    dict_path = os.path.join(folder, "fbp_lookup_table.csv")
    if not os.path.exists(dict_path):
        raise LandscapeError(f"{dict_path}: fuel dictionary not found")
    with open(dict_path) as fh:
        dictionary = parse_fuel_dictionary(fh.read())
    layers = {}
    for name in ("elevation", "slope", "azimuth", "curing", "harvest"):
        path = _find(folder, LAYER_FILES[name])
        layers[name] = read_layer(path, like=fuel_layer) if path else None
    return load_landscape(fuel_layer, dictionary, layers["elevation"], layers["slope"],
                          layers["azimuth"], harvest=layers["harvest"], curing=layers["curing"])


@dataclass
class IgnitionSpec:
    """Where fires start.

    Exactly one of: explicit ``entries`` of ``(cell_id, period)``, a
    per-cell ``probability`` vector, or ``uniform`` over flammable cells.
    """

    entries: list[tuple[int, int]] = field(default_factory=list)
    probability: np.ndarray | None = None
    uniform: bool = False

    @classmethod
    def single(cls, cell_id: int, period: int = 1) -> "IgnitionSpec":
        return cls(entries=[(cell_id, period)])

    def validate(self, grid: LandscapeGrid) -> None:
        for cell_id, period in self.entries:
            if not 1 <= cell_id <= grid.size:
                raise LandscapeError(f"ignition cell {cell_id} outside 1..{grid.size}")
            if period < 1:
                raise LandscapeError(f"ignition period {period} for cell {cell_id} must be >= 1")
            if grid.status[cell_id - 1] != CellStatus.AVAILABLE:
                status = CellStatus(int(grid.status[cell_id - 1])).name
                raise LandscapeError(f"ignition cell {cell_id} is not flammable ({status})")
        if self.probability is not None:
            p = self.probability
            if p.shape != (grid.size,):
                raise LandscapeError(f"probability map has {p.size} cells, grid has {grid.size}")
            if np.any(p < 0):
                raise LandscapeError("ignition weights must be non-negative")
            bad = np.flatnonzero((p > 0) & (grid.status != CellStatus.AVAILABLE))
            if bad.size:
                raise LandscapeError(f"ignition weight on non-flammable cell {bad[0] + 1}")
            if p.sum() <= 0:
                raise LandscapeError("ignition probability map is all zero")
        if not self.entries and self.probability is None and not self.uniform:
            raise LandscapeError("empty ignition spec")

    def weights(self, grid: LandscapeGrid) -> np.ndarray:
        """Normalised sampling weights for probabilistic specs."""
        if self.probability is not None:
            p = self.probability.astype(np.float64)
        else:
            p = (grid.status == CellStatus.AVAILABLE).astype(np.float64)
        total = p.sum()
        if total <= 0:
            raise LandscapeError("no flammable cell to ignite")
        return p / total


def load_ignitions(text: str | None, grid: LandscapeGrid, uniform: bool = False) -> IgnitionSpec:
    """Parse an ignition CSV or probability raster and validate it against ``grid``.

    CSV headers: ``cell,period`` (1-based id) or ``row,col,period`` (1-based
    row/column).  Text beginning with an ESRI header is read as a
    probability raster.  ``text=None`` with ``uniform`` gives a uniform spec.
    """
    if text is None or not text.strip():
        if not uniform:
            raise LandscapeError("no ignition file and uniform ignition not requested")
        spec = IgnitionSpec(uniform=True)
        spec.validate(grid)
        return spec

    first = text.lstrip().split(None, 1)[0].lower()
    if first == "ncols":
        layer = parse_ascii_grid(text)
        if layer.values.shape != (grid.nrows, grid.ncols):
            raise GridDimensionError(
                f"probability map shape {layer.values.shape} differs from grid {(grid.nrows, grid.ncols)}")
        p = np.where(layer.nodata_mask, 0.0, layer.values.astype(np.float64)).ravel()
        spec = IgnitionSpec(probability=p)
        spec.validate(grid)
        spec.probability = p / p.sum()
        return spec

    reader = csv.DictReader(io.StringIO(text))
    fields = [f.strip().lower() for f in (reader.fieldnames or [])]
    entries = []
    for row in reader:
        row = {k.strip().lower(): v.strip() for k, v in row.items() if k is not None}
        if "cell" in fields:
            cell_id = int(row["cell"])
        elif "row" in fields and "col" in fields:
            r, c = int(row["row"]), int(row["col"])
            if not (1 <= r <= grid.nrows and 1 <= c <= grid.ncols):
                raise LandscapeError(f"ignition row/col ({r},{c}) outside grid")
            cell_id = grid.cell_id(r - 1, c - 1)
        else:
            raise LandscapeError("ignition CSV header must be 'cell,period' or 'row,col,period'")
        entries.append((cell_id, int(row.get("period") or 1)))
    spec = IgnitionSpec(entries=entries)
    spec.validate(grid)
    return spec
