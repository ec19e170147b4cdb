"""Elliptical rates of spread.

A spread model maps fuel, weather and slope to head/back rates of spread and
a length-to-breadth ratio.  Those are turned into a fire ellipse whose
directional rate of spread is evaluated along the eight grid axes.

Any object with a ``spread_rates(SpreadInputs) -> SpreadOutputs`` method
can act as a spread model.  Models may also offer a vectorised
``batch_rates`` (see :func:`batch_spread_rates`) for speed.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields

import numpy as np

from firegrid.landscape import AXIS_ANGLES, FuelRecord
from firegrid.weather import WeatherRecord


class SpreadError(ValueError):
    pass


@dataclass(frozen=True)
class SpreadInputs:
    fuel: FuelRecord
    weather: WeatherRecord
    slope_pct: float = 0.0
    slope_azimuth: float = 0.0


@dataclass(frozen=True)
class SpreadOutputs:
    hros: float
    bros: float
    lb: float
    heading: float
    hfi: float | None = None


@dataclass(frozen=True)
class EllipseParams:
    a: float
    b: float
    e: float
    heading: float


@dataclass(frozen=True)
class FuelModelEntry:
    fuel_type: str
    ros0: float
    wind_coeff: float = 0.0
    bros_frac: float = 1.0
    lb0: float = 1.0
    lb_wind_coeff: float = 0.0
    slope_coeff: float = 0.0
    hfi0: float = 0.0

    def __post_init__(self):
        if self.ros0 < 0:
            raise SpreadError(f"{self.fuel_type}: ros0 must be >= 0")
        if not 0 < self.bros_frac <= 1:
            raise SpreadError(f"{self.fuel_type}: bros_frac must lie in (0, 1]")
        if self.lb0 < 1:
            raise SpreadError(f"{self.fuel_type}: lb0 must be >= 1")


class ParametricSpreadModel:
    """Simple stand-in for an empirical fuel-type spread model.

    ``hros = ros0 * (1 + wind_coeff*ws) * max(0, 1 + slope_coeff*slope*cos(heading - azimuth))``,
    ``bros = bros_frac * hros``, ``lb = lb0 + lb_wind_coeff*ws``,
    ``hfi = hfi0 * hros``; the head points where the wind blows.
    """

    def __init__(self, entries):
        self.entries = {e.fuel_type: e for e in entries}

    @classmethod
    def from_csv(cls, text: str) -> "ParametricSpreadModel":
        reader = csv.DictReader(io.StringIO(text))
        names = [f.name for f in fields(FuelModelEntry)]
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != names:
            raise SpreadError(f"fuel model header must be {','.join(names)}")
        entries = []
        for row in reader:
            row = {k.strip(): v.strip() for k, v in row.items()}
            entries.append(FuelModelEntry(row["fuel_type"], *(float(row[n]) for n in names[1:])))
        return cls(entries)

    def to_csv(self) -> str:
        names = [f.name for f in fields(FuelModelEntry)]
        lines = [",".join(names)]
        for e in self.entries.values():
            lines.append(",".join(str(getattr(e, n)) for n in names))
        return "\n".join(lines) + "\n"

    def entry(self, fuel: FuelRecord) -> FuelModelEntry:
        if not fuel.flammable:
            raise SpreadError(f"fuel type {fuel.fuel_type!r} is not flammable")
        try:
            return self.entries[fuel.fuel_type]
        except KeyError:
            raise SpreadError(f"fuel type {fuel.fuel_type!r} missing from spread model") from None

    def spread_rates(self, inputs: SpreadInputs) -> SpreadOutputs:
        p = self.entry(inputs.fuel)
        ws = inputs.weather.ws
        heading = inputs.weather.spread_heading
        slope_factor = max(0.0, 1.0 + p.slope_coeff * inputs.slope_pct
                           * math.cos(heading - inputs.slope_azimuth))
        hros = p.ros0 * (1.0 + p.wind_coeff * ws) * slope_factor
        return SpreadOutputs(
            hros=hros,
            bros=p.bros_frac * hros,
            lb=p.lb0 + p.lb_wind_coeff * ws,
            heading=heading,
            hfi=p.hfi0 * hros,
        )

    def _table(self, fuels) -> np.ndarray:
        key = tuple(fuels)
        cached = getattr(self, "_cache", None)
        if cached is not None and cached[0] == key:
            return cached[1]
        table = np.full((len(fuels), 7), np.nan)
        for i, fuel in enumerate(fuels):
            if fuel.flammable and fuel.fuel_type in self.entries:
                e = self.entries[fuel.fuel_type]
                table[i] = (e.ros0, e.wind_coeff, e.bros_frac, e.lb0, e.lb_wind_coeff, e.slope_coeff, e.hfi0)
        self._cache = (key, table)
        return table

    def param_table(self, fuels) -> np.ndarray:
        """``(len(fuels), 7)`` coefficient table, NaN rows for unmodelled fuels.

        Lets the engine evaluate this model inside its compiled kernels.
        """
        return self._table(fuels)

    def batch_rates(self, fuels, fuel_index, slope_pct, slope_azimuth, weather):
        p = self._table(fuels)[fuel_index]
        bad = np.isnan(p[:, 0])
        if bad.any():
            self.entry(fuels[int(fuel_index[np.argmax(bad)])])
        ws = weather.ws
        heading = weather.spread_heading
        slope_factor = np.maximum(0.0, 1.0 + p[:, 5] * slope_pct * np.cos(heading - slope_azimuth))
        hros = p[:, 0] * (1.0 + p[:, 1] * ws) * slope_factor
        return (hros, p[:, 2] * hros, p[:, 3] + p[:, 4] * ws,
                np.full(hros.shape, heading), p[:, 6] * hros)


def spread_rates(inputs: SpreadInputs, model) -> SpreadOutputs:
    if not inputs.fuel.flammable:
        raise SpreadError(f"fuel type {inputs.fuel.fuel_type!r} is not flammable")
    out = model.spread_rates(inputs)
    if out.hros < out.bros or out.bros < 0 or out.lb < 1:
        raise SpreadError(f"spread model returned inconsistent rates {out}")
    return out


def batch_spread_rates(model, fuels, fuel_index, slope_pct, slope_azimuth, weather):
    """Evaluate ``model`` on many cells.

    Returns arrays ``(hros, bros, lb, heading, hfi)``; ``hfi`` is NaN where
    the model gives none.  Uses ``model.batch_rates`` when available.
    """
    if hasattr(model, "batch_rates"):
        hros, bros, lb, heading, hfi = model.batch_rates(fuels, fuel_index, slope_pct, slope_azimuth, weather)
        return (np.asarray(hros, float), np.asarray(bros, float), np.asarray(lb, float),
                np.asarray(heading, float), np.asarray(hfi, float))
    n = len(fuel_index)
    out = np.empty((5, n))
    for k in range(n):
        r = spread_rates(SpreadInputs(fuels[fuel_index[k]], weather, float(slope_pct[k]),
                                      float(slope_azimuth[k])), model)
        out[:, k] = (r.hros, r.bros, r.lb, r.heading, math.nan if r.hfi is None else r.hfi)
    return tuple(out)


def fit_ellipse(out: SpreadOutputs) -> EllipseParams:
    """Ellipse for one unit of time from head/back rates and length-to-breadth ratio."""
    if out.hros <= 0:
        raise SpreadError("cannot fit an ellipse to a non-spreading fire (hros <= 0)")
    if out.lb < 1:
        raise SpreadError(f"length-to-breadth ratio {out.lb} < 1")
    a = (out.hros + out.bros) / 2.0
    fros = (out.hros + out.bros) / (2.0 * out.lb)
    b = fros
    e = math.sqrt(max(0.0, 1.0 - (b * b) / (a * a)))
    return EllipseParams(a, b, e, out.heading)


def ros_at_angle(ell: EllipseParams, axis_angle: float) -> float:
    """Directional rate of spread along ``axis_angle`` (radians, grid frame).

    Forward half (within 90 degrees of the heading) uses the focal polar
    form ``a(1-e^2)/(1-e cos phi)``; the backward half is held at
    ``a(1-e^2)``.
    """
    phi = math.degrees(axis_angle - ell.heading) % 360.0
    semi_latus = ell.a * (1.0 - ell.e * ell.e)
    if phi < 90.0 or phi > 270.0:
        return semi_latus / (1.0 - ell.e * math.cos(math.radians(phi)))
    return semi_latus


def axis_rates(ell: EllipseParams) -> dict[float, float]:
    """Rates of spread along the 8 grid axes, keyed by angle in degrees."""
    return {float(deg): ros_at_angle(ell, float(rad))
            for deg, rad in zip(np.rad2deg(AXIS_ANGLES), AXIS_ANGLES)}


def axis_rates_array(hros, bros, lb, heading) -> np.ndarray:
    """Vectorised ellipse fit plus :func:`ros_at_angle` on all 8 axes.

    Returns shape ``(n, 8)``; rows with ``hros <= 0`` are zero.
    """
    hros, bros, lb, heading = (np.atleast_1d(np.asarray(x, float)) for x in (hros, bros, lb, heading))
    a = (hros + bros) / 2.0
    b = (hros + bros) / (2.0 * lb)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.sqrt(np.maximum(0.0, 1.0 - (b * b) / (a * a)))
    e = np.where(a > 0, e, 0.0)
    semi_latus = a * (1.0 - e * e)
    phi = np.mod(np.degrees(AXIS_ANGLES[None, :] - heading[:, None]), 360.0)
    forward = (phi < 90.0) | (phi > 270.0)
    head = semi_latus[:, None] / (1.0 - e[:, None] * np.cos(np.radians(phi)))
    out = np.where(forward, head, semi_latus[:, None])
    out[hros <= 0] = 0.0
    return out
