"""Hourly weather streams."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

DATETIME_FORMAT = "%Y-%m-%d %H:%M"
FWI_FIELDS = ("ffmc", "dmc", "dc", "isi", "bui", "fwi")
WS_FACTORS = {"km/h": 1.0, "m/s": 3.6}


class WeatherError(ValueError):
    pass


class WeatherExhausted(LookupError):
    """Raised when the simulation clock runs past the end of the stream."""


@dataclass(frozen=True)
class WeatherRecord:
    scenario: str
    datetime: datetime
    apcp: float
    tmp: float
    rh: float
    ws: float  # km/h
    wd: float  # degrees, direction the wind blows from
    ffmc: float | None = None
    dmc: float | None = None
    dc: float | None = None
    isi: float | None = None
    bui: float | None = None
    fwi: float | None = None

    @property
    def spread_heading(self) -> float:
        """Direction the wind pushes the fire, radians in the grid frame (0 = East, CCW)."""
        toward = (self.wd + 180.0) % 360.0
        return math.radians((90.0 - toward) % 360.0)


@dataclass
class WeatherScenario:
    id: str
    records: list[WeatherRecord]
    probability: float = 1.0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def minutes(self) -> int:
        return 60 * len(self.records)


def _optional_float(value):
    if value is None or value.strip() == "":
        return None
    return float(value)


def parse_weather(text: str, ws_unit: str = "km/h") -> list[WeatherScenario]:
    """Parse a weather CSV into scenarios.

    Header: ``Scenario,datetime,APCP,TMP,RH,WS,WD`` plus optional FWI code
    columns.  Rows are grouped by scenario and sorted by time; each scenario
    must be gap-free at 1-hour spacing.  Scenarios share equal probability.
    """
    if ws_unit not in WS_FACTORS:
        raise WeatherError(f"unknown wind speed unit {ws_unit!r}; use one of {sorted(WS_FACTORS)}")
    factor = WS_FACTORS[ws_unit]
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise WeatherError("empty weather file")
    names = {f.strip().lower(): f for f in reader.fieldnames}
    missing = [c for c in ("scenario", "datetime", "apcp", "tmp", "rh", "ws", "wd") if c not in names]
    if missing:
        raise WeatherError(f"weather header missing columns {missing}")

    grouped: dict[str, list[WeatherRecord]] = {}
    for lineno, row in enumerate(reader, start=2):
        get = lambda key: row.get(names[key]) if key in names else None  # noqa: E731
        try:
            when = datetime.strptime(get("datetime").strip(), DATETIME_FORMAT)
            ws = float(get("ws")) * factor
            rh = float(get("rh"))
            wd = float(get("wd"))
        except (TypeError, ValueError) as exc:
            raise WeatherError(f"line {lineno}: {exc}") from None
        if ws < 0:
            raise WeatherError(f"line {lineno}: negative wind speed {ws}")
        if not 0 <= rh <= 100:
            raise WeatherError(f"line {lineno}: relative humidity {rh} outside [0, 100]")
        record = WeatherRecord(
            scenario=get("scenario").strip(),
            datetime=when,
            apcp=float(get("apcp")),
            tmp=float(get("tmp")),
            rh=rh,
            ws=ws,
            wd=wd % 360.0,
            **{k: _optional_float(get(k)) for k in FWI_FIELDS},
        )
        grouped.setdefault(record.scenario, []).append(record)

    if not grouped:
        raise WeatherError("weather file has no records")
    scenarios = []
    for sid, records in grouped.items():
        records.sort(key=lambda r: r.datetime)
        for prev, cur in zip(records, records[1:]):
            if cur.datetime - prev.datetime != timedelta(hours=1):
                raise WeatherError(
                    f"scenario {sid}: records {prev.datetime:%Y-%m-%d %H:%M} and "
                    f"{cur.datetime:%Y-%m-%d %H:%M} are not one hour apart")
        scenarios.append(WeatherScenario(sid, records, 1.0 / len(grouped)))
    return scenarios


def record_at(scenario: WeatherScenario, elapsed_minutes: float) -> WeatherRecord:
    """Weather record in force ``elapsed_minutes`` after the stream starts."""
    if elapsed_minutes < 0:
        raise ValueError("elapsed_minutes must be non-negative")
    hour = int(elapsed_minutes // 60)
    if hour >= len(scenario.records):
        raise WeatherExhausted(
            f"scenario {scenario.id}: {elapsed_minutes} min is past the {len(scenario.records)}-hour stream")
    return scenario.records[hour]


def sample_scenario(scenarios: list[WeatherScenario], rng: np.random.Generator) -> WeatherScenario:
    p = np.array([s.probability for s in scenarios], dtype=np.float64)
    if np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-9):
        raise WeatherError(f"scenario probabilities must be non-negative and sum to 1, got {p.sum()}")
    return scenarios[int(rng.choice(len(scenarios), p=p))]


def constant_weather(hours: int, ws: float = 0.0, wd: float = 0.0, scenario: str = "const",
                     start: datetime = datetime(2001, 10, 16, 13, 0)) -> WeatherScenario:
    """Stream of ``hours`` identical records."""
    records = [WeatherRecord(scenario, start + timedelta(hours=h), 0.0, 20.0, 30.0, ws, wd)
               for h in range(hours)]
    return WeatherScenario(scenario, records)
