"""Scar comparison: MSE, global SSIM and Frobenius distance."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


class MetricError(ValueError):
    pass


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise MetricError(f"grid shapes differ: {x.shape} vs {y.shape}")
    if x.size == 0:
        raise MetricError("empty grid")
    return x, y


def mse(x, y) -> float:
    """Mean squared cell difference; the fraction of differing cells for 0/1 scars."""
    x, y = _pair(x, y)
    d = x - y
    return float(np.mean(d * d))


def ssim(x, y, k1: float = 0.01, k2: float = 0.03, L: float = 1.0, c3: float | None = None,
         literal_denominator: bool = False) -> float:
    """Whole-grid structural similarity.

    ``(2 mx my + C1)(2 sxy + C2) / ((mx^2 + my^2 + C1)(sx^2 + sy^2 + C2))``
    with ``C1 = (k1 L)^2`` and ``C2 = (k2 L)^2``; variances are population
    moments.  ``c3`` is accepted for configuration symmetry and ignored.
    ``literal_denominator`` swaps the second denominator factor for
    ``mx^2 + my^2 + C2``, a known misprint kept for side-by-side checks.
    """
    if L <= 0:
        raise MetricError("dynamic range L must be positive")
    x, y = _pair(x, y)
    c1 = (k1 * L) ** 2
    c2 = (k2 * L) ** 2
    mx, my = x.mean(), y.mean()
    dx, dy = x - mx, y - my
    vx, vy = np.mean(dx * dx), np.mean(dy * dy)
    cov = np.mean(dx * dy)
    second = (mx * mx + my * my + c2) if literal_denominator else (vx + vy + c2)
    return float((2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * second))


def frobenius(x, y) -> float:
    x, y = _pair(x, y)
    return float(np.linalg.norm(x - y))


@dataclass(frozen=True)
class Aggregate:
    mean: float
    std: float
    max: float
    min: float

    @classmethod
    def of(cls, values) -> "Aggregate":
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            raise MetricError("cannot aggregate an empty batch")
        # Population standard deviation (ddof=0).
        return cls(float(v.mean()), float(v.std()), float(v.max()), float(v.min()))


@dataclass
class ComparisonReport:
    """Hourly evolution rows plus final-scar metrics.

    ``per_period`` rows are ``(hour, one_minus_mse_pct, ssim_pct)``;
    ``final`` is ``(mse, ssim, delta_norm)`` on the last pair.
    """
    per_period: list[tuple[int, float, float]]
    final: tuple[float, float, float]
    aggregates: dict[str, Aggregate] = field(default_factory=dict)

    def evolution_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["hour", "one_minus_mse_pct", "ssim_pct"])
        for hour, m, s in self.per_period:
            w.writerow([hour, repr(m), repr(s)])
        return buf.getvalue()

    def summary_csv(self) -> str:
        return summary_csv(self.aggregates)


def summary_csv(aggregates: dict[str, Aggregate]) -> str:
    """``metric,mean,std,max,min`` rows; std is the population deviation."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "mean", "std", "max", "min"])
    for name, a in aggregates.items():
        w.writerow([name, repr(a.mean), repr(a.std), repr(a.max), repr(a.min)])
    return buf.getvalue()


def evolution_report(xs, ys, **ssim_kwargs) -> ComparisonReport:
    """Compare two hourly scar sequences hour by hour.

    Hours are numbered from 1.  Aggregates summarise the per-hour
    ``one_minus_mse_pct`` and ``ssim_pct`` columns.
    """
    xs, ys = list(xs), list(ys)
    if len(xs) != len(ys):
        raise MetricError(f"sequence lengths differ: {len(xs)} vs {len(ys)}")
    if not xs:
        raise MetricError("no scars to compare")
    rows = []
    for hour, (x, y) in enumerate(zip(xs, ys), start=1):
        rows.append((hour, 100.0 * (1.0 - mse(x, y)), 100.0 * ssim(x, y, **ssim_kwargs)))
    final = (mse(xs[-1], ys[-1]), ssim(xs[-1], ys[-1], **ssim_kwargs), frobenius(xs[-1], ys[-1]))
    aggregates = {
        "one_minus_mse_pct": Aggregate.of([r[1] for r in rows]),
        "ssim_pct": Aggregate.of([r[2] for r in rows]),
        "delta_norm": Aggregate.of([final[2]]),
    }
    return ComparisonReport(rows, final, aggregates)


def batch_summary(reports: list[ComparisonReport]) -> dict[str, Aggregate]:
    """Aggregate the final metrics of many comparisons (one row per metric)."""
    if not reports:
        raise MetricError("empty batch")
    finals = np.array([r.final for r in reports], dtype=np.float64)
    return {
        "one_minus_mse_pct": Aggregate.of(100.0 * (1.0 - finals[:, 0])),
        "ssim_pct": Aggregate.of(100.0 * finals[:, 1]),
        "delta_norm": Aggregate.of(finals[:, 2]),
    }


def is_binary(x) -> bool:
    x = np.asarray(x)
    return bool(np.all((x == 0) | (x == 1)))


def differing_cells(x, y) -> int:
    x, y = _pair(x, y)
    return int(np.count_nonzero(x != y))


__all__ = ["MetricError", "mse", "ssim", "frobenius", "Aggregate", "ComparisonReport",
           "evolution_report", "batch_summary", "summary_csv", "is_binary", "differing_cells"]
