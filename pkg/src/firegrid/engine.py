"""Discrete-time fire growth engine.

Each fire period of ``dt`` minutes runs four stages:

1. **ignite**: scheduled or sampled ignitions start burning;
2. **send**: every burning cell advances fire along its live axes and
   messages any neighbour whose centre has been reached;
3. **receive**: messaged cells evaluate their own rate of spread and start
   burning if it beats the threshold;
4. **burn-out** (timed as "copy"): burning cells that cannot spread any
   more become burned and the burning list is rebuilt.

Cells ignited by messages start spreading the period after they ignite.
The send stage is split over worker threads; results do not depend on the
thread count.
"""
from __future__ import annotations

import enum
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from firegrid import _kernels
from firegrid.landscape import AXIS_ANGLES, CellStatus, IgnitionSpec, LandscapeGrid
from firegrid.spread import batch_spread_rates
from firegrid.weather import WeatherExhausted, WeatherScenario, record_at, sample_scenario

log = logging.getLogger(__name__)

# Below this many burning cells the send stage runs inline.
MIN_PARALLEL_CELLS = 2048
# Gap (in int64 slots, one cache line) between per-worker message buffers.
BUFFER_PAD = 8


class EndingReason(str, enum.Enum):
    NO_FUEL = "NoFuel"
    WEATHER_EXHAUSTED = "WeatherExhausted"
    MAX_HOURS = "MaxHours"
    NO_SPREAD = "NoSpread"


@dataclass
class SimConfig:
    fire_period_minutes: float = 1.0
    max_hours: float | None = None
    max_burn_hours_per_day: float = math.inf
    burn_hours_distribution: dict[float, float] | None = None
    ros_threshold: float = 0.0
    hfi_threshold: float | None = None
    ros_cv: float = 0.0
    seed: int = 0
    threads: int = 1
    scenario_draws: int = 1

    def __post_init__(self):
        dt = self.fire_period_minutes
        if dt <= 0 or abs(60.0 / dt - round(60.0 / dt)) > 1e-9:
            raise ValueError(f"fire period {dt} min must divide 60 evenly")
        if self.ros_threshold < 0:
            raise ValueError("ros_threshold must be >= 0")
        if self.ros_cv < 0:
            raise ValueError("ros_cv must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.scenario_draws < 1:
            raise ValueError("scenario_draws must be >= 1")
        if self.max_hours is not None and self.max_hours <= 0:
            raise ValueError("max_hours must be positive")

    @property
    def periods_per_hour(self) -> int:
        return int(round(60.0 / self.fire_period_minutes))


@dataclass(frozen=True)
class FireMessage:
    sender: int
    receiver: int
    period: int


@dataclass
class StageTiming:
    send_ms: float = 0.0
    receive_ms: float = 0.0
    ignite_ms: float = 0.0
    copy_ms: float = 0.0
    total_ms: float = 0.0
    send_calls: int = 0

    @property
    def send_share(self) -> float:
        return self.send_ms / self.total_ms if self.total_ms > 0 else 0.0

    def shares(self) -> dict[str, float]:
        t = self.total_ms or 1.0
        return {"send": self.send_ms / t, "receive": self.receive_ms / t,
                "ignite": self.ignite_ms / t, "copy": self.copy_ms / t}


@dataclass
class SimResult:
    nrows: int
    ncols: int
    hourly_scars: list[np.ndarray]
    final_status: np.ndarray
    ignition_cells: np.ndarray
    ignition_periods: np.ndarray
    messages: np.ndarray  # (k, 3) int64 rows of period, sender id, receiver id
    ending_reason: EndingReason
    periods: int
    scenario: str
    seed: int
    send_updates: int = 0
    timing: StageTiming | None = field(default=None, compare=False, repr=False)

    @property
    def final_scar(self) -> np.ndarray:
        burned = (self.final_status == CellStatus.BURNING) | (self.final_status == CellStatus.BURNED)
        return burned.astype(np.uint8)

    @property
    def ignition_log(self) -> list[tuple[int, int]]:
        return list(zip(self.ignition_cells.tolist(), self.ignition_periods.tolist()))

    @property
    def message_log(self) -> list[FireMessage]:
        return [FireMessage(s, r, p) for p, s, r in self.messages.tolist()]

    def ignition_period_grid(self) -> np.ndarray:
        """Ignition period per cell, 0 where the cell never ignited."""
        out = np.zeros(self.nrows * self.ncols, dtype=np.int64)
        out[self.ignition_cells - 1] = self.ignition_periods
        return out.reshape(self.nrows, self.ncols)

    def same_as(self, other: "SimResult") -> bool:
        """Bit-exact comparison of every recorded output."""
        return (
            self.ending_reason == other.ending_reason
            and self.periods == other.periods
            and self.send_updates == other.send_updates
            and len(self.hourly_scars) == len(other.hourly_scars)
            and all(np.array_equal(a, b) for a, b in zip(self.hourly_scars, other.hourly_scars))
            and np.array_equal(self.final_status, other.final_status)
            and np.array_equal(self.ignition_cells, other.ignition_cells)
            and np.array_equal(self.ignition_periods, other.ignition_periods)
            and np.array_equal(self.messages, other.messages)
        )


_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (x + np.uint64(0x9E3779B97F4A7C15)) & _MASK64
        z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK64
        z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK64
        return z ^ (z >> np.uint64(31))


def _unit_uniform(key: int, counters: np.ndarray) -> np.ndarray:
    """Uniform draws in (0, 1], a pure function of ``(key, counter)``."""
    z = _splitmix64(_splitmix64(np.uint64(key) ^ counters.astype(np.uint64)))
    return ((z >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53


def perturbation_factors(key: int, cells: np.ndarray, cv: float) -> np.ndarray:
    """Per-axis rate-of-spread multipliers ``max(0, N(1, cv))`` for ``cells``.

    Counter-based: the factor for (cell, axis) depends only on ``key``, the
    cell index and the axis, never on draw order.
    """
    cells = np.asarray(cells, dtype=np.uint64)
    if cv == 0:
        return np.ones((cells.size, 8))
    base = cells[:, None] * np.uint64(16) + np.arange(8, dtype=np.uint64)[None, :] * np.uint64(2)
    u1 = _unit_uniform(key, base)
    u2 = _unit_uniform(key, base + np.uint64(1))
    g = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
    return np.maximum(0.0, 1.0 + cv * g)


def perturb_ros(base: float, cv: float, rng: np.random.Generator) -> float:
    """``base * max(0, G)`` with ``G ~ Normal(1, cv)``; exact identity for ``cv == 0``."""
    if cv < 0:
        raise ValueError("cv must be >= 0")
    if cv == 0 or base == 0:
        return base
    return base * max(0.0, rng.normal(1.0, cv))


def replicate_seeds(seed: int, replicate: int) -> tuple[np.random.Generator, int]:
    """Sequential generator and perturbation key for replicate ``replicate``."""
    ss = np.random.SeedSequence([seed, replicate])
    key = int(ss.generate_state(2, np.uint64)[1])
    return np.random.default_rng(ss), key


class FireSimulation:
    """One fire, from ignition to a fire-ending event.

    ``observer(stage, sim, period)`` is called after every stage when given;
    it must not mutate the simulation.
    """

    def __init__(self, grid: LandscapeGrid, scenario: WeatherScenario, spec: IgnitionSpec,
                 model, config: SimConfig, *, replicate: int = 0,
                 observer: Callable | None = None, profile: bool = False,
                 residual_fuel: Callable | None = None):
        spec.validate(grid)
        if not np.any(grid.status == CellStatus.AVAILABLE):
            raise ValueError("landscape has no flammable cell")
        self.grid = grid
        self.scenario = scenario
        self.spec = spec
        self.model = model
        self.config = config
        self.observer = observer
        self.residual_fuel = residual_fuel
        self.rng, self.key = replicate_seeds(config.seed, replicate)
        self.timing = StageTiming() if profile else None

        n = grid.size
        self.neighbors = grid.neighbors
        self.dist = grid.axis_distances
        self.status = grid.status.copy()
        self.ignition_period = np.zeros(n, dtype=np.int64)
        self.progress = np.zeros((n, 8))
        self.msg_sent = np.zeros((n, 8), dtype=np.bool_)
        self.eff_ros = np.zeros((n, 8))
        self.perturb = np.ones((n, 8))
        self.has_spread = np.zeros(n, dtype=np.bool_)
        self._seen = np.zeros(n, dtype=np.bool_)
        self.live_count = np.zeros(n, dtype=np.int8)
        self.fast_count = np.zeros(n, dtype=np.int8)
        self._scar = np.zeros(n, dtype=np.uint8)
        self.hros = np.zeros(n)
        self.bros = np.zeros(n)
        self.lb = np.ones(n)
        self.heading = np.zeros(n)
        self.hfi = np.zeros(n)
        self.burning = np.empty(0, dtype=np.int64)
        self.messages: list[tuple[int, np.ndarray, np.ndarray]] = []
        self.hourly_scars: list[np.ndarray] = []
        self.send_updates = 0
        self.threshold_burnouts = 0
        self._rates_hour = -1
        self._flags = np.zeros(64, dtype=np.int8)
        self._weather = None
        self._pool = None
        self._buf_cap = 0
        self._buf_sender = self._buf_receiver = None
        # Models exposing a coefficient table are evaluated in compiled code.
        self._table = (np.ascontiguousarray(model.param_table(grid.fuels), dtype=np.float64)
                       if hasattr(model, "param_table") else None)

        if spec.entries:
            self.pending = sorted(((p, c - 1) for c, p in spec.entries))
        else:
            cell = int(self.rng.choice(n, p=spec.weights(grid)))
            self.pending = [(1, cell)]

        budget = config.max_burn_hours_per_day
        if config.burn_hours_distribution:
            hours = list(config.burn_hours_distribution)
            p = np.array([config.burn_hours_distribution[h] for h in hours], float)
            budget = float(hours[int(self.rng.choice(len(hours), p=p / p.sum()))])
        self.burn_budget_hours = budget

    # -- helpers -----------------------------------------------------------

    def _refresh_rates(self, cells: np.ndarray, weather) -> None:
        """Evaluate the spread model for ``cells`` into the per-cell rate arrays."""
        g = self.grid
        if self._table is not None:
            bad = _kernels.parametric_rates(cells, g.fuel_index, g.slope_pct, g.slope_azimuth,
                                            self._table, weather.ws, weather.spread_heading,
                                            self.hros, self.bros, self.lb, self.heading, self.hfi)
            if bad >= 0:
                self.model.entry(g.fuels[int(g.fuel_index[cells[bad]])])
            return
        rates = batch_spread_rates(self.model, g.fuels, g.fuel_index[cells], g.slope_pct[cells],
                                   g.slope_azimuth[cells], weather)
        self.hros[cells], self.bros[cells], self.lb[cells], self.heading[cells], self.hfi[cells] = rates

    def _start_burning(self, cells, period):
        self.status[cells] = CellStatus.BURNING
        self.ignition_period[cells] = period
        self._scar[cells] = 1

    def _perturb(self, cells):
        if self.config.ros_cv > 0 and cells.size:
            self.perturb[cells] = perturbation_factors(self.key, cells, self.config.ros_cv)

    def _passes(self, cells) -> np.ndarray:
        ok = self.hros[cells] > self.config.ros_threshold
        if self.config.hfi_threshold is not None:
            ok &= np.nan_to_num(self.hfi[cells], nan=-np.inf) >= self.config.hfi_threshold
        return ok

    def _notify(self, stage, period):
        if self.observer is not None:
            self.observer(stage, self, period)

    def _tick(self, attr, t0):
        if self.timing is not None:
            setattr(self.timing, attr, getattr(self.timing, attr) + (time.perf_counter() - t0) * 1e3)

    # -- stages ------------------------------------------------------------

    def ignite(self, period: int, weather) -> list[int]:
        """Ignite the cells scheduled for ``period``; returns the ids that caught."""
        if not self.pending or self.pending[0][0] > period:
            return []
        due = []
        while self.pending and self.pending[0][0] <= period:
            due.append(self.pending.pop(0)[1])
        cells = np.array(sorted(c for c in set(due) if self.status[c] == CellStatus.AVAILABLE), dtype=np.int64)
        if cells.size == 0:
            return []
        self._refresh_rates(cells, weather)
        ok = self._passes(cells)
        lit = cells[ok]
        if lit.size:
            self._start_burning(lit, period)
            self._perturb(lit)
            self.burning = np.union1d(self.burning, lit)
        for c in cells[~ok]:
            log.info("ignition at cell %d failed: rate of spread below threshold", c + 1)
        return (lit + 1).tolist()

    def _ensure_buffers(self, chunk_cells: int, workers: int):
        need = 8 * chunk_cells
        if self._buf_sender is None or need > self._buf_cap or self._buf_sender.shape[0] < workers:
            self._buf_cap = max(need, 2 * self._buf_cap, 64)
            stride = self._buf_cap + BUFFER_PAD
            self._buf_sender = np.empty((workers, stride), dtype=np.int64)
            self._buf_receiver = np.empty((workers, stride), dtype=np.int64)

    def _send_chunk(self, w: int, cells: np.ndarray, dt: float):
        return _kernels.send_chunk(
            cells, self.neighbors, self.status, self.hros, self.bros, self.lb, self.heading,
            self.perturb, self.progress, self.msg_sent, self.eff_ros, self.has_spread,
            self.live_count, self.fast_count, self.dist, AXIS_ANGLES, dt, self.config.ros_threshold,
            self._buf_sender[w], self._buf_receiver[w])

    def send_stage(self, period: int, weather) -> tuple[np.ndarray, np.ndarray]:
        """Advance all burning cells one period.

        Returns 0-based ``(senders, receivers)`` ordered by sender index.
        """
        hour = int((period - 1) * self.config.fire_period_minutes // 60)
        if hour != self._rates_hour:
            if self.burning.size:
                self._refresh_rates(self.burning, weather)
            self._rates_hour = hour

        cells = self.burning
        dt = self.config.fire_period_minutes
        workers = self.config.threads
        if workers == 1 or cells.size < MIN_PARALLEL_CELLS:
            chunks = [cells]
        else:
            chunks = np.array_split(cells, workers)
        self._ensure_buffers(max(c.size for c in chunks), len(chunks))
        if len(chunks) == 1:
            results = [self._send_chunk(0, cells, dt)]
        else:
            if self._pool is None:
                self._pool = ThreadPoolExecutor(max_workers=workers)
            futures = [self._pool.submit(self._send_chunk, w, c, dt) for w, c in enumerate(chunks)]
            results = [f.result() for f in futures]
        if len(results) == 1:
            n = results[0][0]
            senders, receivers = self._buf_sender[0, :n].copy(), self._buf_receiver[0, :n].copy()
        else:
            senders = np.concatenate([self._buf_sender[w, :n] for w, (n, _) in enumerate(results)])
            receivers = np.concatenate([self._buf_receiver[w, :n] for w, (n, _) in enumerate(results)])
        self.send_updates += sum(u for _, u in results)
        return senders, receivers

    def receive_stage(self, senders, receivers, period: int, weather) -> np.ndarray:
        """Ignite messaged cells whose own rate of spread passes; returns their indices."""
        if receivers.size == 0:
            return receivers
        self.messages.append((period, senders, receivers))
        cfg = self.config
        if self._table is not None:
            g = self.grid
            use_hfi = cfg.hfi_threshold is not None
            new, bad = _kernels.receive_parametric(
                receivers, self.status, self._seen, g.fuel_index, g.slope_pct, g.slope_azimuth,
                self._table, weather.ws, weather.spread_heading, cfg.ros_threshold, use_hfi,
                cfg.hfi_threshold if use_hfi else 0.0, period,
                self.hros, self.bros, self.lb, self.heading, self.hfi, self.ignition_period, self._scar)
            if bad >= 0:
                self.model.entry(g.fuels[int(g.fuel_index[bad])])
        else:
            cand = _kernels.unique_available(receivers, self.status, self._seen)
            if cand.size == 0:
                return cand
            self._refresh_rates(cand, weather)
            new = cand[self._passes(cand)]
            if new.size:
                self._start_burning(new, period)
        self._perturb(new)
        return new

    def burnout_stage(self, new: np.ndarray, period: int) -> None:
        """Retire burning cells that cannot spread; merge ``new`` into the burning list.

        """
        flags = self._flags
        if flags.size < self.burning.size + new.size:
            flags = self._flags = np.zeros(2 * (self.burning.size + new.size), dtype=np.int8)
        retire = self.residual_fuel is None
        cells, n2 = _kernels.burnout(self.burning, new, self.neighbors, self.status,
                                     self.msg_sent, self.eff_ros, self.has_spread, self.live_count,
                                     self.fast_count, self.config.ros_threshold, flags, retire)
        self.threshold_burnouts += n2
        if retire:
            self.burning = cells
            return
        flags = flags[:cells.size]
        exhausted = np.asarray(self.residual_fuel(cells + 1, period), dtype=bool)
        flags[(flags == 0) & exhausted] = 3
        keep = flags == 0
        self.status[cells[~keep]] = CellStatus.BURNED
        self.burning = cells[keep]

    # -- driver ------------------------------------------------------------

    def scar(self) -> np.ndarray:
        """0/1 grid of every cell that has ignited so far."""
        return self._scar.reshape(self.grid.nrows, self.grid.ncols).copy()

    def _end_check(self, period: int) -> EndingReason | None:
        cfg = self.config
        elapsed = (period - 1) * cfg.fire_period_minutes
        reasons = []
        if cfg.max_hours is not None and elapsed >= cfg.max_hours * 60.0 - 1e-9:
            reasons.append(EndingReason.MAX_HOURS)
        if elapsed >= self.burn_budget_hours * 60.0 - 1e-9:
            reasons.append(EndingReason.MAX_HOURS)
            log.info("daily burn-hour budget of %s h reached", self.burn_budget_hours)
        if elapsed >= self.scenario.minutes:
            reasons.append(EndingReason.WEATHER_EXHAUSTED)
        if len(set(reasons)) > 1:
            log.info("several ending conditions at period %d: %s", period, [r.value for r in reasons])
        return reasons[0] if reasons else None

    def run(self) -> SimResult:
        cfg = self.config
        pph = cfg.periods_per_hour
        t_start = time.perf_counter()
        period = 0
        reason = None
        try:
            while True:
                nxt = period + 1
                reason = self._end_check(nxt)
                if reason is not None:
                    break
                period = nxt
                try:
                    weather = record_at(self.scenario, (period - 1) * cfg.fire_period_minutes)
                except WeatherExhausted:
                    reason = EndingReason.WEATHER_EXHAUSTED
                    period -= 1
                    break

                t0 = time.perf_counter()
                self.ignite(period, weather)
                self._tick("ignite_ms", t0)
                self._notify("ignite", period)

                t0 = time.perf_counter()
                senders, receivers = self.send_stage(period, weather)
                self._tick("send_ms", t0)
                if self.timing is not None:
                    self.timing.send_calls += 1
                self._notify("send", period)

                t0 = time.perf_counter()
                new = self.receive_stage(senders, receivers, period, weather)
                self._tick("receive_ms", t0)
                self._notify("receive", period)

                t0 = time.perf_counter()
                self.burnout_stage(new, period)
                if period % pph == 0:
                    self.hourly_scars.append(self.scar())
                self._tick("copy_ms", t0)
                self._notify("burnout", period)

                if self.burning.size == 0 and not self.pending:
                    has_fire = bool(np.any(self.ignition_period > 0))
                    if not has_fire or self.threshold_burnouts:
                        reason = EndingReason.NO_SPREAD
                    else:
                        reason = EndingReason.NO_FUEL
                    break
        finally:
            if self._pool is not None:
                self._pool.shutdown()
                self._pool = None

        if period % pph != 0 or period == 0:
            self.hourly_scars.append(self.scar())
        if self.timing is not None:
            self.timing.total_ms = (time.perf_counter() - t_start) * 1e3

        lit = np.flatnonzero(self.ignition_period)
        order = np.lexsort((lit, self.ignition_period[lit]))
        lit = lit[order]
        if self.messages:
            msgs = np.column_stack([
                np.concatenate([np.full(s.size, p, dtype=np.int64) for p, s, _ in self.messages]),
                np.concatenate([s for _, s, _ in self.messages]) + 1,
                np.concatenate([r for _, _, r in self.messages]) + 1,
            ])
        else:
            msgs = np.empty((0, 3), dtype=np.int64)
        return SimResult(
            nrows=self.grid.nrows,
            ncols=self.grid.ncols,
            hourly_scars=self.hourly_scars,
            final_status=self.status.reshape(self.grid.nrows, self.grid.ncols).copy(),
            ignition_cells=lit + 1,
            ignition_periods=self.ignition_period[lit],
            messages=msgs,
            ending_reason=reason,
            periods=period,
            scenario=self.scenario.id,
            seed=self.config.seed,
            send_updates=self.send_updates,
            timing=self.timing,
        )


def run_simulation(grid: LandscapeGrid, scenarios, spec: IgnitionSpec, model, config: SimConfig,
                   *, replicate: int = 0, **kwargs) -> SimResult:
    """Simulate one fire.  ``scenarios`` may be one scenario or a list to sample from."""
    if isinstance(scenarios, WeatherScenario):
        scenario = scenarios
    else:
        if not scenarios:
            raise ValueError("no weather scenario")
        rng = np.random.default_rng([config.seed, replicate, 1])
        scenario = sample_scenario(list(scenarios), rng)
    return FireSimulation(grid, scenario, spec, model, config, replicate=replicate, **kwargs).run()


def run_replications(grid: LandscapeGrid, scenarios, spec: IgnitionSpec, model,
                     config: SimConfig, **kwargs) -> list[SimResult]:
    """``config.scenario_draws`` independent fires sharing one master seed."""
    return [run_simulation(grid, scenarios, spec, model, config, replicate=r, **kwargs)
            for r in range(config.scenario_draws)]
