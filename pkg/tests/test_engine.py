import math

import numpy as np
import pytest

from conftest import C2, WATER, circle_model
from oracles import OFFSETS, dijkstra, octile
from firegrid import engine
from firegrid.engine import (EndingReason, FireSimulation, SimConfig, perturb_ros, perturbation_factors,
                             run_replications, run_simulation)
from firegrid.landscape import (AsciiGrid, CellStatus, FuelRecord, IgnitionSpec, homogeneous_landscape,
                                load_landscape)
from firegrid.spread import FuelModelEntry, ParametricSpreadModel, SpreadError
from firegrid.weather import constant_weather

C3 = FuelRecord(3, 3, "Mature Jack or Lodgepole Pine", "C-3")


def landscape(codes, fuels=(C2, C3, WATER)):
    return load_landscape(AsciiGrid(np.array(codes), cellsize=100.0), list(fuels))


def run(grid, model, spec, hours=3, **cfg):
    cfg.setdefault("max_hours", hours)
    return run_simulation(grid, constant_weather(hours + 1), spec, model, SimConfig(**cfg))


def test_east_and_diagonal_message_periods():
    grid = homogeneous_landscape(3, 3, C2)
    res = run(grid, circle_model(50.0), IgnitionSpec.single(5), hours=1, max_hours=3 / 60)
    first = {}
    for p, s, r in res.messages.tolist():
        first.setdefault((s, r), p)
    assert first[(5, 6)] == 2
    assert first[(5, 3)] == 3


def test_ignition_cell_burning_at_period_one():
    grid = homogeneous_landscape(3, 3, C2)
    seen = {}

    def observer(stage, sim, period):
        if stage == "ignite" and period == 1:
            seen["status"] = sim.status.copy()

    FireSimulation(grid, constant_weather(1), IgnitionSpec.single(5), circle_model(1.0),
                   SimConfig(max_hours=1), observer=observer).run()
    assert seen["status"][4] == CellStatus.BURNING


def test_isolated_ignition():
    grid = landscape([[102, 102, 102], [102, 2, 102], [102, 102, 102]])
    res = run(grid, circle_model(10.0), IgnitionSpec.single(5))
    assert res.periods == 1
    assert res.final_scar.sum() == 1 and res.final_scar[1, 1] == 1
    assert res.ending_reason in (EndingReason.NO_FUEL, EndingReason.NO_SPREAD)
    assert res.messages.shape == (0, 3)


def test_uniform_ignition_seeded():
    grid = homogeneous_landscape(10, 10, C2)
    spec = IgnitionSpec(uniform=True)
    a = run(grid, circle_model(5.0), spec, hours=1, seed=42)
    b = run(grid, circle_model(5.0), spec, hours=1, seed=42)
    assert a.ignition_log[0] == b.ignition_log[0]
    others = {run(grid, circle_model(5.0), spec, hours=1, seed=s).ignition_log[0][0] for s in range(8)}
    assert len(others) > 1


def test_probability_map_single_cell():
    grid = homogeneous_landscape(4, 4, C2)
    p = np.zeros(16)
    p[10] = 1.0
    for seed in range(5):
        res = run(grid, circle_model(1.0), IgnitionSpec(probability=p), hours=1, seed=seed)
        assert res.ignition_log[0] == (11, 1)


def test_failed_ignition_is_no_spread():
    grid = homogeneous_landscape(5, 5, C2)
    model = ParametricSpreadModel([FuelModelEntry("C-2", 0.0)])
    res = run(grid, model, IgnitionSpec.single(13), ros_threshold=0.1)
    assert res.ending_reason == EndingReason.NO_SPREAD
    assert res.final_scar.sum() == 0 and res.periods == 1


def test_hfi_threshold_blocks_receiver():
    grid = landscape([[2, 3]])
    model = ParametricSpreadModel([FuelModelEntry("C-2", 50.0, hfi0=10.0),   # HFI 500
                                   FuelModelEntry("C-3", 4.0, hfi0=10.0)])   # HFI 40
    res = run(grid, model, IgnitionSpec.single(1), hfi_threshold=100.0)
    assert res.final_status.tolist() == [[CellStatus.BURNED, CellStatus.AVAILABLE]]
    assert res.messages[:, 2].tolist() == [2]
    ok = run(grid, model, IgnitionSpec.single(1), hfi_threshold=30.0)
    assert ok.final_scar.tolist() == [[1, 1]]


def test_simultaneous_messages_single_ignition():
    grid = homogeneous_landscape(1, 3, C2)
    res = run(grid, circle_model(50.0), IgnitionSpec([(1, 1), (3, 1)]), hours=1)
    rows = [r for r in res.messages.tolist() if r[2] == 2]
    assert [r[1] for r in rows] == [1, 3]
    assert rows[0][0] == rows[1][0] == 2
    assert res.ignition_log == [(1, 1), (3, 1), (2, 2)]


def test_burnout_all_neighbours_gone():
    grid = homogeneous_landscape(3, 3, C2)
    res = run(grid, circle_model(200.0), IgnitionSpec.single(5), hours=1)
    assert res.ending_reason == EndingReason.NO_FUEL
    assert np.all(res.final_status == CellStatus.BURNED)


def test_burnout_slow_axis_and_survivor():
    # Head runs east at 1 m/min; the back rate is far below the threshold.
    model = ParametricSpreadModel([FuelModelEntry("C-2", 1.0, bros_frac=0.05, lb0=8.0)])
    grid = homogeneous_landscape(1, 2, C2)
    east = constant_weather(2, ws=0, wd=270)
    res = run_simulation(grid, east, IgnitionSpec.single(2), model, SimConfig(ros_threshold=0.1))
    assert res.final_status.tolist() == [[CellStatus.AVAILABLE, CellStatus.BURNED]]
    assert res.ending_reason == EndingReason.NO_SPREAD
    assert res.periods == 1

    states = []
    FireSimulation(grid, east, IgnitionSpec.single(1), model, SimConfig(ros_threshold=0.1, max_hours=1),
                   observer=lambda st, sim, p: states.append(sim.status[0]) if st == "burnout" else None).run()
    assert states[0] == CellStatus.BURNING


def test_max_hours_period_count():
    grid = homogeneous_landscape(200, 200, C2)
    res = run(grid, circle_model(1.0), IgnitionSpec.single(grid.cell_id(100, 100)), hours=1)
    assert res.periods == 60 and res.ending_reason == EndingReason.MAX_HOURS
    res = run(grid, circle_model(1.0), IgnitionSpec.single(grid.cell_id(100, 100)), hours=1,
              fire_period_minutes=2)
    assert res.periods == 30 and res.ending_reason == EndingReason.MAX_HOURS


def test_weather_exhausted_and_daily_budget():
    grid = homogeneous_landscape(100, 100, C2)
    spec = IgnitionSpec.single(grid.cell_id(50, 50))
    res = run_simulation(grid, constant_weather(2), spec, circle_model(1.0), SimConfig())
    assert res.ending_reason == EndingReason.WEATHER_EXHAUSTED and res.periods == 120
    res = run_simulation(grid, constant_weather(5), spec, circle_model(1.0),
                         SimConfig(max_burn_hours_per_day=1.5))
    assert res.ending_reason == EndingReason.MAX_HOURS and res.periods == 90
    res = run_simulation(grid, constant_weather(5), spec, circle_model(1.0),
                         SimConfig(burn_hours_distribution={1.0: 1.0, 3.0: 0.0}))
    assert res.periods == 60


def test_hourly_scars_and_partial_snapshot():
    grid = homogeneous_landscape(50, 50, C2)
    spec = IgnitionSpec.single(grid.cell_id(25, 25))
    res = run(grid, circle_model(10.0), spec, hours=3, max_hours=2.5)
    assert len(res.hourly_scars) == 3
    assert np.array_equal(res.hourly_scars[-1], res.final_scar)
    for a, b in zip(res.hourly_scars, res.hourly_scars[1:]):
        assert np.all(b >= a)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(fire_period_minutes=7)
    with pytest.raises(ValueError):
        SimConfig(ros_threshold=-1)
    with pytest.raises(ValueError):
        SimConfig(ros_cv=-0.1)


def test_unknown_fuel_in_model_raises():
    grid = landscape([[2, 3]])
    with pytest.raises(SpreadError, match="C-3"):
        run(grid, circle_model(50.0), IgnitionSpec.single(1))


def test_small_circle_matches_octile_ball():
    grid = homogeneous_landscape(41, 41, C2)
    res = run(grid, circle_model(10.0), IgnitionSpec.single(grid.cell_id(20, 20)), hours=1)
    radius = 10.0 * 60
    ring = math.sqrt(2) * 100.0
    for r in range(41):
        for c in range(41):
            d = octile(r - 20, c - 20, 100.0)
            burned = res.final_scar[r, c] == 1
            if d <= radius - ring:
                assert burned, (r, c)
            if d > radius:
                assert not burned, (r, c)


def test_dt_refinement_changes_only_the_ring():
    grid = homogeneous_landscape(61, 61, C2)
    spec = IgnitionSpec.single(grid.cell_id(30, 30))
    coarse = run(grid, circle_model(7.0), spec, hours=2).final_scar
    fine = run(grid, circle_model(7.0), spec, hours=2, fire_period_minutes=0.5).final_scar
    diff = np.argwhere(coarse != fine)
    radius = 7.0 * 120
    for r, c in diff:
        assert abs(octile(r - 30, c - 30, 100.0) - radius) <= 2 * math.sqrt(2) * 100.0


def anisotropic_setup(n=31):
    grid = homogeneous_landscape(n, n, C2)
    model = ParametricSpreadModel([FuelModelEntry("C-2", 8.0, 0.05, 0.3, 1.0, 0.04)])
    weather = constant_weather(6, ws=20.0, wd=225.0)
    return grid, model, weather


def test_anisotropic_arrivals_within_one_period_per_hop():
    grid, model, weather = anisotropic_setup()
    n = grid.nrows
    src = (n // 2, n // 2)
    res = run_simulation(grid, weather, IgnitionSpec.single(grid.cell_id(*src)), model, SimConfig(max_hours=3))
    from firegrid.spread import SpreadOutputs, axis_rates, fit_ellipse
    out = model.spread_rates(__import__("firegrid.spread", fromlist=["SpreadInputs"]).SpreadInputs(
        C2, weather.records[0]))
    rates = list(axis_rates(fit_ellipse(SpreadOutputs(out.hros, out.bros, out.lb, out.heading))).values())
    oracle = dijkstra(n, n, src, lambda k: rates[k])
    periods = res.ignition_period_grid()
    checked = 0
    for (r, c), (t, hops) in oracle.items():
        if (r, c) == src or periods[r, c] == 0:
            continue
        t_engine = periods[r, c] * 1.0
        assert t - 1e-9 <= t_engine <= t + hops + 1e-9, (r, c, t, t_engine, hops)
        checked += 1
    assert checked > 100


def test_threads_do_not_change_results(monkeypatch):
    monkeypatch.setattr(engine, "MIN_PARALLEL_CELLS", 1)
    grid = homogeneous_landscape(60, 60, C2)
    model = ParametricSpreadModel([FuelModelEntry("C-2", 20.0, 0.03, 0.5, 1.0, 0.02)])
    spec = IgnitionSpec([(grid.cell_id(30, 30), 1), (grid.cell_id(5, 50), 20)])
    results = [run_simulation(grid, constant_weather(3, ws=12, wd=200), spec, model,
                              SimConfig(max_hours=2, ros_cv=0.3, seed=9, threads=t))
               for t in (1, 2, 3, 8)]
    for r in results[1:]:
        assert r.same_as(results[0])


def test_profiling_does_not_change_results():
    grid = homogeneous_landscape(40, 40, C2)
    spec = IgnitionSpec.single(grid.cell_id(20, 20))
    a = run(grid, circle_model(9.0), spec, ros_cv=0.2, seed=3)
    b = run_simulation(grid, constant_weather(4), spec, circle_model(9.0),
                       SimConfig(max_hours=3, ros_cv=0.2, seed=3), profile=True)
    assert a.same_as(b) and b.timing.send_calls == b.periods


def test_generic_model_path_matches_compiled_path():
    grid = homogeneous_landscape(40, 40, C2)
    rng = np.random.default_rng(1)
    grid.slope_pct[:] = rng.uniform(0, 40, grid.size)
    grid.slope_azimuth[:] = rng.uniform(0, 2 * math.pi, grid.size)
    model = ParametricSpreadModel([FuelModelEntry("C-2", 30.0, 0.02, 0.4, 1.0, 0.03, 0.01, 5.0)])

    class PlainModel:
        def spread_rates(self, inputs):
            return model.spread_rates(inputs)

    spec = IgnitionSpec.single(grid.cell_id(20, 20))
    cfg = SimConfig(max_hours=2, ros_cv=0.3, ros_threshold=5.0, hfi_threshold=100.0, seed=4)
    a = run_simulation(grid, constant_weather(3, ws=20, wd=200), spec, model, cfg)
    b = run_simulation(grid, constant_weather(3, ws=20, wd=200), spec, PlainModel(), cfg)
    assert a.same_as(b) and a.final_scar.sum() > 50


def test_send_workload_matches_live_axes():
    grid = homogeneous_landscape(40, 40, C2)
    expected = [0]

    def observer(stage, sim, period):
        if stage == "ignite":
            nb, st, ms = sim.neighbors, sim.status, sim.msg_sent
            for i in sim.burning:
                expected[0] += sum(1 for k in range(8)
                                   if nb[i, k] >= 0 and st[nb[i, k]] == CellStatus.AVAILABLE and not ms[i, k])

    sim = FireSimulation(grid, constant_weather(3, ws=15), IgnitionSpec.single(grid.cell_id(20, 20)),
                         ParametricSpreadModel([FuelModelEntry("C-2", 12.0, 0.03, 0.5)]),
                         SimConfig(max_hours=2, ros_threshold=2.0), observer=observer)
    res = sim.run()
    assert res.send_updates == expected[0] > 0


def test_incremental_axis_counts_match_recount():
    grid = homogeneous_landscape(30, 30, C2)
    model = ParametricSpreadModel([FuelModelEntry("C-2", 6.0, 0.05, 0.2, 1.0, 0.05)])
    delta = 1.5

    def observer(stage, sim, period):
        if stage != "burnout":
            return
        for i in sim.burning:
            if not sim.has_spread[i]:
                continue
            live = [k for k in range(8) if sim.neighbors[i, k] >= 0
                    and sim.status[sim.neighbors[i, k]] == CellStatus.AVAILABLE and not sim.msg_sent[i, k]]
            assert sim.live_count[i] == len(live)
            assert sim.fast_count[i] == sum(sim.eff_ros[i, k] >= delta for k in live)
            assert len(live) > 0 and sim.fast_count[i] > 0

    FireSimulation(grid, constant_weather(3, ws=25, wd=135), IgnitionSpec.single(grid.cell_id(15, 15)),
                   model, SimConfig(max_hours=2, ros_threshold=delta, ros_cv=0.4, seed=2),
                   observer=observer).run()


def test_residual_fuel_hook():
    grid = homogeneous_landscape(20, 20, C2)
    spec = IgnitionSpec.single(grid.cell_id(10, 10))

    def hook(cell_ids, period):
        return cell_ids == grid.cell_id(10, 10)

    res = run_simulation(grid, constant_weather(2), spec, circle_model(5.0), SimConfig(max_hours=1),
                         residual_fuel=hook)
    assert res.final_status[10, 10] == CellStatus.BURNED
    assert res.messages.shape[0] == 0
    assert res.final_scar.sum() == 1


def test_growth_bounded_by_eight_per_burning_cell():
    grid = homogeneous_landscape(40, 40, C2)
    prev = {}

    def observer(stage, sim, period):
        if stage == "send":
            prev["burning"] = sim.burning.size
            prev["lit"] = int(np.count_nonzero(sim.ignition_period))
        elif stage == "receive":
            assert np.count_nonzero(sim.ignition_period) - prev["lit"] <= 8 * prev["burning"]

    FireSimulation(grid, constant_weather(2), IgnitionSpec.single(grid.cell_id(20, 20)), circle_model(150.0),
                   SimConfig(max_hours=1), observer=observer).run()


def test_message_legality():
    grid = landscape([[2, 2, 2, 2], [2, 102, 2, 2], [2, 2, 102, 2], [2, 2, 2, 2]])
    res = run(grid, circle_model(30.0), IgnitionSpec.single(1), hours=1)
    nonfuel = {6, 11}
    for _, s, r in res.messages.tolist():
        assert r in grid.adjacency(s) and r not in nonfuel


def test_replications_differ_by_replicate():
    grid = homogeneous_landscape(30, 30, C2)
    spec = IgnitionSpec(uniform=True)
    cfg = SimConfig(max_hours=1, seed=5, scenario_draws=4)
    runs = run_replications(grid, constant_weather(2), spec, circle_model(10.0), cfg)
    assert len(runs) == 4
    assert len({r.ignition_log[0] for r in runs}) > 1
    again = run_replications(grid, constant_weather(2), spec, circle_model(10.0), cfg)
    assert all(a.same_as(b) for a, b in zip(runs, again))


def test_scenario_sampling_in_run():
    grid = homogeneous_landscape(10, 10, C2)
    scs = [constant_weather(2, scenario="a"), constant_weather(2, scenario="b")]
    for s in scs:
        s.probability = 0.5
    picked = {run_simulation(grid, scs, IgnitionSpec.single(1), circle_model(5.0),
                             SimConfig(max_hours=1, seed=s)).scenario for s in range(10)}
    assert picked == {"a", "b"}


def test_perturb_ros():
    rng = np.random.default_rng(0)
    assert perturb_ros(7.5, 0.0, rng) == 7.5
    assert perturb_ros(0.0, 0.5, rng) == 0.0
    draws = np.array([perturb_ros(1.0, 0.2, rng) for _ in range(10_000)])
    assert 0.99 <= draws.mean() <= 1.01 and draws.min() >= 0
    with pytest.raises(ValueError):
        perturb_ros(1.0, -0.1, rng)


def test_perturbation_factors_order_free():
    cells = np.array([5, 17, 3, 999_999])
    together = perturbation_factors(123, cells, 0.3)
    alone = np.vstack([perturbation_factors(123, np.array([c]), 0.3) for c in cells])
    assert np.array_equal(together, alone)
    assert np.all(perturbation_factors(1, cells, 0.0) == 1.0)
    big = perturbation_factors(7, np.arange(20_000), 0.2).ravel()
    assert 0.99 <= big.mean() <= 1.01
    assert abs(big.std() - 0.2) < 0.01


def test_offsets_agree_with_engine_axes():
    from firegrid.landscape import AXIS_OFFSETS
    assert list(AXIS_OFFSETS) == OFFSETS
