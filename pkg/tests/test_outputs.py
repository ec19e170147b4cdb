import os

import numpy as np
import pytest

from conftest import C2, circle_model
from firegrid.engine import EndingReason, SimConfig, SimResult, run_simulation
from firegrid.landscape import AsciiGrid, CellStatus, IgnitionSpec, homogeneous_landscape, parse_ascii_grid
from firegrid.outputs import (STATUS_PALETTE, OutputError, RunStatistics, aggregate_runs, parse_palette,
                              read_ppm, render_scar_image, stats_csv, write_burn_grid, write_probability_map,
                              write_run_outputs)
from firegrid.weather import constant_weather


def fake_result(status):
    status = np.asarray(status, dtype=np.int8)
    scar = ((status == CellStatus.BURNING) | (status == CellStatus.BURNED)).astype(np.uint8)
    return SimResult(status.shape[0], status.shape[1], [scar], status, np.array([1]), np.array([1]),
                     np.zeros((0, 3), np.int64), EndingReason.NO_FUEL, 1, "s", 0)


def burned_n(n, shape=(5, 6)):
    s = np.zeros(shape, np.int8)
    s.flat[:n] = CellStatus.BURNED
    return fake_result(s)


def test_burn_grid_body(tmp_path):
    path = tmp_path / "s.asc"
    like = AsciiGrid(np.zeros((2, 2)), cellsize=30.0)
    write_burn_grid(np.array([[1, 0], [0, 0]]), path, like)
    text = path.read_text()
    assert text.rstrip().endswith("1 0\n0 0")
    back = parse_ascii_grid(text)
    assert back.values.tolist() == [[1, 0], [0, 0]] and back.cellsize == 30.0


def test_burn_grid_rejects_non_binary(tmp_path):
    with pytest.raises(OutputError):
        write_burn_grid(np.array([[2, 0]]), tmp_path / "x.asc")
    with pytest.raises(OutputError):
        write_burn_grid(np.zeros((2, 2)), tmp_path / "x.asc", AsciiGrid(np.zeros((3, 3))))


def test_probability_half():
    a = np.zeros((2, 2), np.int8)
    b = a.copy()
    b[0, 0] = CellStatus.BURNED
    pmap, _ = aggregate_runs([fake_result(a), fake_result(b)])
    assert pmap.probs[0, 0] == 0.5 and pmap.draws == 2


def test_single_run_map_is_scar():
    res = burned_n(7)
    pmap, _ = aggregate_runs([res])
    assert np.array_equal(pmap.probs, res.final_scar)


def test_burned_count_mean_and_population_std():
    _, agg = aggregate_runs([burned_n(10), burned_n(20)])
    assert (agg.burned_mean, agg.burned_std) == (15.0, 5.0)


def test_aggregate_errors():
    with pytest.raises(OutputError):
        aggregate_runs([])
    with pytest.raises(OutputError):
        aggregate_runs([burned_n(1), burned_n(1, (2, 2))])


def test_statistics_conservation_on_runs():
    grid = homogeneous_landscape(20, 20, C2)
    grid.status[:20] = CellStatus.NON_FUEL
    grid.status[20:30] = CellStatus.HARVESTED
    for seed in range(5):
        res = run_simulation(grid, constant_weather(2), IgnitionSpec(uniform=True), circle_model(8.0),
                             SimConfig(max_hours=1, seed=seed))
        s = RunStatistics.from_result(res)
        assert s.total == 400 and s.nonfuel_count == 20 and s.harvested_count == 10
        assert s.burned_pct == pytest.approx(100 * s.burned_count / 400)


def test_fixed_ignition_probabilities_binary():
    grid = homogeneous_landscape(15, 15, C2)
    runs = [run_simulation(grid, constant_weather(2), IgnitionSpec.single(113), circle_model(6.0),
                           SimConfig(max_hours=1, seed=s)) for s in range(3)]
    pmap, _ = aggregate_runs(runs)
    assert set(np.unique(pmap.probs)) <= {0.0, 1.0}


def test_stats_csv_header():
    text = stats_csv([burned_n(3)])
    assert text.splitlines() == ["run,burned,available,nonfuel,harvested,burned_pct,messages,ending_reason",
                                 "1,3,27,0,0,10.000000,0,NoFuel"]


def test_image_single_burned_cell():
    img = read_ppm(render_scar_image(np.array([[CellStatus.BURNED]]), scale=3))
    assert img.shape == (3, 3, 3)
    assert np.all(img == STATUS_PALETTE[CellStatus.BURNED])


def test_image_all_nonfuel_gray():
    img = read_ppm(render_scar_image(np.full((4, 2), CellStatus.NON_FUEL)))
    assert np.all(img == 128)


@pytest.mark.parametrize("scale", [1, 2, 5])
def test_image_dimensions(scale):
    data = render_scar_image(np.zeros((3, 7), np.int8), scale=scale)
    assert data.startswith(f"P6\n{7 * scale} {3 * scale}\n255\n".encode())
    assert read_ppm(data).shape == (3 * scale, 7 * scale, 3)


def test_image_unknown_code():
    with pytest.raises(OutputError, match="9"):
        render_scar_image(np.array([[0, 9]]))


def test_palette_csv():
    pal = parse_palette("code,r,g,b\n2,1,2,3\n102,0,0,255\n")
    img = read_ppm(render_scar_image(np.array([[2, 102]]), pal))
    assert img[0, 0].tolist() == [1, 2, 3] and img[0, 1].tolist() == [0, 0, 255]
    with pytest.raises(OutputError):
        parse_palette("code,red\n1,2\n")
    with pytest.raises(OutputError):
        parse_palette("code,r,g,b\n1,300,0,0\n")


def test_run_outputs_inventory(tmp_path):
    grid = homogeneous_landscape(6, 6, C2)
    res = run_simulation(grid, constant_weather(3), IgnitionSpec.single(1), circle_model(4.0),
                         SimConfig(max_hours=2))
    names = write_run_outputs(res, tmp_path, grid)
    assert sorted(names) == sorted(os.listdir(tmp_path))
    assert {"scar_h1.asc", "scar_h2.asc", "final_scar.asc", "final_scar.ppm"} <= set(names)
    log = (tmp_path / "ignitions.csv").read_text().splitlines()
    assert log[:2] == ["cell,period", "1,1"]


def test_probability_map_file(tmp_path):
    pmap, _ = aggregate_runs([burned_n(1, (2, 2)), burned_n(2, (2, 2))])
    write_probability_map(pmap, tmp_path / "p.asc")
    assert parse_ascii_grid((tmp_path / "p.asc").read_text()).values.tolist() == [[1.0, 0.5], [0.0, 0.0]]
