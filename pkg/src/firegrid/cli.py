"""Command-line interface: ``simulate``, ``compare`` and ``bench``."""
from __future__ import annotations

import argparse
import glob
import logging
import os
import re
import sys
import warnings

from firegrid import bench, metrics, outputs
from firegrid.engine import SimConfig, run_replications
from firegrid.landscape import LandscapeError, load_ignitions, load_landscape_folder, read_layer
from firegrid.spread import ParametricSpreadModel, SpreadError
from firegrid.weather import WeatherError, parse_weather

log = logging.getLogger("firegrid")

# Parameters echoed to config.txt, in file order.
ECHO_KEYS = ("input_folder", "weather", "ignitions", "fuel_model", "fire_period_min", "max_hours",
             "max_burn_hours_per_day", "seed", "ros_cv", "ros_threshold", "hfi_threshold",
             "threads", "scenario_draws", "ws_unit", "image_scale")


class CliError(Exception):
    """Bad invocation or input; reported as a one-line diagnostic."""


def _read(path: str, what: str) -> str:
    if not os.path.isfile(path):
        raise CliError(f"{what} not found: {path}")
    with open(path) as fh:
        return fh.read()


def _optional_float(text: str) -> float | None:
    return None if text.lower() in ("", "none") else float(text)


def _thread_list(text: str) -> list[int]:
    try:
        counts = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad thread list {text!r}") from None
    if not counts or any(k < 1 for k in counts):
        raise argparse.ArgumentTypeError(f"thread counts must be >= 1, got {text!r}")
    return counts


def read_config_echo(path: str) -> dict[str, str]:
    out = {}
    for line in _read(path, "config file").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CliError(f"{path}: expected key=value, got {line!r}")
        out[key.strip()] = value.strip()
    return out


def _resolve_simulate(args) -> dict:
    """Effective parameters: command line over config echo over defaults."""
    echo = read_config_echo(args.config) if args.config else {}
    params = {}
    for key in ECHO_KEYS:
        value = getattr(args, key)
        if value is None and key in echo:
            value = echo[key]
        params[key] = value
    if params["input_folder"] is None:
        raise CliError("--input-folder is required")
    folder = params["input_folder"]
    if params["weather"] is None:
        params["weather"] = os.path.join(folder, "Weather.csv")
    if params["fuel_model"] is None:
        params["fuel_model"] = os.path.join(folder, "fuel_model.csv")
    if params["ignitions"] is None:
        default = os.path.join(folder, "Ignitions.csv")
        params["ignitions"] = default if os.path.exists(default) else "uniform"
    defaults = {"fire_period_min": "1", "max_hours": "none", "max_burn_hours_per_day": "inf",
                "seed": "0", "ros_cv": "0", "ros_threshold": "0", "hfi_threshold": "none",
                "threads": "1", "scenario_draws": "1", "ws_unit": "km/h", "image_scale": "1"}
    for key, value in defaults.items():
        if params[key] is None:
            params[key] = value
    return {k: str(v) for k, v in params.items()}


def cmd_simulate(args) -> int:
    p = _resolve_simulate(args)
    try:
        config = SimConfig(
            fire_period_minutes=float(p["fire_period_min"]),
            max_hours=_optional_float(p["max_hours"]),
            max_burn_hours_per_day=float(p["max_burn_hours_per_day"]),
            ros_threshold=float(p["ros_threshold"]),
            hfi_threshold=_optional_float(p["hfi_threshold"]),
            ros_cv=float(p["ros_cv"]),
            seed=int(p["seed"]),
            threads=int(p["threads"]),
            scenario_draws=int(p["scenario_draws"]),
        )
        scale = int(p["image_scale"])
    except ValueError as exc:
        raise CliError(f"bad parameter: {exc}") from None

    if not os.path.isdir(p["input_folder"]):
        raise CliError(f"input folder not found: {p['input_folder']}")
    grid = _wrap(lambda: load_landscape_folder(p["input_folder"]), p["input_folder"])
    scenarios = _wrap(lambda: parse_weather(_read(p["weather"], "weather file"), p["ws_unit"]), p["weather"])
    model = _wrap(lambda: ParametricSpreadModel.from_csv(_read(p["fuel_model"], "fuel model")),
                  p["fuel_model"])
    if p["ignitions"] == "uniform":
        spec = load_ignitions(None, grid, uniform=True)
    else:
        spec = _wrap(lambda: load_ignitions(_read(p["ignitions"], "ignition file"), grid), p["ignitions"])

    results = _wrap(lambda: run_replications(grid, scenarios, spec, model, config), "simulation")

    out = args.out
    os.makedirs(out, exist_ok=True)
    if len(results) == 1:
        outputs.write_run_outputs(results[0], out, grid, scale)
    else:
        for i, r in enumerate(results, start=1):
            outputs.write_run_outputs(r, os.path.join(out, f"run_{i:03d}"), grid, scale)
        with open(os.path.join(out, "stats.csv"), "w", newline="") as fh:
            fh.write(outputs.stats_csv(results))
        pmap, _ = outputs.aggregate_runs(results)
        outputs.write_probability_map(pmap, os.path.join(out, "burn_probability.asc"), grid)
    with open(os.path.join(out, "config.txt"), "w") as fh:
        fh.write("".join(f"{k}={p[k]}\n" for k in ECHO_KEYS))
    for i, r in enumerate(results, start=1):
        log.info("run %d: %s after %d periods, %d cells burned", i, r.ending_reason.value,
                 r.periods, int(r.final_scar.sum()))
    return 0


def _wrap(fn, what: str):
    try:
        return fn()
    except CliError:
        raise
    except (LandscapeError, WeatherError, SpreadError, ValueError, OSError) as exc:
        raise CliError(f"{what}: {exc}") from None


_SCAR_RE = re.compile(r"scar_h(\d+)\.asc$")


def _scar_files(folder: str) -> dict[int, str]:
    if not os.path.isdir(folder):
        raise CliError(f"scar folder not found: {folder}")
    found = {}
    for path in glob.glob(os.path.join(folder, "scar_h*.asc")):
        m = _SCAR_RE.search(os.path.basename(path))
        if m:
            found[int(m.group(1))] = path
    if not found:
        raise CliError(f"no scar_h<H>.asc files in {folder}")
    return found


def cmd_compare(args) -> int:
    a, b = _scar_files(args.first), _scar_files(args.second)
    missing = sorted(
        [os.path.join(args.second, f"scar_h{h}.asc") for h in a.keys() - b.keys()]
        + [os.path.join(args.first, f"scar_h{h}.asc") for h in b.keys() - a.keys()])
    if missing:
        raise CliError(f"hourly scars do not match; missing {', '.join(missing)}")
    hours = sorted(a)
    xs = [_wrap(lambda h=h: read_layer(a[h]).values, a[h]) for h in hours]
    ys = [_wrap(lambda h=h: read_layer(b[h]).values, b[h]) for h in hours]
    try:
        report = metrics.evolution_report(xs, ys, literal_denominator=args.ssim_paper_literal)
    except metrics.MetricError as exc:
        raise CliError(str(exc)) from None
    # Label rows with the file hour numbers rather than their position.
    report.per_period = [(h, m, s) for h, (_, m, s) in zip(hours, report.per_period)]
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "evolution.csv"), "w", newline="") as fh:
        fh.write(report.evolution_csv())
    with open(os.path.join(args.out, "summary.csv"), "w", newline="") as fh:
        fh.write(report.summary_csv())
    m, s, d = report.final
    print(f"final hour {hours[-1]}: 1-MSE {100 * (1 - m):.4f}%  SSIM {100 * s:.4f}%  delta_norm {d:.6g}")
    return 0


def cmd_bench(args) -> int:
    cfg = SimConfig(seed=args.seed)
    make = ((lambda: bench.mosaic_instance(args.side, seed=args.seed, hours=args.hours, config=cfg))
            if args.heterogeneous else (lambda: bench.homogeneous_instance(args.side, args.hours, config=cfg)))
    os.makedirs(args.out, exist_ok=True)
    if args.weak:
        with warnings.catch_warnings():
            # Reported once below on stderr.
            warnings.simplefilter("ignore", RuntimeWarning)
            report = bench.weak_scaling(args.side, args.threads, heterogeneous=args.heterogeneous,
                                        seed=args.seed, repeats=args.repeats, hours=args.hours)
    else:
        report = bench.strong_scaling(make(), args.threads, repeats=args.repeats)
    timing = bench.profile_stages(make(), threads=args.threads[0])
    with open(os.path.join(args.out, "scaling.csv"), "w", newline="") as fh:
        fh.write(report.to_csv())
    with open(os.path.join(args.out, "timing.csv"), "w", newline="") as fh:
        fh.write(bench.timing_csv(timing))
    if report.warning:
        print(f"warning: {report.warning}", file=sys.stderr)
    for r in report.rows:
        print(f"n={r.n} threads={r.threads} wall={r.wall_ms:.1f} ms speedup={r.speedup:.3f}")
    print(f"send share {timing.send_share:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="firegrid", description="Cell-based wildfire growth simulator.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the fire growth engine")
    s.add_argument("--config", help="config.txt echo from an earlier run; flags override it")
    s.add_argument("--input-folder", dest="input_folder")
    s.add_argument("--weather", help="weather CSV (default <input-folder>/Weather.csv)")
    s.add_argument("--ignitions", help="ignition CSV/raster, or 'uniform' "
                                       "(default <input-folder>/Ignitions.csv if present)")
    s.add_argument("--fuel-model", dest="fuel_model",
                   help="spread model CSV (default <input-folder>/fuel_model.csv)")
    s.add_argument("--fire-period-min", dest="fire_period_min")
    s.add_argument("--max-hours", dest="max_hours")
    s.add_argument("--max-burn-hours-per-day", dest="max_burn_hours_per_day")
    s.add_argument("--seed")
    s.add_argument("--ros-cv", dest="ros_cv")
    s.add_argument("--ros-threshold", dest="ros_threshold")
    s.add_argument("--hfi-threshold", dest="hfi_threshold")
    s.add_argument("--threads")
    s.add_argument("--scenario-draws", dest="scenario_draws")
    s.add_argument("--ws-unit", dest="ws_unit", choices=["km/h", "m/s"])
    s.add_argument("--image-scale", dest="image_scale", help="pixels per cell in the scar image")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="compare two folders of hourly scars")
    c.add_argument("first")
    c.add_argument("second")
    c.add_argument("--out", required=True)
    c.add_argument("--ssim-paper-literal", action="store_true",
                   help="use the misprinted SSIM denominator (mean terms twice)")
    c.set_defaults(func=cmd_compare)

    b = sub.add_parser("bench", help="stage timing and scaling on synthetic instances")
    b.add_argument("--side", type=int, default=1000, help="grid side in cells (base side for --weak)")
    b.add_argument("--hours", type=int, default=48)
    b.add_argument("--threads", type=_thread_list, default=[1])
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--weak", action="store_true")
    b.add_argument("--heterogeneous", action="store_true")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LandscapeError, WeatherError, SpreadError, metrics.MetricError, outputs.OutputError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


__all__ = ["main", "build_parser", "read_config_echo"]
