"""Command-line surface: scene tooling, link tracing, campaigns, studies.

Every command that writes results also writes a run manifest with the
config hash, seed, tool version, and output list; rerunning with the same
config and seed reproduces byte-identical payloads (the manifest timestamp
aside). Exit codes: 0 success, 1 usage or config error, 2 validation
findings.
"""
from __future__ import annotations

import argparse
import datetime
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .radio import AntennaPattern, LinkBudget, PATTERN_22DEG, load_mcs_csv, tx_power_for_eirp
from .raytrace import RayTracer, TraceConfig, relative_power, write_path_dump
from .radio import best_beam
from .scene import (
    ObstructionBox,
    Scene,
    SceneError,
    dump_scene,
    generate_manhattan,
    load_scene,
    validate_topology,
)
from .scenariolab import insert_obstruction, obstruction_study
from .simnet import (
    SimConfig,
    SimulationReport,
    compare_antennas,
    config_to_dict,
    order_percentile,
    run_campaign,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Serialization with fixed precision
# ---------------------------------------------------------------------------

def _num(x, nd=2):
    """Round for byte-stable JSON; non-finite becomes None."""
    if x is None or not math.isfinite(x):
        return None
    return round(float(x), nd)


def _fmt(x, nd=2) -> str:
    if x is None:
        return ""
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return f"{x:.{nd}f}"


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode()


def _config_hash(config_dict: dict) -> str:
    canon = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _write_outputs(outdir: Path, files: dict, config_dict: dict, seed,
                   extras: dict | None = None) -> None:
    """Flush all outputs at once, then the manifest; nothing partial."""
    outdir.mkdir(parents=True, exist_ok=True)
    for name, payload in files.items():
        (outdir / name).write_bytes(payload)
    manifest = {
        "tool": "raycell",
        "version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config_hash": _config_hash(config_dict),
        "seed": seed,
        "outputs": sorted(files),
    }
    if extras:
        manifest["extras"] = extras
    (outdir / "manifest.json").write_bytes(_json_bytes(manifest))


def _report_summary(report: SimulationReport) -> dict:
    inter = report.interference_cdf_dbm
    sinr = report.sinr_cdf_db
    return {
        "config": report.config_echo,
        "users_total": len(report.records),
        "outage_pct": _num(report.outage_pct),
        "unsatisfied_pct": _num(report.unsatisfied_pct),
        "mean_se_bps_hz": _num(report.mean_se, 4),
        "cell_edge_se_bps_hz": _num(report.cell_edge_se, 4),
        "mean_cell_load": _num(report.mean_load, 4),
        "max_cell_load": _num(report.max_load, 4),
        "interference_dbm": {
            "p10": _num(order_percentile(inter, 10.0)),
            "p50": _num(order_percentile(inter, 50.0)),
            "p90": _num(report.p90_interference_dbm),
            "mean": _num(report.mean_interference_dbm),
        },
        "sinr_db": {
            "p10": _num(order_percentile(sinr, 10.0)),
            "p50": _num(order_percentile(sinr, 50.0)),
            "p90": _num(order_percentile(sinr, 90.0)),
            "mean": _num(report.mean_sinr_db),
        },
        "mean_received_power_dbm": _num(report.mean_received_power_dbm),
        "all_converged": report.all_converged,
    }


def _users_csv(report: SimulationReport) -> bytes:
    buf = io.StringIO()
    buf.write("iteration,user,x,y,cell,beam_az_deg,snr_db,interference_dbm,"
              "sinr_db,mcs,rate_mbps,served_mbps,se_bps_hz,outage,unsatisfied\n")
    for it, r in report.records:
        buf.write(",".join([
            str(it), str(r.user_index), _fmt(r.x, 3), _fmt(r.y, 3),
            str(r.cell_index), _fmt(r.steer_az_deg, 2), _fmt(r.snr_db, 2),
            _fmt(r.interference_dbm, 2), _fmt(r.sinr_db, 2),
            "" if r.mcs_index is None else str(r.mcs_index),
            _fmt(r.rate_mbps, 1), _fmt(r.served_mbps, 1),
            _fmt(r.se_bps_hz, 4), str(int(r.outage)), str(int(r.unsatisfied)),
        ]) + "\n")
    return buf.getvalue().encode()


def _cdf_csv(samples: np.ndarray) -> bytes:
    buf = io.StringIO()
    buf.write("value,cum_fraction\n")
    n = len(samples)
    for i, v in enumerate(np.sort(samples)):
        buf.write(f"{_fmt(float(v), 2)},{(i + 1) / n:.6f}\n")
    return buf.getvalue().encode()


def _report_files(report: SimulationReport, prefix: str = "") -> dict:
    return {
        f"{prefix}report.json": _json_bytes(_report_summary(report)),
        f"{prefix}users.csv": _users_csv(report),
        f"{prefix}cdf_interference.csv": _cdf_csv(report.interference_cdf_dbm),
        f"{prefix}cdf_sinr.csv": _cdf_csv(report.sinr_cdf_db),
    }


# ---------------------------------------------------------------------------
# Campaign config document
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "frequency", "bandwidth_mhz", "eirp_dbm", "pattern", "pattern_b",
    "noise_figure_db", "impairment_db", "rx_gain_dbi", "demand_mbps",
    "density_per_km2", "iterations", "seed", "trace", "mcs_table_path",
    "workers",
}
_PATTERN_KEYS = {"max_gain_dbi", "hpbw_deg", "steering_resolution_deg", "floor_db"}
_TRACE_KEYS = {"max_reflection_order", "enable_edge_diffraction", "max_paths",
               "reflection_loss_db", "min_path_power_rel_db",
               "combine_reflection_diffraction"}


def _parse_pattern(raw: dict, problems: list, locus: str) -> AntennaPattern | None:
    for key in raw:
        if key not in _PATTERN_KEYS:
            problems.append(f"{locus}: unknown key '{key}'")
    try:
        return AntennaPattern(
            max_gain_dbi=float(raw["max_gain_dbi"]),
            hpbw_az_deg=float(raw["hpbw_deg"]),
            steering_resolution_deg=(float(raw["steering_resolution_deg"])
                                     if "steering_resolution_deg" in raw else None),
            floor_db=float(raw.get("floor_db", 40.0)))
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"{locus}: {exc}")
        return None


def load_campaign_config(text: str, base_dir: Path | None = None):
    """Parse a campaign config JSON; returns (SimConfig, pattern_b or None).

    All problems are reported together.
    """
    problems: list = []
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON (line {exc.lineno}: {exc.msg})")
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    for key in raw:
        if key not in _CONFIG_KEYS:
            problems.append(f"unknown config key '{key}'")
    pattern = PATTERN_22DEG
    if "pattern" in raw:
        parsed = _parse_pattern(raw["pattern"], problems, "pattern")
        if parsed:
            pattern = parsed
    pattern_b = None
    if "pattern_b" in raw:
        pattern_b = _parse_pattern(raw["pattern_b"], problems, "pattern_b")
    trace = None
    if "trace" in raw:
        for key in raw["trace"]:
            if key not in _TRACE_KEYS:
                problems.append(f"trace: unknown key '{key}'")
        try:
            trace = TraceConfig(**{k: v for k, v in raw["trace"].items()
                                   if k in _TRACE_KEYS})
        except (TypeError, ValueError) as exc:
            problems.append(f"trace: {exc}")
    try:
        budget = LinkBudget(
            bandwidth_mhz=float(raw.get("bandwidth_mhz", 200.0)),
            noise_figure_db=float(raw.get("noise_figure_db", 7.0)),
            impairment_db=float(raw.get("impairment_db", 8.0)),
            eirp_dbm=float(raw.get("eirp_dbm", 40.0)))
    except ValueError as exc:
        problems.append(str(exc))
        budget = LinkBudget()
    config = SimConfig(
        frequency_ghz=float(raw.get("frequency", 60.0)),
        budget=budget,
        pattern=pattern,
        rx_gain_dbi=float(raw.get("rx_gain_dbi", 5.0)),
        demand_mbps=float(raw.get("demand_mbps", 15.0)),
        density_per_km2=float(raw.get("density_per_km2", 200.0)),
        iterations=int(raw.get("iterations", 30)),
        seed=int(raw.get("seed", 1)),
        trace=trace,
        workers=int(raw.get("workers", 1)))
    if "mcs_table_path" in raw:
        path = Path(raw["mcs_table_path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            config.mcs_table = load_mcs_csv(path.read_text(), budget)
        except (OSError, ValueError) as exc:
            problems.append(f"mcs_table_path: {exc}")
    problems.extend(config.validate())
    if problems:
        raise UsageError("invalid config: " + "; ".join(problems))
    return config, pattern_b


def _load_scene_file(path: str) -> Scene:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read scene file: {exc}")
    try:
        return load_scene(text)
    except SceneError as exc:
        raise UsageError("scene file invalid: " + "; ".join(exc.problems))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_scene_generate(args) -> int:
    blocks = args.blocks.lower().split("x")
    if len(blocks) != 2:
        raise UsageError("--blocks must look like 3x3")
    tree_spec = None
    if args.trees:
        parts = [float(v) for v in args.trees.split(",")]
        if len(parts) != 3:
            raise UsageError("--trees must be spacing,radius,height")
        tree_spec = {"spacing": parts[0], "radius": parts[1], "height": parts[2]}
    scene = generate_manhattan(
        int(blocks[0]), int(blocks[1]), args.street, args.height,
        tree_spec=tree_spec, seed=args.seed, block_size=args.block_size,
        cells=args.cells)
    Path(args.output).write_text(dump_scene(scene))
    print(f"wrote {args.output}: {len(scene.buildings)} buildings, "
          f"{len(scene.cells)} cells, {len(scene.breaklines)} breaklines")
    return 0


def _cmd_scene_validate(args) -> int:
    scene = _load_scene_file(args.scene)
    issues = validate_topology(scene)
    errors = [i for i in issues if i.level == "error"]
    for issue in issues:
        print(f"{issue.level}: {issue.message}")
    print(f"{len(errors)} violations")
    return 2 if errors else 0


def _cmd_trace(args) -> int:
    scene = _load_scene_file(args.scene)
    if args.cell < 0 or args.cell >= len(scene.cells):
        raise UsageError(f"cell {args.cell} does not exist "
                         f"(scene has {len(scene.cells)})")
    rx = [float(v) for v in args.rx.split(",")]
    if len(rx) == 2:
        rx.append(2.0)
    if len(rx) != 3:
        raise UsageError("--rx must be x,y or x,y,z")
    cell = scene.cells[args.cell]
    tx3 = np.array([cell.position[0], cell.position[1], cell.height])
    config = TraceConfig(frequency_ghz=args.freq)
    paths = RayTracer(scene, config).trace(tx3, np.asarray(rx))
    buf = io.StringIO()
    write_path_dump(paths, buf)
    rel = relative_power(paths, args.freq)
    budget = LinkBudget()
    summary = {
        "cell": args.cell,
        "rx": [round(v, 3) for v in rx],
        "frequency": args.freq,
        "paths": len(paths),
        "relative_power_db": _num(rel),
    }
    if paths:
        steer, power = best_beam(paths, tx_power_for_eirp(budget.eirp_dbm, PATTERN_22DEG),
                                 PATTERN_22DEG, 5.0, budget.impairment_db)
        summary["best_beam_az_deg"] = _num(steer)
        summary["best_beam_power_dbm"] = _num(power)
    outdir = Path(args.output)
    _write_outputs(outdir, {
        "trace.csv": buf.getvalue().encode(),
        "trace_summary.json": _json_bytes(summary),
    }, summary, seed=None)
    print(f"paths: {len(paths)}  relative power: {_fmt(rel)} dB")
    return 0


def _apply_overrides(config: SimConfig, args) -> SimConfig:
    if getattr(args, "density", None) is not None:
        config.density_per_km2 = args.density
    if getattr(args, "iterations", None) is not None:
        config.iterations = args.iterations
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    workers = getattr(args, "workers", None)
    if workers is None:
        workers = os.environ.get("RAYCELL_WORKERS")
        workers = int(workers) if workers else None
    if workers is not None:
        config.workers = workers
    problems = config.validate()
    if problems:
        raise UsageError("invalid config: " + "; ".join(problems))
    return config


def _cmd_simulate(args) -> int:
    scene = _load_scene_file(args.scene)
    config, _ = load_campaign_config(Path(args.config).read_text(),
                                     base_dir=Path(args.config).parent)
    config = _apply_overrides(config, args)
    report = run_campaign(scene, config)
    files = _report_files(report)
    _write_outputs(Path(args.output), files, config_to_dict(config), config.seed)
    print(f"simulated {report.iterations} iterations, "
          f"{len(report.records)} user samples -> {args.output}")
    return 0


def _cmd_compare(args) -> int:
    scene = _load_scene_file(args.scene)
    config, pattern_b = load_campaign_config(Path(args.config).read_text(),
                                             base_dir=Path(args.config).parent)
    config = _apply_overrides(config, args)
    if pattern_b is None:
        raise UsageError("compare needs a pattern_b entry in the config")
    comparison = compare_antennas(scene, config, config.pattern, pattern_b)
    doc = {
        "pattern_a": {"max_gain_dbi": config.pattern.max_gain_dbi,
                      "hpbw_deg": config.pattern.hpbw_az_deg,
                      "tx_power_dbm": _num(comparison.tx_power_a_dbm)},
        "pattern_b": {"max_gain_dbi": pattern_b.max_gain_dbi,
                      "hpbw_deg": pattern_b.hpbw_az_deg,
                      "tx_power_dbm": _num(comparison.tx_power_b_dbm)},
        "a": _report_summary(comparison.report_a),
        "b": _report_summary(comparison.report_b),
        "deltas_b_minus_a": {k: _num(v) for k, v in comparison.deltas.items()},
    }
    files = {"compare.json": _json_bytes(doc)}
    files.update(_report_files(comparison.report_a, prefix="a_"))
    files.update(_report_files(comparison.report_b, prefix="b_"))
    extras = {"tx_power_a_dbm": _num(comparison.tx_power_a_dbm),
              "tx_power_b_dbm": _num(comparison.tx_power_b_dbm)}
    _write_outputs(Path(args.output), files, config_to_dict(config),
                   config.seed, extras=extras)
    print("compared antennas: " + json.dumps(doc["deltas_b_minus_a"]))
    return 0


def _cmd_obstruct(args) -> int:
    scene = _load_scene_file(args.scene)
    config, _ = load_campaign_config(Path(args.config).read_text(),
                                     base_dir=Path(args.config).parent)
    config = _apply_overrides(config, args)
    parts = [float(v) for v in args.box.split(",")]
    if len(parts) == 2:
        parts.append(0.0)
    if len(parts) != 3:
        raise UsageError("--box must be x,y or x,y,azimuth")
    dims = [float(v) for v in args.box_size.split("x")]
    if len(dims) != 3:
        raise UsageError("--box-size must be LxWxH")
    box = ObstructionBox(center=np.array(parts[:2]), azimuth_deg=parts[2],
                         length=dims[0], width=dims[1], height=dims[2])
    report = obstruction_study(scene, box, args.street, config)
    doc = {
        "street": args.street,
        "box": {"center": [round(v, 3) for v in parts[:2]],
                "azimuth_deg": parts[2],
                "length": dims[0], "width": dims[1], "height": dims[2]},
        "users_per_run": report.n_users,
        "baseline_outage_pct": _num(report.baseline_outage_pct),
        "obstructed_outage_pct": _num(report.obstructed_outage_pct),
        "outage_delta_pct": _num(report.outage_delta_pct),
        "baseline_cell_edge_sinr_db": _num(report.baseline_cell_edge_sinr_db),
        "obstructed_cell_edge_sinr_db": _num(report.obstructed_cell_edge_sinr_db),
        "cell_edge_sinr_delta_db": _num(report.cell_edge_sinr_delta_db),
    }
    _write_outputs(Path(args.output), {"obstruct.json": _json_bytes(doc)},
                   config_to_dict(config), config.seed)
    print(json.dumps(doc, indent=2))
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="raycell",
                     description="Ray-based mmWave small-cell network simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    scene_p = sub.add_parser("scene", help="scene tooling")
    scene_sub = scene_p.add_subparsers(dest="scene_command", required=True)

    gen = scene_sub.add_parser("generate", help="write a synthetic grid city")
    gen.add_argument("--blocks", required=True, help="grid size, e.g. 3x3")
    gen.add_argument("--street", type=float, required=True, help="street width [m]")
    gen.add_argument("--height", type=float, required=True, help="building height [m]")
    gen.add_argument("--block-size", type=float, default=80.0, help="block side [m]")
    gen.add_argument("--trees", help="tree rows: spacing,radius,height")
    gen.add_argument("--cells", default="all", choices=["all", "alternate", "none"])
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output", required=True)
    gen.set_defaults(func=_cmd_scene_generate)

    val = scene_sub.add_parser("validate", help="check LOS-neighbor topology")
    val.add_argument("scene")
    val.set_defaults(func=_cmd_scene_validate)

    tr = sub.add_parser("trace", help="dump multipath components for one link")
    tr.add_argument("--scene", required=True)
    tr.add_argument("--cell", type=int, required=True)
    tr.add_argument("--rx", required=True, help="x,y[,z]")
    tr.add_argument("--freq", type=float, default=60.0)
    tr.add_argument("-o", "--output", required=True, help="output directory")
    tr.set_defaults(func=_cmd_trace)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo campaign")
    sim.add_argument("--scene", required=True)
    sim.add_argument("--config", required=True)
    sim.add_argument("--density", type=float)
    sim.add_argument("--iterations", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--workers", type=int)
    sim.add_argument("-o", "--output", required=True, help="output directory")
    sim.set_defaults(func=_cmd_simulate)

    cmp_p = sub.add_parser("compare", help="paired campaign under two antennas")
    cmp_p.add_argument("--scene", required=True)
    cmp_p.add_argument("--config", required=True)
    cmp_p.add_argument("--density", type=float)
    cmp_p.add_argument("--iterations", type=int)
    cmp_p.add_argument("--seed", type=int)
    cmp_p.add_argument("--workers", type=int)
    cmp_p.add_argument("-o", "--output", required=True)
    cmp_p.set_defaults(func=_cmd_compare)

    obs = sub.add_parser("obstruct", help="in-street obstruction study")
    obs.add_argument("--scene", required=True)
    obs.add_argument("--config", required=True)
    obs.add_argument("--street", type=int, required=True, help="breakline index")
    obs.add_argument("--box", required=True, help="x,y[,azimuth]")
    obs.add_argument("--box-size", default="12x2.5x3", help="LxWxH [m]")
    obs.add_argument("--density", type=float)
    obs.add_argument("--iterations", type=int)
    obs.add_argument("--seed", type=int)
    obs.add_argument("-o", "--output", required=True)
    obs.set_defaults(func=_cmd_obstruct)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
