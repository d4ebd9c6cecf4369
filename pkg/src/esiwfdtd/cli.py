"""Command line: run, validate, sweep, mesh-preview."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

from .config import ConfigError, RunConfig, dump_config, load_config, parse_config, resolve_key
from .fdtd import InstabilityError
from .fieldio import export_grid, write_volume
from .geometry import GeometryError
from .mesher import voxelize
from .pipeline import AntennaResult, analyse_antenna, mesh_for
from .ports import write_series_csv
from .postproc import field_map, write_gain_csv, write_pattern_csv

log = logging.getLogger("esiwfdtd")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO, EXIT_UNSTABLE = 0, 1, 2, 3, 4


def _prepare_out(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    probe = out / ".write_test"
    probe.write_text("")
    probe.unlink()
    return out


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else parse_config("")
    if getattr(args, "resolution_scale", None):
        cfg = cfg.with_value("mesh.resolution_scale", args.resolution_scale)
    return cfg


def write_outputs(res: AntennaResult, cfg: RunConfig, out: Path) -> dict:
    """All CSVs, binary maps and the summary of one antenna analysis."""
    (out / "resolved.cfg").write_text(dump_config(cfg))
    res.trace.write_csv(out / "s11.csv")
    write_pattern_csv(out / "pattern.csv", res.cuts)
    write_gain_csv(out / "gain_efficiency.csv", res.gain_rows)
    rec = res.record
    write_series_csv(out / "port_total.csv", rec.times, rec.a_total)
    write_series_csv(out / "port_incident.csv", rec.times, rec.a_inc)
    maps = out / "fieldmaps"
    maps.mkdir(exist_ok=True)
    spec = res.spec
    for name, probe in res.planes.items():
        coord = float(spec.nodes(2)[probe.index])
        fm = field_map(probe, spec, 2, coord, cfg.excitation.f0, tangential=(name == "slot_aperture"))
        write_volume(maps / f"{name}_absE.emv", fm.magnitude, (spec.dx, spec.dy, 0.0),
                     (fm.u[0], fm.v[0], coord), "plane-z")
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    for step, frame in sorted(res.snapshots.frames.items()):
        z = float(spec.nodes(2)[0] + (res.snapshots.index + 0.5) * spec.dz)
        write_volume(snaps / f"Ez_cavity_step{step:06d}.emv", frame, (spec.dx, spec.dy, 0.0),
                     (spec.origin[0], spec.origin[1], z), "Ez-plane")
    g0 = res.gain_at(cfg.excitation.f0)
    b = res.band
    summary = {
        "mode": res.params.mode,
        "converged": bool(res.total.converged and res.reference.converged),
        "approximate": bool(res.trace.approximate),
        "steps_total": int(res.total.steps),
        "steps_reference": int(res.reference.steps),
        "cells": int(spec.cells),
        "grid": spec.to_dict(),
        "s11_min_db": b.s11_min_db,
        "s11_min_freq_hz": b.f_min,
        "band_matched": b.matched,
        "band_lo_hz": b.f_lo if b.matched else None,
        "band_hi_hz": b.f_hi if b.matched else None,
        "fractional_bandwidth_pct": b.fractional if b.matched else None,
        "f0_hz": cfg.excitation.f0,
        "gain_f0_dbi": g0.gain_dbi,
        "directivity_f0_dbi": g0.directivity_dbi,
        "rad_eff_f0_pct": 100 * g0.rad_eff,
        "tot_eff_f0_pct": 100 * g0.tot_eff,
        "wallclock_s": round(res.total.wallclock + res.reference.wallclock, 3),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    clean = {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in summary.items()}
    (out / "summary.json").write_text(json.dumps(clean, indent=2))
    return clean


def cmd_run(args) -> int:
    cfg = _load(args)
    out = _prepare_out(args.out or cfg.output.directory)
    (out / "resolved.cfg").write_text(dump_config(cfg))
    res = analyse_antenna(cfg.params(), cfg.settings())
    summary = write_outputs(res, cfg, out)
    _print_summary(summary)
    return EXIT_OK


def _print_summary(s: dict) -> None:
    if not s["converged"]:
        print("WARNING: unconverged run (energy rule did not fire); results are approximate")
    if s["band_matched"]:
        print(f"-10 dB band: {s['band_lo_hz'] / 1e9:.3f}-{s['band_hi_hz'] / 1e9:.3f} GHz "
              f"({s['fractional_bandwidth_pct']:.2f}%)")
    else:
        print("-10 dB band: no matched band")
    if s["s11_min_db"] is not None:
        print(f"S11 minimum: {s['s11_min_db']:.2f} dB at {s['s11_min_freq_hz'] / 1e9:.3f} GHz")
    fmt = lambda v, spec, unit: "n/a" if v is None else f"{v:{spec}}{unit}"
    print(f"broadside realized gain at {s['f0_hz'] / 1e9:g} GHz: {fmt(s['gain_f0_dbi'], '.2f', ' dBi')}")
    print(f"radiation efficiency at {s['f0_hz'] / 1e9:g} GHz: {fmt(s['rad_eff_f0_pct'], '.1f', ' %')}")
    print(f"cells {s['cells']}, steps {s['steps_total']} (reference {s['steps_reference']}), "
          f"wall-clock {s['wallclock_s']:.1f} s")


def cmd_validate(args) -> int:
    from .validation import run_suite

    checks = run_suite(fast=args.fast)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_OK if not failed else EXIT_FAIL


def _parse_values(text: str) -> list:
    vals = [v.strip() for v in text.split(",") if v.strip()]
    if not vals:
        raise ConfigError("sweep needs at least one value")
    return vals


def cmd_sweep(args) -> int:
    cfg = _load(args)
    section, key = resolve_key(args.param)
    values = _parse_values(args.values)
    out = _prepare_out(args.out or cfg.output.directory)
    rows = []
    for v in values:
        sub = cfg.with_value(f"{section}.{key}", v)
        d = _prepare_out(out / f"{key}={v}")
        print(f"== {section}.{key} = {v}")
        res = analyse_antenna(sub.params(), sub.settings())
        s = write_outputs(res, sub, d)
        _print_summary(s)
        rows.append([v, s["s11_min_freq_hz"], s["s11_min_db"], s["band_lo_hz"], s["band_hi_hz"],
                     s["fractional_bandwidth_pct"], s["gain_f0_dbi"]])
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([key, "f_min_s11_hz", "s11_min_db", "band_lo_hz", "band_hi_hz", "fractional_bw_pct", "gain_f0_dbi"])
        for r in rows:
            w.writerow(["" if x is None else x for x in r])
    return EXIT_OK


def cmd_mesh_preview(args) -> int:
    cfg = _load(args)
    out = _prepare_out(args.out or cfg.output.directory)
    (out / "resolved.cfg").write_text(dump_config(cfg))
    geom, est = mesh_for(cfg.params(), cfg.settings())
    grid = voxelize(geom, est.spec)
    files = export_grid(grid, out)
    (out / "geometry.json").write_text(geom.to_json())
    info = {"grid": est.spec.to_dict(), "cells": est.spec.cells, "memory_bytes": est.memory_bytes,
            "provenance": est.provenance, "snaps": grid.snaps}
    (out / "mesh.json").write_text(json.dumps(info, indent=2))
    print(f"grid {est.spec.shape} ({est.spec.cells} cells), ~{est.memory_bytes / 2**20:.0f} MB")
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="esiwfdtd", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--threads", type=int, default=None, help="worker threads for the field update")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="INI run configuration (defaults when omitted)")
            sp.add_argument("--resolution-scale", type=float, default=None, dest="resolution_scale")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, default=argparse.SUPPRESS)

    r = sub.add_parser("run", help="reference + total run, write CSVs and summary")
    common(r)
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="run the built-in oracle suite")
    v.add_argument("--fast", action="store_true", help="shorter closed-cavity runs")
    v.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    v.set_defaults(func=cmd_validate)
    s = sub.add_parser("sweep", help="repeat run over values of one parameter")
    common(s)
    s.add_argument("--param", required=True, help="parameter name, e.g. X_S or geometry.X_S")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.set_defaults(func=cmd_sweep)
    m = sub.add_parser("mesh-preview", help="voxelize and export the material volume only")
    common(m)
    m.set_defaults(func=cmd_mesh_preview)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads:
        import numba

        numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
    try:
        return args.func(args)
    except (ConfigError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InstabilityError as exc:
        print(f"instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE


if __name__ == "__main__":
    sys.exit(main())
