"""End-to-end antenna analysis: reference run, total run, post-processing."""

from __future__ import annotations

import contextlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import MM, OMEGA_DESIGN
from .fdtd import CpmlConfig, cfl_dt
from .materials import METAL
from .geometry import AntennaParams, Geometry, Primitive, PortPlane, build_antenna, guided_wavelength, te10_cutoff
from .mesher import GridSpec, YeeGrid, estimate_cells, voxelize
from .ports import PortError, PortRecord, Waveform, te10_profile
from .postproc import (
    Band, GainRow, PatternCut, SParamTrace, bandwidth, default_freqs, gain_efficiency_vs_freq,
    incident_power, pattern_cuts, s11_from_records,
)
from .recorders import HuygensBox, HuygensRecord, ModeProbe, PlaneDft, Snapshot, dft_stride
from .simulation import PortSource, RunArtifacts, Simulation, StopRule

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    """Numerical settings of one antenna analysis (everything except geometry)."""

    f0: float = 28e9
    f_bw: float = 8e9
    f_lo: float = 24e9
    f_hi: float = 32e9
    f_step: float = 50e6
    ff_step: float = 0.5e9
    cells_per_wavelength: float = 15.0
    min_feature_cells: int = 4
    resolution_scale: float = 1.0
    safety: float = 0.99
    max_steps: int = 40000
    decay_db: float = -60.0
    check_every: int = 50
    cpml: CpmlConfig = CpmlConfig()
    source_offset: int = 4
    huygens_gap: int = 4
    snapshot_count: int = 4
    angle_step: float = 1.0
    allow_unconverged: bool = False

    def s11_freqs(self) -> np.ndarray:
        return default_freqs(self.f_lo, self.f_hi, self.f_step)

    def ff_freqs(self) -> np.ndarray:
        return default_freqs(self.f_lo, self.f_hi, self.ff_step)


@dataclass
class AntennaResult:
    params: AntennaParams
    geometry: Geometry
    spec: GridSpec
    grid: YeeGrid
    record: PortRecord
    trace: SParamTrace
    band: Band
    huygens: HuygensRecord
    p_inc_ff: np.ndarray
    gain_rows: list[GainRow]
    cuts: list[PatternCut]
    planes: dict
    snapshots: Snapshot
    total: RunArtifacts
    reference: RunArtifacts
    provenance: dict = field(default_factory=dict)

    def gain_at(self, f: float) -> GainRow:
        return min(self.gain_rows, key=lambda r: abs(r.freq - f))


def reference_spec(spec: GridSpec, port: PortPlane, pad: int = 2) -> GridSpec:
    """Same x nodes and time step as ``spec``; y/z cropped to the guide plus ``pad`` cells."""
    j0, j1 = spec.node_index(1, port.y0), spec.node_index(1, port.y1)
    k0, k1 = spec.node_index(2, port.z0), spec.node_index(2, port.z1)
    ny = j1 - j0 + 2 * pad
    nz = k1 - k0 + 2 * pad
    origin = (spec.origin[0], spec.nodes(1)[j0] - pad * spec.dy, spec.nodes(2)[k0] - pad * spec.dz)
    return GridSpec(spec.dx, spec.dy, spec.dz, spec.nx, max(ny, 8), max(nz, 8), origin,
                    (spec.pml[0], spec.pml[1], 0, 0, 0, 0))


def reference_geometry(spec: GridSpec, port: PortPlane) -> Geometry:
    """Straight matched guide running through both x absorbing layers."""
    x0, _, _, x1, _, _ = spec.extent
    y0, y1, z0, z1 = port.y0, port.y1, port.z0, port.z1
    prims = (
        Primitive((x0, y0, z0, x1, y0, z1), METAL, 2, "side_wall_lo"),
        Primitive((x0, y1, z0, x1, y1, z1), METAL, 2, "side_wall_hi"),
        Primitive((x0, y0, z0, x1, y1, z0), METAL, 2, "bottom"),
        Primitive((x0, y0, z1, x1, y1, z1), METAL, 2, "top"),
    )
    e = spec.extent
    return Geometry(prims, port, tuple(e), ("x0", "x1"), info={"mode": "reference_guide"})


def port_planes(geom: Geometry, spec: GridSpec, source_offset: int = 4) -> tuple[int, int]:
    """Node indices of the injection and record planes in the feed guide."""
    i_src = spec.pml[0] + source_offset
    lam_g = guided_wavelength(geom.f0, geom.port.a)
    i_rec = i_src + int(round(lam_g / 2 / spec.dx))
    x_rec = spec.nodes(0)[i_rec]
    slot = geom.info.get("slot")
    if slot is not None and x_rec + lam_g / 2 > slot[0] + 1e-9:
        raise PortError(
            f"record plane at x = {x_rec:.3f} mm is closer than lambda_g/2 to the slot at x = {slot[0]:.3f} mm"
        )
    return i_src, i_rec


def huygens_indices(geom: Geometry, spec: GridSpec, gap: int = 4) -> tuple[tuple, tuple]:
    """Box corners midway between the board and the inner CPML faces, >= ``gap`` cells from both."""
    board = geom.info["board"]
    inner = spec.interior_extent()
    lo, hi = [], []
    for ax in range(3):
        p_lo = spec.pml[2 * ax]
        p_hi = spec.pml[2 * ax + 1]
        n = spec.n[ax]
        b_lo = spec.node_index(ax, board[ax])
        b_hi = spec.node_index(ax, board[ax + 3])
        c_lo = spec.node_index(ax, 0.5 * (board[ax] + inner[ax]))
        c_hi = spec.node_index(ax, 0.5 * (board[ax + 3] + inner[ax + 3]))
        c_lo = min(c_lo, b_lo - 1)
        c_hi = max(c_hi, b_hi + 1)
        if c_lo < p_lo + gap or c_hi > n - p_hi - gap:
            raise ValueError(f"air margin along {'xyz'[ax]} too small for a Huygens box {gap} cells off the CPML")
        lo.append(c_lo)
        hi.append(c_hi)
    return tuple(lo), tuple(hi)


def _make_geometry(params: AntennaParams, s: Settings) -> Geometry:
    return build_antenna(params, s.f_lo, s.f_hi, s.f0)


def mesh_for(params: AntennaParams, s: Settings = Settings()):
    geom = _make_geometry(params, s)
    est = estimate_cells(geom, s.f_hi, s.cells_per_wavelength, s.min_feature_cells, s.cpml.thickness,
                         s.resolution_scale)
    return geom, est


def analyse_antenna(params: AntennaParams, s: Settings = Settings(), progress=None) -> AntennaResult:
    geom, est = mesh_for(params, s)
    spec = est.spec
    grid = voxelize(geom, spec, OMEGA_DESIGN)
    dt = cfl_dt(spec, s.safety)
    wf = Waveform(s.f0, s.f_bw)
    wf.check_band()
    port = geom.port
    i_src, i_rec = port_planes(geom, spec, s.source_offset)
    stop = StopRule(max_steps=s.max_steps, decay_db=s.decay_db, check_every=s.check_every)
    ff_freqs = s.ff_freqs()
    stride = dft_stride(dt, s.f_hi)

    # reference run: cropped matched guide, same x nodes and dt
    rspec = reference_spec(spec, port)
    rgrid = voxelize(reference_geometry(rspec, port), rspec)
    rtpl = te10_profile(rspec, port.y0, port.y1, port.z0, port.z1)
    rprobe = ModeProbe(rtpl.at(i_rec))
    ref = Simulation(rgrid, [PortSource(rtpl.at(i_src), wf)], {"port": rprobe}, dt=dt, cpml=s.cpml)
    ref_art = ref.run(stop)
    log.info("reference run: %d steps, converged=%s", ref_art.steps, ref_art.converged)

    # total run
    tpl = te10_profile(spec, port.y0, port.y1, port.z0, port.z1)
    lo, hi = huygens_indices(geom, spec, s.huygens_gap)
    b = port.b
    guide_rect = (port.y0 - spec.dy, port.z0 - spec.dz, port.y1 + spec.dy, port.z1 + spec.dz)
    hbox = HuygensBox(grid, lo, hi, ff_freqs, dt, stride, exclude=[("x0", guide_rect)])
    hbox.check_air()
    z_slot = geom.info["slot_z"]
    planes = {
        "cavity_mid": PlaneDft(spec, 2, spec.node_index(2, port.z0 + b / 2), [s.f0], dt, stride, "cavity_mid"),
        "patch_substrate_mid": PlaneDft(spec, 2, spec.node_index(2, geom.info["patch_z"] - params.h_patch / 2),
                                        [s.f0], dt, stride, "patch_substrate_mid"),
        "slot_aperture": PlaneDft(spec, 2, spec.node_index(2, z_slot), [s.f0], dt, stride, "slot_aperture"),
        "above_slot": PlaneDft(spec, 2, spec.node_index(2, z_slot) + 1, [s.f0], dt, stride, "above_slot"),
    }
    n_pulse = int(math.ceil(wf.t_end / dt))
    snap_steps = [int(round(n_pulse * (k + 1) / s.snapshot_count)) for k in range(s.snapshot_count)]
    snaps = Snapshot(2, planes["cavity_mid"].index, snap_steps, "Ez", "Ez_cavity_mid")
    probes = {"port": ModeProbe(tpl.at(i_rec)), "huygens": hbox, "snapshots": snaps, **planes}
    sim = Simulation(grid, [PortSource(tpl.at(i_src), wf)], probes, dt=dt, cpml=s.cpml)
    log.info("total run: %s cells, dt = %.4g s", spec.cells, dt)
    tot_art = sim.run(stop)
    log.info("total run: %d steps, converged=%s, %.1f s", tot_art.steps, tot_art.converged, tot_art.wallclock)

    # bring the reference series to the same length
    if ref.state.step < tot_art.steps:
        ref.advance_to(tot_art.steps)
    tt, vt, tht, it = probes["port"].arrays()
    tr, vr, thr, ir = rprobe.arrays()
    n = len(tt)
    x_rec = spec.nodes(0)[i_rec]
    rec = PortRecord(
        tt, vt, vr[:n], "TE10", x_rec, (port.x - x_rec) * MM, thr[:n], ir[:n], it,
        cutoff=te10_cutoff(port.a), converged=tot_art.converged and ref_art.converged,
        meta={"band": (s.f0 - s.f_bw / 2, s.f0 + s.f_bw / 2), "dt": dt, "source_x": spec.nodes(0)[i_src]},
    )
    trace = s11_from_records(rec, s.s11_freqs(), allow_unconverged=s.allow_unconverged)
    band = bandwidth(trace)
    hrec = hbox.record()
    # a truncated run may hold no signal at all; its figures come out NaN rather than raising
    quiet = np.errstate(divide="ignore", invalid="ignore") if not rec.converged else contextlib.nullcontext()
    with quiet:
        p_inc = incident_power(rec, ff_freqs)
        rows = gain_efficiency_vs_freq(hrec, p_inc, trace)
        i0 = int(np.argmin(np.abs(ff_freqs - s.f0)))
        s0 = complex(np.interp(s.f0, trace.freqs, trace.s11.real)
                     + 1j * np.interp(s.f0, trace.freqs, trace.s11.imag))
        cuts = pattern_cuts(hrec, s.f0, float(p_inc[i0]), s0, s.angle_step)
    return AntennaResult(
        params, geom, spec, grid, rec, trace, band, hrec, p_inc, rows, cuts, planes, snaps, tot_art, ref_art,
        {"cells": est.provenance, "memory_bytes": est.memory_bytes, "dft_stride": stride,
         "port_planes": (i_src, i_rec), "huygens": (lo, hi)},
    )
