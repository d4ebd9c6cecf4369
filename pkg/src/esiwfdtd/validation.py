"""Built-in physics oracles.

Each check returns a :class:`Check` carrying the measured value, the
expected value, the tolerance and the verdict.  Grids are kept small so the
whole suite runs in a few minutes on one core.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import C0, ETA0, MM
from .fdtd import CpmlConfig, Solver
from .geometry import WR28_A, WR28_B, Geometry, build_waveguide, guided_wavelength, te10_cutoff
from .geometry import PortPlane
from .mesher import GridSpec, voxelize
from .ports import PortRecord, Waveform, te10_profile
from .postproc import (
    closure_error, db10, dft, field_map, ntff, null_spacing, s11_from_records, sphere_grid,
)
from .recorders import HuygensBox, HuygensFace, HuygensRecord, ModeProbe, PlaneDft, PointProbe, dft_stride
from .simulation import PointSource, PortSource, Simulation, StopRule


@dataclass
class Check:
    name: str
    measured: float
    expected: float
    tolerance: str
    passed: bool
    unit: str = ""
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"[{flag}] {self.name}: measured {self.measured:.6g}{self.unit} "
                f"expected {self.expected:.6g}{self.unit} ({self.tolerance}){' ' + self.detail if self.detail else ''}")


# ------------------------------------------------------------- guide runs

def _guide_spec(a, b, length, d, shorted, npml=10, ny=28, nz=14):
    nx = int(round(length / d))
    n_total = nx + npml + (0 if shorted else npml)
    pml = (npml, 0 if shorted else npml, 0, 0, 0, 0)
    return GridSpec(d, a / ny, b / nz, n_total, ny, nz, (-npml * d, -a / 2, 0.0), pml)


def guide_run(shorted: bool, a=WR28_A, b=WR28_B, length=40.64, d=0.254, waveform=None, planes=(14, 54),
              stop=StopRule(max_steps=20000), fixed_steps=None, cpml=None, field_plane=False, f_map=28e9):
    """Straight guide, TE10 soft source at node plane ``planes[0]``, mode probes at the rest."""
    wf = waveform or Waveform()
    geom = build_waveguide(a, b, length, shorted=shorted)
    spec = _guide_spec(a, b, length, d, shorted)
    grid = voxelize(geom, spec)
    tpl = te10_profile(spec, -a / 2, a / 2, 0.0, b)
    probes = {f"p{i}": ModeProbe(tpl.at(i)) for i in planes[1:]}
    sim = Simulation(grid, [PortSource(tpl.at(planes[0]), wf)], probes, cpml=cpml)
    if field_plane:
        sim.probes["map"] = PlaneDft(spec, 2, spec.node_index(2, b / 2), [f_map], sim.dt)
    if fixed_steps is not None:
        stop = StopRule(max_steps=stop.max_steps, fixed_steps=fixed_steps)
    art = sim.run(stop)
    return sim, art, spec


def shorted_guide_record(length=40.64, d=0.254, field_plane=False):
    """PortRecord of a shorted lossless guide against the matched reference."""
    sim_r, art_r, spec = guide_run(False, length=length, d=d)
    sim_t, art_t, spec_t = guide_run(True, length=length, d=d, fixed_steps=3 * art_r.steps, field_plane=field_plane)
    tt, vt, tht, it = sim_t.probes["p54"].arrays()
    tr, vr, thr, ir = sim_r.probes["p54"].arrays()
    n = len(tt)
    pad = lambda v: np.concatenate([v, np.zeros(max(0, n - len(v)))])[:n]
    rec = PortRecord(tt, vt, pad(vr), times_h=tht, i_inc=pad(ir), cutoff=te10_cutoff(WR28_A),
                     converged=art_r.converged, meta={"band": (24e9, 32e9)})
    return rec, sim_t, spec_t


def check_shorted_guide(tol_db: float = 0.05) -> Check:
    rec, _, _ = shorted_guide_record()
    f = np.linspace(24e9, 32e9, 161)
    tr = s11_from_records(rec, f)
    worst = float(np.max(np.abs(tr.mag_db)))
    return Check("shorted lossless guide |S11|", worst, 0.0, f"max |dB| <= {tol_db}", worst <= tol_db, " dB")


def cutoff_from_planes(d=0.254, length=40.64):
    """TE10 cutoff from a straight-line fit of beta^2 against f^2 between two record planes."""
    wf = Waveform(f0=27e9, f_bw=14e9)
    sim, art, spec = guide_run(False, length=length, d=d, waveform=wf, planes=(14, 60, 120))
    t1, v1, _, _ = sim.probes["p60"].arrays()
    t2, v2, _, _ = sim.probes["p120"].arrays()
    f = np.linspace(23e9, 32e9, 91)
    ratio = dft(t2, v2, f) / dft(t1, v1, f)
    dx = (120 - 60) * d * MM
    beta = -np.unwrap(np.angle(ratio)) / dx
    slope, icpt = np.polyfit(f**2, beta**2, 1)
    return math.sqrt(-icpt / slope), art


def check_cutoff(tol: float = 0.01) -> Check:
    fc, _ = cutoff_from_planes()
    ref = te10_cutoff(WR28_A)
    err = abs(fc - ref) / ref
    return Check("WR-28 TE10 cutoff", fc / 1e9, ref / 1e9, f"within {tol:.0%}", err <= tol, " GHz")


# ------------------------------------------------------------- CPML

def cpml_reflection(thickness: int = 10, d: float = 0.5, cfg: CpmlConfig | None = None) -> float:
    """Normal-incidence reflection (dB) of the +x CPML on a periodic plane-wave column."""
    if cfg is None:
        cfg = CpmlConfig(thickness=max(thickness, 6))
        if thickness < 6:
            object.__setattr__(cfg, "thickness", thickness)
    wf = Waveform(f0=28e9, f_bw=16e9)
    n_in = 120
    extra = 400
    out = {}
    for name, n_int in (("short", n_in), ("long", n_in + extra)):
        p = cfg.thickness
        nx = n_int + 2 * p
        spec = GridSpec(d, d, d, nx, 8, 8, (0.0, 0.0, 0.0), (p, p, 0, 0, 0, 0))
        geom = Geometry((), PortPlane(0, 0, 1, 0, 1), spec.extent, ())
        grid = voxelize(geom, spec)
        i_src = p + 20
        i_obs = p + n_in - 20
        src = _PlaneSource(i_src, wf)
        probe = PointProbe("Ez", (i_obs, 4, 4))
        sim = Simulation(grid, [src], {"obs": probe}, cpml=cfg, periodic=(False, True, True))
        # the reflection from the long run's far CPML must not arrive inside the window
        t_window = (i_obs - i_src + 2 * (n_in + extra - 20)) * d * MM / C0 * 0.9
        n_steps = int(t_window / sim.dt)
        sim.run(StopRule(max_steps=n_steps, fixed_steps=n_steps))
        out[name] = np.asarray(probe.values)
    inc = out["long"]
    refl = out["short"] - inc
    return 20 * math.log10(np.max(np.abs(refl)) / np.max(np.abs(inc)))


class _PlaneSource(PointSource):
    """Soft Ez source on a whole x node plane (uniform plane wave)."""

    def __init__(self, i: int, waveform: Waveform, amplitude: float = 1.0):
        super().__init__("Ez", (i, slice(None), slice(None)), waveform, amplitude)


def check_cpml(limit_db: float = -60.0, thickness: int = 10) -> Check:
    r = cpml_reflection(thickness)
    return Check(f"CPML normal-incidence reflection ({thickness} cells)", r, limit_db, f"< {limit_db} dB",
                 r < limit_db, " dB")


# ------------------------------------------------------------- closed cavity

def cavity_energy(steps: int = 10000, long_steps: int = 50000, n: int = 12, d: float = 0.5):
    """Energy drift over ``steps`` and max|E| growth over ``long_steps`` in a closed PEC vacuum box.

    Returns (relative drift, ratio of late max|E| to early max|E|).
    """
    spec = GridSpec(d, d, d, n, n, n + 2, (0.0, 0.0, 0.0))
    geom = Geometry((), PortPlane(0, 0, 1, 0, 1), spec.extent, ())
    grid = voxelize(geom, spec)
    solver = Solver(grid)
    s = solver.new_state()
    s.Ez[n // 2, n // 3, n // 2] = 1.0
    s.Ez[n // 3, n // 2 + 1, n // 2 + 1] = -0.5
    w = []
    for _ in range(steps):
        h_prev = tuple(h.copy() for h in s.h)
        solver.update_h(s)
        w.append(solver.energy(s, h_prev))
        solver.update_e(s)
        s.step += 1
        if not all(np.isfinite(a).all() for a in s.e):
            return float("inf"), float("inf")
    w = np.asarray(w)
    drift = float(np.max(np.abs(w - w[0])) / w[0])
    early = max(float(np.abs(a).max()) for a in s.e)
    late = 0.0
    block = max(1, (long_steps - steps) // 10)
    for k in range(steps, long_steps):
        solver.step(s)
        if (k - steps) % block == 0:
            m = max(float(np.abs(a).max()) for a in s.e)
            if not math.isfinite(m):
                return drift, float("inf")
            late = max(late, m)
    return drift, late / early


def check_energy(tol: float = 1e-3, steps: int = 10000, long_steps: int = 50000) -> list[Check]:
    drift, growth = cavity_energy(steps, long_steps)
    return [
        Check(f"closed PEC cavity energy drift ({steps} steps)", drift, 0.0, f"< {tol:g}", drift < tol),
        Check(f"closed PEC cavity max|E| bounded ({long_steps} steps)", growth, 1.0,
              "late/early max|E| <= 10", growth <= 10.0),
    ]


# ------------------------------------------------------------- dipoles

def hertzian_record(f: float = 10e9, half_size: float | None = None, cells: int = 24) -> HuygensRecord:
    """Analytic near fields of a z-directed Hertzian dipole sampled on a cube."""
    lam = C0 / f
    k = 2 * np.pi / lam
    h = half_size or 0.5 * lam
    d = 2 * h / cells
    c = -h + d * (np.arange(cells) + 0.5)
    faces = []
    Il = 1e-3
    for ax in range(3):
        u, v = [a for a in range(3) if a != ax]
        for sign in (-1, 1):
            U, V = np.meshgrid(c, c, indexing="ij")
            P = np.zeros((3,) + U.shape)
            P[u], P[v], P[ax] = U, V, sign * h
            E, H = _hertz_fields(P, k, Il)
            E[ax] = 0
            H[ax] = 0
            faces.append(HuygensFace(ax, sign, sign * h, c.copy(), c.copy(), d, d, E[None], H[None]))
    return HuygensRecord(np.array([f]), faces)


def _hertz_fields(P, k, Il):
    x, y, z = P
    r = np.sqrt(x**2 + y**2 + z**2)
    th = np.arccos(z / r)
    ph = np.arctan2(y, x)
    g = np.exp(-1j * k * r)
    jkr = 1j * k * r
    Er = ETA0 * Il * np.cos(th) / (2 * np.pi * r**2) * (1 + 1 / jkr) * g
    Et = 1j * ETA0 * k * Il * np.sin(th) / (4 * np.pi * r) * (1 + 1 / jkr - 1 / (k * r) ** 2) * g
    Hp = 1j * k * Il * np.sin(th) / (4 * np.pi * r) * (1 + 1 / jkr) * g
    st, ct, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
    E = np.stack([Er * st * cp + Et * ct * cp, Er * st * sp + Et * ct * sp, Er * ct - Et * st])
    H = np.stack([-Hp * sp, Hp * cp, np.zeros_like(Hp)])
    return E, H


def max_directivity(rec: HuygensRecord, f: float, step_deg: float = 1.0) -> float:
    T, P, _ = sphere_grid(step_deg)
    ff = ntff(rec, f, T, P)
    return float(ff.directivity.max())


def check_hertzian(tol_db: float = 0.1) -> list[Check]:
    rec = hertzian_record()
    f = rec.freqs[0]
    dmax = float(db10(max_directivity(rec, f, 2.0)))
    ref = float(db10(1.5))
    clo = closure_error(rec, f, 1.0)
    return [
        Check("Hertzian dipole directivity", dmax, ref, f"+-{tol_db} dB", abs(dmax - ref) <= tol_db, " dBi"),
        Check("directivity closure (Hertzian)", clo, 0.0, "< 0.5%", clo < 5e-3),
    ]


def half_wave_dipole(d: float = 0.25, n_arm: int = 10, margin: int = 8, npml: int = 10):
    """Centre-fed thin-wire dipole on the grid (PEC Ez line with a one-edge gap source).

    Returns (HuygensRecord, frequency at which the wire is half a wavelength long).
    """
    n_len = 2 * n_arm + 1
    f = C0 / (2 * n_len * d * MM)
    gap_xy = margin + 4 + npml
    nxy = 2 * gap_xy
    nz = n_len + 2 * (margin + 4 + npml)
    spec = GridSpec(d, d, d, nxy, nxy, nz, (0.0, 0.0, 0.0), (npml,) * 6)
    geom = Geometry((), PortPlane(0, 0, 1, 0, 1), spec.extent, ())
    grid = voxelize(geom, spec)
    k0 = npml + margin + 4
    kc = k0 + n_arm
    line = grid.pec[2][gap_xy, gap_xy]
    line[k0:k0 + n_len] = True
    line[kc] = False
    wf = Waveform(f0=f, f_bw=0.8 * f)
    lo = (npml + 4,) * 2 + (npml + 4,)
    hi = (nxy - npml - 4,) * 2 + (nz - npml - 4,)
    sim = Simulation(grid, [PointSource("Ez", (gap_xy, gap_xy, kc), wf)], {}, cpml=CpmlConfig())
    dt = sim.dt
    hb = HuygensBox(grid, lo, hi, [f], dt, dft_stride(dt, 1.5 * f))
    sim.probes["huygens"] = hb
    sim.run(StopRule(max_steps=20000))
    return hb.record(), f


def check_half_wave(tol_db: float = 0.3) -> list[Check]:
    rec, f = half_wave_dipole()
    dmax = float(db10(max_directivity(rec, f, 2.0)))
    clo = closure_error(rec, f, 1.0)
    return [
        Check("half-wave dipole directivity (on-grid)", dmax, 2.15, f"+-{tol_db} dB", abs(dmax - 2.15) <= tol_db, " dBi"),
        Check("directivity closure (on-grid dipole)", clo, 0.0, "< 0.5%", clo < 5e-3),
    ]


# ------------------------------------------------------------- field map

def standing_wave_nulls(f: float = 28e9):
    """Null positions (mm, distance from the short) of |E| on the shorted guide's mid-plane."""
    rec, sim, spec = shorted_guide_record(field_plane=True)
    fmap = field_map(sim.probes["map"], spec, 2, WR28_B / 2, f)
    jc = int(np.argmin(np.abs(fmap.v)))  # u = x, v = y on a z-normal plane
    prof = fmap.magnitude[:, jc] ** 2
    x = fmap.u
    x_short = 40.64
    x_src = spec.nodes(0)[14]
    sel = (x > x_src + 1.0) & (x < x_short)
    nulls = null_spacing(x[sel], prof[sel], rel=0.05)
    return sorted(x_short - np.asarray(nulls))


def check_nulls(tol: float = 0.05) -> Check:
    dist = standing_wave_nulls()
    spacing = float(np.mean(np.diff(dist))) if len(dist) > 1 else float("nan")
    ref = guided_wavelength(28e9, WR28_A) / 2
    ok = len(dist) > 1 and abs(spacing - ref) / ref <= tol
    return Check("shorted-guide null spacing", spacing, ref, f"within {tol:.0%}", ok, " mm",
                 detail=f"nulls from short: {', '.join(f'{v:.2f}' for v in dist)}")


# ------------------------------------------------------------- suite

def run_suite(fast: bool = False) -> list[Check]:
    checks = [check_cutoff(), check_shorted_guide(), check_cpml()]
    checks += check_energy(steps=2000 if fast else 10000, long_steps=5000 if fast else 50000)
    checks += check_hertzian()
    checks += check_half_wave()
    checks.append(check_nulls())
    return checks
