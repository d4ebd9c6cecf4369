"""S-parameters, bandwidth, near-to-far-field transform, gain and field maps."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import C0, ETA0
from .ports import PortRecord
from .recorders import HuygensRecord

log = logging.getLogger(__name__)


class PostprocError(ValueError):
    pass


def default_freqs(f_lo: float = 24e9, f_hi: float = 32e9, step: float = 50e6) -> np.ndarray:
    n = int(round((f_hi - f_lo) / step)) + 1
    return f_lo + step * np.arange(n)


def dft(times, values, freqs, dt: float | None = None) -> np.ndarray:
    """X(f) = sum_n x(t_n) exp(-2j pi f t_n) dt on a uniform time base."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if dt is None:
        if len(times) < 2:
            raise PostprocError("need at least two samples (or an explicit dt)")
        dt = times[1] - times[0]
    out = np.empty(len(freqs), dtype=complex)
    # chunk over frequency to bound memory on long records
    for s in range(0, len(freqs), 32):
        f = freqs[s:s + 32]
        out[s:s + 32] = np.exp(-2j * np.pi * f[:, None] * times[None, :]) @ values * dt
    return out


# ------------------------------------------------------------------ S11

@dataclass
class SParamTrace:
    freqs: np.ndarray
    s11: np.ndarray
    approximate: bool = False

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.s11 = np.asarray(self.s11, dtype=complex)
        if np.any(np.diff(self.freqs) <= 0):
            raise PostprocError("frequencies must be strictly increasing")
        if self.freqs.shape != self.s11.shape:
            raise PostprocError("freqs and s11 must have the same length")

    @property
    def mag_db(self) -> np.ndarray:
        return 20 * np.log10(np.maximum(np.abs(self.s11), 1e-300))

    def is_passive(self, tol: float = 1e-6) -> bool:
        return bool(np.all(np.abs(self.s11) <= 1 + tol))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["freq_hz", "re", "im", "mag_db"])
            for f, s, m in zip(self.freqs, self.s11, self.mag_db):
                w.writerow([f"{f:.6f}", f"{s.real:.12e}", f"{s.imag:.12e}", f"{m:.6f}"])

    @classmethod
    def read_csv(cls, path) -> "SParamTrace":
        d = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(d[:, 0], d[:, 1] + 1j * d[:, 2])


def s11_from_records(rec: PortRecord, freqs, allow_unconverged: bool = False) -> SParamTrace:
    """S11 = DFT(a_total - a_inc) / DFT(a_inc), moved to the reference plane."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if np.any(np.diff(freqs) <= 0):
        raise PostprocError("frequencies must be strictly increasing")
    if not rec.converged and not allow_unconverged:
        raise PostprocError("run did not converge; pass allow_unconverged to get an approximate S11")
    band = rec.meta.get("band")
    if band is not None:
        lo, hi = band
        if freqs[0] < lo * (1 - 1e-9) or freqs[-1] > hi * (1 + 1e-9):
            raise PostprocError(f"frequencies must lie in the excitation band {lo / 1e9:g}-{hi / 1e9:g} GHz")
    dt = rec.meta.get("dt")
    inc = dft(rec.times, rec.a_inc, freqs, dt)
    refl = dft(rec.times, np.asarray(rec.a_total) - np.asarray(rec.a_inc), freqs, dt)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = refl / inc
    if rec.ref_shift:
        beta = guide_beta(freqs, rec.cutoff)
        s = s * np.exp(2j * beta * rec.ref_shift)
    return SParamTrace(freqs, s, approximate=not rec.converged)


def guide_beta(freqs, cutoff: float) -> np.ndarray:
    k = 2 * np.pi * np.asarray(freqs) / C0
    kc = 2 * np.pi * cutoff / C0
    return np.sqrt(np.maximum(k**2 - kc**2, 0.0))


def incident_power(rec: PortRecord, freqs) -> np.ndarray:
    """Incident modal power spectrum 0.5*Re(V I*) from the reference run."""
    if rec.i_inc is None or rec.times_h is None:
        raise PostprocError("port record carries no modal current")
    dt = rec.meta.get("dt")
    v = dft(rec.times, rec.a_inc, freqs, dt)
    i = dft(rec.times_h, rec.i_inc, freqs, dt)
    return 0.5 * np.real(v * np.conj(i))


@dataclass(frozen=True)
class Band:
    matched: bool
    f_lo: float = float("nan")
    f_hi: float = float("nan")
    fractional: float = float("nan")
    f_min: float = float("nan")
    s11_min_db: float = float("nan")
    open_edge: bool = False

    @property
    def centre(self) -> float:
        return 0.5 * (self.f_lo + self.f_hi)


def fractional_bandwidth(f_lo: float, f_hi: float) -> float:
    return (f_hi - f_lo) / (0.5 * (f_hi + f_lo)) * 100


def bandwidth(trace: SParamTrace, threshold_db: float = -10.0) -> Band:
    """Contiguous band around the deepest minimum with |S11| <= threshold."""
    m = trace.mag_db
    f = trace.freqs
    if not np.isfinite(m).any():
        return Band(False)
    i0 = int(np.nanargmin(m))
    if m[i0] > threshold_db:
        return Band(False, f_min=float(f[i0]), s11_min_db=float(m[i0]))
    lo = i0
    while lo > 0 and m[lo - 1] <= threshold_db:
        lo -= 1
    hi = i0
    while hi < len(m) - 1 and m[hi + 1] <= threshold_db:
        hi += 1

    def cross(a, b):
        # linear interpolation in dB between samples a (above) and b (below)
        t = (threshold_db - m[a]) / (m[b] - m[a])
        return float(f[a] + t * (f[b] - f[a]))

    open_edge = lo == 0 or hi == len(m) - 1
    f_lo = float(f[0]) if lo == 0 else cross(lo - 1, lo)
    f_hi = float(f[-1]) if hi == len(m) - 1 else cross(hi + 1, hi)
    return Band(True, f_lo, f_hi, fractional_bandwidth(f_lo, f_hi), float(f[i0]), float(m[i0]), open_edge)


# ------------------------------------------------------------------ far field

def _unit(theta, phi):
    st, ct, sp, cp = np.sin(theta), np.cos(theta), np.sin(phi), np.cos(phi)
    r = np.stack([st * cp, st * sp, ct])
    th = np.stack([ct * cp, ct * sp, -st])
    ph = np.stack([-sp, cp, np.zeros_like(sp)])
    return r, th, ph


def _face_currents(face, fi):
    """J = n x H and M = -n x E on one face at frequency index ``fi`` (3, nu, nv)."""
    n = np.zeros(3)
    n[face.normal] = face.sign
    E = face.E[fi]
    H = face.H[fi]
    J = np.cross(n[:, None, None], H, axis=0)
    M = -np.cross(n[:, None, None], E, axis=0)
    if face.mask is not None and face.mask.any():
        J = J * ~face.mask
        M = M * ~face.mask
    return J, M


def radiation_vectors(rec: HuygensRecord, freq: float, theta, phi):
    """N and L (3, ndir) for flattened direction arrays ``theta``/``phi`` (rad)."""
    fi = rec.at(freq)
    k = 2 * np.pi * rec.freqs[fi] / C0
    theta = np.ravel(theta)
    phi = np.ravel(phi)
    r, _, _ = _unit(theta, phi)
    N = np.zeros((3, theta.size), dtype=complex)
    L = np.zeros((3, theta.size), dtype=complex)
    for face in rec.faces:
        J, M = _face_currents(face, fi)
        u, v = face.axes
        w = face.normal
        pu = np.exp(1j * k * np.outer(r[u], face.cu))  # (ndir, nu)
        pv = np.exp(1j * k * np.outer(r[v], face.cv))  # (ndir, nv)
        pw = np.exp(1j * k * r[w] * face.w) * face.du * face.dv
        for c in (u, v):
            for src, dst in ((J, N), (M, L)):
                t = src[c] @ pv.T  # (nu, ndir)
                dst[c] += pw * np.einsum("du,ud->d", pu, t)
    return N, L


@dataclass
class FarField:
    """Far-zone field of one frequency on a set of directions.

    ``e_theta``/``e_phi`` are r*E with the exp(-jkr) factor removed (V).
    ``p_rad`` is the radiated power through the Huygens box, ``p_inc`` the
    incident port power (None when there is no port).
    """

    freq: float
    theta: np.ndarray
    phi: np.ndarray
    e_theta: np.ndarray
    e_phi: np.ndarray
    p_rad: float
    p_inc: float | None = None
    s11: complex | None = None
    meta: dict = field(default_factory=dict)

    @property
    def U(self) -> np.ndarray:
        return (np.abs(self.e_theta) ** 2 + np.abs(self.e_phi) ** 2) / (2 * ETA0)

    @property
    def directivity(self) -> np.ndarray:
        return 4 * np.pi * self.U / self.p_rad

    @property
    def realized_gain(self) -> np.ndarray:
        if self.p_inc is None:
            raise PostprocError("realized gain needs the incident power")
        return 4 * np.pi * self.U / self.p_inc

    @property
    def accepted_power(self) -> float | None:
        if self.p_inc is None or self.s11 is None:
            return None
        return self.p_inc * (1 - abs(self.s11) ** 2)

    @property
    def radiation_efficiency(self) -> float:
        pa = self.accepted_power
        if pa is None or pa <= 0:
            return float("nan")
        return self.p_rad / pa

    def co_cross(self, ref: str):
        """Ludwig-3 co/cross components for an x- or y-polarised reference."""
        c, s = np.cos(self.phi), np.sin(self.phi)
        ex = self.e_theta * c - self.e_phi * s
        ey = self.e_theta * s + self.e_phi * c
        return (ex, ey) if ref == "x" else (ey, ex)


def ntff(rec: HuygensRecord, freq: float, theta, phi, p_rad: float | None = None,
         p_inc: float | None = None, s11: complex | None = None) -> FarField:
    """Far field from the equivalent surface currents J = n x H, M = -n x E."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    shape = np.broadcast(theta, phi).shape
    th_b, ph_b = np.broadcast_arrays(theta, phi)
    fi = rec.at(freq)
    k = 2 * np.pi * rec.freqs[fi] / C0
    N, L = radiation_vectors(rec, freq, th_b, ph_b)
    _, uth, uph = _unit(th_b.ravel(), ph_b.ravel())
    Nt, Np = (N * uth).sum(0), (N * uph).sum(0)
    Lt, Lp = (L * uth).sum(0), (L * uph).sum(0)
    e_th = -1j * k / (4 * np.pi) * (Lp + ETA0 * Nt)
    e_ph = 1j * k / (4 * np.pi) * (Lt - ETA0 * Np)
    if p_rad is None:
        p_rad = box_flux(rec, freq)
    return FarField(float(rec.freqs[fi]), th_b.reshape(shape), ph_b.reshape(shape),
                    e_th.reshape(shape), e_ph.reshape(shape), float(p_rad), p_inc, s11)


def box_flux(rec: HuygensRecord, freq: float) -> float:
    """Net outward power 0.5*Re(E x H*) . n through the Huygens box."""
    fi = rec.at(freq)
    total = 0.0
    for face in rec.faces:
        E, H = face.E[fi], face.H[fi]
        S = np.cross(E, np.conj(H), axis=0)[face.normal]
        keep = np.ones(S.shape) if face.mask is None else ~face.mask
        total += face.sign * 0.5 * np.real((S * keep).sum()) * face.du * face.dv
    return float(total)


def sphere_grid(step_deg: float = 1.0):
    """Midpoint theta samples and uniform phi samples covering the sphere."""
    d = math.radians(step_deg)
    nt = int(round(math.pi / d))
    npf = int(round(2 * math.pi / d))
    th = (np.arange(nt) + 0.5) * (math.pi / nt)
    ph = np.arange(npf) * (2 * math.pi / npf)
    T, P = np.meshgrid(th, ph, indexing="ij")
    return T, P, (math.pi / nt) * (2 * math.pi / npf)


def sphere_power(rec: HuygensRecord, freq: float, step_deg: float = 1.0) -> float:
    """Integral of U over the sphere (midpoint rule)."""
    T, P, dA = sphere_grid(step_deg)
    ff = ntff(rec, freq, T, P, p_rad=1.0)
    return float((ff.U * np.sin(T)).sum() * dA)


def closure_error(rec: HuygensRecord, freq: float, step_deg: float = 1.0) -> float:
    """Relative mismatch between the sphere integral of U and the box flux."""
    p = box_flux(rec, freq)
    return abs(sphere_power(rec, freq, step_deg) - p) / abs(p)


def cut_angles(step_deg: float = 1.0):
    """Signed theta from -180 to 180 deg; negative theta maps to phi + 180."""
    n = int(round(360 / step_deg))
    return np.linspace(-180.0, 180.0, n + 1)


def pattern_cut(rec: HuygensRecord, freq: float, phi_deg: float, step_deg: float = 1.0, **kw):
    """Far field along one cut, indexed by signed theta (deg)."""
    t = cut_angles(step_deg)
    theta = np.radians(np.abs(t))
    phi = np.where(t < 0, math.radians(phi_deg + 180), math.radians(phi_deg))
    return t, ntff(rec, freq, theta, phi, **kw)


def broadside_reference(rec: HuygensRecord, freq: float) -> str:
    """Polarisation ('x' or 'y') of the dominant broadside E."""
    ff = ntff(rec, freq, np.array([0.0]), np.array([0.0]), p_rad=1.0)
    # at theta = 0, phi = 0: theta-hat = x, phi-hat = y
    return "x" if abs(ff.e_theta[0]) >= abs(ff.e_phi[0]) else "y"


def pattern_peak_theta(t_deg: np.ndarray, values: np.ndarray, window_deg: float = 90.0) -> float:
    """Signed theta of the maximum of ``values`` over the upper hemisphere cut."""
    sel = np.abs(t_deg) <= window_deg
    return float(t_deg[sel][np.argmax(values[sel])])


def cut_symmetry_db(t_deg: np.ndarray, values_db: np.ndarray, window_deg: float = 90.0) -> float:
    """Largest |P(theta) - P(-theta)| (dB) over |theta| <= window."""
    worst = 0.0
    lookup = {round(t, 6): v for t, v in zip(t_deg, values_db)}
    for t, v in zip(t_deg, values_db):
        if 0 < t <= window_deg and round(-t, 6) in lookup:
            worst = max(worst, abs(v - lookup[round(-t, 6)]))
    return worst


def db10(x) -> np.ndarray:
    return 10 * np.log10(np.maximum(np.asarray(x, dtype=float), 1e-300))


@dataclass
class GainRow:
    freq: float
    gain_dbi: float
    directivity_dbi: float
    rad_eff: float
    tot_eff: float
    s11: complex
    p_rad: float
    p_inc: float
    flagged: bool = False


def gain_efficiency_vs_freq(rec: HuygensRecord, p_inc, trace: SParamTrace, freqs=None) -> list[GainRow]:
    """Broadside realized gain and radiation/total efficiency per Huygens frequency."""
    freqs = rec.freqs if freqs is None else np.atleast_1d(freqs)
    p_inc = np.atleast_1d(p_inc)
    rows = []
    for n, f in enumerate(freqs):
        rec.at(f)
        s = complex(np.interp(f, trace.freqs, trace.s11.real) + 1j * np.interp(f, trace.freqs, trace.s11.imag))
        pi = float(p_inc[n] if p_inc.size == len(freqs) else p_inc[0])
        p_rad = box_flux(rec, f)
        ff = ntff(rec, f, np.array([0.0]), np.array([0.0]), p_rad=p_rad, p_inc=pi, s11=s)
        pa = ff.accepted_power
        flagged = pa is None or not pa > 0
        e_rad = float("nan") if flagged else ff.radiation_efficiency
        g = float(ff.realized_gain[0])
        rows.append(GainRow(float(f), float(db10(g)), float(db10(ff.directivity[0])), e_rad,
                            e_rad * (1 - abs(s) ** 2) if not flagged else float("nan"), s, p_rad, pi, flagged))
    return rows


def write_gain_csv(path, rows: list[GainRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "gain_dbi", "rad_eff_pct", "tot_eff_pct"])
        for r in rows:
            w.writerow([f"{r.freq:.6f}", f"{r.gain_dbi:.6f}",
                        "nan" if r.flagged else f"{100 * r.rad_eff:.6f}",
                        "nan" if r.flagged else f"{100 * r.tot_eff:.6f}"])


@dataclass
class PatternCut:
    plane: str
    phi_deg: float
    theta_deg: np.ndarray
    e_co_db: np.ndarray
    e_cross_db: np.ndarray
    directivity_dbi: np.ndarray
    realized_gain_dbi: np.ndarray
    freq: float


def pattern_cuts(rec: HuygensRecord, freq: float, p_inc: float, s11: complex, step_deg: float = 1.0,
                 planes=(("H", 0.0), ("E", 90.0))) -> list[PatternCut]:
    """phi = 0 and phi = 90 deg cuts, co/cross (Ludwig-3) normalised to the co-pol peak."""
    p_rad = box_flux(rec, freq)
    ref = broadside_reference(rec, freq)
    cuts = []
    ffs = []
    for name, phi in planes:
        t, ff = pattern_cut(rec, freq, phi, step_deg, p_rad=p_rad, p_inc=p_inc, s11=s11)
        ffs.append((name, phi, t, ff))
    peak = max(np.max(np.abs(ff.co_cross(ref)[0])) for _, _, _, ff in ffs)
    for name, phi, t, ff in ffs:
        co, cx = ff.co_cross(ref)
        cuts.append(PatternCut(
            name, phi, t,
            20 * np.log10(np.maximum(np.abs(co), 1e-300) / peak),
            20 * np.log10(np.maximum(np.abs(cx), 1e-300) / peak),
            db10(ff.directivity), db10(ff.realized_gain), ff.freq,
        ))
    return cuts


def write_pattern_csv(path, cuts: list[PatternCut]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "plane", "theta_deg", "e_co_db", "e_cross_db", "directivity_dbi", "realized_gain_dbi"])
        for c in cuts:
            for i, t in enumerate(c.theta_deg):
                w.writerow([f"{c.freq:.6f}", c.plane, f"{t:.3f}", f"{c.e_co_db[i]:.6f}", f"{c.e_cross_db[i]:.6f}",
                            f"{c.directivity_dbi[i]:.6f}", f"{c.realized_gain_dbi[i]:.6f}"])


# ------------------------------------------------------------------ field maps

@dataclass
class FieldMap:
    """|E| (and the complex components when available) on one plane."""

    axis: int
    coord: float
    u: np.ndarray
    v: np.ndarray
    magnitude: np.ndarray
    phasor: np.ndarray | None = None
    freq: float | None = None
    step: int | None = None


def field_map(source, spec, axis: int, coord: float, freq: float | None = None,
              tangential: bool = False) -> FieldMap:
    """Field magnitude on the node plane nearest ``coord`` (mm).

    ``source`` is either a :class:`~esiwfdtd.recorders.PlaneDft` probe
    (frequency-domain map at ``freq``) or a field state (instantaneous map).
    With ``tangential`` the normal component is left out, which on an
    aperture plane gives the aperture field alone.
    """
    from .recorders import PlaneDft, collocate_e_on_plane

    lo, hi = spec.extent[axis], spec.extent[axis + 3]
    if not lo - 1e-9 <= coord <= hi + 1e-9:
        raise PostprocError(f"plane {'xyz'[axis]} = {coord} mm lies outside the domain [{lo}, {hi}]")
    k = spec.node_index(axis, coord)
    u, v = [a for a in range(3) if a != axis]
    cu, cv = spec.centres(u), spec.centres(v)
    if isinstance(source, PlaneDft):
        if source.axis != axis or source.index != k:
            raise PostprocError("requested plane was not recorded")
        freqs = source.dft.freqs
        fi = int(np.argmin(np.abs(freqs - (freqs[0] if freq is None else freq))))
        ph = source.acc[fi]
        comps = [c for c in range(3) if not (tangential and c == axis)]
        mag = np.sqrt((np.abs(ph[comps]) ** 2).sum(0))
        return FieldMap(axis, float(spec.nodes(axis)[k]), cu, cv, mag, ph, float(freqs[fi]))
    f = collocate_e_on_plane(source, axis, k)
    comps = [c for c in range(3) if not (tangential and c == axis)]
    return FieldMap(axis, float(spec.nodes(axis)[k]), cu, cv, np.sqrt((f[comps] ** 2).sum(0)), None, None,
                    getattr(source, "step", None))


def local_max_in(fmap: FieldMap, box) -> bool:
    """True when the largest |E| inside ``box`` (u0, v0, u1, v1) exceeds every value on a ring around it."""
    u0, v0, u1, v1 = box
    inside = (fmap.u[:, None] >= u0) & (fmap.u[:, None] <= u1) & (fmap.v[None, :] >= v0) & (fmap.v[None, :] <= v1)
    if not inside.any():
        raise PostprocError("box contains no samples")
    du = fmap.u[1] - fmap.u[0]
    dv = fmap.v[1] - fmap.v[0]
    w = max(u1 - u0, v1 - v0)
    ring = ((fmap.u[:, None] >= u0 - w) & (fmap.u[:, None] <= u1 + w)
            & (fmap.v[None, :] >= v0 - w) & (fmap.v[None, :] <= v1 + w)) & ~(
        (fmap.u[:, None] >= u0 - du) & (fmap.u[:, None] <= u1 + du)
        & (fmap.v[None, :] >= v0 - dv) & (fmap.v[None, :] <= v1 + dv))
    return bool(fmap.magnitude[inside].max() > fmap.magnitude[ring].max())


def null_spacing(positions: np.ndarray, profile: np.ndarray, rel: float = 0.2) -> list[float]:
    """Positions of local minima of a 1-D |E| profile below ``rel`` times its max (parabolic refinement)."""
    p = np.asarray(profile)
    x = np.asarray(positions)
    out = []
    thr = rel * p.max()
    for i in range(1, len(p) - 1):
        if p[i] <= p[i - 1] and p[i] < p[i + 1] and p[i] < thr:
            a, b, c = p[i - 1], p[i], p[i + 1]
            den = a - 2 * b + c
            off = 0.5 * (a - c) / den if den else 0.0
            out.append(float(x[i] + off * (x[1] - x[0])))
    return out
