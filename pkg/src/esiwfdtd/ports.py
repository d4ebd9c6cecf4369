"""Waveguide-port excitation and modal recording."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import C0, MM
from .mesher import GridSpec


class PortError(ValueError):
    pass


@dataclass(frozen=True)
class Waveform:
    """Gaussian-modulated sinusoid.

    ``f_bw`` is the full width between the -20 dB points of the amplitude
    spectrum.  ``delay`` defaults to five Gaussian widths.
    """

    f0: float = 28e9
    f_bw: float = 8e9
    delay: float | None = None

    def __post_init__(self):
        if self.f0 <= 0 or self.f_bw <= 0:
            raise ValueError("f0 and f_bw must be positive")
        if self.delay is not None and self.delay < 4 * self.tau:
            raise ValueError("delay must be at least four Gaussian widths")

    @property
    def sigma_f(self) -> float:
        return (self.f_bw / 2) / math.sqrt(2 * math.log(10))

    @property
    def tau(self) -> float:
        return 1 / (2 * math.pi * self.sigma_f)

    @property
    def t0(self) -> float:
        return 5 * self.tau if self.delay is None else self.delay

    @property
    def t_end(self) -> float:
        """Time after which the pulse is negligible (mirror of the turn-on)."""
        return 2 * self.t0

    def __call__(self, t):
        s = np.asarray(t, dtype=float) - self.t0
        return np.exp(-0.5 * (s / self.tau) ** 2) * np.sin(2 * np.pi * self.f0 * s)

    def spectrum(self, f):
        """Analytic Fourier transform magnitude, normalised to 1 at f0."""
        f = np.asarray(f, dtype=float)
        g = lambda x: np.exp(-0.5 * (x / self.sigma_f) ** 2)
        return np.abs(g(f - self.f0) - g(f + self.f0)) / abs(g(0.0) - g(2 * self.f0))

    def check_band(self, f_max: float | None = None, floor_db: float = -60.0) -> None:
        """Raise if the spectrum at DC or at ``f_max`` (default 2*f0) exceeds ``floor_db``."""
        f_max = 2 * self.f0 if f_max is None else f_max
        lim = 10 ** (floor_db / 20)
        for f in (0.0, f_max):
            if self.spectrum(f) > lim:
                raise ValueError(f"waveform content at {f / 1e9:g} GHz above {floor_db} dB")


@dataclass
class ModeTemplate:
    """Transverse E template of one waveguide mode on a node plane normal to x.

    ``ey``/``ez`` are sampled at the Ey/Ez positions inside the port
    rectangle (index windows ``jy, ky`` and ``jz, kz``).  The template has unit
    norm under the discrete overlap sum(e.e) dA.
    """

    mode: tuple[int, int]
    jy: slice
    ky: slice
    jz: slice
    kz: slice
    ey: np.ndarray
    ez: np.ndarray
    dA: float
    a: float
    b: float
    plane: int = 0

    def at(self, plane: int) -> "ModeTemplate":
        return ModeTemplate(self.mode, self.jy, self.ky, self.jz, self.kz, self.ey, self.ez, self.dA, self.a, self.b, plane)

    def overlap(self, other: "ModeTemplate") -> float:
        return float(((self.ey * other.ey).sum() + (self.ez * other.ez).sum()) * self.dA)

    def cutoff(self) -> float:
        m, n = self.mode
        return C0 / 2 * math.sqrt((m / self.a) ** 2 + (n / self.b) ** 2)

    def beta(self, f):
        """Continuous-space phase constant (rad/m) of the mode, NaN below cutoff."""
        f = np.asarray(f, dtype=float)
        k2 = (2 * np.pi * f / C0) ** 2 - (2 * np.pi * self.cutoff() / C0) ** 2
        return np.sqrt(np.where(k2 > 0, k2, np.nan))


def te_profile(m: int, n: int, spec: GridSpec, y0: float, y1: float, z0: float, z1: float,
               min_cells: int = 10) -> ModeTemplate:
    """TE_mn transverse-E template for a guide whose walls sit at y0, y1, z0, z1 (mm)."""
    j0, j1 = spec.node_index(1, y0), spec.node_index(1, y1)
    k0, k1 = spec.node_index(2, z0), spec.node_index(2, z1)
    na, nb = j1 - j0, k1 - k0
    if na < min_cells:
        raise PortError(f"port under-resolved: {na} cells across the broad wall (need >= {min_cells})")
    if nb < 1:
        raise PortError("port has no cells across the narrow wall")
    dy, dz = spec.dy * MM, spec.dz * MM
    a, b = na * dy, nb * dz
    # Ez lives at (y node, z centre); Ey at (y centre, z node)
    yn = np.arange(j0, j1 + 1) - j0
    zc = np.arange(k0, k1) - k0 + 0.5
    yc = np.arange(j0, j1) - j0 + 0.5
    zn = np.arange(k0, k1 + 1) - k0
    ez = (m / a) * np.sin(m * np.pi * yn[:, None] / na) * np.cos(n * np.pi * zc[None, :] / nb)
    ey = -(n / b) * np.cos(m * np.pi * yc[:, None] / na) * np.sin(n * np.pi * zn[None, :] / nb)
    ez = ez * np.ones((1, nb))
    dA = dy * dz
    norm = math.sqrt(((ey**2).sum() + (ez**2).sum()) * dA)
    if norm == 0:
        raise PortError(f"TE{m}{n} has no transverse field")
    return ModeTemplate(
        (m, n), slice(j0, j1), slice(k0, k1 + 1), slice(j0, j1 + 1), slice(k0, k1),
        ey / norm, ez / norm, dA, a, b,
    )


def te10_profile(spec: GridSpec, y0: float, y1: float, z0: float, z1: float) -> ModeTemplate:
    """Fundamental-mode template: sin(pi*y'/a) across the broad wall, uniform across the narrow one."""
    return te_profile(1, 0, spec, y0, y1, z0, z1)


def record_mode(state, template: ModeTemplate, plane: int | None = None) -> float:
    """Overlap of the tangential E field on node plane ``plane`` with the template."""
    i = template.plane if plane is None else plane
    v = (state.Ez[i, template.jz, template.kz] * template.ez).sum()
    if template.mode[1]:
        v += (state.Ey[i, template.jy, template.ky] * template.ey).sum()
    return float(v * template.dA)


def record_current(state, template: ModeTemplate, plane: int | None = None) -> float:
    """Modal current: overlap of x-hat x H (interpolated onto the node plane) with the template."""
    i = template.plane if plane is None else plane
    hy = 0.5 * (state.Hy[i - 1, template.jz, template.kz] + state.Hy[i, template.jz, template.kz])
    v = -(hy * template.ez).sum()
    if template.mode[1]:
        hz = 0.5 * (state.Hz[i - 1, template.jy, template.ky] + state.Hz[i, template.jy, template.ky])
        v += (hz * template.ey).sum()
    return float(v * template.dA)


def inject(state, template: ModeTemplate, waveform: Waveform, step: int | None = None,
           amplitude: float = 1.0, plane: int | None = None):
    """Soft source: add template * waveform(t) to the port-plane E edges."""
    i = template.plane if plane is None else plane
    n = state.step if step is None else step
    w = amplitude * float(waveform(n * state.dt))
    if w != 0.0:
        state.Ez[i, template.jz, template.kz] += w * template.ez
        if template.mode[1]:
            state.Ey[i, template.jy, template.ky] += w * template.ey
    return state


@dataclass
class PortRecord:
    """Modal voltage series from the total and reference runs at one plane.

    ``i_inc`` holds the modal current of the reference run sampled at
    ``times_h``; it is used to get the incident power spectrum.
    ``ref_shift`` (m) is the distance from the record plane to the reference
    plane the S-parameters are quoted at.
    """

    times: np.ndarray
    a_total: np.ndarray
    a_inc: np.ndarray
    mode: str = "TE10"
    plane: float = 0.0
    ref_shift: float = 0.0
    times_h: np.ndarray | None = None
    i_inc: np.ndarray | None = None
    i_total: np.ndarray | None = None
    cutoff: float = 0.0
    converged: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.a_total) != len(self.times) or len(self.a_inc) != len(self.times):
            raise PortError("total and incident series must share the time base")

    def shifted(self, dt_shift: float) -> "PortRecord":
        th = None if self.times_h is None else self.times_h + dt_shift
        return PortRecord(self.times + dt_shift, self.a_total, self.a_inc, self.mode, self.plane,
                          self.ref_shift, th, self.i_inc, self.i_total, self.cutoff, self.converged, self.meta)


def write_series_csv(path, times, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "amplitude"])
        for t, v in zip(times, values):
            w.writerow([repr(float(t)), repr(float(v))])


def read_series_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]
