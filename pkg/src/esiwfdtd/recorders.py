"""Probes sampled during the time loop.

Every probe has ``after_h(state, t)`` and ``after_e(state, t)`` hooks.  The
loop calls them right after the corresponding half step, with ``t`` the
physical time of the freshly updated field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import MM
from .mesher import GridSpec, YeeGrid
from .ports import ModeTemplate, record_current, record_mode


class Probe:
    def after_h(self, state, t: float) -> None:
        pass

    def after_e(self, state, t: float) -> None:
        pass


class ModeProbe(Probe):
    """Modal voltage (every E step) and modal current (every H step) at one plane."""

    def __init__(self, template: ModeTemplate, name: str = "port"):
        self.template = template
        self.name = name
        self.times: list[float] = []
        self.values: list[float] = []
        self.times_h: list[float] = []
        self.currents: list[float] = []

    def after_h(self, state, t):
        self.times_h.append(t)
        self.currents.append(record_current(state, self.template))

    def after_e(self, state, t):
        self.times.append(t)
        self.values.append(record_mode(state, self.template))

    def arrays(self):
        return (np.asarray(self.times), np.asarray(self.values),
                np.asarray(self.times_h), np.asarray(self.currents))


class PointProbe(Probe):
    def __init__(self, component: str, index: tuple[int, int, int]):
        self.component = component
        self.index = index
        self.times: list[float] = []
        self.values: list[float] = []

    def after_e(self, state, t):
        if self.component.startswith("E"):
            self.times.append(t)
            self.values.append(float(getattr(state, self.component)[self.index]))

    def after_h(self, state, t):
        if self.component.startswith("H"):
            self.times.append(t)
            self.values.append(float(getattr(state, self.component)[self.index]))


class _Dft:
    """Running DFT X(f) = sum x(t) exp(-2j pi f t) dt_sample over strided samples."""

    def __init__(self, freqs, dt: float, stride: int):
        self.freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
        self.stride = max(1, int(stride))
        self.weight = self.stride * dt
        self._count_e = 0
        self._count_h = 0

    def phase(self, t):
        return np.exp(-2j * np.pi * self.freqs * t) * self.weight


def dft_stride(dt: float, f_hi: float, oversample: float = 6.0) -> int:
    """Largest sample stride keeping ``oversample`` samples per period at ``f_hi``."""
    return max(1, int(1.0 / (oversample * f_hi * dt)))


class PlaneDft(Probe):
    """Frequency-domain E phasors on a node plane, collocated at face centres.

    ``axis`` is the plane normal and ``index`` its node index.  The result is
    a complex array (nf, 3, n_u, n_v) for the in-plane face centres.
    """

    def __init__(self, spec: GridSpec, axis: int, index: int, freqs, dt: float, stride: int = 1, name: str = ""):
        self.spec = spec
        self.axis = axis
        self.index = index
        self.name = name or f"{'xyz'[axis]}={index}"
        self.dft = _Dft(freqs, dt, stride)
        u, v = [a for a in range(3) if a != axis]
        self.shape = (spec.n[u], spec.n[v])
        self.acc = np.zeros((len(self.dft.freqs), 3) + self.shape, dtype=complex)
        self._n = 0

    def after_e(self, state, t):
        self._n += 1
        if self._n % self.dft.stride:
            return
        f = collocate_e_on_plane(state, self.axis, self.index)
        self.acc += self.dft.phase(t)[:, None, None, None] * f[None]

    def coords(self):
        u, v = [a for a in range(3) if a != self.axis]
        return self.spec.centres(u), self.spec.centres(v)


class Snapshot(Probe):
    """Time-domain copies of one E component on a node plane at chosen steps."""

    def __init__(self, axis: int, index: int, steps, component: str = "Ez", name: str = ""):
        self.axis = axis
        self.index = index
        self.steps = set(int(s) for s in steps)
        self.component = component
        self.name = name or f"{component}_{'xyz'[axis]}{index}"
        self.frames: dict[int, np.ndarray] = {}

    def after_e(self, state, t):
        if state.step in self.steps:
            arr = getattr(state, self.component)
            sl = [slice(None)] * 3
            sl[self.axis] = min(self.index, arr.shape[self.axis] - 1)
            self.frames[state.step] = arr[tuple(sl)].copy()


def collocate_e_on_plane(state, axis: int, k: int) -> np.ndarray:
    """E components averaged onto the face centres of node plane ``k`` normal to ``axis``.

    Returns (3, n_u, n_v).  The normal component is the mean of the two edges
    straddling the plane (one-sided at the domain boundary).
    """
    comps = []
    for c, arr in enumerate(state.e):
        sl = [slice(None)] * 3
        if c == axis:
            lo = max(k - 1, 0)
            hi = min(k, arr.shape[axis] - 1)
            sl[axis] = lo
            a = arr[tuple(sl)]
            sl[axis] = hi
            a = 0.5 * (a + arr[tuple(sl)])
        else:
            sl[axis] = k
            a = arr[tuple(sl)]
        # a is 2-D over the two remaining axes; average nodal directions onto centres
        rem = [ax for ax in range(3) if ax != axis]
        for pos, ax in enumerate(rem):
            if ax != c:  # component is nodal along this in-plane axis
                a = 0.5 * (np.take(a, range(0, a.shape[pos] - 1), axis=pos) + np.take(a, range(1, a.shape[pos]), axis=pos))
        comps.append(a)
    return np.stack(comps)


# ------------------------------------------------------------- Huygens surface

@dataclass
class HuygensFace:
    """Samples of one face of the Huygens box.

    ``normal`` is the outward unit normal axis (0..2) with ``sign`` +-1.
    ``u``/``v`` are the in-plane axes (increasing order), ``cu``/``cv`` the
    sample coordinates (m), ``w`` the plane coordinate (m).  ``E``/``H``
    hold complex phasors (nf, 3, n_u, n_v) of the tangential fields (the
    normal entry is zero).  ``mask`` marks samples to leave out.
    """

    normal: int
    sign: int
    w: float
    cu: np.ndarray
    cv: np.ndarray
    du: float
    dv: float
    E: np.ndarray
    H: np.ndarray
    mask: np.ndarray | None = None

    @property
    def axes(self):
        return [a for a in range(3) if a != self.normal]


@dataclass
class HuygensRecord:
    freqs: np.ndarray
    faces: list[HuygensFace]

    def at(self, f: float) -> int:
        i = int(np.argmin(np.abs(self.freqs - f)))
        if not np.isclose(self.freqs[i], f, rtol=1e-9, atol=1.0):
            raise KeyError(f"no Huygens phasors accumulated at {f / 1e9:g} GHz")
        return i


class HuygensBox(Probe):
    """Running DFT of tangential E and H on the six faces of a node-aligned box.

    ``lo``/``hi`` are node indices of the box corners.  ``exclude`` is a list
    of (face_name, (u0, v0, u1, v1)) rectangles in mm whose samples are
    dropped (e.g. where the feed waveguide crosses the surface).
    """

    def __init__(self, grid: YeeGrid, lo, hi, freqs, dt: float, stride: int = 1, exclude=()):
        self.grid = grid
        spec = grid.spec
        self.spec = spec
        self.lo = tuple(int(v) for v in lo)
        self.hi = tuple(int(v) for v in hi)
        for a in range(3):
            if not self.hi[a] - self.lo[a] >= 2:
                raise ValueError("Huygens box must span at least two cells per axis")
            if self.lo[a] < 1 or self.hi[a] > spec.n[a] - 1:
                raise ValueError("Huygens box must lie strictly inside the grid")
        self.dft = _Dft(freqs, dt, stride)
        nf = len(self.dft.freqs)
        self.faces_def = []
        for ax in range(3):
            for sign, idx in ((-1, self.lo[ax]), (1, self.hi[ax])):
                self.faces_def.append((ax, sign, idx))
        self.accE = [np.zeros((nf, 3) + self._face_shape(ax), dtype=complex) for ax, _, _ in self.faces_def]
        self.accH = [np.zeros((nf, 3) + self._face_shape(ax), dtype=complex) for ax, _, _ in self.faces_def]
        self.masks = [np.zeros(self._face_shape(ax), dtype=bool) for ax, _, _ in self.faces_def]
        names = {(ax, s): f"{'xyz'[ax]}{0 if s < 0 else 1}" for ax, s, _ in self.faces_def}
        for face_name, rect in exclude:
            for n, (ax, s, idx) in enumerate(self.faces_def):
                if names[(ax, s)] != face_name:
                    continue
                u, v = [a for a in range(3) if a != ax]
                cu = spec.centres(u)[self.lo[u]:self.hi[u]]
                cv = spec.centres(v)[self.lo[v]:self.hi[v]]
                mu = (cu >= rect[0]) & (cu <= rect[2])
                mv = (cv >= rect[1]) & (cv <= rect[3])
                self.masks[n] |= mu[:, None] & mv[None, :]
        self._ne = 0
        self._nh = 0

    def _face_shape(self, ax):
        u, v = [a for a in range(3) if a != ax]
        return (self.hi[u] - self.lo[u], self.hi[v] - self.lo[v])

    def _window(self, ax):
        u, v = [a for a in range(3) if a != ax]
        return u, v, slice(self.lo[u], self.hi[u]), slice(self.lo[v], self.hi[v])

    def after_e(self, state, t):
        self._ne += 1
        if self._ne % self.dft.stride:
            return
        ph = self.dft.phase(t)[:, None, None, None]
        for n, (ax, sign, idx) in enumerate(self.faces_def):
            f = collocate_e_on_plane(state, ax, idx)
            u, v, su, sv = self._window(ax)
            f = f[:, su, sv].copy()
            f[ax] = 0.0
            self.accE[n] += ph * f[None]

    def after_h(self, state, t):
        self._nh += 1
        if self._nh % self.dft.stride:
            return
        ph = self.dft.phase(t)[:, None, None, None]
        for n, (ax, sign, idx) in enumerate(self.faces_def):
            f = collocate_h_on_plane(state, ax, idx)
            u, v, su, sv = self._window(ax)
            f = f[:, su, sv].copy()
            f[ax] = 0.0
            self.accH[n] += ph * f[None]

    def check_air(self) -> None:
        """Raise if any kept sample touches a non-vacuum cell or a PEC edge."""
        g = self.grid
        for n, (ax, sign, idx) in enumerate(self.faces_def):
            u, v, su, sv = self._window(ax)
            keep = ~self.masks[n]
            for side in (idx - 1, idx):
                sl = [None, None, None]
                sl[ax] = side
                sl[u] = su
                sl[v] = sv
                eps = g.cell_eps_r[tuple(sl)]
                sig = g.cell_sigma[tuple(sl)]
                bad = ((eps != 1.0) | (sig != 0.0)) & keep
                if bad.any():
                    raise ValueError(f"Huygens surface face {'xyz'[ax]}{'-+'[sign > 0]} intersects non-air material")
            for c in (u, v):
                pec = g.pec[c]
                sl = [slice(None)] * 3
                sl[ax] = idx
                sl[u] = slice(self.lo[u], self.hi[u] + (1 if c != u else 0))
                sl[v] = slice(self.lo[v], self.hi[v] + (1 if c != v else 0))
                p = pec[tuple(sl)]
                # an edge is acceptable if it only borders excluded samples
                near = np.zeros(p.shape, dtype=bool)
                m = self.masks[n]
                if c == u:
                    near[:, :-1] |= m
                    near[:, 1:] |= m
                else:
                    near[:-1, :] |= m
                    near[1:, :] |= m
                if (p & ~near).any():
                    raise ValueError(f"Huygens surface face {'xyz'[ax]}{'-+'[sign > 0]} intersects a PEC edge")

    def record(self) -> HuygensRecord:
        spec = self.spec
        faces = []
        for n, (ax, sign, idx) in enumerate(self.faces_def):
            u, v, su, sv = self._window(ax)
            faces.append(HuygensFace(
                normal=ax, sign=sign, w=spec.nodes(ax)[idx] * MM,
                cu=spec.centres(u)[su] * MM, cv=spec.centres(v)[sv] * MM,
                du=spec.d[u] * MM, dv=spec.d[v] * MM,
                E=self.accE[n], H=self.accH[n], mask=self.masks[n].copy(),
            ))
        return HuygensRecord(self.dft.freqs.copy(), faces)


def collocate_h_on_plane(state, axis: int, k: int) -> np.ndarray:
    """H components averaged onto the face centres of node plane ``k`` normal to ``axis``.

    Tangential H sits half a cell off the plane on either side and is
    averaged across it; within the plane each component is then averaged
    from its nodal positions onto face centres.  Returns (3, n_u, n_v).
    """
    comps = []
    for c, arr in enumerate(state.h):
        sl = [slice(None)] * 3
        if c == axis:
            sl[axis] = k
            a = arr[tuple(sl)]
        else:
            sl[axis] = k - 1
            a = arr[tuple(sl)]
            sl[axis] = k
            a = 0.5 * (a + arr[tuple(sl)])
        rem = [ax for ax in range(3) if ax != axis]
        for pos, ax in enumerate(rem):
            if ax == c:  # H_c is nodal along its own direction
                a = 0.5 * (np.take(a, range(0, a.shape[pos] - 1), axis=pos) + np.take(a, range(1, a.shape[pos]), axis=pos))
        comps.append(a)
    return np.stack(comps)
