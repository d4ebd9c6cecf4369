"""Uniform staggered-grid discretisation of a :class:`Geometry`.

Grid nodes sit at ``origin + i*d``.  E components live on cell edges
(Ex at (i+1/2, j, k) etc.), H components on cell faces.  Array shapes for an
``nx x ny x nz`` cell grid::

    Ex (nx, ny+1, nz+1)   Hx (nx+1, ny, nz)
    Ey (nx+1, ny, nz+1)   Hy (nx, ny+1, nz)
    Ez (nx+1, ny+1, nz)   Hz (nx, ny, nz+1)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import C0, EPS0, MM
from .geometry import FACES, Geometry, Primitive

log = logging.getLogger(__name__)

TOL = 1e-9  # mm; containment tolerance so mirrored coordinates classify identically


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    dx: float
    dy: float
    dz: float
    nx: int
    ny: int
    nz: int
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    pml: tuple[int, int, int, int, int, int] = (0, 0, 0, 0, 0, 0)

    def __post_init__(self):
        if min(self.dx, self.dy, self.dz) <= 0:
            raise MeshError("cell sizes must be positive")
        if min(self.nx, self.ny, self.nz) < 8:
            raise MeshError(f"need at least 8 cells per axis, got {self.shape}")
        if any(p < 0 for p in self.pml):
            raise MeshError("pml thickness must be >= 0")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def d(self) -> tuple[float, float, float]:
        return (self.dx, self.dy, self.dz)

    @property
    def n(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def cells(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def extent(self) -> tuple[float, ...]:
        o = self.origin
        return (o[0], o[1], o[2], o[0] + self.nx * self.dx, o[1] + self.ny * self.dy, o[2] + self.nz * self.dz)

    def nodes(self, axis: int) -> np.ndarray:
        return self.origin[axis] + np.arange(self.n[axis] + 1) * self.d[axis]

    def centres(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.n[axis]) + 0.5) * self.d[axis]

    def node_index(self, axis: int, coord: float) -> int:
        return int(round((coord - self.origin[axis]) / self.d[axis]))

    def interior_extent(self) -> tuple[float, ...]:
        """Extent excluding the absorbing layers."""
        o, d, p = self.origin, self.d, self.pml
        ext = self.extent
        return (
            o[0] + p[0] * d[0], o[1] + p[2] * d[1], o[2] + p[4] * d[2],
            ext[3] - p[1] * d[0], ext[4] - p[3] * d[1], ext[5] - p[5] * d[2],
        )

    def scaled(self, factor: int) -> "GridSpec":
        """Refine every axis by an integer factor (same origin and extent)."""
        return GridSpec(
            self.dx / factor, self.dy / factor, self.dz / factor,
            self.nx * factor, self.ny * factor, self.nz * factor,
            self.origin, tuple(p * factor for p in self.pml),
        )

    def to_dict(self) -> dict:
        return {
            "d_mm": [self.dx, self.dy, self.dz],
            "n": [self.nx, self.ny, self.nz],
            "origin_mm": list(self.origin),
            "pml": list(self.pml),
        }


@dataclass
class YeeGrid:
    """Per-edge material coefficients on the staggered grid.

    ``eps`` and ``sigma`` hold absolute permittivity (F/m) and conductivity
    (S/m) for the Ex, Ey, Ez edges.  ``pec`` marks edges forced to zero.
    H lives in vacuum everywhere, so no per-face permeability is stored.
    """

    spec: GridSpec
    eps: tuple[np.ndarray, np.ndarray, np.ndarray]
    sigma: tuple[np.ndarray, np.ndarray, np.ndarray]
    pec: tuple[np.ndarray, np.ndarray, np.ndarray]
    cell_eps_r: np.ndarray
    cell_sigma: np.ndarray
    snaps: list = field(default_factory=list)
    sheet_faces: dict = field(default_factory=dict)

    @property
    def mu(self) -> float:
        from .constants import MU0

        return MU0


def e_shapes(n) -> list[tuple[int, int, int]]:
    nx, ny, nz = n
    return [(nx, ny + 1, nz + 1), (nx + 1, ny, nz + 1), (nx + 1, ny + 1, nz)]


def h_shapes(n) -> list[tuple[int, int, int]]:
    nx, ny, nz = n
    return [(nx + 1, ny, nz), (nx, ny + 1, nz), (nx, ny, nz + 1)]


def _clip_range(coords: np.ndarray, lo: float, hi: float) -> slice:
    """Index slice of sorted ``coords`` lying in the closed interval [lo, hi]."""
    i0 = int(np.searchsorted(coords, lo - TOL, side="left"))
    i1 = int(np.searchsorted(coords, hi + TOL, side="right"))
    return slice(i0, max(i0, i1))


def _extended(prim: Primitive, bbox, spec: GridSpec) -> tuple[list[float], list[float]]:
    """Primitive bounds, with faces touching the domain box extruded to the grid edge."""
    lo, hi = list(prim.lo), list(prim.hi)
    gext = spec.extent
    for ax in range(3):
        if prim.hi[ax] > prim.lo[ax]:
            if lo[ax] <= bbox[ax] + TOL:
                lo[ax] = min(lo[ax], gext[ax])
            if hi[ax] >= bbox[ax + 3] - TOL:
                hi[ax] = max(hi[ax], gext[ax + 3])
    return lo, hi


def _thin_pec_axis(prim: Primitive, spec: GridSpec) -> int | None:
    """Axis along which a PEC primitive is treated as a sheet (zero or sub-half-cell thickness)."""
    ax = prim.sheet_axis
    if ax is not None:
        return ax
    for a in range(3):
        if prim.hi[a] - prim.lo[a] < 0.5 * spec.d[a]:
            return a
    return None


def check_fits(geom: Geometry, spec: GridSpec) -> None:
    g = spec.extent
    b = geom.bounding_box
    for ax in range(3):
        if b[ax] < g[ax] - TOL or b[ax + 3] > g[ax + 3] + TOL:
            raise MeshError(f"geometry bounding box {b} does not fit the grid extent {g}")


def voxelize(geom: Geometry, spec: GridSpec, omega: float | None = None) -> YeeGrid:
    """Paint the geometry onto the grid and average materials onto E edges."""
    check_fits(geom, spec)
    nx, ny, nz = spec.n
    centres = [spec.centres(a) for a in range(3)]
    nodes = [spec.nodes(a) for a in range(3)]
    bbox = geom.bounding_box

    cell_eps = np.ones(spec.n)
    cell_sig = np.zeros(spec.n)
    cell_pec = np.zeros(spec.n, dtype=bool)
    painted = geom.painted()
    kw = {} if omega is None else {"omega": omega}

    sheets: list[tuple[Primitive, int]] = []
    for prim in painted:
        if prim.role == "aperture":
            continue
        if prim.material.is_pec:
            ax = _thin_pec_axis(prim, spec)
            if ax is not None:
                sheets.append((prim, ax))
                continue
        else:
            for a in range(3):
                if prim.hi[a] - prim.lo[a] < 0.5 * spec.d[a]:
                    raise MeshError(
                        f"under-resolved primitive {prim.name!r}: "
                        f"{prim.hi[a] - prim.lo[a]:.4g} mm along axis {'xyz'[a]} < half a cell ({spec.d[a]:.4g} mm)"
                    )
        lo, hi = _extended(prim, bbox, spec)
        sl = tuple(_clip_range(centres[a], lo[a], hi[a]) for a in range(3))
        if prim.material.is_pec:
            cell_pec[sl] = True
            cell_eps[sl] = 1.0
            cell_sig[sl] = 0.0
        else:
            cell_pec[sl] = False
            cell_eps[sl] = prim.material.eps_r
            cell_sig[sl] = prim.material.effective_sigma(**kw)

    eps_e, sig_e, pec_e = [], [], []
    for comp in range(3):
        e_avg, s_avg, p_any = _edge_average(cell_eps, cell_sig, cell_pec, comp)
        eps_e.append(e_avg * EPS0)
        sig_e.append(s_avg)
        pec_e.append(p_any)

    snaps = []
    sheet_faces = {}
    for prim, ax in sheets:
        faces, k, snap = _sheet_faces(prim, ax, spec, geom, painted, centres, nodes)
        if abs(snap) > 1e-9:
            log.info("snapped PEC sheet %r on axis %s by %.4g mm", prim.name, "xyz"[ax], snap)
        snaps.append((prim.name, "xyz"[ax], snap))
        if faces is None:
            continue
        key = (ax, k)
        if key in sheet_faces:
            sheet_faces[key] = sheet_faces[key] | faces
        else:
            sheet_faces[key] = faces
    for (ax, k), faces in sheet_faces.items():
        _mask_sheet_edges(pec_e, faces, ax, k)

    for comp in range(3):
        eps_e[comp][pec_e[comp]] = EPS0
        sig_e[comp][pec_e[comp]] = 0.0
    return YeeGrid(spec, tuple(eps_e), tuple(sig_e), tuple(pec_e), cell_eps, cell_sig, snaps, sheet_faces)


def _edge_average(cell_eps, cell_sig, cell_pec, comp: int):
    """Average cell values over the (up to four) cells sharing each edge of one component."""
    nx, ny, nz = cell_eps.shape
    # the two axes transverse to the edge direction get padded by one on each side
    t1, t2 = [a for a in range(3) if a != comp]
    pad = [(0, 0)] * 3
    pad[t1] = (1, 1)
    pad[t2] = (1, 1)
    e = np.pad(cell_eps, pad)
    s = np.pad(cell_sig, pad)
    p = np.pad(cell_pec, pad)
    w = np.pad(np.ones_like(cell_eps), pad)
    out_shape = list(cell_eps.shape)
    out_shape[t1] += 1
    out_shape[t2] += 1
    acc_e = np.zeros(out_shape)
    acc_s = np.zeros(out_shape)
    acc_w = np.zeros(out_shape)
    acc_p = np.zeros(out_shape, dtype=bool)
    for o1 in (0, 1):
        for o2 in (0, 1):
            sl = [slice(None)] * 3
            sl[t1] = slice(o1, o1 + out_shape[t1])
            sl[t2] = slice(o2, o2 + out_shape[t2])
            sl = tuple(sl)
            acc_e += e[sl] * w[sl]
            acc_s += s[sl] * w[sl]
            acc_w += w[sl]
            acc_p |= p[sl]
    return acc_e / acc_w, acc_s / acc_w, acc_p


def _sheet_faces(prim, ax, spec, geom, painted, centres, nodes):
    """Boolean metal map of the faces of one sheet on its snapped node plane."""
    coord = 0.5 * (prim.lo[ax] + prim.hi[ax])
    k = spec.node_index(ax, coord)
    snap = nodes[ax][min(max(k, 0), spec.n[ax])] - coord
    if k < 0 or k > spec.n[ax]:
        return None, k, snap
    u, v = [a for a in range(3) if a != ax]
    lo, hi = _extended_sheet(prim, ax, geom.bounding_box, spec)
    su = _clip_range(centres[u], lo[u], hi[u])
    sv = _clip_range(centres[v], lo[v], hi[v])
    faces = np.zeros((spec.n[u], spec.n[v]), dtype=bool)
    faces[su, sv] = True
    # higher-priority non-PEC boxes containing the sheet plane open holes in it
    rank = painted.index(prim)
    for other in painted[rank + 1:]:
        if other.material.is_pec:
            continue
        if not (other.lo[ax] - TOL <= coord <= other.hi[ax] + TOL):
            continue
        olo, ohi = _extended(other, geom.bounding_box, spec)
        ou = _clip_range(centres[u], olo[u], ohi[u])
        ov = _clip_range(centres[v], olo[v], ohi[v])
        faces[ou, ov] = False
    return faces, k, snap


def _extended_sheet(prim, ax, bbox, spec):
    lo, hi = list(prim.lo), list(prim.hi)
    gext = spec.extent
    for a in range(3):
        if a == ax:
            continue
        if lo[a] <= bbox[a] + TOL:
            lo[a] = min(lo[a], gext[a])
        if hi[a] >= bbox[a + 3] - TOL:
            hi[a] = max(hi[a], gext[a + 3])
    return lo, hi


def _mask_sheet_edges(pec_e, faces, ax, k):
    """Mask in-plane edges bordering any metal face of a sheet on node plane ``k``."""
    u, v = [a for a in range(3) if a != ax]
    nu, nv = faces.shape
    # edges along u: located at (u+1/2, v) -> shape (nu, nv+1); bordered by faces v-1 and v
    along_u = np.zeros((nu, nv + 1), dtype=bool)
    along_u[:, :-1] |= faces
    along_u[:, 1:] |= faces
    along_v = np.zeros((nu + 1, nv), dtype=bool)
    along_v[:-1, :] |= faces
    along_v[1:, :] |= faces
    for comp, edges in ((u, along_u), (v, along_v)):
        idx = [slice(None)] * 3
        idx[ax] = k
        pec_e[comp][tuple(idx)] |= edges


def open_faces_in(grid: YeeGrid, sheet_axis: int, coord: float, box) -> int:
    """Count non-metal faces of the sheet plane nearest ``coord`` whose centres lie in ``box``.

    ``box`` is (u0, v0, u1, v1) in the two in-plane axes.
    """
    spec = grid.spec
    k = spec.node_index(sheet_axis, coord)
    faces = grid.sheet_faces.get((sheet_axis, k))
    u, v = [a for a in range(3) if a != sheet_axis]
    su = _clip_range(spec.centres(u), box[0], box[2])
    sv = _clip_range(spec.centres(v), box[1], box[3])
    if faces is None:
        return (su.stop - su.start) * (sv.stop - sv.start)
    return int((~faces[su, sv]).sum())


# ---------------------------------------------------------------- estimation

@dataclass(frozen=True)
class CellEstimate:
    spec: GridSpec
    memory_bytes: int
    provenance: dict


def _aligned_step(d: float, anchors: list[float]) -> tuple[float, str]:
    """Shrink ``d`` so the smallest positive span between anchors is a whole number of cells."""
    pts = sorted(set(round(a, 9) for a in anchors))
    spans = [b - a for a, b in zip(pts, pts[1:]) if b - a > 1e-9]
    if not spans:
        return d, ""
    s = min(spans)
    n = math.ceil(s / d - 1e-9)
    return s / n, f"aligned to {s:g} mm span ({n} cells)"


def estimate_cells(
    geom: Geometry,
    f_max: float,
    cells_per_wavelength: float = 15.0,
    min_feature_cells: int = 4,
    npml: int = 10,
    resolution_scale: float = 1.0,
) -> CellEstimate:
    """Coarsest uniform grid meeting the wavelength rule and the thin-feature floor."""
    if not f_max > 0:
        raise MeshError("f_max must be positive")
    if resolution_scale <= 0:
        raise MeshError("resolution_scale must be positive")
    lam_min = C0 / f_max / MM / math.sqrt(geom.max_eps_r())
    base = lam_min / cells_per_wavelength
    d = [base, base, base]
    prov = {a: [f"lambda/{cells_per_wavelength:g} rule: {base:.4g} mm"] for a in "xyz"}
    for ax, size, name in geom.thin_features():
        cap = size / min_feature_cells
        if cap < d[ax]:
            d[ax] = cap
            prov["xyz"[ax]].append(f"thin feature {name} ({size:g} mm / {min_feature_cells}): {cap:.4g} mm")
    d = [v / resolution_scale for v in d]
    align = geom.info.get("align", {})
    for ax, name in ((1, "y"), (2, "z")):
        anchors = align.get(name, [])
        if len(anchors) > 1:
            d[ax], msg = _aligned_step(d[ax], anchors)
            if msg:
                prov[name].append(msg)

    bbox = geom.bounding_box
    pml = tuple(npml if face in geom.open_faces else 0 for face in FACES)
    origin, n = [0.0, 0.0, 0.0], [0, 0, 0]
    for ax, name in enumerate("xyz"):
        lo, hi = bbox[ax], bbox[ax + 3]
        plo, phi = pml[2 * ax], pml[2 * ax + 1]
        anchors = align.get(name, [])
        if name == "y" and "guide_axis_y" in geom.info and anchors:
            # symmetric about the guide axis so mirror checks hold bit for bit
            c = geom.info["guide_axis_y"]
            n_guide = round((anchors[-1] - anchors[0]) / d[ax])
            half = max(c - lo, hi - c) / d[ax]
            m = math.ceil(half - 1e-9) + max(plo, phi)
            nn = 2 * m
            if (nn - n_guide) % 2:
                nn += 1
            origin[ax] = c - nn * d[ax] / 2
            n[ax] = nn
            continue
        anchor = anchors[0] if anchors else lo
        m = math.ceil((anchor - lo) / d[ax] - 1e-9) + plo
        origin[ax] = anchor - m * d[ax]
        n[ax] = math.ceil((hi - origin[ax]) / d[ax] - 1e-9) + phi
        n[ax] = max(n[ax], 8)
    spec = GridSpec(d[0], d[1], d[2], n[0], n[1], n[2], tuple(origin), pml)
    mem = memory_estimate(spec)
    for name in "xyz":
        log.info("cell size %s: %s", name, "; ".join(prov[name]))
    log.info("grid %s cells (%.2f M), ~%.0f MB", spec.shape, spec.cells / 1e6, mem / 2**20)
    return CellEstimate(spec, mem, prov)


def memory_estimate(spec: GridSpec) -> int:
    """Bytes for 6 field arrays, 6 E-update coefficient arrays and the CPML auxiliaries."""
    nx, ny, nz = spec.n
    cells = (nx + 1) * (ny + 1) * (nz + 1)
    pml_cells = 0
    for ax in range(3):
        t = spec.pml[2 * ax] + spec.pml[2 * ax + 1]
        pml_cells += t * cells // max(spec.n[ax], 1)
    return 8 * (12 * cells + 4 * pml_cells)
