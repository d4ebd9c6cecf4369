"""Parametric solid model of the ESIW-fed aperture-coupled patch antenna.

Coordinates are in millimetres.  The waveguide axis is x, the broad wall of
the guide spans y (centred on y = 0) and the stack grows along +z from the
ground plane at z = 0.  The feed enters from -x; the short-circuit wall sits
near the +x end of the board.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

from .constants import C0, MM
from .materials import DUROID_5880, METAL, ROGERS_4003, VACUUM, Material

log = logging.getLogger(__name__)

TRANSVERSE = "transverse"
LONGITUDINAL = "longitudinal"

WR28_A = 7.112
WR28_B = 3.556

# L_A - L_ES of the transverse row; reused to derive L_ES for the longitudinal row
FEED_ALLOWANCE = 23.5 - 15.0

FACES = ("x0", "x1", "y0", "y1", "z0", "z1")


class GeometryError(ValueError):
    pass


def te10_cutoff(a_mm: float) -> float:
    """TE10 cutoff frequency (Hz) of an air-filled guide of broad wall ``a_mm``."""
    return C0 / (2 * a_mm * MM)


def guided_wavelength(f: float, a_mm: float) -> float:
    """Guided wavelength (mm) of the TE10 mode in an air-filled guide."""
    fc = te10_cutoff(a_mm)
    if f <= fc:
        raise GeometryError(
            f"evanescent: no standing-wave pattern ({f / 1e9:.3f} GHz <= cutoff {fc / 1e9:.3f} GHz)"
        )
    lam0 = C0 / f / MM
    return lam0 / math.sqrt(1.0 - (fc / f) ** 2)


def standing_wave_peak_positions(f: float, a_ES: float, n_max: int) -> list[float]:
    """Electric-field antinodes of a shorted TE10 guide, as distances (mm) from the short."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    lam_g = guided_wavelength(f, a_ES)
    return [(2 * k - 1) * lam_g / 4 for k in range(1, n_max + 1)]


@dataclass(frozen=True)
class AntennaParams:
    """Full parameter vector of the antenna, lengths in mm.

    Defaults reproduce the transverse-slot row of the design table.  ``L_ES``
    is only taken as given in transverse mode; in longitudinal mode it is
    derived from ``L_A`` (see :meth:`cavity_length`).
    """

    mode: str = TRANSVERSE
    L_A: float = 23.5
    W_A: float = 14.2
    L_P: float = 2.4
    W_P: float = 2.4
    S_L: float = 2.2
    S_W: float = 1.0
    L_ES: float | None = 15.0
    X_S: float = 7.6
    Y_S: float = 0.0
    a_ES: float = WR28_A
    b_ES: float | None = None
    h_esiw: float = 0.508
    h_patch: float = 0.508
    t_clad: float = 0.035
    end_margin: float = 1.0
    metal_model: str = "sheet"
    lossless: bool = False
    tan_delta_esiw: float = ROGERS_4003.tan_delta
    tan_delta_patch: float = DUROID_5880.tan_delta

    @classmethod
    def transverse(cls, **kw) -> "AntennaParams":
        return cls(**kw)

    @classmethod
    def longitudinal(cls, **kw) -> "AntennaParams":
        base = dict(mode=LONGITUDINAL, L_A=18.5, L_ES=None, X_S=3.8, Y_S=2.2)
        base.update(kw)
        return cls(**base)

    @property
    def cavity_height(self) -> float:
        return self.h_esiw if self.b_ES is None else self.b_ES

    def cavity_length(self) -> float:
        if self.L_ES is not None:
            return self.L_ES
        derived = self.L_A - FEED_ALLOWANCE
        log.info("derived L_ES = %.3f mm from L_A = %.3f mm", derived, self.L_A)
        return derived

    def slot_extent_xy(self) -> tuple[float, float]:
        """Slot size (along x, along y) for the configured orientation."""
        if self.mode == TRANSVERSE:
            return self.S_W, self.S_L
        return self.S_L, self.S_W

    def validate(self) -> None:
        if self.mode not in (TRANSVERSE, LONGITUDINAL):
            raise GeometryError(f"mode must be {TRANSVERSE!r} or {LONGITUDINAL!r}, got {self.mode!r}")
        if self.metal_model not in ("sheet", "thick"):
            raise GeometryError("metal_model must be 'sheet' or 'thick'")
        names = {
            "L_A": "antenna profile length", "W_A": "antenna profile width",
            "L_P": "patch length", "W_P": "patch width",
            "S_L": "slot length", "S_W": "slot width",
            "X_S": "slot position from short", "a_ES": "ESIW width",
            "h_esiw": "ESIW substrate height", "h_patch": "patch substrate height",
            "t_clad": "cladding thickness",
        }
        for key, label in names.items():
            if not getattr(self, key) > 0:
                raise GeometryError(f"{label} must be positive ({key} = {getattr(self, key)})")
        if self.Y_S < 0:
            raise GeometryError(f"slot offset from centre axis must be >= 0 (Y_S = {self.Y_S})")
        if self.tan_delta_esiw < 0 or self.tan_delta_patch < 0:
            raise GeometryError("loss tangents must be >= 0")
        if self.end_margin < 0:
            raise GeometryError("end_margin must be >= 0")
        b = self.cavity_height
        if not 0 < b <= self.h_esiw:
            raise GeometryError(f"cavity height must lie in (0, h_esiw] (b_ES = {b})")
        L_ES = self.cavity_length()
        if not L_ES > 0:
            raise GeometryError(f"ESIW cavity length must be positive (L_ES = {L_ES})")
        if L_ES + self.end_margin > self.L_A:
            raise GeometryError("cavity does not fit the profile: L_ES + end_margin > L_A")
        if self.a_ES >= self.W_A:
            raise GeometryError("ESIW width must be smaller than the profile width W_A")
        if self.L_P > self.L_A or self.W_P > self.W_A:
            raise GeometryError("patch footprint exceeds the antenna profile (L_P <= L_A, W_P <= W_A)")
        sx, sy = self.slot_extent_xy()
        if self.mode == TRANSVERSE:
            if self.S_L > self.a_ES:
                raise GeometryError("transverse slot longer than the ESIW width (S_L <= a_ES)")
            if not self.X_S + self.S_W / 2 < L_ES:
                raise GeometryError("slot extends past the cavity open end (X_S + S_W/2 < L_ES)")
        else:
            if not self.Y_S + self.S_W / 2 < self.a_ES / 2:
                raise GeometryError("longitudinal slot crosses the side wall (Y_S + S_W/2 < a_ES/2)")
            if not self.X_S + self.S_L / 2 < L_ES:
                raise GeometryError("slot extends past the cavity open end (X_S + S_L/2 < L_ES)")
        if not self.X_S - sx / 2 > 0:
            raise GeometryError("slot overlaps the short-circuit wall (X_S - slot_x/2 > 0)")
        if self.Y_S + sy / 2 > self.a_ES / 2:
            raise GeometryError("slot crosses the side wall (Y_S + slot_y/2 <= a_ES/2)")


@dataclass(frozen=True)
class Primitive:
    """Axis-aligned box painted with a material.

    ``role="volume"`` boxes define cell materials.  PEC boxes may have zero
    thickness along one axis (a sheet).  ``role="aperture"`` boxes only open
    holes in PEC sheets of lower priority whose plane they contain; they do
    not change cell materials and may be thinner than a cell.
    """

    extent: tuple[float, float, float, float, float, float]
    material: Material
    priority: int = 0
    name: str = ""
    role: str = "volume"

    def __post_init__(self):
        x0, y0, z0, x1, y1, z1 = self.extent
        spans = (x1 - x0, y1 - y0, z1 - z0)
        if any(s < 0 for s in spans):
            raise GeometryError(f"primitive {self.name!r}: inverted extent {self.extent}")
        flat = sum(1 for s in spans if s == 0)
        if flat and not (self.material.is_pec and flat == 1):
            raise GeometryError(
                f"primitive {self.name!r}: zero extent is only allowed for a single axis of a PEC sheet"
            )
        if self.role not in ("volume", "aperture"):
            raise GeometryError(f"primitive {self.name!r}: unknown role {self.role!r}")

    @property
    def lo(self):
        return self.extent[:3]

    @property
    def hi(self):
        return self.extent[3:]

    @property
    def sheet_axis(self) -> int | None:
        for ax in range(3):
            if self.hi[ax] == self.lo[ax]:
                return ax
        return None

    def contains(self, p, tol: float = 0.0) -> bool:
        return all(self.lo[a] - tol <= p[a] <= self.hi[a] + tol for a in range(3))

    def mirrored_y(self, about: float = 0.0) -> "Primitive":
        x0, y0, z0, x1, y1, z1 = self.extent
        return replace(self, extent=(x0, 2 * about - y1, z0, x1, 2 * about - y0, z1))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "extent": list(self.extent),
            "material": self.material.to_dict(),
            "priority": self.priority,
            "role": self.role,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Primitive":
        return cls(
            extent=tuple(float(v) for v in d["extent"]),
            material=Material.from_dict(d["material"]),
            priority=int(d["priority"]),
            name=d.get("name", ""),
            role=d.get("role", "volume"),
        )


@dataclass(frozen=True)
class PortPlane:
    """Waveguide port: reference plane at ``x`` with the guide's interior cross-section."""

    x: float
    y0: float
    y1: float
    z0: float
    z1: float
    direction: int = 1  # incident wave travels towards +x

    @property
    def a(self) -> float:
        return self.y1 - self.y0

    @property
    def b(self) -> float:
        return self.z1 - self.z0


@dataclass(frozen=True)
class Geometry:
    primitives: tuple[Primitive, ...]
    port: PortPlane
    bounding_box: tuple[float, float, float, float, float, float]
    open_faces: tuple[str, ...] = FACES
    f_min: float = 24e9
    f_max: float = 32e9
    f0: float = 28e9
    info: dict = field(default_factory=dict, compare=False)

    def painted(self) -> list[Primitive]:
        """Primitives in paint order (stable by priority; later entries win ties)."""
        return sorted(self.primitives, key=lambda p: p.priority)

    def material_at(self, p) -> Material:
        """Volume material at a point (apertures and sheets ignored)."""
        mat = VACUUM
        for prim in self.painted():
            if prim.role != "volume" or prim.sheet_axis is not None:
                continue
            if prim.contains(p):
                mat = prim.material
        return mat

    def max_eps_r(self) -> float:
        return max([1.0] + [p.material.eps_r for p in self.primitives if not p.material.is_pec])

    def thin_features(self) -> list[tuple[int, float, str]]:
        """Per-axis feature sizes that must be resolved by at least four cells."""
        return list(self.info.get("thin_features", []))

    def to_dict(self) -> dict:
        return {
            "format": "esiwfdtd-geometry/1",
            "bounding_box": list(self.bounding_box),
            "open_faces": list(self.open_faces),
            "band_hz": [self.f_min, self.f_max],
            "f0_hz": self.f0,
            "port": asdict(self.port),
            "primitives": [p.to_dict() for p in self.primitives],
            "info": self.info,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "Geometry":
        if d.get("format") != "esiwfdtd-geometry/1":
            raise GeometryError("not an esiwfdtd geometry document")
        info = d.get("info", {})
        if "thin_features" in info:
            info = dict(info, thin_features=[tuple(t) for t in info["thin_features"]])
        return cls(
            primitives=tuple(Primitive.from_dict(p) for p in d["primitives"]),
            port=PortPlane(**d["port"]),
            bounding_box=tuple(float(v) for v in d["bounding_box"]),
            open_faces=tuple(d["open_faces"]),
            f_min=float(d["band_hz"][0]),
            f_max=float(d["band_hz"][1]),
            f0=float(d["f0_hz"]),
            info=info,
        )

    @classmethod
    def from_json(cls, text: str) -> "Geometry":
        return cls.from_dict(json.loads(text))


def air_margin(f_min: float) -> float:
    """Quarter free-space wavelength (mm) at ``f_min``."""
    return C0 / f_min / MM / 4


def _metal(extent, name, params: AntennaParams | None = None, priority: int = 2) -> Primitive:
    """PEC sheet, or a t_clad-thick box grown in +normal direction for the thick model."""
    if params is not None and params.metal_model == "thick":
        ext = list(extent)
        for ax in range(3):
            if ext[ax] == ext[ax + 3]:
                ext[ax + 3] = ext[ax] + params.t_clad
        extent = tuple(ext)
    return Primitive(tuple(float(v) for v in extent), METAL, priority, name)


def build_antenna(params: AntennaParams, f_min: float = 24e9, f_max: float = 32e9, f0: float = 28e9) -> Geometry:
    """Build the layered antenna model for either slot orientation."""
    params.validate()
    L_A, W_A = params.L_A, params.W_A
    a, b = params.a_ES, params.cavity_height
    h1, h2 = params.h_esiw, params.h_patch
    L_ES = params.cavity_length()
    x_short = L_A - params.end_margin
    x_open = x_short - L_ES
    z_top = h1 + h2

    sx, sy = params.slot_extent_xy()
    xs, ys = x_short - params.X_S, params.Y_S
    slot = (xs - sx / 2, ys - sy / 2, xs + sx / 2, ys + sy / 2)
    patch = (xs - params.L_P / 2, ys - params.W_P / 2, xs + params.L_P / 2, ys + params.W_P / 2)
    if not (patch[0] <= slot[0] and slot[2] <= patch[2] and patch[1] <= slot[1] and slot[3] <= patch[3]):
        warnings.warn("slot footprint is not under the patch footprint", stacklevel=2)

    margin = air_margin(f_min)
    # the feed must fit the source plane plus lambda_g/2 of clean guide on each side of the record plane
    lam_g = guided_wavelength(f0, a)
    slot_near_edge = slot[0]
    feed_margin = max(margin, lam_g + 1.5 - slot_near_edge)
    bbox = (-feed_margin, -W_A / 2 - margin, -margin, L_A + margin, W_A / 2 + margin, z_top + margin)

    rogers = replace(ROGERS_4003, tan_delta=params.tan_delta_esiw)
    duroid = replace(DUROID_5880, tan_delta=params.tan_delta_patch)
    if params.lossless:
        rogers, duroid = rogers.lossless(), duroid.lossless()

    t = params.t_clad if params.metal_model == "thick" else 0.0
    z_sub2 = h1 + t  # patch substrate starts on top of the top cladding
    z_patch = z_sub2 + h2

    prims = [
        Primitive((0.0, -W_A / 2, 0.0, L_A, W_A / 2, h1), rogers, 0, "esiw_substrate"),
        Primitive((0.0, -W_A / 2, z_sub2, L_A, W_A / 2, z_patch), duroid, 0, "patch_substrate"),
        Primitive((0.0, -a / 2, 0.0, x_short, a / 2, b), VACUUM, 1, "esiw_cavity"),
        _metal((0.0, -W_A / 2, 0.0, L_A, W_A / 2, 0.0), "ground", params),
        _metal((0.0, -W_A / 2, h1, L_A, W_A / 2, h1), "top_cladding", params),
        _metal((bbox[0], -a / 2, 0.0, x_short, -a / 2, b), "side_wall_lo", params),
        _metal((bbox[0], a / 2, 0.0, x_short, a / 2, b), "side_wall_hi", params),
        _metal((x_short, -a / 2, 0.0, x_short, a / 2, b), "short_wall", params),
        _metal((bbox[0], -a / 2, 0.0, 0.0, a / 2, 0.0), "feed_bottom", params),
        _metal((bbox[0], -a / 2, b, 0.0, a / 2, b), "feed_top", params),
    ]
    if params.metal_model == "thick":
        # thick metal grows outward from the cavity; keep the ground under z = 0
        prims[3] = Primitive((0.0, -W_A / 2, -t, L_A, W_A / 2, 0.0), METAL, 2, "ground")
        prims[8] = Primitive((bbox[0], -a / 2, -t, 0.0, a / 2, 0.0), METAL, 2, "feed_bottom")
        prims[5] = Primitive((bbox[0], -a / 2 - t, 0.0, x_short, -a / 2, b), METAL, 2, "side_wall_lo")
        prims[7] = Primitive((x_short, -a / 2, 0.0, x_short + t, a / 2, b), METAL, 2, "short_wall")
    if b < h1:
        prims.append(_metal((0.0, -a / 2, b, x_short, a / 2, b), "cavity_ceiling", params))
        prims.append(Primitive((slot[0], slot[1], b, slot[2], slot[3], h1), VACUUM, 3, "slot_hole"))
    half = max(params.t_clad, 1e-3) / 2
    slot_z0 = (b if b < h1 else h1) - half
    prims.append(Primitive((slot[0], slot[1], slot_z0, slot[2], slot[3], h1 + t + half), VACUUM, 3, "slot", "aperture"))
    prims.append(_metal((patch[0], patch[1], z_patch, patch[2], patch[3], z_patch), "patch", params))

    port = PortPlane(x_open, -a / 2, a / 2, 0.0, b)
    thin = [
        (0, sx, "slot_x"), (1, sy, "slot_y"),
        (0, params.L_P, "patch_x"), (1, params.W_P, "patch_y"),
        (2, h1, "h_esiw"), (2, h2, "h_patch"),
    ]
    info = {
        "mode": params.mode,
        "params": asdict(params),
        "L_ES": L_ES,
        "x_short": x_short,
        "x_open": x_open,
        "slot": list(slot),
        "slot_z": h1,
        "patch": list(patch),
        "patch_z": z_patch,
        "board": [0.0, -W_A / 2, -t, L_A, W_A / 2, z_patch],
        "guide_axis_y": 0.0,
        "align": {"y": [-a / 2, a / 2], "z": [0.0, b, h1, z_patch], "x": [x_short]},
        "thin_features": thin,
    }
    return Geometry(tuple(prims), port, bbox, FACES, f_min, f_max, f0, info)


def build_waveguide(
    a: float = WR28_A,
    b: float = WR28_B,
    length: float = 40.0,
    shorted: bool = False,
    port_x: float | None = None,
    f_min: float = 24e9,
    f_max: float = 32e9,
    f0: float = 28e9,
) -> Geometry:
    """Straight air-filled rectangular guide along x, from x = 0 to ``length``.

    The -x end always continues into the absorbing layer.  A shorted guide is
    closed by a PEC wall at x = length; otherwise the guide also continues
    through the +x absorbing layer (matched termination).
    """
    x1 = length
    prims = [
        Primitive((0.0, -a / 2, 0.0, x1, -a / 2, b), METAL, 2, "side_wall_lo"),
        Primitive((0.0, a / 2, 0.0, x1, a / 2, b), METAL, 2, "side_wall_hi"),
        Primitive((0.0, -a / 2, 0.0, x1, a / 2, 0.0), METAL, 2, "bottom"),
        Primitive((0.0, -a / 2, b, x1, a / 2, b), METAL, 2, "top"),
    ]
    open_faces = ("x0",) if shorted else ("x0", "x1")
    if shorted:
        prims.append(Primitive((x1, -a / 2, 0.0, x1, a / 2, b), METAL, 2, "short_wall"))
    port = PortPlane(length / 2 if port_x is None else port_x, -a / 2, a / 2, 0.0, b)
    info = {
        "mode": "waveguide",
        "shorted": shorted,
        "x_short": x1 if shorted else None,
        "guide_axis_y": 0.0,
        "align": {"y": [-a / 2, a / 2], "z": [0.0, b], "x": [x1] if shorted else []},
        "thin_features": [],
    }
    return Geometry(tuple(prims), port, (0.0, -a / 2, 0.0, x1, a / 2, b), open_faces, f_min, f_max, f0, info)


def is_mirror_symmetric_y(geom: Geometry, about: float = 0.0, tol: float = 1e-9) -> bool:
    """True when the primitive list is invariant under reflection y -> 2*about - y."""

    def key(p: Primitive):
        return (p.material, p.priority, p.role, tuple(int(round(v / tol)) for v in p.extent))

    original = sorted((key(p) for p in geom.primitives), key=repr)
    mirrored = sorted((key(p.mirrored_y(about)) for p in geom.primitives), key=repr)
    return original == mirrored
