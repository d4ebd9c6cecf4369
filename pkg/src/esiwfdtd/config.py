"""Run configuration: an INI document parsed into strict models.

Every section and key is optional; anything not given takes the documented
default.  Unknown sections or keys are rejected.  Keys are case sensitive
(``L_A`` and ``l_a`` are different keys).

Example::

    [geometry]
    mode = transverse
    X_S = 7.6

    [solver]
    max_steps = 30000
"""

from __future__ import annotations

import configparser
import io
import logging
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .fdtd import CpmlConfig
from .geometry import TRANSVERSE, AntennaParams, GeometryError
from .pipeline import Settings

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=False, validate_assignment=True)


class GeometrySection(_Strict):
    """Antenna dimensions in mm.  Unset values take the row default of ``mode``."""

    mode: Literal["transverse", "longitudinal"] = TRANSVERSE
    L_A: Optional[float] = None
    W_A: Optional[float] = None
    L_P: Optional[float] = None
    W_P: Optional[float] = None
    S_L: Optional[float] = None
    S_W: Optional[float] = None
    L_ES: Optional[float] = None
    X_S: Optional[float] = None
    Y_S: Optional[float] = None
    a_ES: Optional[float] = None
    b_ES: Optional[float] = None
    h_esiw: Optional[float] = None
    h_patch: Optional[float] = None
    t_clad: Optional[float] = None
    end_margin: Optional[float] = None
    metal_model: Optional[Literal["sheet", "thick"]] = None
    lossless: Optional[bool] = None
    tan_delta_esiw: Optional[float] = None
    tan_delta_patch: Optional[float] = None

    def params(self) -> AntennaParams:
        given = {k: v for k, v in self.model_dump().items() if v is not None and k != "mode"}
        base = AntennaParams.transverse if self.mode == TRANSVERSE else AntennaParams.longitudinal
        return base(**given)


class MeshSection(_Strict):
    cells_per_wavelength: float = 15.0
    min_feature_cells: int = 4
    resolution_scale: float = 1.0

    @model_validator(mode="after")
    def _check(self):
        if self.cells_per_wavelength <= 0 or self.resolution_scale <= 0 or self.min_feature_cells < 1:
            raise ValueError("mesh: cells_per_wavelength, resolution_scale > 0 and min_feature_cells >= 1")
        return self


class SolverSection(_Strict):
    safety: float = 0.99
    max_steps: int = 40000
    decay_db: float = -60.0
    check_every: int = 50
    cpml_thickness: int = 10
    cpml_order: float = 3.0
    cpml_sigma_scale: float = 0.8
    cpml_kappa_max: float = 5.0
    cpml_alpha_max: float = 0.05

    @model_validator(mode="after")
    def _check(self):
        if not 0 < self.safety <= 1:
            raise ValueError("solver.safety must lie in (0, 1]")
        if self.max_steps < 1:
            raise ValueError("solver.max_steps must be >= 1")
        if self.decay_db >= 0:
            raise ValueError("solver.decay_db must be negative")
        self.cpml()
        return self

    def cpml(self) -> CpmlConfig:
        return CpmlConfig(self.cpml_thickness, self.cpml_order, self.cpml_sigma_scale,
                          self.cpml_kappa_max, self.cpml_alpha_max)


class ExcitationSection(_Strict):
    f0: float = 28e9
    f_bw: float = 8e9


class OutputSection(_Strict):
    f_lo: float = 24e9
    f_hi: float = 32e9
    f_step: float = 50e6
    ff_step: float = 0.5e9
    angle_step: float = 1.0
    snapshot_count: int = 4
    directory: str = "results"


class RunConfig(_Strict):
    geometry: GeometrySection = GeometrySection()
    mesh: MeshSection = MeshSection()
    solver: SolverSection = SolverSection()
    excitation: ExcitationSection = ExcitationSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _check(self):
        ex, out = self.excitation, self.output
        lo, hi = ex.f0 - ex.f_bw / 2, ex.f0 + ex.f_bw / 2
        if out.f_lo < lo * (1 - 1e-9) or out.f_hi > hi * (1 + 1e-9) or not out.f_lo < out.f_hi:
            raise ValueError(
                f"output band {out.f_lo:g}-{out.f_hi:g} Hz must lie inside the excitation band {lo:g}-{hi:g} Hz"
            )
        if out.f_step <= 0 or out.ff_step <= 0 or out.angle_step <= 0:
            raise ValueError("output steps must be positive")
        try:
            self.geometry.params().validate()
        except GeometryError as exc:
            raise ValueError(f"geometry: {exc}") from exc
        return self

    def params(self) -> AntennaParams:
        return self.geometry.params()

    def settings(self) -> Settings:
        m, s, e, o = self.mesh, self.solver, self.excitation, self.output
        return Settings(
            f0=e.f0, f_bw=e.f_bw, f_lo=o.f_lo, f_hi=o.f_hi, f_step=o.f_step, ff_step=o.ff_step,
            cells_per_wavelength=m.cells_per_wavelength, min_feature_cells=m.min_feature_cells,
            resolution_scale=m.resolution_scale, safety=s.safety, max_steps=s.max_steps,
            decay_db=s.decay_db, check_every=s.check_every, cpml=s.cpml(),
            snapshot_count=o.snapshot_count, angle_step=o.angle_step, allow_unconverged=True,
        )

    def with_value(self, dotted: str, value) -> "RunConfig":
        """Copy with one scalar replaced; ``dotted`` is ``section.key`` or a unique bare key."""
        section, key = resolve_key(dotted)
        data = self.model_dump()
        data[section][key] = value
        return RunConfig.model_validate(data)


def resolve_key(name: str) -> tuple[str, str]:
    sections = RunConfig.model_fields
    if "." in name:
        sec, key = name.split(".", 1)
        if sec not in sections or key not in sections[sec].annotation.model_fields:
            raise ConfigError(f"unknown parameter {name!r}")
        return sec, key
    hits = [(sec, name) for sec in sections if name in sections[sec].annotation.model_fields]
    if len(hits) != 1:
        raise ConfigError(f"unknown parameter {name!r}" if not hits else f"ambiguous parameter {name!r}")
    return hits[0]


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep key case
    return cp


def parse_config(text: str) -> RunConfig:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    data: dict = {}
    for sec in cp.sections():
        if sec not in RunConfig.model_fields:
            raise ConfigError(f"unknown section [{sec}]")
        allowed = RunConfig.model_fields[sec].annotation.model_fields
        for key, raw in cp.items(sec):
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in section [{sec}]")
            data.setdefault(sec, {})[key] = raw
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "config"
        raise ConfigError(f"{where}: {first['msg']}") from exc
    log.info("resolved config:\n%s", dump_config(cfg))
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def dump_config(cfg: RunConfig) -> str:
    """Fully resolved config (geometry defaults filled in) as INI text."""
    cp = _parser()
    p = cfg.params()
    for sec, model in cfg:
        cp.add_section(sec)
        values = model.model_dump()
        if sec == "geometry":
            values = {"mode": p.mode, **{k: getattr(p, k) for k in values if k != "mode"}}
            if p.L_ES is None:
                values["L_ES"] = None
        for key, val in values.items():
            if val is None:
                continue
            cp.set(sec, key, str(val).lower() if isinstance(val, bool) else repr(val) if isinstance(val, float) else str(val))
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
