"""Time-loop orchestration: voxelize, allocate, step, inject, record, stop."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .fdtd import CpmlConfig, FieldState, Solver
from .geometry import Geometry
from .mesher import GridSpec, YeeGrid, voxelize
from .ports import ModeTemplate, Waveform, inject

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StopRule:
    """Stop on a fixed step count or once the domain energy has decayed.

    The energy criterion is checked every ``check_every`` steps after the
    source has switched off; it fires when the energy is ``decay_db`` below
    its running peak.  ``fixed_steps`` overrides the energy rule.
    """

    max_steps: int = 40000
    decay_db: float = -60.0
    check_every: int = 50
    fixed_steps: int | None = None

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.decay_db >= 0:
            raise ValueError("decay_db must be negative")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")


class Source:
    t_end: float = 0.0

    def apply(self, state: FieldState) -> None:
        raise NotImplementedError


@dataclass
class PortSource(Source):
    template: ModeTemplate
    waveform: Waveform
    amplitude: float = 1.0

    @property
    def t_end(self):
        return self.waveform.t_end

    def apply(self, state):
        inject(state, self.template, self.waveform, amplitude=self.amplitude)


@dataclass
class PointSource(Source):
    """Soft source adding ``amplitude*waveform(t)`` to one E edge."""

    component: str
    index: tuple[int, int, int]
    waveform: Waveform
    amplitude: float = 1.0

    @property
    def t_end(self):
        return self.waveform.t_end

    def apply(self, state):
        w = self.amplitude * float(self.waveform(state.step * state.dt))
        if w:
            getattr(state, self.component)[self.index] += w


@dataclass
class RunArtifacts:
    steps: int
    converged: bool
    dt: float
    spec: GridSpec
    energy_steps: np.ndarray
    energy: np.ndarray
    wallclock: float
    probes: dict = field(default_factory=dict)
    state: FieldState | None = None

    @property
    def cells(self) -> int:
        return self.spec.cells


class Simulation:
    """One grid, one solver state, a list of sources and probes.

    The loop order per step is: H update, H probes at t=(n+1/2)dt, E update,
    sources at t=(n+1)dt, E probes.  A simulation can be advanced again after
    :meth:`run` returned (see :meth:`advance_to`).
    """

    def __init__(self, grid: YeeGrid, sources=(), probes=None, dt: float | None = None,
                 safety: float = 0.99, cpml: CpmlConfig | None = None, periodic=(False, False, False)):
        self.grid = grid
        self.solver = Solver(grid, dt=dt, safety=safety, cpml=cpml, periodic=periodic)
        self.dt = self.solver.dt
        self.sources = list(sources)
        self.probes = dict(probes or {})
        self.state = self.solver.new_state()
        self.energy_steps: list[int] = []
        self.energy: list[float] = []
        self.wallclock = 0.0

    @property
    def t_source_end(self) -> float:
        return max((s.t_end for s in self.sources), default=0.0)

    def _one_step(self):
        s = self.state
        solver = self.solver
        solver.update_h(s)
        th = (s.step + 0.5) * self.dt
        for p in self.probes.values():
            p.after_h(s, th)
        solver.update_e(s)
        s.step += 1
        for src in self.sources:
            src.apply(s)
        te = s.step * self.dt
        for p in self.probes.values():
            p.after_e(s, te)
        if s.step % solver.nan_check_every == 0:
            solver.check_finite(s)

    def domain_energy(self) -> float:
        return self.solver.energy(self.state)

    def run(self, stop: StopRule = StopRule()) -> RunArtifacts:
        t0 = time.perf_counter()
        s = self.state
        peak = 0.0
        converged = False
        n_src = math.ceil(self.t_source_end / self.dt)
        limit = stop.max_steps if stop.fixed_steps is None else stop.fixed_steps
        while s.step < limit:
            self._one_step()
            if s.step % stop.check_every == 0:
                w = self.domain_energy()
                self.energy_steps.append(s.step)
                self.energy.append(w)
                peak = max(peak, w)
                if stop.fixed_steps is None and s.step >= n_src and peak > 0:
                    if w <= peak * 10 ** (stop.decay_db / 10):
                        converged = True
                        break
        if stop.fixed_steps is not None:
            converged = s.step >= stop.fixed_steps
        self.wallclock += time.perf_counter() - t0
        if not converged:
            log.warning("stop rule did not fire within %d steps", limit)
        return self.artifacts(converged)

    def advance_to(self, n_steps: int) -> None:
        t0 = time.perf_counter()
        while self.state.step < n_steps:
            self._one_step()
        self.wallclock += time.perf_counter() - t0

    def artifacts(self, converged: bool) -> RunArtifacts:
        return RunArtifacts(
            steps=self.state.step, converged=converged, dt=self.dt, spec=self.grid.spec,
            energy_steps=np.asarray(self.energy_steps), energy=np.asarray(self.energy),
            wallclock=self.wallclock, probes=self.probes, state=self.state,
        )


def run(geometry: Geometry | YeeGrid, spec: GridSpec | None, source, probes=None,
        stop_rule: StopRule = StopRule(), **solver_kw) -> RunArtifacts:
    """Voxelize (unless a grid is given), then time-step until ``stop_rule`` fires."""
    if isinstance(geometry, YeeGrid):
        grid = geometry
    else:
        grid = voxelize(geometry, spec)
    sources = source if isinstance(source, (list, tuple)) else ([] if source is None else [source])
    if probes is not None and not isinstance(probes, dict):
        probes = {f"probe{i}": p for i, p in enumerate(probes)}
    sim = Simulation(grid, sources, probes, **solver_kw)
    return sim.run(stop_rule)
