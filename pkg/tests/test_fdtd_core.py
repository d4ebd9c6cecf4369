import math

import numpy as np
import pytest

from esiwfdtd.constants import C0, MM
from esiwfdtd.fdtd import CpmlConfig, InstabilityError, Solver, cfl_dt
from esiwfdtd.geometry import Geometry, PortPlane, Primitive
from esiwfdtd.materials import METAL
from esiwfdtd.mesher import GridSpec, voxelize
from esiwfdtd.ports import Waveform
from esiwfdtd.recorders import PointProbe
from esiwfdtd.simulation import PointSource, Simulation, StopRule, run
from esiwfdtd.validation import cavity_energy

CFL_01MM = 1.926e-13  # 0.1 mm cube, safety 1: 1e-4 / (c * sqrt(3))


def _vacuum(spec):
    return voxelize(Geometry((), PortPlane(0, 0, 1, 0, 1), spec.extent, ()), spec)


def test_cfl_value():
    spec = GridSpec(0.1, 0.1, 0.1, 10, 10, 10)
    assert cfl_dt(spec, 1.0) == pytest.approx(CFL_01MM, rel=2e-4)
    doubled = GridSpec(0.2, 0.2, 0.2, 10, 10, 10)
    assert cfl_dt(doubled, 1.0) == pytest.approx(2 * cfl_dt(spec, 1.0), rel=1e-12)


def test_courant_violation_rejected():
    spec = GridSpec(0.1, 0.1, 0.1, 10, 10, 10)
    with pytest.raises(ValueError, match="Courant"):
        Solver(_vacuum(spec), dt=1.01 * cfl_dt(spec, 1.0))


def test_thin_cpml_rejected():
    with pytest.raises(ValueError, match=">= 6"):
        CpmlConfig(thickness=4)


def test_zero_fixed_point():
    spec = GridSpec(0.5, 0.5, 0.5, 10, 10, 10, pml=(6,) * 6)
    solver = Solver(_vacuum(spec), cpml=CpmlConfig(6))
    s = solver.new_state()
    for _ in range(50):
        solver.step(s)
    assert all(not a.any() for a in (*s.e, *s.h))


def _periodic_frequency(ppw=20, steps=700):
    d = 0.1
    spec = GridSpec(d, d, d, ppw, 8, 8)
    solver = Solver(_vacuum(spec), safety=0.99, periodic=(True, True, True))
    s = solver.new_state()
    x = np.arange(ppw + 1) * d
    s.Ez[:] = np.sin(2 * np.pi * x / (ppw * d))[:, None, None]
    i = ppw // 4
    trace = []
    for _ in range(steps):
        solver.step(s)
        trace.append(s.Ez[i, 4, 4])
    trace = np.asarray(trace)
    # zero crossings of the standing-wave oscillation
    sgn = np.signbit(trace)
    idx = np.nonzero(sgn[1:] != sgn[:-1])[0]
    t = idx + trace[idx] / (trace[idx] - trace[idx + 1])
    half_period = np.mean(np.diff(t))
    omega = np.pi / (half_period * solver.dt)
    return omega, 2 * np.pi / (ppw * d * MM), solver.dt, d * MM


def test_dispersion_20_ppw():
    omega, k, dt, d = _periodic_frequency()
    vp = omega / k
    assert abs(vp / C0 - 1) < 0.01
    # discrete relation sin(w dt/2)/(c dt) = sin(k d/2)/d, solved for w
    w_theory = 2 / dt * math.asin(C0 * dt / d * math.sin(k * d / 2))
    assert omega == pytest.approx(w_theory, rel=2e-3)


def test_cavity_energy_and_late_time():
    drift, growth = cavity_energy(10000, 50000)
    assert drift < 1e-3
    assert growth < 2.0


def test_pec_edges_stay_zero():
    spec = GridSpec(0.2, 0.2, 0.2, 12, 12, 12)
    geom = Geometry((Primitive((0.8, 0.8, 0.8, 1.6, 1.6, 1.6), METAL, 2, "cube"),), PortPlane(0, 0, 1, 0, 1),
                    spec.extent, ())
    grid = voxelize(geom, spec)
    solver = Solver(grid)
    s = solver.new_state()
    s.Ez[2, 2, 2] = 1.0
    for _ in range(200):
        solver.step(s)
    for e, p in zip(s.e, grid.pec):
        assert not e[p].any()
    assert np.abs(s.Ez).max() > 0


def test_nan_aborts_with_location():
    spec = GridSpec(0.2, 0.2, 0.2, 10, 10, 10)
    solver = Solver(_vacuum(spec))
    s = solver.new_state()
    s.Hy[3, 4, 5] = np.nan
    with pytest.raises(InstabilityError) as err:
        for _ in range(solver.nan_check_every):
            solver.step(s)
    assert err.value.step == solver.nan_check_every


def _point_run(max_steps=40000):
    spec = GridSpec(0.5, 0.5, 0.5, 30, 30, 30, pml=(8,) * 6)
    wf = Waveform(28e9, 8e9)
    src = PointSource("Ez", (15, 15, 15), wf)
    probe = PointProbe("Ez", (18, 15, 15))
    return run(_vacuum(spec), None, src, {"p": probe}, StopRule(max_steps=max_steps), cpml=CpmlConfig(8))


def test_open_domain_converges_and_is_passive():
    art = _point_run()
    assert art.converged
    n_src = math.ceil(Waveform(28e9, 8e9).t_end / art.dt)
    after = art.energy[art.energy_steps >= n_src]
    # once the source is off the absorber can only remove energy
    assert after.max() <= after[0] * (1 + 1e-6)
    assert after[-1] < 1e-6 * art.energy.max()


def test_truncated_run_flagged():
    art = _point_run(max_steps=10)
    assert not art.converged
    assert art.steps == 10


def test_determinism():
    a = _point_run()
    b = _point_run()
    va, vb = a.probes["p"].values, b.probes["p"].values
    assert np.array_equal(np.asarray(va), np.asarray(vb))
    assert a.steps == b.steps


def test_fixed_steps_rule():
    spec = GridSpec(0.5, 0.5, 0.5, 10, 10, 10)
    sim = Simulation(_vacuum(spec), [], {})
    art = sim.run(StopRule(fixed_steps=7))
    assert art.converged and art.steps == 7
    sim.advance_to(12)
    assert sim.state.step == 12
