"""Acceptance criteria, one [PASS]/[FAIL] line each (repeated in the terminal summary).

Tolerances are fixed here and never loosened; a failing line is a real miss.
"""

import math
import time

import numpy as np
import pytest

from conftest import report
from esiwfdtd import validation
from esiwfdtd.geometry import AntennaParams
from esiwfdtd.pipeline import Settings, analyse_antenna, mesh_for
from esiwfdtd.postproc import cut_symmetry_db, field_map, local_max_in, pattern_peak_theta

pytestmark = pytest.mark.slow


def verdict(tag, name, measured, target, passed, detail=""):
    line = f"[{'PASS' if passed else 'FAIL'}] {tag} {name}: {measured} (target {target})"
    if detail:
        line += f" {detail}"
    report(line)
    return passed


def from_check(tag, check):
    flag, rest = check.line().split("] ", 1)
    report(f"{flag}] {tag} {rest}")
    return check.passed


def _ghz(f):
    return "n/a" if f is None or not math.isfinite(f) else f"{f / 1e9:.3f} GHz"


# ---------------------------------------------------------------- oracles

def test_c01_wr28_cutoff():
    t0 = time.perf_counter()
    check = validation.check_cutoff(0.01)
    wall = time.perf_counter() - t0
    ok = from_check("C1", check)
    ok_t = verdict("C1", "cutoff runtime", f"{wall:.1f} s", "< 120 s", wall < 120)
    assert ok and ok_t


def test_c02_shorted_guide():
    assert from_check("C2", validation.check_shorted_guide(0.05))


def test_c03_cpml():
    assert from_check("C3", validation.check_cpml(-60.0, 10))


def test_c04_closed_cavity():
    checks = validation.check_energy(1e-3, 10000, 50000)
    assert all([from_check("C4", c) for c in checks])


def test_c05_ntff():
    checks = validation.check_hertzian(0.1) + validation.check_half_wave(0.3)
    assert all([from_check("C5", c) for c in checks])


# ---------------------------------------------------------------- antenna figures

def test_c06_transverse_band(transverse):
    b = transverse.band
    wall = transverse.total.wallclock + transverse.reference.wallclock
    ok1 = verdict("C6", "transverse S11 minimum", _ghz(b.f_min), "28.0 +- 0.7 GHz",
                  abs(b.f_min - 28e9) <= 0.7e9, f"depth {b.s11_min_db:.2f} dB")
    fb = f"{b.fractional:.2f} %" if b.matched else "no matched band"
    ok2 = verdict("C6", "transverse -10 dB fractional bandwidth", fb, "6.8 +- 2.5 %",
                  b.matched and abs(b.fractional - 6.8) <= 2.5,
                  f"({_ghz(b.f_lo)} - {_ghz(b.f_hi)})" if b.matched else "")
    ok3 = verdict("C6", "transverse runtime", f"{wall / 60:.1f} min", "<= 30 min", wall <= 1800)
    assert ok1 and ok2 and ok3


def test_c07_longitudinal_band(longitudinal):
    b = longitudinal.band
    centre = b.centre if b.matched else float("nan")
    ok1 = verdict("C7", "longitudinal band centre", _ghz(centre), "28.0 +- 0.7 GHz",
                  b.matched and abs(centre - 28e9) <= 0.7e9,
                  f"S11 minimum {b.s11_min_db:.2f} dB at {_ghz(b.f_min)}")
    fb = f"{b.fractional:.2f} %" if b.matched else "no matched band"
    ok2 = verdict("C7", "longitudinal -10 dB fractional bandwidth", fb, "5 +- 2.5 %",
                  b.matched and abs(b.fractional - 5.0) <= 2.5)
    assert ok1 and ok2


def test_c08_realized_gain(transverse, longitudinal):
    gt = transverse.gain_at(28e9).gain_dbi
    gl = longitudinal.gain_at(28e9).gain_dbi
    ok1 = verdict("C8", "transverse broadside realized gain", f"{gt:.2f} dBi", "7.38 +- 1.0 dBi",
                  abs(gt - 7.38) <= 1.0)
    ok2 = verdict("C8", "longitudinal broadside realized gain", f"{gl:.2f} dBi", "6.57 +- 1.0 dBi",
                  abs(gl - 6.57) <= 1.0)
    ok3 = verdict("C8", "gain ordering transverse > longitudinal", f"{gt - gl:+.2f} dB", "> 0", gt > gl)
    assert ok1 and ok2 and ok3


def test_c09_radiation_efficiency(transverse, longitudinal, transverse_lossless):
    et = transverse.gain_at(28e9).rad_eff
    el = longitudinal.gain_at(28e9).rad_eff
    ok1 = verdict("C9", "transverse radiation efficiency (datasheet losses)", f"{100 * et:.1f} %", ">= 90 %",
                  et >= 0.9)
    ok2 = verdict("C9", "longitudinal radiation efficiency (datasheet losses)", f"{100 * el:.1f} %", ">= 90 %",
                  el >= 0.9)
    effs = np.array([r.rad_eff for r in transverse_lossless.gain_rows])
    worst = float(np.nanmax(np.abs(effs - 1)))
    ok3 = verdict("C9", "lossless radiation efficiency, all in-band points", f"worst deviation {100 * worst:.2f} %",
                  "100 +- 1 %", np.isfinite(effs).all() and worst <= 0.01,
                  f"at 28 GHz {100 * transverse_lossless.gain_at(28e9).rad_eff:.2f} %")
    assert ok1 and ok2 and ok3


def test_c10_broadside_peak(transverse, longitudinal):
    ok = []
    for name, res in (("transverse", transverse), ("longitudinal", longitudinal)):
        for cut in res.cuts:
            peak = pattern_peak_theta(cut.theta_deg, cut.directivity_dbi, 90.0)
            ok.append(verdict("C10", f"{name} {cut.plane}-plane pattern peak", f"theta = {peak:+.0f} deg",
                              "|theta| <= 5 deg", abs(peak) <= 5.0))
    assert all(ok)


def test_c11_standing_wave_nulls():
    assert from_check("C11", validation.check_nulls(0.05))


def test_c11_slot_field_maximum(transverse):
    res = transverse
    probe = res.planes["slot_aperture"]
    z = float(res.spec.nodes(2)[probe.index])
    fm = field_map(probe, res.spec, 2, z, 28e9, tangential=True)
    x0, y0, x1, y1 = res.geometry.info["slot"]
    inside = (fm.u[:, None] >= x0) & (fm.u[:, None] <= x1) & (fm.v[None, :] >= y0) & (fm.v[None, :] <= y1)
    ok = local_max_in(fm, (x0, y0, x1, y1))
    verdict("C11", "|E| local maximum inside the slot footprint (aperture plane)",
            "yes" if ok else "no", "yes", ok,
            f"max inside {fm.magnitude[inside].max():.3g} V/m, plane z = {z:.3f} mm")
    assert ok


# ---------------------------------------------------------------- properties

def test_property_passivity(transverse, longitudinal, transverse_lossless):
    worst = max(float(np.abs(r.trace.s11).max()) for r in (transverse, longitudinal, transverse_lossless))
    assert verdict("P", "passivity max |S11|", f"{worst:.4f}", "<= 1", worst <= 1.0)


def test_property_gain_below_directivity(transverse, longitudinal, transverse_lossless):
    margin = min(r.directivity_dbi - r.gain_dbi
                 for res in (transverse, longitudinal, transverse_lossless) for r in res.gain_rows)
    assert verdict("P", "realized gain <= directivity", f"min margin {margin:.3f} dB", ">= 0", margin >= 0)


def test_property_transverse_mirror_symmetry(transverse):
    cut = next(c for c in transverse.cuts if c.plane == "E")
    asym = cut_symmetry_db(cut.theta_deg, cut.directivity_dbi, 90.0)
    assert verdict("P", "transverse E-plane mirror symmetry", f"{asym:.4f} dB", "<= 0.2 dB", asym <= 0.2)


def test_property_determinism():
    s = Settings(max_steps=400, allow_unconverged=True)
    a = analyse_antenna(AntennaParams.transverse(), s)
    b = analyse_antenna(AntennaParams.transverse(), s)
    same = (np.array_equal(a.record.a_total, b.record.a_total)
            and np.array_equal(a.record.a_inc, b.record.a_inc)
            and np.array_equal(a.huygens.faces[0].E, b.huygens.faces[0].E))
    assert verdict("P", "bitwise-identical probe records on rerun", "identical" if same else "differ",
                   "identical", same)


@pytest.mark.parametrize("params", [AntennaParams.transverse(), AntennaParams.longitudinal()],
                         ids=["transverse", "longitudinal"])
def test_property_mesher_oracle(params):
    from test_mesher import assert_oracle_equivalent

    geom, est = mesh_for(params, Settings())
    try:
        assert_oracle_equivalent(geom, est.spec)
        ok = True
    except AssertionError:
        ok = False
    assert verdict("P", f"mesher oracle equivalence ({params.mode})", "match" if ok else "mismatch", "match", ok)
