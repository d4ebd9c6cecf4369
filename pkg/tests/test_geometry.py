import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from esiwfdtd.constants import C0, MM
from esiwfdtd.geometry import (
    AntennaParams, Geometry, GeometryError, build_antenna, guided_wavelength, is_mirror_symmetric_y,
    standing_wave_peak_positions, te10_cutoff,
)

# frozen oracle values (closed-form TE10 dispersion, recomputed by hand)
LAMBDA_G_28 = 16.2633  # mm, a = 7.112 mm
FC_WR28 = 21.0769e9


def test_cutoff_and_guided_wavelength():
    assert te10_cutoff(7.112) == pytest.approx(FC_WR28, rel=1e-4)
    assert guided_wavelength(28e9, 7.112) == pytest.approx(LAMBDA_G_28, rel=1e-4)


def test_standing_wave_peaks():
    peaks = standing_wave_peak_positions(28e9, 7.112, 2)
    assert peaks == pytest.approx([4.0658, 12.1975], abs=2e-3)


def test_evanescent_rejected():
    with pytest.raises(GeometryError, match="evanescent: no standing-wave pattern"):
        standing_wave_peak_positions(21.0e9, 7.112, 1)


def test_high_frequency_limit():
    f = 5e13
    lam0 = C0 / f / MM
    assert standing_wave_peak_positions(f, 7.112, 1)[0] == pytest.approx(lam0 / 4, rel=1e-6)


def test_transverse_slot_across_guide():
    g = build_antenna(AntennaParams.transverse())
    x0, y0, x1, y1 = g.info["slot"]
    assert y1 - y0 == pytest.approx(2.2)
    assert x1 - x0 == pytest.approx(1.0)
    assert 0.5 * (y0 + y1) == pytest.approx(0.0)
    assert g.info["x_short"] - 0.5 * (x0 + x1) == pytest.approx(7.6)


def test_longitudinal_slot_along_guide():
    p = AntennaParams.longitudinal()
    assert (p.L_A, p.X_S, p.Y_S) == (18.5, 3.8, 2.2)
    g = build_antenna(p)
    x0, y0, x1, y1 = g.info["slot"]
    assert x1 - x0 == pytest.approx(2.2)
    assert y1 - y0 == pytest.approx(1.0)
    assert 0.5 * (y0 + y1) == pytest.approx(2.2)
    assert g.info["L_ES"] == pytest.approx(10.0)


def test_zero_slot_length_rejected():
    with pytest.raises(GeometryError, match="slot length must be positive"):
        AntennaParams.transverse(S_L=0).validate()


@pytest.mark.parametrize("kw, msg", [
    (dict(S_L=8.0), "S_L <= a_ES"),
    (dict(X_S=0.3), "short-circuit wall"),
    (dict(L_ES=30.0), "does not fit"),
    (dict(tan_delta_esiw=-1e-3), "loss tangents"),
    (dict(mode="diagonal"), "mode must be"),
])
def test_invariants_named(kw, msg):
    with pytest.raises(GeometryError, match=msg):
        AntennaParams.transverse(**kw).validate()


def test_slot_outside_patch_warns():
    with pytest.warns(UserWarning, match="not under the patch"):
        build_antenna(AntennaParams.transverse(L_P=0.5))


def test_json_round_trip():
    g = build_antenna(AntennaParams.transverse())
    back = Geometry.from_json(g.to_json())
    assert back.primitives == g.primitives
    assert back.bounding_box == g.bounding_box
    assert json.loads(back.to_json()) == json.loads(g.to_json())


def test_transverse_mirror_symmetric():
    assert is_mirror_symmetric_y(build_antenna(AntennaParams.transverse()))
    assert not is_mirror_symmetric_y(build_antenna(AntennaParams.longitudinal()))


def test_lossless_zeroes_loss():
    g = build_antenna(AntennaParams.transverse(lossless=True))
    assert all(p.material.tan_delta == 0 for p in g.primitives)


@settings(max_examples=30, deadline=None)
@given(f=st.floats(21.2e9, 60e9), a=st.floats(5.0, 10.0))
def test_guided_wavelength_exceeds_free_space(f, a):
    if f <= te10_cutoff(a) * 1.001:
        return
    lam_g = guided_wavelength(f, a)
    lam0 = C0 / f / MM
    assert lam_g > lam0
    # closed form (lambda0 / lambda_g)^2 + (lambda0 / 2a)^2 = 1
    assert (lam0 / lam_g) ** 2 + (lam0 / (2 * a)) ** 2 == pytest.approx(1.0, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(x_s=st.floats(1.0, 13.0), s_l=st.floats(0.2, 7.0))
def test_valid_transverse_params_build(x_s, s_l):
    p = AntennaParams.transverse(X_S=x_s, S_L=s_l, L_P=8.0, W_P=8.0)
    try:
        p.validate()
    except GeometryError:
        return
    g = build_antenna(p)
    assert math.isclose(g.info["x_short"] - 0.5 * (g.info["slot"][0] + g.info["slot"][2]), x_s)
