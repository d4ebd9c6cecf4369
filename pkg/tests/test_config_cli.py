import json
from pathlib import Path

import pytest

from esiwfdtd.cli import EXIT_FAIL, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from esiwfdtd.config import ConfigError, RunConfig, dump_config, load_config, parse_config
from esiwfdtd.fieldio import read_volume
from esiwfdtd.geometry import AntennaParams

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_shipped_transverse_config():
    cfg = load_config(CONFIGS / "transverse.cfg")
    assert cfg.params() == AntennaParams.transverse()


def test_shipped_longitudinal_config():
    cfg = load_config(CONFIGS / "longitudinal.cfg")
    p = cfg.params()
    assert (p.mode, p.L_A, p.X_S, p.Y_S) == ("longitudinal", 18.5, 3.8, 2.2)
    assert p.cavity_length() == pytest.approx(10.0)


def test_typo_rejected():
    with pytest.raises(ConfigError, match="unknown key 'slotlength' in section \\[geometry\\]"):
        parse_config("[geometry]\nslotlength = 2.2\n")


def test_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[antenna]\nL_A = 1\n")


def test_empty_is_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.params() == AntennaParams.transverse()
    assert "[geometry]" in dump_config(cfg)


@pytest.mark.parametrize("text, key", [
    ("[solver]\nmax_steps = many\n", "max_steps"),
    ("[geometry]\nS_L = 0\n", "slot length must be positive"),
    ("[output]\nf_hi = 40e9\n", "excitation band"),
    ("[solver]\nsafety = 1.5\n", "safety"),
])
def test_errors_name_key(text, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(text)


def test_round_trip():
    cfg = load_config(CONFIGS / "longitudinal.cfg").with_value("solver.max_steps", 1234)
    back = parse_config(dump_config(cfg))
    assert back.params() == cfg.params()
    assert back.settings() == cfg.settings()


def test_inline_comments_and_case():
    cfg = parse_config("[geometry]\nX_S = 7.1  # moved\n")
    assert cfg.params().X_S == 7.1
    with pytest.raises(ConfigError):
        parse_config("[geometry]\nx_s = 7.1\n")


# ------------------------------------------------------- CLI

def _cfg(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SHORT = "[solver]\nmax_steps = 300\n[output]\nangle_step = 5\n"


def test_unconverged_flag(tmp_path, capsys):
    out = tmp_path / "o"
    rc = main(["run", "--config", _cfg(tmp_path, "[solver]\nmax_steps = 1\n"), "--out", str(out)])
    assert rc == EXIT_OK
    s = json.loads((out / "summary.json").read_text())
    assert s["converged"] is False and s["approximate"] is True
    assert "unconverged" in capsys.readouterr().out
    assert (out / "resolved.cfg").read_text().startswith("[geometry]")


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rc = main(["run", "--out", str(blocker / "sub")])
    assert rc == EXIT_IO


def test_bad_config_exit(tmp_path, capsys):
    rc = main(["run", "--config", _cfg(tmp_path, "[geometry]\nslotlength = 1\n"), "--out", str(tmp_path / "o")])
    assert rc == EXIT_USAGE
    assert "slotlength" in capsys.readouterr().err


def test_sweep_errors(tmp_path):
    assert main(["sweep", "--param", "X_S", "--values", " , ", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["sweep", "--param", "nonsense", "--values", "1", "--out", str(tmp_path)]) == EXIT_USAGE


def test_mesh_preview(tmp_path):
    out = tmp_path / "m"
    assert main(["mesh-preview", "--config", str(CONFIGS / "transverse.cfg"), "--out", str(out)]) == EXIT_OK
    mesh = json.loads((out / "mesh.json").read_text())
    assert mesh["cells"] == 923832
    eps, hdr = read_volume(out / "cell_eps_r.emv")
    assert eps.shape == tuple(mesh["grid"]["n"])
    assert eps.max() == pytest.approx(3.55)
    geo = json.loads((out / "geometry.json").read_text())
    assert any(p["name"] == "patch" for p in geo["primitives"])


@pytest.fixture(scope="module")
def short_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    cfg = _cfg(base, SHORT)
    a, b = base / "a", base / "b"
    assert main(["run", "--config", cfg, "--out", str(a)]) == EXIT_OK
    assert main(["run", "--config", cfg, "--out", str(b)]) == EXIT_OK
    assert main(["sweep", "--config", cfg, "--param", "S_W", "--values", "1.0", "--out", str(base / "s")]) == EXIT_OK
    return a, b, base / "s"


@pytest.mark.parametrize("name", ["s11.csv", "pattern.csv", "gain_efficiency.csv", "port_total.csv",
                                  "port_incident.csv", "resolved.cfg", "fieldmaps/slot_aperture_absE.emv"])
def test_reruns_byte_identical(short_runs, name):
    a, b, _ = short_runs
    assert (a / name).read_bytes() == (b / name).read_bytes()


def test_degenerate_sweep_equals_run(short_runs):
    a, _, s = short_runs
    sub = s / "S_W=1.0"
    for name in ("s11.csv", "pattern.csv", "gain_efficiency.csv"):
        assert (sub / name).read_bytes() == (a / name).read_bytes()
    rows = (s / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("S_W,") and len(rows) == 2


def test_validate_fast_reports(capsys, monkeypatch):
    from esiwfdtd import validation
    from esiwfdtd.validation import Check

    monkeypatch.setattr(validation, "run_suite",
                        lambda fast=False: [Check("a", 1.0, 1.0, "exact", True), Check("b", 2.0, 1.0, "exact", False)])
    assert main(["validate", "--fast"]) == EXIT_FAIL
    out = capsys.readouterr().out
    assert "[PASS] a" in out and "[FAIL] b" in out and "1/2 checks passed" in out
