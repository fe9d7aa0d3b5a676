from fractions import Fraction

import pytest

from catfeyn.config import (
    CONFIG_ENV,
    ConfigError,
    RunConfig,
    four_momenta,
    load_config,
    parse_momenta,
)
from catfeyn.lattice import LatticeParams


def test_defaults_are_desk_scale(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    cfg = load_config()
    assert cfg.lattice == LatticeParams(3, 5)
    assert cfg.preset == "scalar-yukawa" and cfg.output_format == "text"


def test_load_file(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text("[lattice]\nomega_uv = 1\nomega_ir = 3\n[theory]\nmeson_mass = 3/2\nepsilon = 0.1\n"
                 "[run]\nformat = json\nweighting = literal\nloop_cutoff = 2\n")
    cfg = load_config(p)
    assert cfg.lattice == LatticeParams(1, 3)
    assert cfg.theory.meson_mass == Fraction(3, 2)
    assert cfg.theory.epsilon == 0.1
    assert (cfg.output_format, cfg.weighting, cfg.loop_cutoff) == ("json", "literal", 2)
    assert cfg.source == str(p)


def test_env_fallback(tmp_path, monkeypatch):
    p = tmp_path / "env.ini"
    p.write_text("[lattice]\nomega_uv = 5\n")
    monkeypatch.setenv(CONFIG_ENV, str(p))
    assert load_config().lattice.omega_uv == 5


@pytest.mark.parametrize("body", [
    "[lattice]\nomega_uv = 2\n",
    "[lattice]\nomega_uv = three\n",
    "[theory]\npreset = phi4\n",
    "[run]\nformat = yaml\n",
    "[theory]\nepsilon = 0\n",
    "not an ini file",
])
def test_bad_files(tmp_path, body):
    p = tmp_path / "bad.ini"
    p.write_text(body)
    with pytest.raises(ConfigError):
        load_config(p)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_overrides():
    cfg = RunConfig().with_overrides(output_format="dot", epsilon=0.5, weighting=None)
    assert cfg.output_format == "dot" and cfg.theory.epsilon == 0.5
    assert cfg.weighting == RunConfig().weighting


def test_momenta_file():
    params = LatticeParams(3, 5)
    spec = parse_momenta("[momenta]\np1 = -1/5\np1' = 2/5\nk = 0, E=3/5\n", params)
    assert spec["p1"][0].coords == (-1,)
    assert spec["p1'"][0].coords == (2,)
    assert spec["k"][1] == Fraction(3, 5)
    moms, off = four_momenta(spec, {"p1": 1, "p1'": 1})
    assert moms["p1"].energy == 1 and off == {"k"}
    with pytest.raises(ConfigError):
        four_momenta({"q": spec["p1"]}, {})


@pytest.mark.parametrize("body", [
    "p1 = 0\n",
    "[momenta]\np1 = 1/3\n",
    "[momenta]\np1 = 0, 0\n",
    "[momenta]\np1 = 0, E=1/7\n",
])
def test_bad_momenta(body):
    with pytest.raises(ConfigError):
        parse_momenta(body, LatticeParams(3, 5))
