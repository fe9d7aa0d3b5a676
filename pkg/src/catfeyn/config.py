"""Run configuration: INI files read with :mod:`configparser`.

Example::

    [lattice]
    omega_uv = 3
    omega_ir = 5
    n_space = 1

    [theory]
    preset = scalar-yukawa
    meson_mass = 1
    nucleon_mass = 1
    coupling = 1.0
    epsilon = 1e-6

    [run]
    format = text
    weighting = multinomial
    truncation = 2
    max_particles = 2

Rational values are written ``num/den``.  Momenta files have one
``[momenta]`` section mapping labels to spatial momenta (comma separated
components, multiples of ``1/omega_ir``); an optional ``E=...`` entry makes
a momentum off shell::

    [momenta]
    p1 = -1/5
    p1' = -2/5
    k = 1/5, E=3/5
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .fock import TheoryParams
from .lattice import MOMENTUM, FourMomentum, LatticeParams, LatticePoint, dispersion_energy
from .splitmerge import MULTINOMIAL, WEIGHTINGS

CONFIG_ENV = "CATFEYN_CONFIG"
PRESETS = ("real-scalar", "complex-scalar", "scalar-yukawa")
FORMATS = ("text", "canonical", "dot", "json")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    lattice: LatticeParams = field(default_factory=lambda: LatticeParams(3, 5))
    theory: TheoryParams = field(default_factory=TheoryParams)
    preset: str = "scalar-yukawa"
    output_format: str = "text"
    weighting: str = MULTINOMIAL
    truncation: int = 2
    max_particles: int = 2
    loop_cutoff: int | None = None
    source: str | None = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown theory preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        if self.output_format not in FORMATS:
            raise ConfigError(f"unknown format {self.output_format!r}")
        if self.weighting not in WEIGHTINGS:
            raise ConfigError(f"unknown weighting {self.weighting!r}")
        if self.truncation < 0 or self.max_particles < 0:
            raise ConfigError("truncation and max_particles must be non-negative")

    def with_overrides(self, **kwargs) -> "RunConfig":
        clean = {k: v for k, v in kwargs.items() if v is not None}
        if "epsilon" in clean:
            clean["theory"] = replace(self.theory, epsilon=clean.pop("epsilon"))
        return replace(self, **clean)


def _rational(text: str, what: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{what}: expected a number like 3 or 2/5, got {text!r}") from None


def _int(text: str, what: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"{what}: expected an integer, got {text!r}") from None


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep momentum labels like p1' verbatim
    return cp


def load_config(path: str | os.PathLike | None = None) -> RunConfig:
    """Read a config file; ``None`` falls back to ``$CATFEYN_CONFIG`` and then defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {str(p)!r} not found")
    cp = _parser()
    try:
        cp.read_string(p.read_text(), source=str(p))
    except configparser.Error as err:
        raise ConfigError(f"{p}: {err}") from None
    return config_from_parser(cp, source=str(p))


def config_from_parser(cp: configparser.ConfigParser, source: str | None = None) -> RunConfig:
    lat = cp["lattice"] if cp.has_section("lattice") else {}
    th = cp["theory"] if cp.has_section("theory") else {}
    run = cp["run"] if cp.has_section("run") else {}
    try:
        lattice = LatticeParams(
            _int(lat.get("omega_uv", "3"), "omega_uv"),
            _int(lat.get("omega_ir", "5"), "omega_ir"),
            _int(lat.get("n_space", "1"), "n_space"),
        )
        theory = TheoryParams(
            _rational(th.get("meson_mass", "1"), "meson_mass"),
            _rational(th.get("nucleon_mass", "1"), "nucleon_mass"),
            float(th.get("coupling", "1.0")),
            float(th.get("epsilon", "1e-6")),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None
    cutoff = run.get("loop_cutoff", "").strip()
    return RunConfig(
        lattice=lattice,
        theory=theory,
        preset=th.get("preset", "scalar-yukawa").strip(),
        output_format=run.get("format", "text").strip(),
        weighting=run.get("weighting", MULTINOMIAL).strip(),
        truncation=_int(run.get("truncation", "2"), "truncation"),
        max_particles=_int(run.get("max_particles", "2"), "max_particles"),
        loop_cutoff=_int(cutoff, "loop_cutoff") if cutoff else None,
        source=source,
    )


def parse_momenta(text: str, params: LatticeParams) -> dict[str, tuple[LatticePoint, Fraction | None]]:
    """Labels to ``(spatial point, explicit energy or None)``."""
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"momenta file: {err}") from None
    if not cp.has_section("momenta"):
        raise ConfigError("momenta file needs a [momenta] section")
    out = {}
    for label, value in cp["momenta"].items():
        parts = [s.strip() for s in value.split(",") if s.strip()]
        energy = None
        if parts and parts[-1].startswith("E="):
            energy = _rational(parts.pop()[2:], f"energy of {label}")
            if (energy * params.omega_ir).denominator != 1:
                raise ConfigError(f"energy of {label} ({energy}) is not a multiple of 1/{params.omega_ir}")
        comps = [_rational(s, f"momentum {label}") for s in parts]
        if len(comps) != params.n_space:
            raise ConfigError(f"momentum {label} needs {params.n_space} spatial component(s), got {len(comps)}")
        idx = []
        for c in comps:
            scaled = c * params.omega_ir
            if scaled.denominator != 1:
                raise ConfigError(f"momentum {label} component {c} is not a multiple of 1/{params.omega_ir}")
            idx.append(int(scaled))
        out[label] = (LatticePoint(tuple(idx), MOMENTUM, params), energy)
    return out


def four_momenta(spec: dict, masses: dict[str, Fraction]) -> tuple[dict[str, FourMomentum], frozenset]:
    """Put labelled momenta on shell with the given per-label masses (explicit energies stay off shell)."""
    out, off = {}, set()
    for label, (point, energy) in spec.items():
        if energy is None:
            if label not in masses:
                raise ConfigError(f"no particle carries momentum {label!r}, give its energy with E=")
            energy = dispersion_energy(point, masses[label])
        else:
            off.add(label)
        out[label] = FourMomentum(point, energy)
    return out, frozenset(off)
