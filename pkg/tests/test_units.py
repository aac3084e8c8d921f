from __future__ import annotations

import math

import pytest

from cpwall.units import (
    CONSTANTS_ENV,
    DEFAULT_CONSTANTS,
    ConfigError,
    Constants,
    PhysicalSetup,
    PolarizabilityModel,
    UnitSystem,
    density_scale,
    density_to_physical,
    load_constants,
    read_config,
    to_reduced,
)


def test_unit_system_parse_is_case_insensitive():
    assert UnitSystem.parse("si") is UnitSystem.SI
    assert UnitSystem.parse(" Natural ") is UnitSystem.NATURAL
    with pytest.raises(ConfigError):
        UnitSystem.parse("cgs")


def test_default_constants_are_codata():
    assert DEFAULT_CONSTANTS.hbar_c == pytest.approx(3.16152677e-26, rel=1e-8)
    assert DEFAULT_CONSTANTS.hbar_c_in(UnitSystem.NATURAL) == 1.0


@pytest.mark.parametrize("alpha,d", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (math.nan, 1.0), (1.0, math.inf)])
def test_setup_rejects_nonphysical(alpha, d):
    with pytest.raises(ConfigError):
        PhysicalSetup(alpha, d)


def test_setup_accepts_unit_string():
    assert PhysicalSetup(1.0, 2.0, "SI").unit_system is UnitSystem.SI


def test_polarizability_profile_must_match_static_value():
    model = PolarizabilityModel(2.0, lambda k: 2.0 / (1 + k * k))
    assert model(0.0) == 2.0 and model(1.0) == 1.0
    assert model.far_zone()(5.0) == 2.0
    with pytest.raises(ConfigError):
        PolarizabilityModel(2.0, lambda k: 3.0)


def test_read_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nalpha = 2.5\n\nrho-max = 4   # trailing\n")
    assert read_config(p, {"alpha", "rho_max"}) == {"alpha": "2.5", "rho_max": "4"}


@pytest.mark.parametrize("text", ["beta = 1\n", "alpha = 1\nalpha = 2\n", "alpha 1\n"])
def test_read_config_errors(tmp_path, text):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    with pytest.raises(ConfigError):
        read_config(p, {"alpha"})


def test_load_constants_from_file_and_env(tmp_path, monkeypatch):
    p = tmp_path / "c.cfg"
    p.write_text("hbar_c = 2.0\nc = 3.0\n")
    assert load_constants(p) == Constants(2.0, 3.0)
    monkeypatch.setenv(CONSTANTS_ENV, str(p))
    assert load_constants().hbar_c == 2.0
    monkeypatch.delenv(CONSTANTS_ENV)
    assert load_constants() is DEFAULT_CONSTANTS
    p.write_text("hbar_c = -1\n")
    with pytest.raises(ConfigError):
        load_constants(p)


def test_reduced_conversion_and_scale():
    s = PhysicalSetup(1.0, 2.0)
    assert to_reduced(s, 3.0) == 1.5
    with pytest.raises(ValueError):
        to_reduced(s, -1.0)
    assert density_scale(s) == pytest.approx(1.0 / (4 * math.pi**2 * 2.0**7))
    assert density_to_physical(17.0, s) == pytest.approx(17.0 * density_scale(s))
    si = PhysicalSetup(1e-30, 1e-6, UnitSystem.SI)
    assert density_scale(si) == pytest.approx(DEFAULT_CONSTANTS.hbar_c * 1e-30 / (4 * math.pi**2 * 1e-42))
