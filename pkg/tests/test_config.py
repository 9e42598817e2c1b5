"""Config parsing, overrides and initial-data presets."""

import math

import numpy as np
import pytest

from thermodelay.config import (ConfigError, load_config, make_initial_data,
                                parse_range)

BASE = """
[model]
alpha = 1.0
beta = 5.0
tau = 1.0

[grid]
nx = 8
nrho = 8

[lyapunov]
lambda = 0.5
"""


def test_defaults_and_file_values(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(BASE)
    cfg = load_config(str(path))
    assert cfg.params.beta == 5.0
    assert cfg.beta_given
    assert cfg.params.theta_bc == "neumann"
    assert cfg.grid.Nx == 8 and cfg.grid.Nrho == 8
    assert cfg.lam == 0.5
    assert cfg.t_end == 40.0          # default
    assert cfg.echo["model"]["beta"] == "5.0"


def test_overrides_applied():
    cfg = load_config(text=BASE, overrides=["model.beta=7.5", "time.t_end=3"])
    assert cfg.params.beta == 7.5
    assert cfg.t_end == 3.0


def test_bad_override_rejected():
    with pytest.raises(ConfigError):
        load_config(text=BASE, overrides=["beta=7.5"])
    with pytest.raises(ConfigError):
        load_config(text=BASE, overrides=["model.beta"])


def test_bad_values_rejected():
    with pytest.raises(ConfigError):
        load_config(text=BASE, overrides=["model.alpha=-1"])
    with pytest.raises(ConfigError):
        load_config(text=BASE, overrides=["grid.nx=abc"])
    with pytest.raises(ConfigError):
        load_config(text=BASE, overrides=["model.theta_bc=periodic"])


def test_missing_file_rejected():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.ini")


def test_parse_range_forms():
    assert parse_range("1,2,3.5") == [1.0, 2.0, 3.5]
    assert parse_range("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_range("") == []
    with pytest.raises(ConfigError):
        parse_range("0:1")


def test_initial_data_presets():
    cfg = load_config(text=BASE)
    u0, u1, theta0, f0 = make_initial_data(cfg)
    g = cfg.grid
    assert np.allclose(u0, np.sin(math.pi * g.x_nodes))
    assert np.max(np.abs(u1)) == 0.0
    assert np.allclose(theta0, np.cos(math.pi * g.x_flux))
    # constant history equals the discrete u_x of u0 at the flux points
    ux0 = np.diff(u0, prepend=0.0, append=0.0) / g.dx
    assert np.allclose(f0(g.x_flux, -0.3), ux0)


def test_initial_data_decaying_history():
    cfg = load_config(text=BASE, overrides=["init.f0=decaying_exponential:2.0"])
    _, _, _, f0 = make_initial_data(cfg)
    g = cfg.grid
    a = f0(g.x_flux, 0.0)
    b = f0(g.x_flux, -1.0)
    assert np.allclose(b, a * math.exp(-2.0))


def test_unknown_presets_rejected():
    cfg = load_config(text=BASE, overrides=["init.u0=wavelet"])
    with pytest.raises(ConfigError):
        make_initial_data(cfg)
    cfg = load_config(text=BASE, overrides=["init.f0=mystery"])
    with pytest.raises(ConfigError):
        make_initial_data(cfg)


def test_higher_mode_presets():
    cfg = load_config(text=BASE, overrides=["init.u0=sine:3", "init.theta0=cosine:2"])
    u0, _, theta0, _ = make_initial_data(cfg)
    g = cfg.grid
    assert np.allclose(u0, np.sin(3 * math.pi * g.x_nodes))
    assert np.allclose(theta0, np.cos(2 * math.pi * g.x_flux))
