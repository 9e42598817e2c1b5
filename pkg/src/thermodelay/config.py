"""Run configuration: flat key=value files with sections, and initial-data presets."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .discretization import Grid, grad_u
from .params import PhysParams

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_range",
           "make_initial_data"]

SCHEMA_VERSION = 1

DEFAULTS = {
    "model": {
        "alpha": "1.0", "beta": "", "gamma": "1.0", "kappa": "1.0",
        "tau": "1.0", "ell": "1.0", "theta_bc": "neumann",
    },
    "grid": {"nx": "64", "nrho": "64"},
    "time": {
        "t_end": "40.0", "dt": "", "record_every": "1",
        "theta_weight": "0.5", "delay_mode": "ring",
    },
    "lyapunov": {
        "lambda": "", "lambda_grid": "0.5:3.0:11",
        "xi_factor": "2.0", "sharp_poincare": "false",
    },
    "init": {
        "u0": "sine:1", "u1": "zero", "theta0": "cosine:1",
        "f0": "constant_history",
    },
    "sweep": {"workers": "4", "spectrum": "false"},
    "output": {"fit_start_fraction": "0.4"},
}


class ConfigError(ValueError):
    pass


def parse_range(text: str) -> list[float]:
    """Parse 'a,b,c' or 'start:stop:num' into a list of floats."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range must be start:stop:num, got {text!r}")
        lo, hi, num = float(parts[0]), float(parts[1]), int(parts[2])
        return list(np.linspace(lo, hi, num))
    return [float(tok) for tok in text.split(",") if tok.strip()]


@dataclass
class RunConfig:
    """Parsed configuration, plus the raw key=value echo for reproducibility."""

    params: PhysParams
    beta_given: bool
    grid: Grid
    t_end: float
    dt: float | None
    record_every: int
    theta_weight: float
    delay_mode: str
    lam: float | None
    lambda_grid: list[float]
    xi_factor: float
    sharp_poincare: bool
    init: dict
    sweep: dict
    fit_start_fraction: float
    echo: dict = field(default_factory=dict)


def _parser_with_defaults() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_dict(DEFAULTS)
    return cp


def load_config(path: str | None = None, overrides: list[str] = (),
                text: str | None = None) -> RunConfig:
    """Read a config file (or literal text) and apply key=value overrides.

    Overrides use 'section.key=value', e.g. --override model.beta=5.0.
    """
    cp = _parser_with_defaults()
    try:
        if text is not None:
            cp.read_file(io.StringIO(text))
        elif path is not None:
            with open(path) as fh:
                cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc

    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(f"override must be section.key=value, got {ov!r}")
        key, val = ov.split("=", 1)
        sec, opt = key.split(".", 1)
        if not cp.has_section(sec):
            cp.add_section(sec)
        cp.set(sec.strip(), opt.strip(), val.strip())

    try:
        beta_text = cp.get("model", "beta").strip()
        params = PhysParams(
            alpha=cp.getfloat("model", "alpha"),
            beta=float(beta_text) if beta_text else 0.0,
            gamma=cp.getfloat("model", "gamma"),
            kappa=cp.getfloat("model", "kappa"),
            tau=cp.getfloat("model", "tau"),
            ell=cp.getfloat("model", "ell"),
            theta_bc=cp.get("model", "theta_bc").strip(),
        )
        grid = Grid(Nx=cp.getint("grid", "nx"), Nrho=cp.getint("grid", "nrho"),
                    ell=params.ell)
        dt_text = cp.get("time", "dt").strip()
        lam_text = cp.get("lyapunov", "lambda").strip()
        cfg = RunConfig(
            params=params,
            beta_given=bool(beta_text),
            grid=grid,
            t_end=cp.getfloat("time", "t_end"),
            dt=float(dt_text) if dt_text else None,
            record_every=cp.getint("time", "record_every"),
            theta_weight=cp.getfloat("time", "theta_weight"),
            delay_mode=cp.get("time", "delay_mode").strip(),
            lam=float(lam_text) if lam_text else None,
            lambda_grid=parse_range(cp.get("lyapunov", "lambda_grid")),
            xi_factor=cp.getfloat("lyapunov", "xi_factor"),
            sharp_poincare=cp.getboolean("lyapunov", "sharp_poincare"),
            init={k: cp.get("init", k).strip() for k in ("u0", "u1", "theta0", "f0")},
            sweep=dict(cp.items("sweep")),
            fit_start_fraction=cp.getfloat("output", "fit_start_fraction"),
        )
    except (ValueError, configparser.Error) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc

    cfg.echo = {sec: dict(cp.items(sec)) for sec in cp.sections()}
    return cfg


def _profile(name: str, x: np.ndarray, ell: float) -> np.ndarray:
    """Spatial preset: sine:n, bump, zero (Dirichlet profiles);
    cosine:n, zero (theta profiles)."""
    kind, _, arg = name.partition(":")
    n = int(arg) if arg else 1
    if kind == "zero":
        return np.zeros_like(x)
    if kind == "sine":
        return np.sin(n * math.pi * x / ell)
    if kind == "cosine":
        return np.cos(n * math.pi * x / ell)
    if kind == "bump":
        return np.exp(-100.0 * (x / ell - 0.5) ** 2) * np.sin(math.pi * x / ell)
    raise ConfigError(f"unknown profile preset {name!r}")


def make_initial_data(cfg: RunConfig):
    """Build (u0, u1, theta0, f0) from the preset names in the config."""
    grid, ell = cfg.grid, cfg.params.ell
    u0 = _profile(cfg.init["u0"], grid.x_nodes, ell)
    u1 = _profile(cfg.init["u1"], grid.x_nodes, ell)
    theta0 = _profile(cfg.init["theta0"], grid.x_flux, ell)

    ux0 = grad_u(u0, grid.dx)
    name = cfg.init["f0"]
    kind, _, arg = name.partition(":")
    if kind == "zero":
        def f0(x, s):
            return np.zeros_like(x)
    elif kind == "constant_history":
        def f0(x, s):
            return np.interp(x, grid.x_flux, ux0)
    elif kind == "decaying_exponential":
        rate = float(arg) if arg else 1.0

        def f0(x, s):
            return np.interp(x, grid.x_flux, ux0) * math.exp(rate * s)
    else:
        raise ConfigError(f"unknown history preset {name!r}")
    return u0, u1, theta0, f0
