"""Energy, Lyapunov functionals, decay-rate fits and runtime decay checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import LyapunovConstants, f_weight
from .discretization import Grid, State, grad_u
from .params import PhysParams

__all__ = ["Trajectory", "energy", "lyapunov_components", "decay_rate_fit",
           "check_decay_inequality", "theta_mass"]


@dataclass
class Trajectory:
    """Time series of observables recorded along a simulation."""

    times: np.ndarray
    E: np.ndarray
    V: np.ndarray
    Vtilde: np.ndarray
    V_terms: np.ndarray          # shape (6, nsamples)
    theta_mass: np.ndarray
    snapshots: list = field(default_factory=list)   # optional (t, State) pairs
    blowup_time: float | None = None

    def __post_init__(self):
        n = len(self.times)
        for arr in (self.E, self.V, self.Vtilde, self.theta_mass):
            if len(arr) != n:
                raise ValueError("misaligned trajectory arrays")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


def energy(state: State, grid: Grid, p: PhysParams, xi: float) -> float:
    """Discrete energy: 1/2 (||u_t||^2 + alpha ||u_x||^2 + ||theta||^2)
    plus xi times the history integral of the past strain."""
    if xi <= 0:
        raise ValueError("xi must be positive")
    dx, drho = grid.dx, grid.drho
    ux = grad_u(state.u, dx)
    quad = 0.5 * (
        np.dot(state.v, state.v) + p.alpha * np.dot(ux, ux)
        + np.dot(state.theta, state.theta)
    ) * dx
    hist = xi * np.sum(state.z**2) * dx * drho
    return float(quad + hist)


def lyapunov_components(state: State, grid: Grid, consts: LyapunovConstants,
                        p: PhysParams) -> dict:
    """The six functional terms and their weighted sums V, Vtilde.

    rho-integrals use the trapezoid rule on the rho grid, with weights
    e^{-2 lam rho} (history norm) and e^{-lam rho} f(rho) (cross term).
    """
    dx = grid.dx
    rho = grid.rho_nodes
    lam = consts.lam
    ux = grad_u(state.u, dx)

    V1 = 0.5 * np.dot(state.v, state.v) * dx
    V2 = 0.5 * np.dot(ux, ux) * dx
    V3 = 0.5 * np.dot(state.theta, state.theta) * dx

    znorm2 = np.sum(state.z**2, axis=0) * dx            # ||z(., rho)||^2 per node
    V4 = float(np.trapezoid(np.exp(-2.0 * lam * rho) * znorm2, rho))

    zdotux = state.z.T @ ux * dx                        # <z(., rho), u_x> per node
    w5 = np.exp(-lam * rho) * f_weight(rho, lam)
    V5 = -float(np.trapezoid(w5 * zdotux, rho))

    V6 = float(np.dot(state.u, state.v) * dx)

    N1, N2, N3, N4, N5, N6 = (consts.N1, consts.N2, consts.N3,
                              consts.N4, consts.N5, consts.N6)
    Vtilde = N1 * V1 + p.alpha * N2 * V2 + N3 * V3 + N4 * V4
    V = Vtilde + N5 * V5 + N6 * V6
    return {"V1": V1, "V2": V2, "V3": V3, "V4": V4, "V5": V5, "V6": V6,
            "V": V, "Vtilde": Vtilde}


def decay_rate_fit(traj: Trajectory, window: tuple[float, float]) -> dict:
    """Least-squares exponential fit of E on [t_lo, t_hi].

    Returns a0 = -slope of log E vs t, the prefactor C and the coefficient
    of determination r2.
    """
    t_lo, t_hi = window
    mask = (traj.times >= t_lo) & (traj.times <= t_hi)
    t = traj.times[mask]
    E = traj.E[mask]
    if len(t) < 3:
        raise ValueError("window contains fewer than 3 samples")
    if np.any(E <= 0):
        raise ValueError("window contains nonpositive energy (degenerate run)")
    logE = np.log(E)
    slope, intercept = np.polyfit(t, logE, 1)
    resid = logE - (slope * t + intercept)
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.sum((logE - logE.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return {"a0": -float(slope), "C": float(np.exp(intercept)), "r2": r2}


def check_decay_inequality(traj: Trajectory, n0: float) -> dict:
    """A-posteriori check of V' <= -n0 Vtilde at interior sample points.

    V' is formed by central differences; the tolerance band covers the
    differencing error, estimated from third differences of V.
    """
    t, V, Vt = traj.times, traj.V, traj.Vtilde
    if len(t) < 5:
        raise ValueError("too few samples for the decay-inequality check")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-8):
        raise ValueError("decay check expects uniform sampling")
    h = float(dt[0])

    dV = (V[2:] - V[:-2]) / (2.0 * h)
    excess = dV + n0 * Vt[1:-1]

    third = np.diff(V, 3)
    Vppp = np.max(np.abs(third)) / h**3 if len(third) else 0.0
    band = Vppp * h**2 / 6.0 + 1e-12 * max(1.0, float(np.max(np.abs(V))))

    violating = excess > band
    return {
        "max_excess": float(np.max(excess)),
        "band": float(band),
        "fraction_violating": float(np.mean(violating)),
        "satisfied": bool(not np.any(violating)),
    }


def theta_mass(state: State, grid: Grid) -> float:
    """Discrete integral of theta over the domain."""
    return float(np.sum(state.theta) * grid.dx)
