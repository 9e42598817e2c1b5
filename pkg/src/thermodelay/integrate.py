"""IMEX time stepping and a dense matrix-exponential oracle.

The stiff viscous and heat terms (and the skew thermo-mechanical coupling)
are advanced by a theta-method on the coupled (v, theta) block, solved
monolithically from one LU factorization per (dt, params).  The delayed
stress alpha z(., 1)_x is the only explicit term; with the ring buffer and
dt = tau/Nrho it is known exactly at both endpoints of the step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .constants import LyapunovConstants
from .delay import HistoryBuffer, advance_transport, init_history
from .discretization import (Generator, Grid, State, build_operators, grad_u,
                             pack, unpack)
from .observables import Trajectory, energy, lyapunov_components, theta_mass
from .params import PhysParams

__all__ = ["ImplicitFactor", "NumericalBlowupError", "factor_implicit",
           "step_imex", "expm_oracle", "simulate"]

EXPM_MAX_DIM = 4000


class NumericalBlowupError(RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


@dataclass
class ImplicitFactor:
    """LU factorization of the implicit (v, theta) block for one (dt, weight)."""

    grid: Grid
    p: PhysParams
    dt: float
    theta_weight: float
    lu: tuple = field(repr=False, default=None)       # lu_factor of I - w dt M
    explicit_mat: np.ndarray = field(repr=False, default=None)  # I + (1-w) dt M
    D: np.ndarray = field(repr=False, default=None)   # alpha-stress divergence
    G: np.ndarray = field(repr=False, default=None)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self.lu, rhs)


def factor_implicit(grid: Grid, p: PhysParams, dt: float,
                    theta_weight: float = 0.5) -> ImplicitFactor:
    """Factor the coupled implicit block once; reusable across steps.

    The block treats beta u_xxt, kappa theta_xx and the gamma coupling
    implicitly.  For beta = kappa = gamma = 0 it reduces to the identity.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not (0.5 <= theta_weight <= 1.0):
        raise ValueError("theta_weight must lie in [1/2, 1]")
    ops = build_operators(grid, p)
    Nx, nt = grid.Nx, grid.ntheta
    n = Nx + nt
    M = np.zeros((n, n))
    M[:Nx, :Nx] = p.beta * ops.Dxx_dirichlet.toarray()
    M[:Nx, Nx:] = -p.gamma * ops.Dx_theta.toarray()
    M[Nx:, :Nx] = -p.gamma * ops.G.toarray()
    M[Nx:, Nx:] = p.kappa * ops.L_theta.toarray()

    w = theta_weight
    implicit = np.eye(n) - w * dt * M
    lu = sla.lu_factor(implicit)
    if not np.all(np.isfinite(lu[0])):
        raise RuntimeError("implicit factorization produced non-finite factors")
    return ImplicitFactor(
        grid=grid, p=p, dt=dt, theta_weight=w, lu=lu,
        explicit_mat=np.eye(n) + (1.0 - w) * dt * M,
        D=ops.D.toarray(), G=ops.G.toarray(),
    )


def step_imex(state: State, dt: float, fac: ImplicitFactor,
              delay, delay_mode: str = "ring") -> State:
    """One IMEX step; advances (u, v, theta) and the delay pipeline.

    `delay` is a HistoryBuffer (ring mode) or the z field itself is taken
    from state.z (transport mode).  In ring mode the delayed stress is
    available at both step endpoints and is combined with the theta-method
    weights; transport mode uses the start-of-step value.
    """
    grid, p, w = fac.grid, fac.p, fac.theta_weight
    Nx = grid.Nx

    if delay_mode == "ring":
        if not isinstance(delay, HistoryBuffer):
            raise TypeError("ring mode needs a HistoryBuffer")
        z1_n = delay.tail()
        z1_new = delay.snapshot(grid.Nrho - 1)  # u_x(t_{n+1} - tau)
        z1_eff = (1.0 - w) * z1_n + w * z1_new
    elif delay_mode == "transport":
        z1_eff = state.z[:, -1]
    else:
        raise ValueError(f"unknown delay_mode {delay_mode!r}")

    # near blow-up these products may overflow; the finite check below handles it
    with np.errstate(over="ignore", invalid="ignore"):
        force_v = p.alpha * (fac.D @ z1_eff)
        y = np.concatenate([state.v, state.theta])
        rhs = fac.explicit_mat @ y
        rhs[:Nx] += dt * force_v
    if not np.all(np.isfinite(rhs)):
        raise NumericalBlowupError("non-finite right-hand side before solve")
    y_new = fac.solve(rhs)
    if not np.all(np.isfinite(y_new)):
        raise NumericalBlowupError("non-finite state after implicit solve")

    v_new = y_new[:Nx]
    theta_new = y_new[Nx:]
    u_new = state.u + dt * ((1.0 - w) * state.v + w * v_new)
    ux_new = grad_u(u_new, grid.dx)

    if delay_mode == "ring":
        delay.push(ux_new)
        z_new = delay.as_field()
    else:
        z_new = advance_transport(state.z, ux_new, dt, p.tau, grid.drho)

    return State(u=u_new, v=v_new, z=z_new, theta=theta_new)


def expm_oracle(gen: Generator, state: State, t: float) -> State:
    """Exact discrete semigroup action e^{t A_h} via scaling-and-squaring.

    Dense only; refuses dimensions above EXPM_MAX_DIM.
    """
    if gen.dim > EXPM_MAX_DIM:
        raise ValueError(f"generator dimension {gen.dim} exceeds dense limit")
    phi = sla.expm(t * gen.dense())
    return unpack(phi @ pack(state), gen.grid)


def simulate(
    grid: Grid,
    p: PhysParams,
    consts: LyapunovConstants,
    u0: np.ndarray,
    u1: np.ndarray,
    theta0: np.ndarray,
    f0,
    t_end: float,
    dt: float | None = None,
    record_every: int = 1,
    delay_mode: str = "ring",
    theta_weight: float = 0.5,
    store_snapshots: bool = False,
    raise_on_blowup: bool = False,
) -> Trajectory:
    """Advance the system to t_end and record observables.

    Deterministic given its inputs.  dt defaults to tau/Nrho (exact ring
    delay).  The first step uses backward Euler to damp the initial layer,
    then the theta-method with the requested weight.  On numerical blow-up
    the trajectory is truncated and blowup_time set (or the error re-raised
    when raise_on_blowup).
    """
    if dt is None:
        dt = p.tau / grid.Nrho
    if delay_mode == "ring" and abs(dt * grid.Nrho / p.tau - 1.0) > 1e-12:
        raise ValueError("ring mode requires dt = tau/Nrho; use transport mode")

    theta0 = np.asarray(theta0, dtype=float).copy()
    if p.theta_bc == "neumann":
        theta0 -= theta0.mean()

    z0, buf = init_history(f0, grid, p.tau, u0=u0)
    state = State(u=np.asarray(u0, float).copy(), v=np.asarray(u1, float).copy(),
                  z=z0.copy(), theta=theta0)

    fac_be = factor_implicit(grid, p, dt, theta_weight=1.0)
    fac = factor_implicit(grid, p, dt, theta_weight=theta_weight)

    nsteps = int(round(t_end / dt))
    times, Es, Vs, Vts, terms, masses = [], [], [], [], [], []
    snapshots = []
    blowup_time = None

    def record(t, s):
        times.append(t)
        # near blow-up the observables may overflow; record inf silently
        with np.errstate(over="ignore", invalid="ignore"):
            Es.append(energy(s, grid, p, consts.xi))
            comp = lyapunov_components(s, grid, consts, p)
        Vs.append(comp["V"])
        Vts.append(comp["Vtilde"])
        terms.append([comp[f"V{i}"] for i in range(1, 7)])
        masses.append(theta_mass(s, grid))
        if store_snapshots:
            snapshots.append((t, s.copy()))

    record(0.0, state)
    for n in range(nsteps):
        t_next = (n + 1) * dt
        try:
            state = step_imex(state, dt, fac_be if n == 0 else fac,
                              buf if delay_mode == "ring" else None,
                              delay_mode=delay_mode)
        except NumericalBlowupError as exc:
            if raise_on_blowup:
                exc.t = t_next
                raise
            blowup_time = t_next
            break
        if not np.all(np.isfinite(state.u)):
            blowup_time = t_next
            if raise_on_blowup:
                raise NumericalBlowupError("non-finite displacement", t=t_next)
            break
        if (n + 1) % record_every == 0 or n + 1 == nsteps:
            record(t_next, state)

    traj = Trajectory(
        times=np.asarray(times), E=np.asarray(Es), V=np.asarray(Vs),
        Vtilde=np.asarray(Vts), V_terms=np.asarray(terms).T if terms else np.zeros((6, 0)),
        theta_mass=np.asarray(masses), snapshots=snapshots,
        blowup_time=blowup_time,
    )
    return traj
