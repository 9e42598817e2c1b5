"""Delayed-strain management: rho-transport field and exact ring buffer.

Two interchangeable representations of u_x(., t - tau rho):

  * a field z(x, rho, t) advanced by explicit upwind transport in rho, and
  * a ring buffer of past u_x snapshots, exact when dt = tau / Nrho.

At unit CFL (dt = tau * drho) the upwind update degenerates to a pure shift
and the two coincide, which keeps them mutually validating.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .discretization import Grid, grad_u

__all__ = ["HistoryBuffer", "CFLError", "init_history", "advance_transport",
           "read_delayed"]


class CFLError(RuntimeError):
    """Explicit upwind step requested beyond its stability bound."""


@dataclass
class HistoryBuffer:
    """Ring of the last `capacity` u_x snapshots (newest first in time).

    With dt locked to tau/Nrho the oldest retained snapshot is exactly
    u_x(t - tau): no interpolation is ever performed.
    """

    capacity: int                 # Nrho + 1 snapshots
    dt_lock: float                # tau / Nrho
    data: np.ndarray              # (capacity, Nx+1)
    head: int = 0                 # index of the newest snapshot
    fill: int = 0

    @classmethod
    def allocate(cls, grid: Grid, tau: float) -> "HistoryBuffer":
        cap = grid.Nrho + 1
        return cls(capacity=cap, dt_lock=tau / grid.Nrho,
                   data=np.zeros((cap, grid.nflux)))

    def push(self, ux: np.ndarray):
        self.head = (self.head - 1) % self.capacity
        self.data[self.head] = ux
        self.fill = min(self.fill + 1, self.capacity)

    def snapshot(self, steps_back: int) -> np.ndarray:
        """u_x recorded `steps_back` pushes ago (0 = newest)."""
        if steps_back >= self.fill:
            raise RuntimeError("history buffer not filled that far back")
        return self.data[(self.head + steps_back) % self.capacity]

    def tail(self) -> np.ndarray:
        """Oldest retained snapshot, u_x(t - tau) at locked dt."""
        if self.fill < self.capacity:
            raise RuntimeError("history buffer not fully initialized")
        return self.snapshot(self.capacity - 1)

    def as_field(self) -> np.ndarray:
        """View the ring as a z field of shape (Nx+1, Nrho+1), rho ascending."""
        idx = (self.head + np.arange(self.capacity)) % self.capacity
        return self.data[idx].T.copy()


def init_history(f0, grid: Grid, tau: float, u0=None, tol: float = 1e-8):
    """Sample the history datum f0(x, s), s in [-tau, 0], onto z and a ring.

    z[j, i] = f0(x_flux_j, -tau * rho_i).  When u0 is supplied, the rho = 0
    slice is compared against the discrete u_x of u0 and a warning is issued
    on mismatch (the caller's data are kept unchanged).
    """
    xf = grid.x_flux
    rho = grid.rho_nodes
    try:
        z = np.empty((grid.nflux, grid.Nrho + 1))
        for i, r in enumerate(rho):
            z[:, i] = np.asarray(f0(xf, -tau * r), dtype=float)
    except Exception as exc:
        raise ValueError(f"history datum f0 is not sampleable: {exc}") from exc

    if u0 is not None:
        ux0 = grad_u(np.asarray(u0, dtype=float), grid.dx)
        mismatch = np.max(np.abs(z[:, 0] - ux0))
        if mismatch > tol * max(1.0, np.max(np.abs(ux0))):
            warnings.warn(
                f"history datum at s=0 differs from u0_x by {mismatch:.3e}; "
                "keeping the supplied history", stacklevel=2)

    buf = HistoryBuffer.allocate(grid, tau)
    # oldest sample pushed first so that tail() is the s = -tau slice
    for i in range(grid.Nrho, -1, -1):
        buf.push(z[:, i])
    return z, buf


def advance_transport(z: np.ndarray, current_ux: np.ndarray, dt: float,
                      tau: float, drho: float) -> np.ndarray:
    """One explicit upwind step of tau z_t + z_rho = 0 with inflow at rho = 0.

    Requires dt <= tau * drho (CFL).  At equality the update is an exact
    shift by one rho node.
    """
    c = dt / (tau * drho)
    if c > 1.0 + 1e-12:
        raise CFLError(f"upwind CFL violated: dt/(tau drho) = {c:.4f} > 1")
    out = np.empty_like(z)
    if abs(c - 1.0) <= 1e-12:
        out[:, 1:] = z[:, :-1]   # unit CFL: exact shift, bitwise
    else:
        out[:, 1:] = z[:, 1:] - c * (z[:, 1:] - z[:, :-1])
    out[:, 0] = current_ux
    return out


def read_delayed(source) -> np.ndarray:
    """Delayed strain u_x(., t - tau): rho = 1 slice or ring tail."""
    if isinstance(source, HistoryBuffer):
        return source.tail().copy()
    z = np.asarray(source)
    if z.ndim != 2:
        raise ValueError("expected a z field of shape (Nx+1, Nrho+1)")
    return z[:, -1].copy()
