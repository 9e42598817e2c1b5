"""Grids, finite-difference operators and the assembled discrete generator.

Layout conventions (fixed; pack order is u, v, z row-major in x then rho, theta):

  * u, v live at the Nx interior nodes x_i = i dx, i = 1..Nx, with homogeneous
    Dirichlet values eliminated (dx = ell/(Nx+1)).
  * u_x (and the delay field z) live at the Nx+1 flux points (i+1/2) dx,
    which are also the centers of the Nx+1 cells partitioning (0, ell).
  * theta is cell-centered on those same Nx+1 cells, so the coupling terms
    v_x <-> theta_x pair up without interpolation and the flux form of the
    heat row conserves the discrete theta mass exactly in Neumann mode.
  * z has Nrho+1 rho-nodes rho_i = i/Nrho; the rho = 0 column is tied to u_x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .params import PhysParams

__all__ = ["Grid", "State", "Operators", "Generator", "build_operators",
           "assemble_generator", "apply_rhs", "inner_product_H", "pack", "unpack",
           "random_state", "grad_u", "theta_mean"]


@dataclass(frozen=True)
class Grid:
    """Tensor grid for Omega = (0, ell) x (0, 1)."""

    Nx: int
    Nrho: int
    ell: float = 1.0

    def __post_init__(self):
        if self.Nx < 3:
            raise ValueError(f"Nx must be >= 3, got {self.Nx}")
        if self.Nrho < 2:
            raise ValueError(f"Nrho must be >= 2, got {self.Nrho}")
        if self.ell <= 0:
            raise ValueError("ell must be positive")

    @property
    def dx(self) -> float:
        return self.ell / (self.Nx + 1)

    @property
    def drho(self) -> float:
        return 1.0 / self.Nrho

    @property
    def ntheta(self) -> int:
        return self.Nx + 1

    @property
    def nflux(self) -> int:
        return self.Nx + 1

    @property
    def x_nodes(self) -> np.ndarray:
        return self.dx * np.arange(1, self.Nx + 1)

    @property
    def x_flux(self) -> np.ndarray:
        return self.dx * (np.arange(self.Nx + 1) + 0.5)

    @property
    def rho_nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.Nrho + 1)

    @property
    def dim(self) -> int:
        return 2 * self.Nx + self.nflux * (self.Nrho + 1) + self.ntheta


@dataclass
class State:
    """Discrete state (u, v, z, theta) on a Grid."""

    u: np.ndarray      # (Nx,)
    v: np.ndarray      # (Nx,)
    z: np.ndarray      # (Nx+1, Nrho+1)
    theta: np.ndarray  # (Nx+1,)

    @classmethod
    def zeros(cls, grid: Grid) -> "State":
        return cls(
            u=np.zeros(grid.Nx),
            v=np.zeros(grid.Nx),
            z=np.zeros((grid.nflux, grid.Nrho + 1)),
            theta=np.zeros(grid.ntheta),
        )

    def copy(self) -> "State":
        return State(self.u.copy(), self.v.copy(), self.z.copy(), self.theta.copy())


def grad_u(u: np.ndarray, dx: float) -> np.ndarray:
    """u_x at the Nx+1 flux points for Dirichlet u (zero boundary values)."""
    return np.diff(u, prepend=0.0, append=0.0) / dx


def theta_mean(theta: np.ndarray, grid: Grid) -> float:
    """Discrete mean of theta (mass / ell)."""
    return float(np.sum(theta) * grid.dx / grid.ell)


@dataclass
class Operators:
    """Sparse finite-difference operators for one (grid, theta_bc)."""

    grid: Grid
    G: sp.csr_matrix          # gradient, interior nodes -> flux points
    D: sp.csr_matrix          # divergence, flux points -> interior nodes
    Dxx_dirichlet: sp.csr_matrix   # D @ G
    L_theta: sp.csr_matrix    # cell-centered Laplacian with theta_bc fluxes
    Dx_theta: sp.csr_matrix   # theta_x at interior nodes (cell faces)
    theta_bc: str = "neumann"


def build_operators(grid: Grid, p: PhysParams) -> Operators:
    """Assemble the second-order stencils used by the generator and stepper."""
    Nx, dx = grid.Nx, grid.dx

    # gradient: (Gu)_j = (u_{j+1} - u_j)/dx, boundary values zero
    G = sp.lil_matrix((Nx + 1, Nx))
    for j in range(Nx + 1):
        if j < Nx:
            G[j, j] = 1.0 / dx
        if j >= 1:
            G[j, j - 1] = -1.0 / dx
    G = G.tocsr()

    # divergence at node i: (q_i - q_{i-1})/dx; adjoint of -G up to dx weights
    D = sp.lil_matrix((Nx, Nx + 1))
    for i in range(Nx):
        D[i, i + 1] = 1.0 / dx
        D[i, i] = -1.0 / dx
    D = D.tocsr()

    # cell-centered theta Laplacian in flux form
    n = grid.ntheta
    L = sp.lil_matrix((n, n))
    for j in range(n):
        if j >= 1:            # flux through left interior face
            L[j, j] -= 1.0 / dx**2
            L[j, j - 1] += 1.0 / dx**2
        if j <= n - 2:        # flux through right interior face
            L[j, j] -= 1.0 / dx**2
            L[j, j + 1] += 1.0 / dx**2
    if p.theta_bc == "dirichlet":
        # boundary value at distance dx/2 from the outermost centers
        L[0, 0] -= 2.0 / dx**2
        L[n - 1, n - 1] -= 2.0 / dx**2
    L = L.tocsr()

    # theta_x at the Nx interior faces (= interior u nodes)
    Dxt = sp.lil_matrix((Nx, n))
    for i in range(Nx):
        Dxt[i, i + 1] = 1.0 / dx
        Dxt[i, i] = -1.0 / dx
    Dxt = Dxt.tocsr()

    return Operators(grid=grid, G=G, D=D, Dxx_dirichlet=(D @ G).tocsr(),
                     L_theta=L, Dx_theta=Dxt, theta_bc=p.theta_bc)


@dataclass
class Generator:
    """Assembled discrete generator acting on packed state vectors."""

    grid: Grid
    p: PhysParams
    xi: float
    matrix: sp.csr_matrix
    ops: Operators = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _slices(grid: Grid):
    Nx, nf, nr = grid.Nx, grid.nflux, grid.Nrho + 1
    su = slice(0, Nx)
    sv = slice(Nx, 2 * Nx)
    sz = slice(2 * Nx, 2 * Nx + nf * nr)
    st = slice(2 * Nx + nf * nr, grid.dim)
    return su, sv, sz, st


def pack(state: State) -> np.ndarray:
    """Flatten a State into the fixed (u, v, z, theta) order."""
    return np.concatenate([state.u, state.v, state.z.ravel(), state.theta])


def unpack(vec: np.ndarray, grid: Grid) -> State:
    """Inverse of pack."""
    if vec.shape != (grid.dim,):
        raise ValueError(f"expected length {grid.dim}, got {vec.shape}")
    su, sv, sz, st = _slices(grid)
    return State(
        u=vec[su].copy(),
        v=vec[sv].copy(),
        z=vec[sz].reshape(grid.nflux, grid.Nrho + 1).copy(),
        theta=vec[st].copy(),
    )


def assemble_generator(grid: Grid, p: PhysParams, xi: float) -> Generator:
    """Assemble the sparse block generator.

    Rows: u' = v; v' = div(alpha z(.,1) + beta grad v) - gamma theta_x;
    z' with first-order upwind in rho and the rho = 0 column driven by
    (grad v) so that z(.,0) tracks u_x; theta' = -gamma v_x + kappa L theta.
    """
    Nx, nf, nr = grid.Nx, grid.nflux, grid.Nrho + 1
    ops = build_operators(grid, p)
    su, sv, sz, st = _slices(grid)

    A = sp.lil_matrix((grid.dim, grid.dim))

    # u row
    A[su, sv] = sp.identity(Nx)

    # v row
    zcol_last = [sz.start + j * nr + (nr - 1) for j in range(nf)]
    A[sv, zcol_last] = p.alpha * ops.D
    A[sv, sv] = p.beta * ops.Dxx_dirichlet
    A[sv, st] = -p.gamma * ops.Dx_theta

    # z rows
    c = 1.0 / (p.tau * grid.drho)
    for j in range(nf):
        base = sz.start + j * nr
        # rho = 0: z tracks u_x, so its rate is (grad v)_j
        A[base, sv] = ops.G[j, :]
        for i in range(1, nr):
            A[base + i, base + i] = -c
            A[base + i, base + i - 1] = c

    # theta row
    A[st, sv] = -p.gamma * ops.G
    A[st, st] = p.kappa * ops.L_theta

    return Generator(grid=grid, p=p, xi=xi, matrix=A.tocsr(), ops=ops)


def apply_rhs(state: State, grid: Grid, p: PhysParams) -> State:
    """Hand-coded right-hand side, independent of the assembled matrix.

    Serves as the oracle for assemble_generator and as the matrix-free path
    for large grids.
    """
    dx, drho = grid.dx, grid.drho
    ux_rate = grad_u(state.v, dx)  # d/dt of u_x

    stress = p.alpha * state.z[:, -1] + p.beta * ux_rate
    theta_x = np.diff(state.theta) / dx
    dv = np.diff(stress) / dx - p.gamma * theta_x

    dz = np.empty_like(state.z)
    dz[:, 0] = ux_rate
    dz[:, 1:] = -(state.z[:, 1:] - state.z[:, :-1]) / (p.tau * drho)

    flux = np.diff(state.theta) / dx
    if p.theta_bc == "dirichlet":
        lo = 2.0 * state.theta[0] / dx
        hi = -2.0 * state.theta[-1] / dx
    else:
        lo = 0.0
        hi = 0.0
    full_flux = np.concatenate([[lo], flux, [hi]])
    dtheta = -p.gamma * ux_rate + p.kappa * np.diff(full_flux) / dx

    return State(u=state.v.copy(), v=dv, z=dz, theta=dtheta)


def inner_product_H(U1: State, U2: State, grid: Grid, p: PhysParams, xi: float) -> float:
    """Discrete analogue of the weighted state-space inner product.

    alpha (u1_x, u2_x) + (v1, v2) + (theta1, theta2) with weight dx, plus
    xi times the z double sum with weight dx * drho (uniform rho weights).
    """
    if U1.u.shape != U2.u.shape or U1.z.shape != U2.z.shape:
        raise ValueError("mismatched state shapes")
    dx, drho = grid.dx, grid.drho
    ux1 = grad_u(U1.u, dx)
    ux2 = grad_u(U2.u, dx)
    val = (
        p.alpha * np.dot(ux1, ux2) * dx
        + np.dot(U1.v, U2.v) * dx
        + np.dot(U1.theta, U2.theta) * dx
        + xi * np.sum(U1.z * U2.z) * dx * drho
    )
    return float(val)


def random_state(grid: Grid, p: PhysParams, rng: np.random.Generator,
                 domain: bool = True) -> State:
    """Random state; with domain=True it satisfies the discrete domain
    constraints (z(.,0) = u_x; zero theta mean in Neumann mode)."""
    s = State(
        u=rng.standard_normal(grid.Nx),
        v=rng.standard_normal(grid.Nx),
        z=rng.standard_normal((grid.nflux, grid.Nrho + 1)),
        theta=rng.standard_normal(grid.ntheta),
    )
    if domain:
        s.z[:, 0] = grad_u(s.u, grid.dx)
        if p.theta_bc == "neumann":
            s.theta -= s.theta.mean()
    return s
