"""Eigenvalue analysis of the discrete generator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import Generator, Grid, grad_u, random_state
from .params import PhysParams

__all__ = ["SpectrumResult", "spectrum_dense", "spectral_abscissa",
           "dissipativity_test", "h_weight_matrix", "reduced_generator",
           "restriction_maps"]

DENSE_MAX_DIM = 5000


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray        # sorted by real part, descending
    rightmost_residuals: np.ndarray
    converged: np.ndarray          # per refined eigenvalue


def restriction_maps(gen: Generator):
    """Embedding E and left inverse P of the constrained subspace.

    E maps reduced coordinates (u, v, z at rho > 0, compressed theta) to full
    packed coordinates obeying the domain constraints (z(., 0) = u_x and, in
    Neumann mode, zero theta mean); P recovers reduced coordinates, P E = I.
    The constrained subspace is invariant under the generator, so
    A @ E = E @ (P @ A @ E) up to rounding.
    """
    grid, p = gen.grid, gen.p
    Nx, nf, nr = grid.Nx, grid.nflux, grid.Nrho + 1
    nt = grid.ntheta
    dim = gen.dim

    # embedding E: (u, v, z_{i>=1}, theta) -> full coordinates, z0 = G u
    nz_free = nf * (nr - 1)
    sub = 2 * Nx + nz_free + nt
    E = np.zeros((dim, sub))
    P = np.zeros((sub, dim))
    G = gen.ops.G.toarray()
    E[:Nx, :Nx] = np.eye(Nx)
    P[:Nx, :Nx] = np.eye(Nx)
    E[Nx:2 * Nx, Nx:2 * Nx] = np.eye(Nx)
    P[Nx:2 * Nx, Nx:2 * Nx] = np.eye(Nx)
    col = 2 * Nx
    for j in range(nf):
        base = 2 * Nx + j * nr
        E[base, :Nx] = G[j, :]          # z(., 0) = u_x
        for i in range(1, nr):
            E[base + i, col] = 1.0
            P[col, base + i] = 1.0
            col += 1
    tfull = 2 * Nx + nf * nr
    E[tfull:, col:] = np.eye(nt)
    P[col:, tfull:] = np.eye(nt)

    if p.theta_bc == "neumann":
        B = sla.null_space(np.ones((1, nt)))
        head = sub - nt
        Q = np.zeros((sub, sub - 1))
        Q[:head, :head] = np.eye(head)
        Q[head:, head:] = B
        E = E @ Q
        P = Q.T @ P
    return E, P


def reduced_generator(gen: Generator) -> np.ndarray:
    """Generator restricted to the discrete state space, as a dense matrix.

    The full-space matrix conserves z(., 0) - u_x componentwise and (in
    Neumann mode) the theta mass, so it carries Nx + 2 spurious zero
    eigenvalues whose eigenvectors violate the domain constraints.  The
    restriction eliminates those directions (see restriction_maps), so the
    reduced matrix has exactly the physical part of the spectrum.
    """
    E, P = restriction_maps(gen)
    return P @ (gen.matrix @ E)


def spectrum_dense(gen: Generator, n_refine: int = 10,
                   residual_tol: float = 1e-8,
                   restrict_domain: bool = False) -> SpectrumResult:
    """All eigenvalues of the dense generator, rightmost ones verified.

    Eigenvalues come from the QR algorithm on the Hessenberg form (LAPACK);
    the n_refine rightmost are refined by shifted inverse iteration on the
    sparse matrix and their relative residuals reported.  With
    restrict_domain the spectrum is taken on the invariant subspace obeying
    the domain constraints (see reduced_generator).
    """
    if gen.dim > DENSE_MAX_DIM:
        raise ValueError(f"dimension {gen.dim} too large for dense solve")
    dense = reduced_generator(gen) if restrict_domain else gen.dense()
    w = sla.eigvals(dense)
    order = np.argsort(-w.real)
    w = w[order]

    A = gen.matrix.tocsc().astype(complex)
    n = gen.dim
    eye = sp.identity(n, format="csc", dtype=complex)
    rng = np.random.default_rng(1234)

    k = min(n_refine, n)
    residuals = np.empty(k)
    converged = np.zeros(k, dtype=bool)
    refined = w.copy()
    for i in range(k):
        lam = w[i]
        shift = lam + 1e-8 * (1.0 + abs(lam))
        try:
            lu = spla.splu((A - shift * eye).tocsc())
        except RuntimeError:
            residuals[i] = np.inf
            continue
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        lam_r = lam
        for _ in range(5):
            x = lu.solve(x)
            x /= np.linalg.norm(x)
            Ax = A @ x
            lam_r = np.vdot(x, Ax)
            res = np.linalg.norm(Ax - lam_r * x)
            if res <= residual_tol:
                break
        residuals[i] = res
        converged[i] = res <= residual_tol
        refined[i] = lam_r
    order2 = np.argsort(-refined.real)
    return SpectrumResult(eigenvalues=refined[order2],
                          rightmost_residuals=residuals,
                          converged=converged)


def spectral_abscissa(gen: Generator, spectrum: SpectrumResult | None = None,
                      restrict_domain: bool = False):
    """Maximum real part of the generator spectrum and the achieving eigenvalue."""
    if spectrum is None:
        if gen.dim > DENSE_MAX_DIM:
            raise ValueError(f"dimension {gen.dim} too large for dense solve")
        dense = reduced_generator(gen) if restrict_domain else gen.dense()
        w = sla.eigvals(dense)
    else:
        w = spectrum.eigenvalues
    idx = int(np.argmax(w.real))
    return float(w.real[idx]), complex(w[idx])


def h_weight_matrix(grid: Grid, p: PhysParams, xi: float) -> sp.csr_matrix:
    """Gram matrix of the discrete state-space inner product in packed coordinates."""
    from .discretization import build_operators, _slices

    ops = build_operators(grid, p)
    dx, drho = grid.dx, grid.drho
    su, sv, sz, st = _slices(grid)
    n = grid.dim
    W = sp.lil_matrix((n, n))
    W[su, su] = p.alpha * dx * (ops.G.T @ ops.G)
    W[sv, sv] = dx * sp.identity(grid.Nx)
    W[sz, sz] = xi * dx * drho * sp.identity(grid.nflux * (grid.Nrho + 1))
    W[st, st] = dx * sp.identity(grid.ntheta)
    return W.tocsr()


def dissipativity_test(grid: Grid, p: PhysParams, xi: float, trials: int,
                       m: float | None = None, seed: int = 0,
                       batch: int = 256) -> dict:
    """Maximum Rayleigh quotient of (A_h - m I) over random admissible states.

    States satisfy the discrete domain constraints (z(.,0) = u_x; zero theta
    mean in Neumann mode).  For xi > 2 tau alpha^2/beta and the shift
    m = alpha^2/beta + xi/(2 tau) the maximum is expected nonpositive up to
    the O(drho) quadrature defect of the discrete identities.
    """
    from .discretization import assemble_generator

    if m is None:
        if p.beta <= 0:
            raise ValueError("paper shift needs beta > 0; pass m explicitly")
        m = p.alpha**2 / p.beta + xi / (2.0 * p.tau)

    gen = assemble_generator(grid, p, xi)
    A = gen.matrix
    W = h_weight_matrix(grid, p, xi)
    rng = np.random.default_rng(seed)

    Nx, nf, nr = grid.Nx, grid.nflux, grid.Nrho + 1
    max_q = -np.inf
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        X = rng.standard_normal((grid.dim, b))
        # enforce domain membership column-wise
        U = X[:Nx]
        ux = np.diff(U, axis=0, prepend=0.0, append=0.0) / grid.dx
        zrow0 = 2 * Nx + np.arange(nf) * nr
        X[zrow0] = ux
        if p.theta_bc == "neumann":
            th = X[2 * Nx + nf * nr:]
            th -= th.mean(axis=0, keepdims=True)
        num = np.sum(X * (W @ (A @ X - m * X)), axis=0)
        den = np.sum(X * (W @ X), axis=0)
        q = num / den
        max_q = max(max_q, float(q.max()))
        done += b
    return {"max_rayleigh": max_q, "m_used": float(m), "trials": trials}
