"""IMEX stepping, implicit factorization, and the matrix-exponential oracle."""

import math

import numpy as np
import pytest
import scipy.linalg as sla

from thermodelay.constants import lyapunov_constants
from thermodelay.delay import init_history
from thermodelay.discretization import (Grid, State, assemble_generator,
                                        grad_u, pack, random_state, unpack)
from thermodelay.integrate import (NumericalBlowupError, expm_oracle,
                                   factor_implicit, simulate, step_imex)
from thermodelay.params import PhysParams

P = PhysParams(alpha=1.0, beta=2.0, gamma=1.0, kappa=1.0, tau=1.0, ell=1.0)


def test_factor_identity_when_unstiff():
    p = PhysParams(alpha=1.0, beta=0.0, gamma=0.0, kappa=1e-300)
    g = Grid(Nx=6, Nrho=4)
    fac = factor_implicit(g, p, dt=0.1)
    rng = np.random.default_rng(0)
    rhs = rng.standard_normal(g.Nx + g.ntheta)
    # kappa ~ 0, beta = gamma = 0: the block is the identity up to kappa*dt
    assert np.allclose(fac.solve(rhs), rhs, atol=1e-12)


def test_factor_solve_residual():
    g = Grid(Nx=8, Nrho=4)
    fac = factor_implicit(g, P, dt=0.05)
    rng = np.random.default_rng(1)
    n = g.Nx + g.ntheta
    # at theta_weight = 1/2 the implicit matrix is 2 I - explicit_mat
    implicit = 2.0 * np.eye(n) - fac.explicit_mat
    for _ in range(10):
        rhs = rng.standard_normal(n)
        x = fac.solve(rhs)
        assert np.linalg.norm(implicit @ x - rhs) <= 1e-12 * np.linalg.norm(rhs)


def test_factor_determinism():
    g = Grid(Nx=8, Nrho=4)
    rng = np.random.default_rng(2)
    rhs = rng.standard_normal(g.Nx + g.ntheta)
    x1 = factor_implicit(g, P, dt=0.05).solve(rhs)
    x2 = factor_implicit(g, P, dt=0.05).solve(rhs)
    assert np.array_equal(x1, x2)


def test_factor_validation():
    g = Grid(Nx=6, Nrho=4)
    with pytest.raises(ValueError):
        factor_implicit(g, P, dt=0.0)
    with pytest.raises(ValueError):
        factor_implicit(g, P, dt=0.1, theta_weight=0.25)


def test_zero_state_is_equilibrium():
    g = Grid(Nx=6, Nrho=6)
    dt = P.tau / g.Nrho
    fac = factor_implicit(g, P, dt)
    _, buf = init_history(lambda x, s: np.zeros_like(x), g, P.tau)
    s = State.zeros(g)
    for _ in range(3 * g.Nrho):
        s = step_imex(s, dt, fac, buf)
    assert np.max(np.abs(pack(s))) == 0.0


def test_gamma_zero_decouples_theta_pure_heat():
    p = PhysParams(alpha=1.0, beta=1.0, gamma=0.0, kappa=1.0, tau=1.0)
    g = Grid(Nx=10, Nrho=5)
    dt = p.tau / g.Nrho
    fac = factor_implicit(g, p, dt)
    _, buf = init_history(lambda x, s: np.zeros_like(x), g, p.tau)
    s = State.zeros(g)
    s.theta = np.cos(math.pi * g.x_flux)
    mass0 = np.sum(s.theta) * g.dx
    norm0 = np.dot(s.theta, s.theta)
    for _ in range(20):
        s = step_imex(s, dt, fac, buf)
    assert np.max(np.abs(s.u)) == 0.0 and np.max(np.abs(s.v)) == 0.0
    assert abs(np.sum(s.theta) * g.dx - mass0) <= 1e-13
    assert np.dot(s.theta, s.theta) < norm0   # heat dissipates


def test_expm_oracle_identity_and_semigroup():
    g = Grid(Nx=4, Nrho=3)
    gen = assemble_generator(g, P, xi=1.0)
    rng = np.random.default_rng(3)
    s = random_state(g, P, rng)
    s0 = expm_oracle(gen, s, 0.0)
    assert np.allclose(pack(s0), pack(s), atol=1e-14)
    one = pack(expm_oracle(gen, s, 0.7))
    two = pack(expm_oracle(gen, expm_oracle(gen, s, 0.3), 0.4))
    assert np.linalg.norm(one - two) <= 1e-10 * np.linalg.norm(one)


def test_expm_vs_eigendecomposition_oracle():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((40, 40))
    w, V = np.linalg.eig(A)
    t = 0.5
    via_eig = (V @ np.diag(np.exp(t * w)) @ np.linalg.inv(V)).real
    assert np.linalg.norm(sla.expm(t * A) - via_eig) <= 1e-9 * np.linalg.norm(via_eig)


def test_imex_matches_expm_and_converges():
    # matched refinement: dt = tau/N with the generator built on Nrho = N,
    # so the ring delay is exact at every level
    p = PhysParams(alpha=0.1, beta=2.0, gamma=0.1, kappa=1.0, tau=1.0)
    errs = []
    for N in (4, 8, 16):
        g = Grid(Nx=4, Nrho=N)
        gen = assemble_generator(g, p, xi=1.0)
        u0 = np.sin(math.pi * g.x_nodes)
        ux0 = grad_u(u0, g.dx)
        z0, buf = init_history(lambda x, s, ux0=ux0, g=g: np.interp(x, g.x_flux, ux0),
                               g, p.tau, u0=u0)
        s = State(u=u0.copy(), v=np.zeros(g.Nx), z=z0, theta=np.zeros(g.ntheta))
        ref = pack(expm_oracle(gen, s, 1.0))
        dt = p.tau / N
        fac_be = factor_implicit(g, p, dt, theta_weight=1.0)
        fac = factor_implicit(g, p, dt)
        for n in range(N):
            s = step_imex(s, dt, fac_be if n == 0 else fac, buf)
        errs.append(np.linalg.norm(pack(s) - ref) / np.linalg.norm(ref))
    assert errs[0] < 1e-2
    assert errs[0] > errs[1] > errs[2]


def test_simulate_determinism_and_recording():
    g = Grid(Nx=8, Nrho=8)
    c = lyapunov_constants(P, 0.5)
    u0 = np.sin(math.pi * g.x_nodes)
    ux0 = grad_u(u0, g.dx)

    def f0(x, s):
        return np.interp(x, g.x_flux, ux0)

    kw = dict(u0=u0, u1=np.zeros(g.Nx), theta0=np.cos(math.pi * g.x_flux),
              f0=f0, t_end=2.0, record_every=2)
    t1 = simulate(g, P, c, **kw)
    t2 = simulate(g, P, c, **kw)
    assert np.array_equal(t1.E, t2.E)
    assert np.array_equal(t1.V, t2.V)
    assert t1.times[0] == 0.0 and t1.times[-1] == pytest.approx(2.0)
    assert np.all(t1.E >= 0.0)
    assert t1.V_terms.shape == (6, len(t1.times))


def test_simulate_zero_data_stays_zero():
    g = Grid(Nx=6, Nrho=4)
    c = lyapunov_constants(P, 0.5)
    traj = simulate(g, P, c, np.zeros(g.Nx), np.zeros(g.Nx),
                    np.zeros(g.ntheta), lambda x, s: np.zeros_like(x), t_end=1.0)
    assert np.max(np.abs(traj.E)) == 0.0


def test_simulate_ring_mode_rejects_unlocked_dt():
    g = Grid(Nx=6, Nrho=4)
    c = lyapunov_constants(P, 0.5)
    with pytest.raises(ValueError, match="ring mode requires"):
        simulate(g, P, c, np.zeros(g.Nx), np.zeros(g.Nx), np.zeros(g.ntheta),
                 lambda x, s: np.zeros_like(x), t_end=1.0, dt=0.1)


def test_transport_mode_close_to_ring_mode():
    g = Grid(Nx=8, Nrho=32)
    c = lyapunov_constants(P, 0.5)
    u0 = np.sin(math.pi * g.x_nodes)
    ux0 = grad_u(u0, g.dx)

    def f0(x, s):
        return np.interp(x, g.x_flux, ux0)

    kw = dict(u0=u0, u1=np.zeros(g.Nx), theta0=np.zeros(g.ntheta), f0=f0,
              t_end=2.0)
    ring = simulate(g, P, c, delay_mode="ring", **kw)
    trans = simulate(g, P, c, delay_mode="transport", **kw)
    # identical dt; only the delay pipeline differs, by O(drho)
    assert np.max(np.abs(ring.E - trans.E)) <= 0.05 * np.max(ring.E)


def test_blowup_truncates_or_raises():
    # beta = 0 with a large alpha delayed stress blows up quickly
    p = PhysParams(alpha=50.0, beta=0.0, gamma=1.0, kappa=1.0, tau=1.0)
    g = Grid(Nx=12, Nrho=8)
    c = lyapunov_constants(P, 0.5)   # weights only; run uses p
    u0 = np.sin(math.pi * g.x_nodes)
    ux0 = grad_u(u0, g.dx)

    def f0(x, s):
        return np.interp(x, g.x_flux, ux0)

    kw = dict(u0=u0, u1=np.zeros(g.Nx), theta0=np.zeros(g.ntheta), f0=f0,
              t_end=2000.0)
    traj = simulate(g, p, c, **kw)
    assert traj.blowup_time is not None
    assert traj.times[-1] <= traj.blowup_time
    with pytest.raises(NumericalBlowupError):
        simulate(g, p, c, raise_on_blowup=True, **kw)
