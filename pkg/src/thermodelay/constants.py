"""Closed-form Lyapunov constants, stability inequalities and the damping threshold.

Everything here is an exact scalar computation: given the physical parameters
and the exponent parameter `lam`, all auxiliary constants of the decay
estimate follow from closed formulas, and the sufficient stability conditions
are evaluated as exact inequalities (no asymptotic truncation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import PhysParams

__all__ = [
    "LyapunovConstants",
    "ConditionRecord",
    "ConditionReport",
    "InfeasibleLambdaError",
    "NoFeasibleLambdaError",
    "f_weight",
    "lyapunov_constants",
    "check_conditions",
    "certify",
    "find_beta0",
    "n0_from_constants",
]


class InfeasibleLambdaError(ValueError):
    """Raised when `lam` does not admit the exact constant construction."""


class NoFeasibleLambdaError(ValueError):
    """Raised when no lambda on the search grid admits a certified beta."""


def f_weight(rho, lam):
    """Exponentially weighted history kernel f(rho) on [0, 1].

    f(rho) = (1/(2 lam)) e^{lam rho} (e^{-2 lam rho} - e^{-4 lam}),
    the solution of (e^{-lam rho} f)' = -e^{-2 lam rho} with f(1) e^{-lam}
    equal to the tail weight Psi.  Accepts scalars or arrays.
    """
    rho = np.asarray(rho, dtype=float)
    if not (lam > 0):
        raise ValueError(f"lam must be positive, got {lam}")
    if np.any(rho < 0) or np.any(rho > 1):
        raise ValueError("rho must lie in [0, 1]")
    out = 0.5 / lam * np.exp(lam * rho) * (np.exp(-2.0 * lam * rho) - math.exp(-4.0 * lam))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LyapunovConstants:
    """All scalar constants entering the decay estimate, for one (params, lam)."""

    lam: float
    xi: float
    c_p: float
    m: float
    h: float
    Gamma: float
    Psi: float
    Lambda: float
    Phi: float
    A: float
    k: float
    a: float
    b: float
    eps1: float
    eps2: float
    eps3: float
    eps4: float  # midpoint of the admissible interval; NaN if empty
    eps5: float
    eps6: float
    N1: float
    N2: float
    N3: float
    N4: float
    N5: float
    N6: float


def lyapunov_constants(
    p: PhysParams,
    lam: float,
    xi_factor: float = 2.0,
    sharp_poincare: bool = False,
) -> LyapunovConstants:
    """Compute every auxiliary constant from (params, lam) via closed forms.

    xi is set to xi_factor times its strict lower bound 2 tau alpha^2 / beta.
    Raises InfeasibleLambdaError when the exact construction breaks down
    (A/k >= 2 lam Lambda^2 / Gamma, or A <= 1, or k outside (0,1)).
    """
    if p.beta <= 0:
        raise ValueError("beta must be strictly positive to build the constants")
    if min(p.alpha, p.gamma, p.kappa) <= 0:
        raise ValueError("alpha, gamma and kappa must be strictly positive "
                         "to build the constants")
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    if xi_factor <= 1:
        raise ValueError("xi_factor must exceed 1 for the strict xi bound")

    alpha, beta, tau = p.alpha, p.beta, p.tau
    h = math.exp(-2.0 * lam)
    Gamma = (1.0 - h) / (2.0 * lam)
    Psi = h * Gamma
    Lambda = Psi + Gamma
    Phi = (
        1.0
        / (4.0 * lam**2)
        * (
            Gamma
            - 2.0 * math.exp(-4.0 * lam)
            + (math.exp(-6.0 * lam) - math.exp(-8.0 * lam)) / (2.0 * lam)
        )
    )
    A = 1.0 + h - h**2 - 2.0 * h**3 - 4.0 * h**4
    k = 1.0 - h**4

    if not (A > 1.0):
        raise InfeasibleLambdaError(f"lambda infeasible: A = {A} <= 1 at lam={lam}")
    # k < 1 holds exactly; for large lam the float value rounds to 1.0
    if not (0.0 < k <= 1.0):
        raise InfeasibleLambdaError(f"lambda infeasible: k = {k} outside (0,1) at lam={lam}")
    # A/k < 2 lam Lambda^2/Gamma = (1-h)(1+h)^2, equivalent (after clearing
    # denominators) to the cancellation-free margin h^3 (1 + 3h - h^2 + h^3 + h^4) > 0;
    # the naive difference underflows to rounding noise for lam >~ 6
    upper_margin = h**3 * (1.0 + 3.0 * h - h**2 + h**3 + h**4)
    if not (upper_margin > 0.0):
        raise InfeasibleLambdaError(
            f"lambda infeasible: A/k >= 2 lam Lambda^2/Gamma at lam={lam}"
        )

    root = math.sqrt(A * Gamma / (2.0 * lam * k))
    # Lambda - root, evaluated as (Lambda^2 - root^2)/(Lambda + root) with the
    # numerator in the same cancellation-free polynomial form
    denom = Gamma**2 * upper_margin / ((1.0 - h) * k * (Lambda + root))
    if denom <= 0.0:
        raise InfeasibleLambdaError(
            f"lambda infeasible: Lambda - sqrt(A Gamma/(2 lam k)) <= 0 at lam={lam}"
        )

    eps2 = math.sqrt(2.0 * lam * Gamma * k / A)
    eps3 = A * tau / (4.0 * lam * k * denom)
    b = 4.0 * lam * k / (eps2 + tau / eps3)

    eps1 = alpha / beta
    a = 0.5 * alpha * eps1 * tau * math.exp(2.0 * lam)

    eps5 = b
    eps6 = 2.0 * a * b * Psi / (tau * alpha)

    xi = xi_factor * (2.0 * tau * alpha**2 / beta)
    m = alpha**2 / beta + xi / (2.0 * tau)
    c_p = p.poincare_constant(sharp=sharp_poincare)

    N1 = 1.0
    N3 = N1
    N4 = a * N1
    N5 = a * b * N1
    N6 = Psi / (alpha * tau) * N5
    N2 = beta / alpha * N6

    # admissible interval for eps4; midpoint when nonempty
    e4_lo = alpha * p.gamma * b * Psi * math.exp(2.0 * lam) / (4.0 * beta * p.kappa)
    e4_hi = 2.0 * alpha * (A - 1.0) / (p.gamma * b * Psi * c_p)
    eps4 = 0.5 * (e4_lo + e4_hi) if e4_lo < e4_hi else math.nan

    return LyapunovConstants(
        lam=lam, xi=xi, c_p=c_p, m=m, h=h, Gamma=Gamma, Psi=Psi, Lambda=Lambda,
        Phi=Phi, A=A, k=k, a=a, b=b, eps1=eps1, eps2=eps2, eps3=eps3, eps4=eps4,
        eps5=eps5, eps6=eps6, N1=N1, N2=N2, N3=N3, N4=N4, N5=N5, N6=N6,
    )


@dataclass(frozen=True)
class ConditionRecord:
    name: str
    lhs: float
    rhs: float
    satisfied: bool


@dataclass
class ConditionReport:
    records: list[ConditionRecord] = field(default_factory=list)
    eps4: float = math.nan
    verdict: bool = False

    def add(self, name, lhs, rhs, satisfied=None):
        if satisfied is None:
            satisfied = bool(lhs < rhs)
        self.records.append(ConditionRecord(name, float(lhs), float(rhs), bool(satisfied)))

    def record(self, name) -> ConditionRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def finalize(self):
        self.verdict = all(r.satisfied for r in self.records)
        return self

    def as_dict(self):
        return {
            "conditions": [
                {"name": r.name, "lhs": r.lhs, "rhs": r.rhs, "satisfied": r.satisfied}
                for r in self.records
            ],
            "eps4": self.eps4,
            "verdict": self.verdict,
        }


def check_conditions(c: LyapunovConstants, p: PhysParams) -> ConditionReport:
    """Evaluate the exact sufficient stability inequalities for constants `c`.

    The report contains one record per inequality (lhs < rhs convention):
      xi-bound      xi > 2 tau alpha^2 / beta
      eqfond0       1 < A/k < (1 - e^{-2 lam})(1 + h)^2
      eqfond2       b Psi alpha e^{2 lam} c_p + tau b Phi eps3 alpha^2 e^{2 lam}/2 < beta^2
      eqfond1       interval for eps4 nonempty
      ep67-pair     eps6 > a b Psi/(tau alpha) and eps5 > b/2 (holds by construction)
      ep67prime     N6 eps6 c_p/2 + N5 Phi eps5/2 < N2 alpha/2
      eqfond3       b Psi^2 c_p/(beta tau) + Phi b < beta Psi/(alpha tau)
    """
    alpha, beta, tau = p.alpha, p.beta, p.tau
    rep = ConditionReport()

    rep.add("xi-bound", 2.0 * tau * alpha**2 / beta, c.xi)

    ak = c.A / c.k
    ak_hi = (1.0 - math.exp(-2.0 * c.lam)) * (1.0 + c.h) ** 2
    # both margins in cancellation-free polynomial form (the float quotient
    # A/k loses the h^3-size gap to the upper bound for large lam)
    h = c.h
    lo_ok = h * (1.0 - h - 2.0 * h**2 - 3.0 * h**3) > 0.0          # A/k > 1
    hi_ok = h**3 * (1.0 + 3.0 * h - h**2 + h**3 + h**4) > 0.0      # A/k < bound
    rep.add("eqfond0", ak, ak_hi, satisfied=(lo_ok and hi_ok))

    lhs2 = (
        c.b * c.Psi * alpha * math.exp(2.0 * c.lam) * c.c_p
        + 0.5 * tau * c.b * c.Phi * c.eps3 * alpha**2 * math.exp(2.0 * c.lam)
    )
    rep.add("eqfond2", lhs2, beta**2)

    e4_lo = alpha * p.gamma * c.b * c.Psi * math.exp(2.0 * c.lam) / (4.0 * beta * p.kappa)
    e4_hi = 2.0 * alpha * (c.A - 1.0) / (p.gamma * c.b * c.Psi * c.c_p)
    rep.add("eqfond1", e4_lo, e4_hi)

    pair_ok = (c.eps6 > c.a * c.b * c.Psi / (tau * alpha)) and (c.eps5 > 0.5 * c.b)
    rep.add("ep67-pair", c.a * c.b * c.Psi / (tau * alpha), c.eps6, satisfied=pair_ok)

    lhs_ep = 0.5 * c.N6 * c.eps6 * c.c_p + 0.5 * c.N5 * c.Phi * c.eps5
    rep.add("ep67prime", lhs_ep, 0.5 * c.N2 * alpha)

    lhs3 = c.b * c.Psi**2 * c.c_p / (beta * tau) + c.Phi * c.b
    rep.add("eqfond3", lhs3, beta * c.Psi / (alpha * tau))

    rep.eps4 = c.eps4
    return rep.finalize()


def certify(
    p: PhysParams,
    lam: float,
    xi_factor: float = 2.0,
    sharp_poincare: bool = False,
) -> ConditionReport:
    """Build the constants for (p, lam) and evaluate all conditions.

    Unlike lyapunov_constants this never raises on a bad (beta, lam) pair:
    beta = 0 and infeasible lambdas yield a failed report.
    """
    if p.beta <= 0.0:
        rep = ConditionReport()
        rep.add("xi-bound", math.inf, math.inf, satisfied=False)
        rep.add("eqfond2", math.inf, 0.0, satisfied=False)
        return rep.finalize()
    try:
        c = lyapunov_constants(p, lam, xi_factor=xi_factor, sharp_poincare=sharp_poincare)
    except InfeasibleLambdaError:
        rep = ConditionReport()
        rep.add("eqfond0", math.inf, 0.0, satisfied=False)
        return rep.finalize()
    return check_conditions(c, p)


def _certified_on_grid(p: PhysParams, beta: float, lambda_grid, **kw) -> bool:
    pb = p.with_beta(beta)
    return any(certify(pb, lam, **kw).verdict for lam in lambda_grid)


def find_beta0(
    p: PhysParams,
    lambda_grid,
    rel_tol: float = 1e-6,
    xi_factor: float = 2.0,
    sharp_poincare: bool = False,
) -> dict:
    """Search the smallest certified damping coefficient over a lambda grid.

    For each lambda the certified set in beta is an up-set, so a bisection on
    [tiny, alpha tau e^{4 lam}] locates the per-lambda crossing; the returned
    beta0 is the minimum over the grid (an upper bound for the true threshold,
    since the conditions are sufficient only).  p.beta is ignored.
    """
    lambda_grid = list(lambda_grid)
    if not lambda_grid:
        raise NoFeasibleLambdaError("empty lambda grid")
    kw = dict(xi_factor=xi_factor, sharp_poincare=sharp_poincare)

    best = None
    for lam in lambda_grid:
        hi = p.alpha * p.tau * math.exp(4.0 * lam)
        if not certify(p.with_beta(hi), lam, **kw).verdict:
            continue  # witness fails: lambda not usable
        lo = 1e-300
        # bisect the crossing: certify fails at lo, passes at hi
        while (hi - lo) > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            if certify(p.with_beta(mid), lam, **kw).verdict:
                hi = mid
            else:
                lo = mid
        if best is None or hi < best[0]:
            best = (hi, lam)

    if best is None:
        raise NoFeasibleLambdaError("no feasible lambda on the grid")
    return {"beta0": best[0], "lambda_star": best[1]}


def n0_from_constants(c: LyapunovConstants, p: PhysParams) -> float:
    """Decay-rate constant n0 from the four strict row inequalities.

    Each row margin is normalized by the coefficient of the matching term in
    the reduced functional: the history row by N4, the strain row by alpha N2/2,
    and the two gradient rows through the Poincare constant.  Raises if any
    margin is nonpositive (conditions violated).
    """
    alpha, beta, tau = p.alpha, p.beta, p.tau

    n1 = -2.0 * c.lam / tau * c.N4 + c.N5 / (2.0 * tau) * (c.eps2 + tau / c.eps3)
    n2 = (
        c.N4 / tau
        + c.N5 / tau * (c.Gamma / (2.0 * c.eps2) - c.Lambda)
        + c.N5 * c.Psi * p.gamma * c.eps4 * c.c_p / (2.0 * alpha * tau)
    )
    # conservative coefficient Psi c_p/(alpha tau) on the gradient term
    n3 = c.N1 * (alpha / (2.0 * c.eps1) - beta) + c.N5 * (
        0.5 * c.eps3 * c.Phi + c.Psi * c.c_p / (alpha * tau)
    )
    n4 = -c.N1 * p.kappa + c.N5 * c.Psi * p.gamma / (2.0 * alpha * tau * c.eps4)

    margins = {"n1": n1, "n2": n2, "n3": n3, "n4": n4}
    bad = {k: v for k, v in margins.items() if not (v < 0.0)}
    if bad:
        raise ValueError(f"nonpositive decay margins (conditions violated): {bad}")

    return min(
        abs(n1) / c.N4,
        2.0 * abs(n2) / (alpha * c.N2),
        2.0 * abs(n3) / (c.c_p * c.N1),
        2.0 * abs(n4) / (c.c_p * c.N3),
    )


def n1_equality_residual(c: LyapunovConstants, p: PhysParams) -> float:
    """Residual of the balanced row -N4 e^{-2 lam}/tau + N1 alpha eps1/2 (zero by construction)."""
    return -c.N4 * math.exp(-2.0 * c.lam) / p.tau + 0.5 * c.N1 * p.alpha * c.eps1
