"""Two explicit iteration schemes built on the dyadic scales r_j = 2^(-j).

The necessity chain accumulates step widths tau_j proportional to
r_j * (mu(r_j) - mu(r_{j-1})); divergence of the partial sums certifies that a
boundary point singularity can be pushed any prescribed distance along the
degeneracy set.  The sufficiency schedule solves the level equation
C(nu) * h(s_j)^(-2/(p-1)-nu) = Kbar_j^theta for s_j against the doubly
exponential levels ln Kbar_j = e^j and tracks the tail function Phi; a finite
half-width budget certifies non-propagation.

Free analytic constants default to 1 (shift constants to 0); all qualitative
verdicts are invariant under their positive rescaling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dini import (DiniVerdict, IndeterminateError, classify_dini,
                   classify_shell_sequence, dini_integral, phi_tail)
from .omega import OmegaSpec, check_admissibility, eval_mu, eval_omega
from .oracles import eigenpair_halfball, p_critical

__all__ = [
    "CascadeChain",
    "SufficiencySchedule",
    "THETA",
    "DEFAULT_CONSTANTS",
    "build_chain",
    "chain_sum_lowerbound",
    "build_sufficiency_schedule",
    "schedule_budget_report",
]

#: level-equation exponent theta = (2e)^-1, stored exactly
THETA = 0.5 / math.e

DEFAULT_CONSTANTS = {
    "alpha": 1.0, "alpha1": 1.0, "y1_0": 1.0, "beta": 1.0, "beta1": 1.0,
    "c_tilde": 1.0, "C_nu": 1.0, "C2": 1.0, "c1": 0.0, "c2": 0.0,
}


def _merged_constants(overrides) -> dict:
    c = dict(DEFAULT_CONSTANTS)
    if overrides:
        unknown = set(overrides) - set(c)
        if unknown:
            raise ValueError(f"unknown constants {sorted(unknown)}")
        c.update(overrides)
    bad = [k for k, v in c.items() if k not in ("c1", "c2") and v <= 0]
    if bad or c["c1"] < 0 or c["c2"] < 0:
        raise ValueError("free constants must be positive (shift constants >= 0)")
    return c


@dataclass
class CascadeChain:
    """Necessity chain on dyadic scales with its step widths and verdict."""

    spec: OmegaSpec
    p: float
    N: int
    lambda1: float
    constants: dict
    j: np.ndarray                # chain indices, j[0] = j_start
    r: np.ndarray                # 2**(-j)
    ln_a: np.ndarray             # ln a_j = -mu(r_j)
    ln_A: np.ndarray             # ln A_j = (ln a_j + 2 ln r_j)/(p-1)
    ln_K: np.ndarray             # ln K_j = -ln A_j + (N-1) ln r_j
    tau: np.ndarray              # step widths; tau[0] = 0 (no predecessor)
    partial_sums: np.ndarray
    verdict: dict

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "constants": self.constants,
                "p": self.p, "N": self.N, "lambda1": self.lambda1,
                "j_start": int(self.j[0]), "j_max": int(self.j[-1])}


def build_chain(spec: OmegaSpec, p: float, N: int, j_start: int | None = None,
                j_max: int = 64, g: float = 1.0,
                constants: dict | None = None) -> CascadeChain:
    """Build the chain and decide ReachesDistance(g) vs Bounded.

    tau_j = r_j * ((mu(r_j) - mu(r_{j-1})) / (sqrt(lambda1)*(p-1)) + c1);
    partial sums are compared against the target distance g.
    """
    if not 1.0 < p < p_critical(N):
        raise ValueError(f"need p in (1, {p_critical(N)}) for N={N}")
    if g <= 0:
        raise ValueError("target distance g must be positive")
    cst = _merged_constants(constants)

    report = check_admissibility(spec)
    # omega -> 0 is waived for the constant family: the chain only needs the
    # monotonicity structure and the dyadic mu-ratio condition
    required = {
        "monotone_omega": report.monotone_omega,
        "monotone_mu": report.monotone_mu,
        "mu_unbounded": report.mu_unbounded,
        "ratio_condition": report.ratio_condition,
    }
    failing = [k for k, ok in required.items() if not ok]
    if failing:
        raise ValueError(f"omega spec rejected: {failing[0]} fails")

    if j_start is None:
        j_start = max(1, int(math.ceil(-math.log2(spec.s_max))) + 1)
    if 2.0 ** (-(j_start - 1)) > spec.s_max * (1 + 1e-12):
        raise ValueError("j_start too small: r_{j_start-1} exceeds s_max")
    if j_max <= j_start:
        raise ValueError("need j_max > j_start")

    lambda1 = eigenpair_halfball(N).lambda1
    j = np.arange(j_start, j_max + 1)
    r = 2.0 ** (-j.astype(float))
    mu = np.asarray(eval_mu(spec, r))
    mu_prev = np.asarray(eval_mu(spec, 2.0 * r))
    ln_a = -mu
    ln_A = (ln_a + 2.0 * np.log(r)) / (p - 1.0)
    ln_K = -ln_A + (N - 1) * np.log(r)

    denom = math.sqrt(lambda1) * (p - 1.0)
    tau = r * ((mu - mu_prev) / denom + cst["c1"])
    tau[0] = 0.0
    partial = np.cumsum(tau)

    hit = np.nonzero(partial >= g)[0]
    if hit.size:
        verdict = {"kind": "ReachesDistance", "g": g, "j_bar": int(j[hit[0]])}
    else:
        verdict = _tail_verdict(spec, p, j, tau, partial, g, denom, cst["c1"])
    return CascadeChain(spec, p, N, lambda1, cst, j, r, ln_a, ln_A, ln_K,
                        tau, partial, verdict)


def _tail_verdict(spec: OmegaSpec, p: float, j, tau, partial, g: float,
                  denom: float, c1: float) -> dict:
    """Decide the fate of a chain whose partial sums stay below g at j_max.

    The step widths live on dyadic scales, so the shared shell-decay policy
    applies verbatim.  A summable tail gives the extrapolated total; a
    non-summable one means the sums reach g eventually, and the recursion is
    continued scalar-wise (it underflows near j = 1070) to locate j_bar.
    """
    rows = [(int(k), float(2.0 ** (-k - 1)), float(2.0 ** (-k)), float(t))
            for k, t in zip(j[1:], tau[1:])]
    try:
        tail = classify_shell_sequence(np.asarray(tau[1:]), rows)
    except IndeterminateError:
        tail = None
    if tail is not None and tail.converges and tail.value < g:
        return {"kind": "Bounded", "total": float(tail.value),
                "method": tail.method, "tail_ratio": tail.fitted_ratio}
    # non-summable (or summable past g): continue the recursion
    total = float(partial[-1])
    jj = int(j[-1])
    mu_prev = float(eval_mu(spec, 2.0 ** (-jj)))
    while total < g and jj < 1070:
        jj += 1
        r = 2.0 ** (-jj)
        mu = float(eval_mu(spec, r))
        total += r * ((mu - mu_prev) / denom + c1)
        mu_prev = mu
    if total >= g:
        return {"kind": "ReachesDistance", "g": g, "j_bar": jj,
                "method": "extended-recursion" if jj > int(j[-1]) else "direct"}
    return {"kind": "Bounded", "total": total, "method": "truncated",
            "tail_ratio": float(tau[-1] / tau[-2]) if tau[-2] > 0 else 0.0}


def chain_sum_lowerbound(chain: CascadeChain) -> dict:
    """Check sum_{k=i+1..j} tau_k >= ae1 * int_{r_j}^{r_i} omega(s)/s ds for
    every index window, with ae1 = (1 - ae)/(sqrt(lambda1)*(p-1)) and ae the
    worst observed dyadic mu-ratio."""
    report = check_admissibility(chain.spec)
    ae = report.worst_ratio
    ae1 = (1.0 - ae) / (math.sqrt(chain.lambda1) * (chain.p - 1.0))
    n = len(chain.j)
    # cumulative Dini integrals from r_k up to r_{j_start}
    G = np.zeros(n)
    for k in range(1, n):
        G[k] = G[k - 1] + dini_integral(chain.spec, chain.r[k], chain.r[k - 1])
    S = chain.partial_sums
    lhs, rhs = [], []
    holds = True
    for i in range(n):
        for jj in range(i, n):
            L = float(S[jj] - S[i])
            R = ae1 * float(G[jj] - G[i])
            lhs.append(L)
            rhs.append(R)
            if L < R * (1.0 - 1e-9) - 1e-15:
                holds = False
    return {"ae": ae, "ae1": ae1, "lhs_sums": lhs, "rhs_integrals": rhs,
            "holds": holds}


@dataclass
class SufficiencySchedule:
    """Level schedule ln Kbar_j = e^j with the solved scales s_j, step widths
    tau_j, the Phi tail table and the half-width budget index."""

    spec: OmegaSpec
    p: float
    nu: float
    C_nu: float
    delta: float
    rho0: float
    theta: float
    c_tilde: float
    C2: float
    C3: float
    omega0: float
    j: np.ndarray
    ln_Kbar: np.ndarray
    s: np.ndarray
    tau: np.ndarray
    phi_values: list = field(default_factory=list)   # rows (m, Phi(m))
    j0_star: int | None = None
    diverges: bool = False
    dini: DiniVerdict | None = None

    def to_json(self) -> dict:
        return {
            "theta": self.theta, "nu": self.nu, "C_nu": self.C_nu,
            "C2": self.C2, "C3": self.C3, "c_tilde": self.c_tilde,
            "delta": self.delta, "rho0": self.rho0,
            "diverges": self.diverges, "j0_star": self.j0_star,
            "phi_values": [list(row) for row in self.phi_values],
        }


def _solve_level(spec: OmegaSpec, target_mu: float) -> float:
    """Unique s with mu(s) = target_mu, by bracketing bisection (mu strictly
    decreasing for admissible omega)."""
    hi = spec.s_max
    if eval_mu(spec, hi) > target_mu:
        raise ValueError("level equation has no root below s_max: "
                         "s_max too small for this index range")
    lo = hi
    for _ in range(4000):
        lo *= 0.5
        if eval_mu(spec, lo) >= target_mu:
            break
    else:
        raise ValueError("could not bracket the level equation root")
    return float(brentq(lambda s: eval_mu(spec, s) - target_mu, lo, hi,
                        xtol=1e-300, rtol=1e-15))


def build_sufficiency_schedule(spec: OmegaSpec, p: float, nu: float,
                               C_nu: float, delta: float, rho0: float,
                               j_range, c_tilde: float = 1.0,
                               C2: float = 1.0,
                               max_shells: int = 32) -> SufficiencySchedule:
    if p <= 1:
        raise ValueError("need p > 1")
    if not 0 < nu <= 1:
        raise ValueError("need 0 < nu <= 1")
    if C_nu <= 0 or c_tilde <= 0 or C2 <= 0:
        raise ValueError("constants must be positive")
    if delta < 0 or rho0 <= 0:
        raise ValueError("need delta >= 0 and rho0 > 0")
    j = np.asarray(list(j_range), dtype=int)
    if j.size == 0 or np.any(np.diff(j) <= 0):
        raise ValueError("j_range must be nonempty and increasing")

    expo = 2.0 / (p - 1.0) + nu
    ln_Kbar = np.exp(j.astype(float))
    s_vals = np.empty(len(j))
    for i, lk in enumerate(ln_Kbar):
        target = (THETA * lk - math.log(C_nu)) / expo
        if target <= 0:
            raise ValueError("level target nonpositive: start j_range later")
        s_vals[i] = _solve_level(spec, target)
    tau = 2.0 * c_tilde * s_vals * (1.0 - THETA) * ln_Kbar

    omega0 = float(eval_omega(spec, spec.s_max))
    C3 = 2.0 * expo / THETA * omega0

    dini = classify_dini(spec, spec.s_max, max_shells=max_shells)
    phi_rows: list = []
    j0_star = None
    if dini.converges:
        m_min = max(0, int(math.ceil(math.log(C3 / spec.s_max))))
        for m in range(m_min, m_min + len(j)):
            phi = phi_tail(spec, float(m), C3, max_shells=max_shells)
            budget = delta + C2 / C3 * phi
            phi_rows.append((m, float(phi), float(budget)))
            if j0_star is None and budget <= rho0 / 2.0:
                j0_star = m
    return SufficiencySchedule(
        spec, p, nu, C_nu, delta, rho0, THETA, c_tilde, C2, C3, omega0,
        j, ln_Kbar, s_vals, tau, phi_rows, j0_star,
        diverges=not dini.converges, dini=dini)


def schedule_budget_report(schedule: SufficiencySchedule,
                           g_list=None) -> list[dict]:
    """Tabulate the Phi decay and half-width budget; for Dini-divergent specs
    return the diverging shell evidence instead."""
    if schedule.diverges:
        return [{"kind": "diverges", "method": schedule.dini.method,
                 "shells": [list(r) for r in schedule.dini.shells]}]
    rows = []
    for m, phi, budget in schedule.phi_values:
        row = {"m": m, "phi": phi, "budget": budget,
               "fits_rho0_half": budget <= schedule.rho0 / 2.0}
        if g_list:
            row["fits_g_half"] = {float(g): budget <= g / 2.0 for g in g_list}
        rows.append(row)
    return rows
