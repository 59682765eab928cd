"""Dini integral of omega(s)/s: quadrature, convergence classification on
dyadic shells, and the tail function Phi used by the sufficiency schedule.

The classifier computes shell integrals I_k over [c*2^(-k-1), c*2^(-k)] and
decides summability of the tail.  Two exact decay models are recognized first
(shells that are geometric to machine precision, and shells matching a
log-power profile), because only a model-based tail can reach tight relative
accuracy for slowly convergent integrands.  When neither model validates, the
frozen heuristic applies: a geometric ratio fitted over the last 8 shells,
threshold 0.95.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import least_squares

from .omega import OmegaSpec, eval_mu, eval_omega

__all__ = [
    "DiniVerdict",
    "IndeterminateError",
    "dini_integral",
    "classify_dini",
    "classify_shell_sequence",
    "phi_tail",
]

RATIO_THRESHOLD = 0.95   # frozen heuristic threshold for shell decay
RATIO_WINDOW = 8         # frozen window of trailing shells
LN2 = math.log(2.0)


class IndeterminateError(RuntimeError):
    """Shells neither decay nor stabilize within max_shells."""


def dini_integral(spec: OmegaSpec, lower: float, upper: float) -> float:
    """Integral of omega(s)/s over [lower, upper], relative target 1e-8."""
    if lower <= 0:
        raise ValueError("lower must be positive; the improper endpoint "
                         "is handled by classify_dini")
    if upper < lower:
        raise ValueError("need lower <= upper")
    if upper > spec.s_max * (1 + 1e-12):
        raise ValueError("upper must not exceed s_max")
    if upper == lower:
        return 0.0
    val, _ = quad(lambda s: eval_mu(spec, s), lower, upper,
                  epsrel=1e-10, epsabs=0.0, limit=200)
    return val


@dataclass
class DiniVerdict:
    """Outcome of the dyadic-shell convergence test."""

    kind: str                    # "converges" | "diverges"
    value: float | None          # integral estimate (converges only)
    error_bound: float | None
    shells: list                 # rows (k, s_lo, s_hi, I_k)
    shells_used: int
    method: str                  # tail/decision policy that fired
    fitted_ratio: float | None = None
    model_params: dict = field(default_factory=dict)

    @property
    def converges(self) -> bool:
        return self.kind == "converges"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "error_bound": self.error_bound,
            "shells_used": self.shells_used,
            "method": self.method,
            "fitted_ratio": self.fitted_ratio,
            "model_params": self.model_params,
            "shells": [list(r) for r in self.shells],
        }


def _logpow_diff(t: np.ndarray, eps: float, h: float = LN2) -> np.ndarray:
    """F(t) - F(t+h) for F(t) = t**(-eps)/eps, stable through eps = 0."""
    t = np.asarray(t, dtype=float)
    L = np.log1p(h / t)
    if abs(eps) < 1e-12:
        return L * t ** (-eps)
    return t ** (-eps) * (-np.expm1(-eps * L)) / eps


def _fit_logpow(shells: np.ndarray) -> tuple[float, float, float, float] | None:
    """Fit I_k ~ A*[F(u+k*ln2) - F(u+(k+1)*ln2)], F(t)=t**(-eps)/eps.

    Returns (A, u, eps, residual) for the trailing shells, or None when no
    start converges.  Ratios are fitted so the amplitude A drops out.
    """
    K = len(shells)
    m = min(10, K - 2)
    idx = np.arange(K - 1 - m, K - 1)
    ratios = shells[idx + 1] / shells[idx]

    def resid(z):
        u, eps = math.exp(z[0]), z[1]
        t = u + idx * LN2
        pred = _logpow_diff(t + LN2, eps) / _logpow_diff(t, eps)
        return pred / ratios - 1.0

    best = None
    for u0 in (0.3, 1.0, 3.0, 10.0):
        for e0 in (0.0, 0.5, 1.5):
            try:
                sol = least_squares(resid, x0=[math.log(u0), e0],
                                    method="lm", xtol=1e-15, ftol=1e-15)
            except Exception:
                continue
            res = float(np.max(np.abs(sol.fun)))
            if best is None or res < best[3]:
                u, eps = math.exp(sol.x[0]), float(sol.x[1])
                A = float(shells[K - 1] / _logpow_diff(u + (K - 1) * LN2, eps))
                best = (A, u, eps, res)
            if best is not None and best[3] < 1e-10:
                return best
    return best


def classify_shell_sequence(vals: np.ndarray, rows: list,
                            tol: float = 1e-6) -> DiniVerdict:
    """Decide summability of a dyadic shell sequence and estimate its tail.

    Shared decision policy: exact-geometric shells first, then the log-power
    model, then the frozen 0.95/window-8 heuristic.
    """
    vals = np.asarray(vals, dtype=float)
    max_shells = len(vals)
    partial = float(np.sum(vals))
    window = vals[-RATIO_WINDOW:]

    # trailing shells vanish in float64: the tail is below representability
    if vals[-1] == 0.0 and np.all(vals[int(np.argmin(vals != 0.0)):] == 0.0):
        return DiniVerdict("converges", partial, 0.0, rows, max_shells,
                           "vanishing-tail")

    # exact geometric shells (power-family decay)
    ratios = vals[1:] / vals[:-1]
    wr = ratios[-(RATIO_WINDOW - 1):]
    spread = float(np.max(wr) - np.min(wr)) / max(float(np.mean(wr)), 1e-300)
    if spread < 1e-8:
        r = float(np.mean(wr))
        if r >= 1.0 - 1e-9:
            return DiniVerdict("diverges", None, None, rows, max_shells,
                               "geometric", fitted_ratio=r)
        tail = float(vals[-1]) * r / (1.0 - r)
        err = abs(tail) * max(spread, 1e-12) + 1e-12 * partial
        return DiniVerdict("converges", partial + tail, err, rows, max_shells,
                           "geometric-tail", fitted_ratio=r,
                           model_params={"ratio": r})

    # log-power shells (inverse-log-family decay)
    fit = _fit_logpow(vals)
    if fit is not None and fit[3] < 1e-7:
        A, u, eps, res = fit
        pred = A * _logpow_diff(u + np.arange(max_shells) * LN2, eps)
        model_ok = float(np.max(np.abs(pred[-RATIO_WINDOW:] / window - 1.0))) < 1e-7
        if model_ok:
            params = {"A": A, "u": u, "eps": eps, "residual": res}
            if eps <= 1e-6:
                return DiniVerdict("diverges", None, None, rows, max_shells,
                                   "log-power", fitted_ratio=float(ratios[-1]),
                                   model_params=params)
            tail = A * (u + max_shells * LN2) ** (-eps) / eps
            err = abs(tail) * max(res, 1e-12) + 1e-12 * partial
            return DiniVerdict("converges", partial + tail, err, rows,
                               max_shells, "log-power-tail",
                               fitted_ratio=float(ratios[-1]), model_params=params)

    # frozen heuristic: geometric ratio fitted over the trailing window
    if np.any(window <= 0):
        raise IndeterminateError("vanishing shell contributions; raise max_shells")
    slope = np.polyfit(np.arange(RATIO_WINDOW), np.log(window), 1)[0]
    fitted = float(math.exp(slope))
    nondecreasing = bool(np.all(np.diff(window) >= -1e-15 * window[:-1]))
    if fitted >= RATIO_THRESHOLD or nondecreasing:
        return DiniVerdict("diverges", None, None, rows, max_shells,
                           "heuristic", fitted_ratio=fitted)
    if fitted <= 0:
        raise IndeterminateError("shell decay could not be fitted")
    tail = float(vals[-1]) * fitted / (1.0 - fitted)
    err = abs(tail)  # honest bound: heuristic extrapolation, order-of-magnitude
    if err > max(tol * abs(partial + tail), tol):
        raise IndeterminateError(
            "tail estimate exceeds requested tolerance; raise max_shells")
    return DiniVerdict("converges", partial + tail, err, rows, max_shells,
                       "heuristic-geometric-tail", fitted_ratio=fitted)


def classify_dini(spec: OmegaSpec, c: float, max_shells: int = 32,
                  tol: float = 1e-6) -> DiniVerdict:
    """Classify convergence of the improper integral of omega(s)/s near 0."""
    if not 0 < c <= spec.s_max * (1 + 1e-12):
        raise ValueError("need 0 < c <= s_max")
    if max_shells < 16:
        raise ValueError("max_shells must be at least 16")

    rows = []
    vals = np.empty(max_shells)
    for k in range(max_shells):
        s_hi = c * 2.0 ** (-k)
        s_lo = s_hi / 2.0
        vals[k] = dini_integral(spec, s_lo, s_hi)
        rows.append((k, s_lo, s_hi, vals[k]))
    return classify_shell_sequence(vals, rows, tol=tol)


def phi_tail(spec: OmegaSpec, s: float, C3: float,
             max_shells: int = 32) -> float | DiniVerdict:
    """Phi(s) = integral of omega(r)/r over (0, C3*exp(-s)].

    Returns the value for Dini-convergent specs; for divergent specs the
    diverging DiniVerdict is returned as a flag.
    """
    if s < 0 or C3 <= 0:
        raise ValueError("need s >= 0 and C3 > 0")
    upper = C3 * math.exp(-s)
    if upper > spec.s_max * (1 + 1e-12):
        raise ValueError("C3*exp(-s) exceeds s_max")
    verdict = classify_dini(spec, upper, max_shells=max_shells)
    if not verdict.converges:
        return verdict
    return float(verdict.value)
