"""Energy functionals on discrete solutions and the closed-form bounds they
must satisfy: the interior energy I(s) over the region at distance > s from
the degeneracy face, its potential-only upper bound (up to a fitted constant),
the lower quadrature inequality for weighted boundary integrals, and the
cutoff-weighted boundary-layer energy J.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .grids import GridField
from .omega import AbsorptionPotential, OmegaSpec, eval_h, eval_mu, eval_omega

__all__ = [
    "CutoffProfile",
    "EnergyAudit",
    "energy_I",
    "energy_J",
    "interior_energy_bound",
    "check_weight_quadrature_bound",
    "audit_energy",
]


@dataclass(frozen=True)
class CutoffProfile:
    """Cutoff zeta(d): 1 for d <= s, 0 for d >= 2*s, cubic smoothstep ramp
    between; C^1 with |zeta'| <= 1.5/s."""

    s: float

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("cutoff scale must be positive")

    def __call__(self, d):
        t = np.clip((np.asarray(d, dtype=float) - self.s) / self.s, 0.0, 1.0)
        out = 1.0 - t * t * (3.0 - 2.0 * t)
        return out if np.ndim(d) else float(out)


def _face_distance(field: GridField, pot: AbsorptionPotential) -> np.ndarray:
    """Node distances to the degeneracy set, from the potential geometry."""
    mesh = field.meshgrid()
    if pot.geometry == "line":
        return np.sqrt(sum((mesh[a]) ** 2 for a in range(1, len(field.shape))))
    return mesh[-1] - field.lo[-1]


def _grad_sq(field: GridField) -> np.ndarray:
    g2 = np.zeros(field.shape)
    for a, da in enumerate(np.gradient(field.values, *field.spacing)
                           if len(field.shape) > 1
                           else [np.gradient(field.values, field.spacing[0])]):
        g2 += da ** 2
    return g2


def _density(field: GridField, pot: AbsorptionPotential, p: float) -> np.ndarray:
    dist = _face_distance(field, pot)
    H = eval_h(pot, np.maximum(dist, 0.0))
    return _grad_sq(field) + H * field.values ** (p + 1.0)


def energy_I(field: GridField, pot: AbsorptionPotential, p: float, s: float) -> float:
    """Quadrature of |grad u|^2 + h*u^(p+1) over nodes at distance > s.

    Membership is decided per node (no partial cells); gradients are centered
    with one-sided differences at the grid edges.
    """
    height = field.hi[-1] - field.lo[-1]
    if not 0 < s < height / 2.0:
        raise ValueError("need 0 < s < half the box height")
    dist = _face_distance(field, pot)
    cell = math.prod(field.spacing)
    return float(np.sum(_density(field, pot, p)[dist > s]) * cell)


def energy_J(field: GridField, pot: AbsorptionPotential, p: float, s: float,
             tau: float, patch_geometry) -> float:
    """Cutoff-weighted energy over the boundary layer d < 2s, excluding nodes
    within face-distance tau of the given patches ((lo, hi) boxes in the face
    coordinates)."""
    height = field.hi[-1] - field.lo[-1]
    if not 0 < s < height / 2.0:
        raise ValueError("need 0 < s < half the box height")
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    dim = len(field.shape)
    mesh = field.meshgrid()
    dist = _face_distance(field, pot)
    keep = dist < 2.0 * s
    if patch_geometry:
        pd = np.full(field.shape, np.inf)
        for lo_p, hi_p in patch_geometry:
            lo_p = np.atleast_1d(np.asarray(lo_p, dtype=float))
            hi_p = np.atleast_1d(np.asarray(hi_p, dtype=float))
            if lo_p.size != dim - 1:
                raise ValueError("patch boxes must live in the face coordinates")
            d = np.zeros(field.shape)
            for a in range(dim - 1):
                da = np.maximum(np.maximum(lo_p[a] - mesh[a], mesh[a] - hi_p[a]), 0.0)
                d = np.sqrt(d ** 2 + da ** 2)
            pd = np.minimum(pd, d)
        keep &= pd >= tau
    if not np.any(keep):
        return 0.0
    zeta = CutoffProfile(s)(dist)
    cell = math.prod(field.spacing)
    return float(np.sum((_density(field, pot, p) * zeta)[keep]) * cell)


def interior_energy_bound(spec: OmegaSpec, p: float, s: float) -> float:
    """[int_0^s h(r)**(2/(p+3)) dr]**(-(p+3)/(p-1)); the multiplicative
    constant is fitted separately.  Returns inf when the inner integral
    underflows (expected for very small s)."""
    if p <= 1:
        raise ValueError("need p > 1")
    if not 0 < s <= spec.s_max * (1 + 1e-12):
        raise ValueError("need 0 < s <= s_max")
    q = 2.0 / (p + 3.0)

    def integrand(r):
        mu = eval_mu(spec, r)
        z = q * mu
        return 0.0 if z > 700.0 else math.exp(-z)

    inner, _ = quad(integrand, 0.0, s, epsrel=1e-10, limit=200)
    if inner <= 0.0:
        return math.inf
    log_bound = -(p + 3.0) / (p - 1.0) * math.log(inner)
    return math.inf if log_bound > 700.0 else math.exp(log_bound)


def check_weight_quadrature_bound(spec: OmegaSpec, a: float, s: float) -> dict:
    """Lower quadrature bound for the degenerate weight:
    int_0^s exp(-a*omega(t)/t) dt >= s**2/(2s + a*omega(s)) * exp(-a*omega(s)/s).
    """
    if a <= 0:
        raise ValueError("need a > 0")
    if not 0 < s <= spec.s_max * (1 + 1e-12):
        raise ValueError("need 0 < s <= s_max")

    def integrand(t):
        z = a * eval_mu(spec, t)
        return 0.0 if z > 700.0 else math.exp(-z)

    lhs, _ = quad(integrand, 0.0, s, epsrel=1e-10, limit=200)
    ws = eval_omega(spec, s)
    z = a * ws / s
    rhs = s * s / (2.0 * s + a * ws) * (0.0 if z > 700.0 else math.exp(-z))
    return {"holds": bool(lhs >= rhs * (1.0 - 1e-9)), "lhs": lhs, "rhs": rhs}


@dataclass
class EnergyAudit:
    """Energy-vs-bound table over a grid of levels s, with the smallest
    constant making I(s) <= d3 * bound(s) hold across the samples."""

    s_samples: np.ndarray
    I_values: np.ndarray
    bound_values: np.ndarray
    fitted_d3: float

    def __post_init__(self):
        if np.any(np.diff(self.s_samples) <= 0):
            raise ValueError("s_samples must be increasing")
        if np.any(self.I_values < 0) or not np.all(np.isfinite(self.I_values)):
            raise ValueError("energies must be finite and nonnegative")
        if np.any(np.diff(self.I_values) > 1e-12 * (1 + np.abs(self.I_values[:-1]))):
            raise ValueError("I must be nonincreasing in s (nested regions)")


def audit_energy(field: GridField, pot: AbsorptionPotential, p: float,
                 s_samples) -> EnergyAudit:
    if pot.omega is None:
        raise ValueError("auditing needs a degenerate potential with an omega spec")
    s_samples = np.asarray(s_samples, dtype=float)
    I_vals = np.array([energy_I(field, pot, p, s) for s in s_samples])
    bounds = np.array([interior_energy_bound(pot.omega, p, s) for s in s_samples])
    finite = np.isfinite(bounds) & (bounds > 0)
    d3 = float(np.max(I_vals[finite] / bounds[finite])) if np.any(finite) else math.inf
    return EnergyAudit(s_samples, I_vals, bounds, d3)
