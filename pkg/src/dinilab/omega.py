"""Degeneracy-rate functions omega(s), the quotient mu(s)=omega(s)/s and the
absorption potential h(s)=exp(-mu(s)).

Four built-in families:

* ``power``       -- omega(s) = s**gamma, 0 < gamma <= 1
* ``constant``    -- omega(s) = omega0 > 0
* ``inverse_log`` -- omega(s) = ln(e/s)**(-(1+eps)), eps >= 0
* ``tabulated``   -- monotone piecewise-linear interpolation of sample pairs

All evaluators accept scalars or numpy arrays.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "OmegaSpec",
    "AbsorptionPotential",
    "AdmissibilityReport",
    "eval_omega",
    "eval_mu",
    "eval_h",
    "check_admissibility",
    "geometric_grid",
]

#: exp(-x) underflows around x ~ 745 in float64; evaluate_h clamps before that.
DEFAULT_EXPONENT_CLAMP = 700.0


@dataclass(frozen=True)
class OmegaSpec:
    """A degeneracy-rate function omega(s) on (0, s_max]."""

    family: str
    s_max: float = 0.5
    gamma: float | None = None
    omega0: float | None = None
    eps: float | None = None
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.s_max <= 0:
            raise ValueError("s_max must be positive")
        if self.family == "power":
            if self.gamma is None or not 0 < self.gamma <= 1:
                raise ValueError("power family needs gamma in (0, 1]")
        elif self.family == "constant":
            if self.omega0 is None or self.omega0 <= 0:
                raise ValueError("constant family needs omega0 > 0")
        elif self.family == "inverse_log":
            if self.eps is None or self.eps < 0:
                raise ValueError("inverse_log family needs eps >= 0")
            if self.s_max >= math.e:
                raise ValueError("inverse_log family needs s_max < e")
        elif self.family == "tabulated":
            if not self.table or len(self.table) < 2:
                raise ValueError("tabulated family needs at least 2 sample pairs")
            s = np.array([p[0] for p in self.table], dtype=float)
            w = np.array([p[1] for p in self.table], dtype=float)
            if np.any(s <= 0) or np.any(np.diff(s) <= 0):
                raise ValueError("table abscissae must be positive and strictly increasing")
            if np.any(w <= 0) or np.any(np.diff(w) < 0):
                raise ValueError("table values must be positive and nondecreasing")
        else:
            raise ValueError(f"unknown omega family {self.family!r}")

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def power(gamma: float, s_max: float = 0.5) -> "OmegaSpec":
        return OmegaSpec("power", s_max=s_max, gamma=gamma)

    @staticmethod
    def constant(omega0: float, s_max: float = 0.5) -> "OmegaSpec":
        return OmegaSpec("constant", s_max=s_max, omega0=omega0)

    @staticmethod
    def inverse_log(eps: float, s_max: float = 0.5) -> "OmegaSpec":
        return OmegaSpec("inverse_log", s_max=s_max, eps=eps)

    @staticmethod
    def tabulated(pairs: Sequence[tuple[float, float]], s_max: float | None = None) -> "OmegaSpec":
        pairs = tuple((float(a), float(b)) for a, b in pairs)
        if s_max is None:
            s_max = pairs[-1][0]
        return OmegaSpec("tabulated", s_max=s_max, table=pairs)

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        params: dict = {}
        if self.family == "power":
            params["gamma"] = self.gamma
        elif self.family == "constant":
            params["omega0"] = self.omega0
        elif self.family == "inverse_log":
            params["eps"] = self.eps
        else:
            params["table"] = [list(p) for p in self.table]
        return {"family": self.family, "params": params, "s_max": self.s_max}

    @staticmethod
    def from_json(obj: dict | str) -> "OmegaSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        params = dict(obj.get("params", {}))
        if "table" in params:
            params["table"] = tuple(tuple(p) for p in params["table"])
        return OmegaSpec(obj["family"], s_max=float(obj["s_max"]), **params)

    def label(self) -> str:
        if self.family == "power":
            return f"power({self.gamma:g})"
        if self.family == "constant":
            return f"constant({self.omega0:g})"
        if self.family == "inverse_log":
            return f"inverse_log({self.eps:g})"
        return f"tabulated[{len(self.table)}]"


def _check_range(spec: OmegaSpec, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0) or np.any(s > spec.s_max * (1 + 1e-12)):
        raise ValueError(f"s must lie in (0, {spec.s_max}]")
    return s


def eval_omega(spec: OmegaSpec, s):
    """omega(s) for 0 < s <= s_max."""
    sa = _check_range(spec, s)
    if spec.family == "power":
        out = sa ** spec.gamma
    elif spec.family == "constant":
        out = np.full_like(sa, spec.omega0)
    elif spec.family == "inverse_log":
        out = np.log(math.e / sa) ** (-(1.0 + spec.eps))
    else:
        xs = np.array([p[0] for p in spec.table])
        ys = np.array([p[1] for p in spec.table])
        # flat extension below the first sample keeps omega nondecreasing
        out = np.interp(sa, xs, ys)
    return out if isinstance(s, np.ndarray) else float(out)


def eval_mu(spec: OmegaSpec, s):
    """mu(s) = omega(s)/s for 0 < s <= s_max."""
    sa = _check_range(spec, s)
    out = np.asarray(eval_omega(spec, sa)) / sa
    return out if isinstance(s, np.ndarray) else float(out)


@dataclass(frozen=True)
class AbsorptionPotential:
    """Absorption coefficient evaluated from a distance argument.

    geometry:
      * ``boundary`` -- h(d) with d = distance to the degeneracy face x_N = 0
      * ``line``     -- h(|x'|) with |x'| the distance to the degeneracy line
      * ``constant`` -- coefficient identically equal to ``a``
    """

    omega: OmegaSpec | None
    geometry: str = "boundary"
    a: float | None = None
    exponent_clamp: float = DEFAULT_EXPONENT_CLAMP

    def __post_init__(self):
        if self.geometry not in ("boundary", "line", "constant"):
            raise ValueError(f"unknown potential geometry {self.geometry!r}")
        if self.geometry == "constant":
            if self.a is None or self.a < 0:
                raise ValueError("constant-coefficient potential needs a >= 0")
        elif self.omega is None:
            raise ValueError("exponential potential needs an OmegaSpec")

    @staticmethod
    def constant_coefficient(a: float) -> "AbsorptionPotential":
        return AbsorptionPotential(None, geometry="constant", a=a)

    def to_json(self) -> dict:
        return {
            "geometry": self.geometry,
            "a": self.a,
            "omega": None if self.omega is None else self.omega.to_json(),
            "exponent_clamp": self.exponent_clamp,
        }

    @staticmethod
    def from_json(obj: dict) -> "AbsorptionPotential":
        omega = obj.get("omega")
        return AbsorptionPotential(
            None if omega is None else OmegaSpec.from_json(omega),
            geometry=obj["geometry"],
            a=obj.get("a"),
            exponent_clamp=obj.get("exponent_clamp", DEFAULT_EXPONENT_CLAMP),
        )


def eval_h(pot: AbsorptionPotential, distance):
    """h(distance) = exp(-mu(distance)); 0 at the degeneracy set or below clamp."""
    if pot.geometry == "constant":
        d = np.asarray(distance, dtype=float)
        if np.any(d < 0):
            raise ValueError("distance must be nonnegative")
        out = np.full_like(d, pot.a)
        return out if isinstance(distance, np.ndarray) else float(out)
    d = np.asarray(distance, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be nonnegative")
    out = np.zeros_like(d)
    pos = d > 0
    if np.any(pos):
        mu = np.asarray(eval_mu(pot.omega, np.minimum(d[pos], pot.omega.s_max)))
        # distances beyond s_max: mu is decreasing, freeze at mu(s_max)
        vals = np.where(mu > pot.exponent_clamp, 0.0, np.exp(-np.minimum(mu, pot.exponent_clamp)))
        out[pos] = vals
    return out if isinstance(distance, np.ndarray) else float(out)


def geometric_grid(s_max: float, n: int = 48, decades: float = 6.0) -> np.ndarray:
    """Geometric sample grid in (0, s_max], increasing, spanning `decades` decades."""
    return s_max * np.logspace(-decades, 0.0, n)


@dataclass
class AdmissibilityReport:
    """Sampled verdicts for the structural conditions placed on omega."""

    monotone_omega: bool
    monotone_mu: bool
    mu_unbounded: bool
    omega_to_zero: bool
    ratio_condition: bool
    worst_ratio: float
    ratio_estimated: bool = True  # finite-j estimate of a limsup
    ratios: list = field(default_factory=list)
    technical_bound: bool | None = None

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in (
            "monotone_omega", "monotone_mu", "mu_unbounded", "omega_to_zero",
            "ratio_condition", "worst_ratio", "ratio_estimated", "technical_bound")}


def check_admissibility(
    spec: OmegaSpec,
    grid: np.ndarray | None = None,
    gamma1: float | None = None,
    omega0: float | None = None,
) -> AdmissibilityReport:
    """Sample the structural conditions on omega over a geometric grid.

    The dyadic ratio mu(2**(-j+1))/mu(2**(-j)) is estimated over the j-range
    covered by the grid with j >= 8; the true limsup is not finitely
    computable, so the report's worst observed ratio is labeled an estimate.
    """
    if grid is None:
        grid = geometric_grid(spec.s_max)
    grid = np.asarray(grid, dtype=float)
    if grid.size < 16:
        raise ValueError("admissibility grid needs at least 16 points")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("admissibility grid must be positive and strictly increasing")
    if grid[-1] > spec.s_max * (1 + 1e-12):
        raise ValueError("admissibility grid must stay within (0, s_max]")

    w = np.asarray(eval_omega(spec, grid))
    mu = w / grid

    monotone_omega = bool(np.all(np.diff(w) >= -1e-15))
    monotone_mu = bool(np.all(np.diff(mu) < 0))

    # sampled trend for mu -> infinity as s -> 0
    mu_unbounded = bool(mu[0] > 4.0 * mu[-1] and np.all(np.diff(mu[:4]) < 0))
    omega_to_zero = bool(w[0] <= 0.5 * w[-1])

    j_lo = max(8, int(math.ceil(-math.log2(spec.s_max))) + 1)
    j_hi = int(math.floor(-math.log2(grid[0])))
    ratios = []
    for j in range(j_lo, j_hi + 1):
        r = 2.0 ** (-j)
        ratios.append(float(eval_mu(spec, 2 * r) / eval_mu(spec, r)))
    worst = max(ratios) if ratios else math.inf
    ratio_condition = bool(ratios and worst < 1.0)

    technical = None
    if gamma1 is not None or omega0 is not None:
        technical = True
        if gamma1 is not None:
            technical &= bool(np.all(grid ** gamma1 <= w * (1 + 1e-12)))
        if omega0 is not None:
            technical &= bool(np.all(w < omega0))

    return AdmissibilityReport(
        monotone_omega=monotone_omega,
        monotone_mu=monotone_mu,
        mu_unbounded=mu_unbounded,
        omega_to_zero=omega_to_zero,
        ratio_condition=ratio_condition,
        worst_ratio=worst,
        ratios=ratios,
        technical_bound=technical,
    )
