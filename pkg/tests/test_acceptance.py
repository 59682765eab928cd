"""Acceptance gate: one test per criterion, each printing a single
pass/fail summary line with the measured quantities."""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from dinilab.cascade import THETA, build_chain, build_sufficiency_schedule
from dinilab.cli import main
from dinilab.dini import classify_dini
from dinilab.energy import audit_energy, check_weight_quadrature_bound
from dinilab.omega import AbsorptionPotential, OmegaSpec, eval_mu
from dinilab.oracles import (exact_1d_blowup, kernel_constant,
                             kernel_normalization, mv_integrability)
from dinilab.solver import (BoundaryData, ProblemSpec, discretize,
                            harmonic_majorant, newton_solve, solve_sequence)

POW05 = OmegaSpec.power(0.5)
CONST1 = OmegaSpec.constant(1.0)
INVLOG0 = OmegaSpec.inverse_log(0.0)


def _line(n, ok, detail):
    print(f"[criterion {n:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def test_criterion_01_1d_blowup_oracle():
    t0 = time.time()
    exact = lambda pts: exact_1d_blowup(3.0, 1.0, pts[:, 0])
    errs = []
    for n in (512, 1024):
        spec = ProblemSpec(1, 3.0, ((0.1,), (1.0,)),
                           AbsorptionPotential.constant_coefficient(1.0),
                           BoundaryData("profile", profile=exact))
        system = discretize(spec, n)
        rep = newton_solve(system, harmonic_majorant(spec, n, system=system))
        x = rep.field.axis_coords(0)[1:-1]
        u_ex = exact_1d_blowup(3.0, 1.0, x)
        errs.append(np.max(np.abs(rep.field.values[1:-1] - u_ex) / u_ex))
    dt = time.time() - t0
    ok = errs[0] <= 0.02 and errs[0] / errs[1] >= 3.5 and dt < 10.0
    _line(1, ok, f"max rel err {errs[0]:.2e} (<=2%), refinement factor "
                 f"{errs[0] / errs[1]:.2f} (>=3.5), {dt:.1f}s (<10s)")


def test_criterion_02_kernel_normalization_and_harmonicity():
    mass = kernel_normalization(2, 1.0, 1e4)
    errs = []
    for h in (0.02, 0.01, 0.005):
        xs = np.arange(-0.5, 0.5, h)
        ys = np.arange(0.4, 1.2, h)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        P = kernel_constant(2) * Y / (X ** 2 + Y ** 2)
        lap = (P[:-2, 1:-1] + P[2:, 1:-1] + P[1:-1, :-2] + P[1:-1, 2:]
               - 4 * P[1:-1, 1:-1]) / h ** 2
        errs.append(np.max(np.abs(lap)))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    ok = abs(mass - 1.0) < 1e-4 and min(orders) >= 1.8
    _line(2, ok, f"mass(R=1e4)={mass:.6f} (|1-m|<1e-4), harmonicity orders "
                 f"{[f'{o:.2f}' for o in orders]} (>=1.8)")


def test_criterion_03_dini_family_matrix():
    t0 = time.time()
    matrix = [
        (OmegaSpec.power(0.25), True, 0.5 ** 0.25 / 0.25),
        (OmegaSpec.power(0.5), True, 0.5 ** 0.5 / 0.5),
        (OmegaSpec.power(0.9), True, 0.5 ** 0.9 / 0.9),
        (INVLOG0, False, None),
        (OmegaSpec.inverse_log(0.5), True,
         math.log(math.e / 0.5) ** -0.5 / 0.5),
        (OmegaSpec.inverse_log(1.0), True, math.log(math.e / 0.5) ** -1.0),
        (OmegaSpec.constant(0.1), False, None),
        (CONST1, False, None),
    ]
    worst = 0.0
    for spec, conv, truth in matrix:
        v = classify_dini(spec, spec.s_max)
        assert v.converges == conv, spec.label()
        if conv:
            worst = max(worst, abs(v.value - truth) / truth)
    dt = time.time() - t0
    ok = worst <= 1e-6 and dt < 1.0
    _line(3, ok, f"8/8 classified, worst rel err {worst:.2e} (<=1e-6), "
                 f"{dt:.2f}s (<1s)")


def test_criterion_04_critical_exponent_integrability():
    pot = AbsorptionPotential.constant_coefficient(1.0)
    lo = mv_integrability(2, 2.75, pot, 0.5)
    hi = mv_integrability(2, 3.25, pot, 0.5)
    ok = lo.converges and not hi.converges
    _line(4, ok, f"p=2.75 -> {lo.kind} (Finite), p=3.25 -> {hi.kind} "
                 f"(Infinite), straddling p0=3")


def test_criterion_05_comparison_principle():
    spec = ProblemSpec(2, 2.0, ((-1.0, 0.0), (1.0, 1.0)),
                       AbsorptionPotential(POW05),
                       BoundaryData("mollified_dirac", K=1.0, center=(0.0,)))
    reports = solve_sequence(spec, [10.0 ** j for j in range(1, 6)], 64)
    violations = 0
    for lo, hi in zip(reports, reports[1:]):
        violations += int(np.sum(hi.field.values - lo.field.values < -1e-10))
    # potential comparison on three ordered pairs
    bc = BoundaryData("constant", K=50.0)
    box = ((0.0, 0.0), (1.0, 1.0))
    pairs = [
        (AbsorptionPotential.constant_coefficient(0.5),
         AbsorptionPotential.constant_coefficient(1.0)),
        (AbsorptionPotential.constant_coefficient(0.0),
         AbsorptionPotential.constant_coefficient(2.0)),
        (AbsorptionPotential(OmegaSpec.power(0.25)),
         AbsorptionPotential(POW05)),
    ]
    pot_ok = 0
    for weak, strong in pairs:
        def run(pot):
            p = ProblemSpec(2, 2.0, box, pot, bc)
            s = discretize(p, 48)
            return newton_solve(s, harmonic_majorant(p, 48, system=s))
        if np.min(run(weak).field.values - run(strong).field.values) >= -1e-9:
            pot_ok += 1
    ok = violations == 0 and pot_ok == 3
    _line(5, ok, f"{violations} monotonicity violations at 1e-10 (need 0), "
                 f"{pot_ok}/3 potential-comparison pairs ordered")


def test_criterion_06_inequality_matrix():
    cells = failures = 0
    for spec in (POW05, CONST1, OmegaSpec.inverse_log(0.5)):
        for a in (0.5, 1.0, 2.0):
            for s in np.linspace(0.03, 0.5, 16):
                cells += 1
                if not check_weight_quadrature_bound(spec, a, float(s))["holds"]:
                    failures += 1
    ok = failures == 0 and cells == 144
    _line(6, ok, f"lower quadrature bound holds in {cells - failures}/{cells} "
                 f"matrix cells")


def test_criterion_07_energy_bound_uniformity():
    spec = ProblemSpec(2, 2.9, ((-1.0, 0.0), (1.0, 1.0)),
                       AbsorptionPotential(POW05),
                       BoundaryData("mollified_dirac", K=1.0, center=(0.0,)))
    K_list = [10.0 ** j for j in range(3, 8)]
    reports = solve_sequence(spec, K_list, 64)
    s_samples = np.linspace(0.05, 0.45, 9)
    d3 = [audit_energy(r.field, spec.potential, spec.p, s_samples).fitted_d3
          for r in reports]
    spread = max(d3) / min(d3)
    ok = spread < 2.0
    _line(7, ok, f"fitted d3 in [{min(d3):.3f}, {max(d3):.3f}] across 5 "
                 f"levels, spread {spread:.2f}x (<2x)")


def test_criterion_08_cascade_dichotomy():
    t0 = time.time()
    expected = [(CONST1, "ReachesDistance"), (INVLOG0, "ReachesDistance"),
                (POW05, "Bounded")]
    all_ok = True
    for spec, kind in expected:
        chain = build_chain(spec, 2.0, 2, j_max=64, g=1.0)
        all_ok &= chain.verdict["kind"] == kind
        # constants jointly rescaled by 0.5 and 2
        for f in (0.5, 2.0):
            scaled = {k: v * f for k, v in chain.constants.items()
                      if k not in ("c1", "c2")}
            c2 = build_chain(spec, 2.0, 2, j_max=64, g=1.0, constants=scaled)
            all_ok &= c2.verdict["kind"] == kind
        # sandwich at every index
        mu = np.asarray(eval_mu(spec, chain.r))
        mu_prev = np.asarray(eval_mu(spec, 2.0 * chain.r))
        low = chain.r * (mu - mu_prev) / math.sqrt(chain.lambda1)
        all_ok &= bool(np.all(chain.tau[1:] >= low[1:] * (1 - 1e-12)))
        all_ok &= bool(np.all(chain.tau[1:] <= 2 * low[1:] * (1 + 1e-12)))
        from dinilab.cascade import chain_sum_lowerbound
        all_ok &= chain_sum_lowerbound(chain)["holds"]
    dt = time.time() - t0
    ok = all_ok and dt < 1.0
    _line(8, ok, f"verdicts match dichotomy under x0.5/x1/x2 constants, "
                 f"sandwich and window lower bound hold, {dt:.2f}s (<1s)")


def test_criterion_09_sufficiency_schedule():
    sch = build_sufficiency_schedule(POW05, 2.0, 0.5, 1.0, delta=0.01,
                                     rho0=0.5, j_range=range(3, 13))
    expo = 2.0 + 0.5
    mu_s = np.array([eval_mu(POW05, s) for s in sch.s])
    two_sided = bool(np.all(THETA / 2 * sch.ln_Kbar <= expo * mu_s * (1 + 1e-12))
                     and np.all(expo * mu_s <= THETA * sch.ln_Kbar * (1 + 1e-12)))
    phis = [r[1] for r in sch.phi_values]
    phi_ok = all(a >= b for a, b in zip(phis, phis[1:])) and phis[-1] < phis[0] / 10
    div = build_sufficiency_schedule(CONST1, 2.0, 0.5, 1.0, 0.01, 0.5,
                                     range(4, 13))
    ok = (two_sided and phi_ok and sch.j0_star is not None and div.diverges
          and sch.theta == 0.5 / math.e)
    _line(9, ok, f"two-sided level bound holds for all j, Phi "
                 f"{phis[0]:.3f}->{phis[-1]:.2e} monotone, j0*={sch.j0_star}, "
                 f"Constant(1) flagged divergent, theta=(2e)^-1 exact")


def test_criterion_10_propagation_dichotomy(tmp_path):
    t0 = time.time()
    cfg = {"cases": [{"label": "power05",
                      "omega": {"family": "power", "params": {"gamma": 0.5},
                                "s_max": 0.5}},
                     {"label": "const1",
                      "omega": {"family": "constant", "params": {"omega0": 1.0},
                                "s_max": 0.5}}],
           "p": 2.9, "resolution": 128, "g": 0.5}
    cfg_path = tmp_path / "prop.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    code = main(["propagation", "--config", str(cfg_path), "--out", str(out)])
    assert code == 0
    rows = (out / "propagation_verdicts.csv").read_text().strip().splitlines()[1:]
    metric = {r.split(",")[0]: (float(r.split(",")[1]), r.split(",")[2])
              for r in rows}
    dt = time.time() - t0
    ok = (metric["power05"][0] < metric["const1"][0]
          and metric["power05"][1] == "Plateau"
          and metric["const1"][1] == "Propagating" and dt < 300.0)
    _line(10, ok, f"plateau metric power05={metric['power05'][0]:.3f} "
                  f"({metric['power05'][1]}) < const1={metric['const1'][0]:.3f} "
                  f"({metric['const1'][1]}), {dt:.0f}s (<300s)")


def test_criterion_11_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_THREADS", "1")
    scenarios = {
        "dini": {"cases": [{"label": "p05", "omega":
                            {"family": "power", "params": {"gamma": 0.5},
                             "s_max": 0.5}}]},
        "cascade": {"chains": [{"label": "c1", "omega":
                                {"family": "constant", "params": {"omega0": 1.0},
                                 "s_max": 0.5}}]},
        "propagation": {"cases": [{"label": "p05", "omega":
                                   {"family": "power", "params": {"gamma": 0.5},
                                    "s_max": 0.5}}],
                        "p": 2.9, "resolution": 48, "K_exponents": [1, 2, 3]},
    }
    mismatches = compared = 0
    for cmd, cfg in scenarios.items():
        cfg_path = tmp_path / f"{cmd}.json"
        cfg_path.write_text(json.dumps(cfg))
        outs = []
        for run in ("a", "b"):
            out = tmp_path / f"{cmd}_{run}"
            assert main([cmd, "--config", str(cfg_path),
                         "--out", str(out)]) == 0
            outs.append(out)
        for f1 in sorted(Path(outs[0]).glob("*.csv")):
            compared += 1
            if f1.read_bytes() != (Path(outs[1]) / f1.name).read_bytes():
                mismatches += 1
    ok = mismatches == 0 and compared > 0
    _line(11, ok, f"{compared} CSVs byte-identical across reruns "
                  f"({mismatches} mismatches)")
