"""Experiment orchestrator: JSON-configured scenario runs emitting CSV tables,
verdict JSON blocks and gnuplot scripts.

Subcommands: dini, kernel, solve, propagation, uniqueness, energy, cascade.
Each takes --config PATH --out DIR.  Exit codes: 0 success, 2 config error,
3 solver non-convergence (partial outputs retained), 4 indeterminate
classification.  LAB_THREADS pins the thread count (read before the numeric
stack is imported, so set it in the environment, not in the config).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from .reporting import write_csv, write_gnuplot, write_json

__all__ = ["main", "DEFAULT_THRESHOLDS"]

#: frozen three-way verdict thresholds for the propagation plateau metric
DEFAULT_THRESHOLDS = {"plateau": 0.05, "propagating": 0.25}


def _pin_threads() -> None:
    n = os.environ.get("LAB_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ[var] = n


# -- config parsing -----------------------------------------------------------

def _omega(obj):
    from .omega import OmegaSpec
    return OmegaSpec.from_json(obj)


def _potential(obj):
    from .omega import AbsorptionPotential
    return AbsorptionPotential.from_json(obj)


def _bc(obj):
    from .solver import BoundaryData
    kw = dict(obj)
    if "patches" in kw and kw["patches"] is not None:
        kw["patches"] = tuple((tuple(p[0]), tuple(p[1]), float(p[2]))
                              for p in kw["patches"])
    if "center" in kw and kw["center"] is not None:
        kw["center"] = tuple(kw["center"])
    return BoundaryData(**kw)


def _problem(obj):
    from .solver import ProblemSpec
    return ProblemSpec(
        N=int(obj["N"]), p=float(obj["p"]),
        box=(tuple(obj["box"]["lo"]), tuple(obj["box"]["hi"])),
        potential=_potential(obj["potential"]),
        bc=_bc(obj["bc"]))


def _case_label(i: int, case: dict, spec) -> str:
    return str(case.get("label", f"{i}_{spec.label()}")).replace(",", ";")


# -- scenario runners ---------------------------------------------------------

def run_dini(cfg: dict, out: Path) -> None:
    from .dini import classify_dini
    rows, shell_rows, verdicts = [], [], []
    for i, case in enumerate(cfg["cases"]):
        spec = _omega(case["omega"])
        label = _case_label(i, case, spec)
        c = float(case.get("c", spec.s_max))
        v = classify_dini(spec, c, max_shells=int(case.get("max_shells", 32)))
        rows.append((label, c, v.kind, v.value if v.value is not None else "",
                     v.error_bound if v.error_bound is not None else "",
                     v.shells_used, v.method))
        for k, s_lo, s_hi, I in v.shells:
            shell_rows.append((label, k, s_lo, s_hi, I))
        verdicts.append({"label": label, **v.to_json()})
    write_csv(out / "dini_verdicts.csv",
              ["label", "c", "kind", "value", "error_bound", "shells_used", "method"],
              rows)
    write_csv(out / "dini_shells.csv", ["label", "k", "s_lo", "s_hi", "I_k"],
              shell_rows)
    write_json(out / "dini_verdicts.json", verdicts)
    write_gnuplot(out / "dini_shells.gp", "dyadic shell contributions",
                  "dini_shells.csv", ["using 2:5 with linespoints"],
                  logscale="y", xlabel="shell k", ylabel="I_k")


def run_kernel(cfg: dict, out: Path) -> None:
    from .oracles import kernel_normalization, mv_integrability
    if "normalization" in cfg:
        nc = cfg["normalization"]
        rows = [(R, kernel_normalization(int(nc["N"]), float(nc["x_N"]), float(R)))
                for R in nc["R_list"]]
        write_csv(out / "kernel_normalization.csv", ["R", "mass"], rows)
        write_gnuplot(out / "kernel_normalization.gp", "kernel boundary mass",
                      "kernel_normalization.csv", ["using 1:2 with linespoints"],
                      logscale="x", xlabel="R", ylabel="mass")
    if "mv" in cfg:
        rows = []
        for case in cfg["mv"]:
            pot = _potential(case["potential"])
            v = mv_integrability(int(case["N"]), float(case["p"]), pot,
                                 float(case.get("R", 0.5)))
            rows.append((case["N"], case["p"], v.kind, v.shells_used, v.method))
        write_csv(out / "mv_integrability.csv",
                  ["N", "p", "kind", "shells_used", "method"], rows)


def run_solve(cfg: dict, out: Path) -> None:
    from .solver import discretize, harmonic_majorant, newton_solve
    spec = _problem(cfg["problem"])
    system = discretize(spec, cfg["resolution"])
    init = harmonic_majorant(spec, cfg["resolution"], system=system)
    rep = newton_solve(system, init, tol=cfg.get("tol"))
    rep.field.save(out / "solution")
    write_json(out / "solve_report.json", {
        "newton_iterations": rep.newton_iterations,
        "final_residual": rep.final_residual,
        "tolerance": rep.tolerance,
        "monotone_flag": rep.monotone_flag,
    })
    if cfg.get("probes"):
        rows = [(name, *pt, float(rep.field.probe([pt])[0]))
                for name, pt in cfg["probes"].items()]
        write_csv(out / "probes.csv",
                  ["name"] + [f"x{i + 1}" for i in range(spec.N)] + ["value"],
                  rows)


def _propagation_case(spec_omega, cfg: dict):
    from .omega import AbsorptionPotential
    from .solver import BoundaryData, ProblemSpec
    p = float(cfg.get("p", 2.0))
    box = cfg.get("box", {"lo": [-1.0, 0.0], "hi": [1.0, 1.0]})
    bc = BoundaryData("mollified_dirac", K=1.0,
                      center=tuple(cfg.get("center", [0.0])))
    return ProblemSpec(N=2, p=p, box=(tuple(box["lo"]), tuple(box["hi"])),
                       potential=AbsorptionPotential(spec_omega), bc=bc)


def run_propagation(cfg: dict, out: Path) -> None:
    from .solver import NonConvergenceError, solve_sequence
    res = int(cfg.get("resolution", 128))
    K_list = [10.0 ** j for j in cfg.get("K_exponents", [1, 2, 3, 4, 5, 6])]
    g = float(cfg.get("g", 0.5))
    hc = int(cfg.get("probe_height_cells", 4))
    thr = {**DEFAULT_THRESHOLDS, **cfg.get("thresholds", {})}
    verdict_rows = []
    partial_failure = None
    for i, case in enumerate(cfg["cases"]):
        spec = _omega(case["omega"])
        label = _case_label(i, case, spec)
        prob = _propagation_case(spec, cfg)
        dy = (prob.box[1][1] - prob.box[0][1]) / (res - 1)
        h = hc * dy
        cx = prob.bc.center[0]
        probes = {"near": (cx, h), "away": (cx + g, h),
                  "off": (cx + g, 0.5 * (prob.box[0][1] + prob.box[1][1]))}
        try:
            reports = solve_sequence(prob, K_list, res)
        except NonConvergenceError as e:
            partial_failure = e
            break
        rows = []
        for K, rep in zip(K_list, reports):
            vals = [float(rep.field.probe([pt])[0]) for pt in probes.values()]
            rows.append((K, *vals))
        write_csv(out / f"growth_{label}.csv", ["K", "near", "away", "off"], rows)
        write_gnuplot(out / f"growth_{label}.gp", f"probe growth {label}",
                      f"growth_{label}.csv",
                      ["using 1:2 with linespoints title 'near'",
                       "using 1:3 with linespoints title 'away'",
                       "using 1:4 with linespoints title 'off'"],
                      logscale="xy", xlabel="K", ylabel="u(probe)")
        prev_away, last_away = rows[-2][2], rows[-1][2]
        metric = (last_away - prev_away) / prev_away if prev_away > 0 else math.inf
        if metric < thr["plateau"]:
            verdict = "Plateau"
        elif metric >= thr["propagating"]:
            verdict = "Propagating"
        else:
            verdict = "Inconclusive"
        verdict_rows.append((label, metric, verdict,
                             thr["plateau"], thr["propagating"]))
    write_csv(out / "propagation_verdicts.csv",
              ["label", "plateau_metric", "verdict",
               "threshold_plateau", "threshold_propagating"],
              verdict_rows)
    if partial_failure is not None:
        raise partial_failure


def run_uniqueness(cfg: dict, out: Path) -> None:
    import numpy as np
    from .solver import (BoundaryData, NonConvergenceError, ProblemSpec,
                         discretize, harmonic_majorant, newton_solve)
    from dataclasses import replace

    prob = _problem(cfg["problem"])
    res = int(cfg["resolution"])
    K_list = [float(k) for k in cfg["K_list"]]
    s_list = [float(s) for s in cfg["s_list"]]
    if len(K_list) != len(s_list):
        raise ValueError("K_list and s_list must have equal length")
    if any(b <= a for a, b in zip(K_list, K_list[1:])):
        raise ValueError("K_list must increase")
    if any(b >= a for a, b in zip(s_list, s_list[1:])):
        raise ValueError("s_list must decrease")
    K_big = float(cfg.get("K_big", 10.0 * K_list[-1]))
    margin = float(cfg.get("core_margin", 0.25))
    lo, hi = prob.box
    core_axes = [np.linspace(l + margin, h - margin, 9) for l, h in zip(lo, hi)]
    core = np.stack([m.ravel() for m in np.meshgrid(*core_axes, indexing="ij")],
                    axis=-1)

    def _solve(p_spec, n):
        system = discretize(p_spec, n)
        return newton_solve(system, harmonic_majorant(p_spec, n, system=system))

    rows = []
    partial_failure = None
    for K, s in zip(K_list, s_list):
        try:
            # minimal branch: large data on the original box
            pmin = replace(prob, bc=BoundaryData("constant", K=K))
            rmin = _solve(pmin, res)
            # maximal branch: huge data on the inward-offset box
            lo_s = tuple(l + s for l in lo)
            hi_s = tuple(h - s for h in hi)
            pmax = ProblemSpec(prob.N, prob.p, (lo_s, hi_s),
                               prob.potential, BoundaryData("constant", K=K_big))
            rmax = _solve(pmax, res)
        except NonConvergenceError as e:
            partial_failure = e
            break
        umin = rmin.field.probe(core)
        umax = rmax.field.probe(core)
        gap = float(np.max(np.abs(umax - umin) / np.maximum(umin, 1e-300)))
        rows.append((K, s, gap))
    write_csv(out / "uniqueness_gap.csv", ["K", "s", "gap"], rows)
    write_gnuplot(out / "uniqueness_gap.gp", "large-solution bracket gap",
                  "uniqueness_gap.csv", ["using 1:3 with linespoints"],
                  logscale="x", xlabel="K", ylabel="relative gap")
    if partial_failure is not None:
        raise partial_failure


def run_energy(cfg: dict, out: Path) -> None:
    from .energy import audit_energy, energy_J
    from .solver import solve_sequence
    prob = _problem(cfg["problem"])
    res = int(cfg["resolution"])
    K_list = [float(k) for k in cfg["K_list"]]
    s_samples = [float(s) for s in cfg["s_samples"]]
    reports = solve_sequence(prob, K_list, res)
    audit_rows, d3_rows, J_rows = [], [], []
    for K, rep in zip(K_list, reports):
        aud = audit_energy(rep.field, prob.potential, prob.p, s_samples)
        for s, I, b in zip(aud.s_samples, aud.I_values, aud.bound_values):
            ratio = I / b if math.isfinite(b) and b > 0 else 0.0
            audit_rows.append((K, float(s), float(I), float(b), float(ratio)))
        d3_rows.append((K, aud.fitted_d3))
        if cfg.get("tau_list"):
            s_cut = float(cfg.get("cutoff_s", s_samples[0]))
            patches = [(tuple(p[0]), tuple(p[1]))
                       for p in cfg.get("patches", [])]
            for tau in cfg["tau_list"]:
                J_rows.append((K, float(tau),
                               energy_J(rep.field, prob.potential, prob.p,
                                        s_cut, float(tau), patches)))
    write_csv(out / "energy_audit.csv", ["K", "s", "I", "bound", "ratio"],
              audit_rows)
    write_csv(out / "energy_d3.csv", ["K", "fitted_d3"], d3_rows)
    if J_rows:
        write_csv(out / "energy_J.csv", ["K", "tau", "J"], J_rows)
    write_gnuplot(out / "energy_audit.gp", "interior energy vs bound",
                  "energy_audit.csv",
                  ["using 2:3 with linespoints title 'I'",
                   "using 2:4 with linespoints title 'bound'"],
                  logscale="y", xlabel="s", ylabel="energy")


def run_cascade(cfg: dict, out: Path) -> None:
    from .cascade import (build_chain, build_sufficiency_schedule,
                          chain_sum_lowerbound, schedule_budget_report)
    verdicts = []
    for i, case in enumerate(cfg.get("chains", [])):
        spec = _omega(case["omega"])
        label = _case_label(i, case, spec)
        chain = build_chain(spec, float(case.get("p", 2.0)),
                            int(case.get("N", 2)),
                            j_max=int(case.get("j_max", 64)),
                            g=float(case.get("g", 1.0)),
                            constants=case.get("constants"))
        rows = [(int(j), float(r), math.exp(la) if la > -745 else 0.0,
                 math.exp(lA) if lA > -745 else 0.0, float(lK),
                 float(t), float(ps))
                for j, r, la, lA, lK, t, ps in zip(
                    chain.j, chain.r, chain.ln_a, chain.ln_A, chain.ln_K,
                    chain.tau, chain.partial_sums)]
        write_csv(out / f"chain_{label}.csv",
                  ["j", "r", "a", "A", "ln_K", "tau", "partial_sum"], rows)
        write_gnuplot(out / f"chain_{label}.gp", f"chain partial sums {label}",
                      f"chain_{label}.csv",
                      ["using 1:7 with linespoints title 'partial sum'"],
                      xlabel="j", ylabel="sum tau")
        lb = chain_sum_lowerbound(chain)
        verdicts.append({"label": label, **chain.to_json(),
                         "lowerbound_holds": lb["holds"], "ae1": lb["ae1"]})
    for i, case in enumerate(cfg.get("schedules", [])):
        spec = _omega(case["omega"])
        label = _case_label(i, case, spec)
        jr = case.get("j_range", [4, 12])
        sch = build_sufficiency_schedule(
            spec, float(case.get("p", 2.0)), float(case.get("nu", 0.5)),
            float(case.get("C_nu", 1.0)), float(case.get("delta", 0.01)),
            float(case.get("rho0", 0.5)), range(int(jr[0]), int(jr[1]) + 1),
            c_tilde=float(case.get("c_tilde", 1.0)),
            C2=float(case.get("C2", 1.0)))
        write_csv(out / f"schedule_{label}.csv", ["j", "ln_Kbar", "s", "tau"],
                  [(int(j), float(lk), float(s), float(t))
                   for j, lk, s, t in zip(sch.j, sch.ln_Kbar, sch.s, sch.tau)])
        report = schedule_budget_report(sch, case.get("g_list"))
        if not sch.diverges:
            write_csv(out / f"phi_{label}.csv",
                      ["m", "phi", "budget", "fits_rho0_half"],
                      [(r["m"], r["phi"], r["budget"], r["fits_rho0_half"])
                       for r in report])
            write_gnuplot(out / f"phi_{label}.gp", f"Phi decay {label}",
                          f"phi_{label}.csv",
                          ["using 1:2 with linespoints title 'Phi'"],
                          logscale="y", xlabel="m", ylabel="Phi")
        verdicts.append({"label": label, **sch.to_json()})
    write_json(out / "cascade_verdicts.json", verdicts)


RUNNERS = {
    "dini": run_dini,
    "kernel": run_kernel,
    "solve": run_solve,
    "propagation": run_propagation,
    "uniqueness": run_uniqueness,
    "energy": run_energy,
    "cascade": run_cascade,
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dinilab",
        description="numerical experiments around degenerate-absorption "
                    "boundary singularities")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name in RUNNERS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    _pin_threads()
    args = _parser().parse_args(argv)
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .dini import IndeterminateError
    from .solver import NonConvergenceError
    try:
        RUNNERS[args.cmd](cfg, out)
    except NonConvergenceError as e:
        print(f"solver non-convergence: {e}", file=sys.stderr)
        return 3
    except IndeterminateError as e:
        print(f"indeterminate classification: {e}", file=sys.stderr)
        return 4
    except (KeyError, TypeError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
