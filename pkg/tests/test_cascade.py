import math

import numpy as np
import pytest

from dinilab.cascade import (THETA, build_chain, build_sufficiency_schedule,
                             chain_sum_lowerbound, schedule_budget_report)
from dinilab.dini import dini_integral
from dinilab.omega import OmegaSpec, eval_mu, eval_omega

CONST1 = OmegaSpec.constant(1.0)
POW05 = OmegaSpec.power(0.5)
INVLOG0 = OmegaSpec.inverse_log(0.0)


def test_chain_defining_formulas():
    """r, a, A, K reproduce their definitions when recomputed independently."""
    chain = build_chain(POW05, 2.5, 2, j_max=40)
    for i, j in enumerate(chain.j):
        r = 2.0 ** (-int(j))
        assert chain.r[i] == r
        ln_a = -eval_mu(POW05, r)
        assert chain.ln_a[i] == pytest.approx(ln_a, rel=1e-15)
        ln_A = (ln_a + 2.0 * math.log(r)) / 1.5
        assert chain.ln_A[i] == pytest.approx(ln_A, rel=1e-15)
        assert chain.ln_K[i] == pytest.approx(-ln_A + math.log(r), rel=1e-15)


def test_chain_monotone_scales():
    chain = build_chain(POW05, 2.0, 2, j_max=40)
    assert np.all(np.diff(chain.ln_A) < 0)   # A_j decreasing
    assert np.all(np.diff(chain.ln_K) > 0)   # K_j increasing


def test_chain_constant_step_width():
    chain = build_chain(CONST1, 2.0, 2, j_max=64)
    # mu(r_j) - mu(r_{j-1}) = 2^{j-1}: each step contributes 1/(2 pi)
    step = 1.0 / (2.0 * math.pi)
    np.testing.assert_allclose(chain.tau[1:], step, rtol=1e-14)
    assert chain.verdict["kind"] == "ReachesDistance"
    assert chain.verdict["j_bar"] == chain.j[0] + math.ceil(2.0 * math.pi)


def test_chain_verdicts_dichotomy():
    assert build_chain(CONST1, 2.0, 2).verdict["kind"] == "ReachesDistance"
    assert build_chain(INVLOG0, 2.0, 2).verdict["kind"] == "ReachesDistance"
    v = build_chain(POW05, 2.0, 2).verdict
    assert v["kind"] == "Bounded" and v["total"] < 1.0


def test_chain_sandwich():
    for spec in (CONST1, POW05, INVLOG0):
        chain = build_chain(spec, 2.0, 2)
        mu = np.asarray(eval_mu(spec, chain.r))
        mu_prev = np.asarray(eval_mu(spec, 2.0 * chain.r))
        low = chain.r * (mu - mu_prev) / (math.sqrt(chain.lambda1) * 1.0)
        assert np.all(chain.tau[1:] >= low[1:] * (1 - 1e-12))
        assert np.all(chain.tau[1:] <= 2.0 * low[1:] * (1 + 1e-12))


def test_chain_lowerbound_all_windows():
    for spec in (CONST1, POW05):
        out = chain_sum_lowerbound(build_chain(spec, 2.0, 2, j_max=32))
        assert out["holds"]
        assert 0 < out["ae"] < 1


def test_chain_constant_rescaling_invariance():
    base = build_chain(CONST1, 2.0, 2).constants
    for f in (0.5, 2.0):
        scaled = {k: v * f for k, v in base.items() if k not in ("c1", "c2")}
        for spec, kind in ((CONST1, "ReachesDistance"), (POW05, "Bounded"),
                           (INVLOG0, "ReachesDistance")):
            assert build_chain(spec, 2.0, 2, constants=scaled).verdict["kind"] == kind


def test_chain_rejects_bad_inputs():
    with pytest.raises(ValueError):
        build_chain(POW05, 3.5, 2)
    with pytest.raises(ValueError):
        build_chain(POW05, 2.0, 2, g=-1.0)
    with pytest.raises(ValueError):
        build_chain(POW05, 2.0, 2, constants={"nope": 1.0})


def test_theta_exact():
    assert THETA == 0.5 / math.e


def _schedule(spec, j_lo=3, j_hi=12, nu=0.5):
    return build_sufficiency_schedule(spec, 2.0, nu, 1.0, delta=0.01,
                                      rho0=0.5, j_range=range(j_lo, j_hi + 1))


def test_schedule_level_equation_two_sided_bound():
    sch = _schedule(POW05)
    expo = 2.0 + 0.5
    mu_s = np.array([eval_mu(POW05, s) for s in sch.s])
    # the level equation itself, up to bisection accuracy
    np.testing.assert_allclose(expo * mu_s, THETA * sch.ln_Kbar, rtol=1e-12)
    # two-sided bound: (theta/2) ln Kbar <= expo * mu(s_j) <= theta ln Kbar
    assert np.all(THETA / 2 * sch.ln_Kbar <= expo * mu_s * (1 + 1e-12))
    assert np.all(expo * mu_s <= THETA * sch.ln_Kbar * (1 + 1e-12))


def test_schedule_scale_decay_bound():
    sch = _schedule(POW05)
    cap = sch.C3 * np.exp(-sch.j.astype(float))
    assert np.all(sch.s <= cap * (1 + 1e-12))
    assert np.all(np.diff(sch.s) < 0)
    assert np.all(np.diff(sch.ln_Kbar) > 0)


def test_schedule_phi_and_budget():
    sch = _schedule(POW05)
    assert not sch.diverges
    phis = [row[1] for row in sch.phi_values]
    assert all(a >= b for a, b in zip(phis, phis[1:]))
    assert phis[-1] < 0.1 * phis[0]
    assert sch.j0_star is not None
    rows = schedule_budget_report(sch, g_list=[0.25, 1.0])
    assert rows[0]["fits_g_half"][1.0] in (True, False)
    # Phi for power(1/2) halves roughly every ln 2 in the argument
    m0, p0, _ = sch.phi_values[0]
    m1 = m0 + 2
    p_at = dict((m, p) for m, p, _ in sch.phi_values)
    assert p_at[m1] == pytest.approx(p0 * math.exp(-1.0), rel=1e-6)


def test_schedule_divergent_spec_flag():
    sch = _schedule(CONST1, j_lo=4)
    assert sch.diverges
    assert sch.j0_star is None
    rows = schedule_budget_report(sch)
    assert rows[0]["kind"] == "diverges"


def test_schedule_bracket_failure():
    with pytest.raises(ValueError):
        _schedule(POW05, j_lo=0, j_hi=2)  # level target below mu(s_max)


def test_schedule_unique_root():
    """The solved map is strictly monotone, so the root is unique."""
    sch = _schedule(POW05)
    for s in sch.s:
        up, down = 1.25 * s, 0.8 * s
        if up > POW05.s_max:
            continue
        assert eval_mu(POW05, down) > eval_mu(POW05, s) > eval_mu(POW05, up)
