import json
import math

import numpy as np
import pytest

from dinilab.omega import (AbsorptionPotential, OmegaSpec, check_admissibility,
                           eval_h, eval_mu, eval_omega, geometric_grid)


def test_power_family_values():
    spec = OmegaSpec.power(0.5)
    assert eval_omega(spec, 0.25) == pytest.approx(0.5)
    assert eval_mu(spec, 0.25) == pytest.approx(2.0)
    s = np.array([0.01, 0.1, 0.5])
    np.testing.assert_allclose(eval_omega(spec, s), np.sqrt(s))


def test_constant_and_inverse_log_values():
    c = OmegaSpec.constant(2.0)
    assert eval_mu(c, 0.1) == pytest.approx(20.0)
    il = OmegaSpec.inverse_log(0.5)
    s = 0.1
    assert eval_omega(il, s) == pytest.approx(math.log(math.e / s) ** -1.5)


def test_tabulated_interpolation_and_flat_extension():
    spec = OmegaSpec.tabulated([(0.1, 0.2), (0.3, 0.4), (0.5, 0.5)])
    assert eval_omega(spec, 0.2) == pytest.approx(0.3)
    # below the first sample: flat extension keeps omega nondecreasing
    assert eval_omega(spec, 0.01) == pytest.approx(0.2)


def test_family_validation():
    with pytest.raises(ValueError):
        OmegaSpec.power(1.5)
    with pytest.raises(ValueError):
        OmegaSpec.constant(-1.0)
    with pytest.raises(ValueError):
        OmegaSpec.inverse_log(-0.1)
    with pytest.raises(ValueError):
        OmegaSpec("inverse_log", s_max=3.0, eps=0.5)  # needs s_max < e
    with pytest.raises(ValueError):
        OmegaSpec.tabulated([(0.1, 0.5), (0.3, 0.4)])  # decreasing values
    with pytest.raises(ValueError):
        OmegaSpec("gaussian", s_max=0.5)


def test_range_check():
    spec = OmegaSpec.power(0.5)
    with pytest.raises(ValueError):
        eval_omega(spec, 0.0)
    with pytest.raises(ValueError):
        eval_omega(spec, 0.7)


def test_json_round_trip():
    for spec in (OmegaSpec.power(0.25), OmegaSpec.constant(1.0),
                 OmegaSpec.inverse_log(1.0),
                 OmegaSpec.tabulated([(0.1, 0.2), (0.5, 0.5)])):
        again = OmegaSpec.from_json(json.dumps(spec.to_json()))
        assert again == spec


def test_potential_round_trip_and_eval():
    pot = AbsorptionPotential(OmegaSpec.power(0.5))
    again = AbsorptionPotential.from_json(pot.to_json())
    assert again == pot
    assert eval_h(pot, 0.0) == 0.0
    assert eval_h(pot, 0.25) == pytest.approx(math.exp(-2.0))
    # beyond s_max the exponent freezes at mu(s_max)
    assert eval_h(pot, 5.0) == pytest.approx(math.exp(-eval_mu(pot.omega, 0.5)))


def test_h_underflow_clamp():
    pot = AbsorptionPotential(OmegaSpec.constant(1.0))
    assert eval_h(pot, 1e-4) == 0.0  # mu = 1e4 > clamp
    d = np.array([0.0, 1e-6, 0.25])
    out = eval_h(pot, d)
    assert out[0] == 0.0 and out[1] == 0.0 and out[2] > 0


def test_constant_coefficient_potential():
    pot = AbsorptionPotential.constant_coefficient(2.5)
    assert eval_h(pot, 0.0) == 2.5
    np.testing.assert_allclose(eval_h(pot, np.array([0.0, 1.0])), 2.5)


def test_admissibility_matrix():
    for spec in (OmegaSpec.power(0.5), OmegaSpec.constant(1.0),
                 OmegaSpec.inverse_log(0.0)):
        rep = check_admissibility(spec)
        assert rep.monotone_omega
        assert rep.monotone_mu
        assert rep.mu_unbounded
        assert rep.ratio_condition and rep.worst_ratio < 1.0
        assert rep.ratio_estimated
    assert check_admissibility(OmegaSpec.power(0.5)).omega_to_zero
    assert not check_admissibility(OmegaSpec.constant(1.0)).omega_to_zero


def test_admissibility_technical_bound():
    # s**0.75 <= s**0.5 on (0,1), and omega < 2 throughout
    rep = check_admissibility(OmegaSpec.power(0.5), gamma1=0.75, omega0=2.0)
    assert rep.technical_bound
    # s**0.25 exceeds s**0.5 below 1, so the lower bound fails
    rep2 = check_admissibility(OmegaSpec.power(0.5), gamma1=0.25)
    assert not rep2.technical_bound
    grid = geometric_grid(0.5)
    assert grid[0] > 0 and grid[-1] == pytest.approx(0.5)
