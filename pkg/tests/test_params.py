import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ksblowup.params import (InfeasibleParameters, InputError, ModelParams, PreconditionError,
                             a_of_t, a_prime_of_t, beta_of_t, beta_prime_of_t, chi_thresholds,
                             default_gamma, derive, gamma_bound, q_of_gamma, rho2_of_gamma,
                             validate_model)


def test_chi_scaling_roundtrip(mp):
    assert mp.chi == pytest.approx(60.0 * 3**1.6)
    assert mp.chi_N == pytest.approx(60.0, rel=1e-14)


def test_reference_constants(dp):
    assert dp.theta == pytest.approx(0.7)
    assert dp.rho2 == pytest.approx(3.2 / 4.4)
    assert dp.kappa == pytest.approx(2.2)
    e1, e2, e3 = dp.epsilon_terms
    # hand evaluation of the three rate terms
    assert e1 == pytest.approx(60 * 1.2 * 0.3 / 2**1.6, rel=1e-12)
    assert e2 == pytest.approx(60 * 1.2 * 0.6 / 2, rel=1e-12)
    assert dp.epsilon == e3
    assert dp.T_max == pytest.approx(1 / e3)
    assert 0.29 < dp.T_max < 0.31


def test_q_and_rho2_closed_forms():
    assert q_of_gamma(1.0) == 15 / 32
    assert rho2_of_gamma(1.0) == 0.75


@given(st.floats(1.0, 1e6))
def test_q_stays_above_three_eighths(g):
    assert q_of_gamma(g) > 3 / 8


def test_gamma_bound_reference(mp):
    # binding term is 1 + (2-p)/(N(p-1)) = 11/9
    assert gamma_bound(mp) == pytest.approx(11 / 9)
    assert default_gamma(mp) == pytest.approx(0.99 * 11 / 9)


def test_validation_passes_reference(mp):
    rep = validate_model(mp, 1.2)
    assert rep.passed
    assert rep.chi_threshold == pytest.approx(chi_thresholds(mp, 1.2)["positivity"])
    informational = [f for f in rep.findings if not f.binding]
    assert len(informational) == 2 and not any(f.passed for f in informational)


@pytest.mark.parametrize("kw, label", [
    (dict(N=2), "dimension"),
    (dict(p=1.4), "flux exponent"),
    (dict(p=2.0), "flux exponent"),
    (dict(M=5.0), "mean mass"),
    (dict(chi=-1.0), "chemotactic"),
])
def test_validation_failures_named(kw, label):
    base = dict(N=3, p=1.6, M=8.0, chi=300.0)
    base.update(kw)
    rep = validate_model(ModelParams(**base))
    assert not rep.passed
    assert any(label in f.label for f in rep.failures)


def test_subthreshold_chi_rejected():
    mp = ModelParams.from_chi_N(3, 1.6, 8.0, 50.0)
    assert not validate_model(mp, 1.2).passed
    with pytest.raises((PreconditionError, InfeasibleParameters)):
        derive(mp, 1.2)


def test_gamma_outside_range(mp):
    with pytest.raises(PreconditionError):
        derive(mp, 1.3)
    with pytest.raises(PreconditionError):
        derive(mp, 1.0)


def test_nonfinite_input_rejected():
    with pytest.raises(InputError):
        validate_model(ModelParams(3, float("nan"), 8.0, 300.0))


def test_small_chi_kills_gamma_range():
    with pytest.raises(InfeasibleParameters):
        gamma_bound(ModelParams.from_chi_N(3, 1.6, 8.0, 3.9))


def test_time_functions(dp):
    assert a_of_t(0.0, dp) == 1.0
    assert a_of_t(dp.T_max, dp) == 0.0
    assert beta_of_t(0.0, dp) == pytest.approx(2 / (1 + 2**1.2))
    assert beta_of_t(dp.T_max, dp) == pytest.approx(2.0)
    with pytest.raises(PreconditionError):
        a_of_t(1.01 * dp.T_max, dp)
    with pytest.raises(PreconditionError):
        a_of_t(-1e-3, dp)


def test_time_derivatives_by_finite_differences(dp):
    t = np.linspace(0.05, 0.9, 7) * dp.T_max
    h = 1e-7
    fd_a = (a_of_t(t + h, dp) - a_of_t(t - h, dp)) / (2 * h)
    fd_b = (beta_of_t(t + h, dp) - beta_of_t(t - h, dp)) / (2 * h)
    np.testing.assert_allclose(a_prime_of_t(t, dp), fd_a, rtol=1e-6)
    np.testing.assert_allclose(beta_prime_of_t(t, dp), fd_b, rtol=1e-6)


@given(st.floats(1.51, 1.99))
def test_theta_relation(p):
    d = derive(ModelParams.from_chi_N(3, p, 8.0, 1e4))
    assert math.isclose(d.theta, (3 - p) / 2, rel_tol=1e-15)
    assert d.theta > 2 - p
