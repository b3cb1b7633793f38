import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ksblowup.params import ModelParams, PreconditionError, beta_of_t, derive
from ksblowup.subsolution import (L_eval, certify, phi, phi1, phi1_rho, phi1_rhorho, phi1_t, phi2,
                                  phi2_argmax, phi2_max, phi2_rho, phi2_rhorho, phi2_t, phi_rho,
                                  signed_power, slopes_at_rho1, slopes_at_rho2, spatial_part)


def test_signed_power_odd_extension():
    x = np.array([-8.0, 0.0, 8.0])
    np.testing.assert_allclose(signed_power(x, 1 / 3), [-2.0, 0.0, 2.0])


def test_endpoints_and_continuity(dp):
    for t in (0.0, 0.3 * dp.T_max, dp.T_max):
        assert phi(t, 0.0, dp) == 0.0
        assert phi(t, 1.0, dp) == pytest.approx(0.0, abs=1e-15)
        for kink in (dp.rho1, dp.rho2):
            left, right = phi(t, kink - 1e-12, dp), phi(t, kink + 1e-12, dp)
            assert left == pytest.approx(right, abs=1e-9)


def test_inner_piece_hits_one_half(dp):
    # at rho = a^(1/gamma) the inner piece is exactly 1/2
    from ksblowup.params import a_of_t
    t = 0.9 * dp.T_max
    r = a_of_t(t, dp) ** (1 / dp.gamma)
    assert phi1(t, r, dp) == pytest.approx(0.5, rel=1e-14)


def test_phi_at_blowup_time_is_step(dp):
    v = phi(dp.T_max, np.array([0.0, 0.1, 0.4]), dp)
    np.testing.assert_array_equal(v, [0.0, 1.0, 1.0])


@pytest.mark.parametrize("t_frac", [0.0, 0.5, 0.95])
def test_derivatives_match_finite_differences(dp, t_frac):
    t = t_frac * dp.T_max
    h = 1e-6
    r_in = np.linspace(0.05, 0.45, 9)
    r_out = np.concatenate([np.linspace(0.52, dp.rho2 - 0.02, 5), np.linspace(dp.rho2 + 0.02, 0.98, 5)])
    np.testing.assert_allclose(phi1_rho(t, r_in, dp), (phi1(t, r_in + h, dp) - phi1(t, r_in - h, dp)) / (2 * h), rtol=1e-6)
    np.testing.assert_allclose(
        phi1_rhorho(t, r_in, dp), (phi1_rho(t, r_in + h, dp) - phi1_rho(t, r_in - h, dp)) / (2 * h), rtol=1e-5)
    np.testing.assert_allclose(phi2_rho(t, r_out, dp), (phi2(t, r_out + h, dp) - phi2(t, r_out - h, dp)) / (2 * h),
                               rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(
        phi2_rhorho(t, r_out, dp), (phi2_rho(t, r_out + h, dp) - phi2_rho(t, r_out - h, dp)) / (2 * h), atol=1e-6)
    ht = 1e-8
    np.testing.assert_allclose(phi1_t(t + ht, r_in, dp), (phi1(t + 2 * ht, r_in, dp) - phi1(t, r_in, dp)) / (2 * ht),
                               rtol=1e-5)
    np.testing.assert_allclose(phi2_t(t + ht, r_out, dp), (phi2(t + 2 * ht, r_out, dp) - phi2(t, r_out, dp)) / (2 * ht),
                               rtol=1e-5, atol=1e-9)


def test_outer_maximum(dp):
    r = np.linspace(dp.rho1, 1.0, 200001)
    v = phi2(0.0, r, dp)
    assert r[np.argmax(v)] == pytest.approx(phi2_argmax(dp), abs=1e-5)
    assert v.max() == pytest.approx(phi2_max(0.0, dp), rel=1e-9)


def test_slope_limits(dp):
    for t in np.linspace(0, dp.T_max, 5):
        b = beta_of_t(t, dp)
        left, right = slopes_at_rho2(t, dp)
        assert right - left == pytest.approx(dp.kappa * b, rel=1e-14)
        l1, r1 = slopes_at_rho1(t, dp)
        assert r1 == pytest.approx(dp.gamma * b, rel=1e-14)
        assert r1 - l1 > 0  # upward kink is the admissible direction for a subsolution


def test_slopes_do_not_match_at_rho1(dp):
    # the two pieces meet continuously but with different slopes; the jump grows in time
    jumps = [np.subtract(*slopes_at_rho1(t, dp)[::-1]) for t in (0.0, 0.5 * dp.T_max, dp.T_max)]
    assert jumps[0] == pytest.approx(0.2207, abs=1e-4)
    assert jumps[0] < jumps[1] < jumps[2]


def test_kinks_rejected(dp):
    with pytest.raises(PreconditionError):
        L_eval(0.0, dp.rho1, dp)
    with pytest.raises(PreconditionError):
        spatial_part(0.0, np.array([0.3, dp.rho2]), dp)
    with pytest.raises(PreconditionError):
        L_eval(0.0, 0.0, dp)
    with pytest.raises(PreconditionError):
        phi(0.0, 1.5, dp)
    with pytest.raises(PreconditionError):
        phi_rho(0.0, 0.0, dp)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1 - 1e-6), st.floats(0.0, 1.0))
def test_L_nonpositive_off_kinks(dp, rho, tf):
    if abs(rho - dp.rho1) < 1e-12 or abs(rho - dp.rho2) < 1e-12:
        return
    assert L_eval(tf * dp.T_max, rho, dp) <= 1e-9


def test_certificate_reference(dp):
    rep = certify(dp)
    assert rep.passed
    assert rep.worst < 0
    assert rep.jump_at_rho2_rel_error < 1e-12
    assert not rep.c1_matched
    assert rep.n_evaluations == 50_000


def test_certificate_refuses_inadmissible():
    from ksblowup.params import DerivedParams
    dp = derive(ModelParams.from_chi_N(3, 1.6, 8.0, 60.0), 1.2)
    bad = DerivedParams(**{**dp.__dict__, "chi_threshold": 100.0})
    with pytest.raises(PreconditionError):
        certify(bad)


def test_certificate_csv(dp, tmp_path):
    rep = certify(dp, rho_samples=200, t_samples=2)
    rep.write_csv(tmp_path / "cert.csv")
    assert (tmp_path / "cert.csv").read_text().startswith("t,rho,L_value")
    assert (tmp_path / "cert_summary.csv").exists()
