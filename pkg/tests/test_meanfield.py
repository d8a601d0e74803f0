import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monomer_dimer import meanfield as mf

SQRT2 = math.sqrt(2.0)
# closed forms: g'' = 0 at g = 2 - sqrt(2), and the critical constants follow
M_C = 2 - SQRT2
T_STAR = 0.5 * math.log(2 * SQRT2 - 2)
J_C = (3 + 2 * SQRT2) / 4
H_C = T_STAR - 0.25
LAMBDA_C = -(12 + 17 / SQRT2)
GAMMA_SLOPE = 2 * SQRT2 - 3


# --------------------------------------------------------------------- g, p0


def test_g_at_zero():
    assert mf.g(0.0) == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-15)


def test_g_limits():
    assert mf.g(20.0) > 1 - 1e-8
    assert mf.g(-10.0) == pytest.approx(math.exp(-10), rel=1e-4)
    assert mf.g(800.0) == 1.0 and 0 < mf.g(-700.0) < 1e-300


@pytest.mark.parametrize("t", np.linspace(-3, 3, 13))
def test_stable_g_matches_literal(t):
    assert mf.g(t) == pytest.approx(mf.g_literal(t), rel=1e-12)


def test_g_monotone_on_grid():
    t = np.linspace(-15, 15, 10_000)
    v = mf.g(t)
    assert np.all(np.diff(v) > 0) and v.min() > 0 and v.max() < 1


def test_g_inverse_round_trip():
    t = np.linspace(-5, 5, 41)
    np.testing.assert_allclose(mf.g_inverse(mf.g(t)), t, atol=1e-12)


@pytest.mark.parametrize("order, step, tol", [(1, 1e-5, 1e-9), (2, 1e-4, 1e-7), (3, 1e-3, 1e-5)])
def test_g_derivatives_against_finite_differences(order, step, tol):
    for t in np.linspace(-3, 3, 25):
        lo = mf.g_derivative(t - step, order - 1)
        hi = mf.g_derivative(t + step, order - 1)
        assert mf.g_derivative(t, order) == pytest.approx((hi - lo) / (2 * step), abs=tol)


def test_g_prime_at_zero():
    assert mf.g_derivative(0.0, 1) == pytest.approx(0.3416407865, abs=1e-10)


def test_p0_examples():
    assert mf.p0(0.0) == pytest.approx(0.2902288194, abs=1e-10)
    assert mf.p0(0.0) == pytest.approx(mf.p0_literal(0.0), abs=1e-15)
    assert abs(mf.p0(15.0) - 15.0) < 1e-5
    assert math.isfinite(mf.p0(1000.0)) and math.isfinite(mf.p0(-700.0))


def test_p0_derivative_is_g():
    step = 1e-6
    for t in np.linspace(-5, 5, 100):
        fd = (mf.p0(t + step) - mf.p0(t - step)) / (2 * step)
        assert fd == pytest.approx(mf.g(t), rel=1e-6)


# ------------------------------------------------------------------------ psi


def test_psi_constant_at_zero_coupling():
    m = np.linspace(0, 1, 11)
    np.testing.assert_allclose(mf.psi(m, 0.7, 0.0), mf.p0(0.7), rtol=0, atol=1e-15)


@pytest.mark.parametrize("order", [2, 3, 4])
def test_psi_derivatives_against_finite_differences(order):
    step = 1e-5
    for h, J in [(0.2, 0.5), (-0.3, 1.4), (0.1, 3.0)]:
        for m in (0.2, 0.5, 0.8):
            lo = mf.psi_derivative(m - step, h, J, order - 1)
            hi = mf.psi_derivative(m + step, h, J, order - 1)
            fd = (hi - lo) / (2 * step)
            assert mf.psi_derivative(m, h, J, order) == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_psi_first_derivative_against_psi():
    step = 1e-6
    for m in (0.2, 0.5, 0.8):
        fd = (mf.psi(m + step, 0.1, 2.0) - mf.psi(m - step, 0.1, 2.0)) / (2 * step)
        assert mf.psi_derivative(m, 0.1, 2.0, 1) == pytest.approx(fd, abs=1e-8)


def test_sup_psi_at_origin():
    assert mf.analyze(0.0, 0.0).pressure == pytest.approx(0.29023, abs=1e-5)


def test_entropy_boundary():
    # all monomers: a single configuration
    assert mf.entropy(1.0) == 0.0
    assert mf.entropy(0.0) == pytest.approx(-0.5 * math.log(2) + 0.5 * math.log(2) - 0.5)


@pytest.mark.parametrize("m", [0.1, 0.4, 0.618, 0.9])
def test_entropy_matches_configuration_count(m):
    from scipy.special import gammaln

    N = 200_000
    M = round(m * N / 2) * 2
    D = (N - M) // 2
    log_count = gammaln(N + 1) - gammaln(M + 1) - gammaln(D + 1) - D * math.log(2 * N)
    assert log_count / N == pytest.approx(mf.entropy(M / N), abs=1e-4)


def test_entropy_energy_stationary_points_solve_consistency():
    step = 1e-6
    for h, J in [(0.0, 0.5), (-0.4, 2.5), (1.0, 0.1)]:
        for m in mf.consistency_solutions(h, J):
            if 1e-4 < m < 1 - 1e-4:
                d = (mf.entropy_energy_pressure(m + step, h, J) - mf.entropy_energy_pressure(m - step, h, J)) / (2 * step)
                assert abs(d) < 1e-6


def test_variational_forms_agree_on_grid():
    worst = 0.0
    for h in np.linspace(-2, 2, 20):
        for J in np.linspace(0, 4, 20):
            worst = max(worst, abs(mf.analyze(h, J).pressure - mf.sup_entropy_energy(h, J)))
    assert worst < 1e-9


# --------------------------------------------------------------- consistency


def test_consistency_decouples_at_zero_coupling():
    assert mf.consistency_solutions(0.3, 0.0) == [mf.g(0.3)]


def test_single_root_at_weak_coupling():
    assert len(mf.consistency_solutions(0.0, 0.1)) == 1


def test_three_roots_deep_in_two_phase_region():
    J = 3.0
    h = mf.coexistence_h(J)
    roots = mf.consistency_solutions(h, J)
    assert len(roots) == 3
    a = mf.analyze(h, J)
    assert a.maximizers == (roots[0], roots[2])


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(0, 5))
def test_maximisers_solve_consistency(h, J):
    a = mf.analyze(h, J)
    assert list(a.maximizers) == sorted(a.maximizers)
    for m, l2 in zip(a.maximizers, a.lambda2):
        assert abs(m - mf.g((2 * m - 1) * J + h)) < 1e-10
        assert l2 <= 1e-9


# ------------------------------------------------------------------- analyze


def test_analyze_origin():
    a = mf.analyze(0.0, 0.0)
    assert a.classification == "unique" and a.m_star == pytest.approx(mf.g(0.0))


def test_analyze_on_gamma():
    J = 2.0
    h = mf.coexistence_h(J)
    a = mf.analyze(h, J)
    assert a.classification == "coexistence"
    m1, m2 = a.maximizers
    assert m1 < m2 and abs(a.values[0] - a.values[1]) < 1e-11 + 1e-9 * abs(a.values[0])
    with pytest.raises(ValueError):
        a.m_star


def test_analyze_critical():
    cp = mf.critical_point()
    a = mf.analyze(cp.h_c, cp.J_c)
    assert a.classification == "critical" and len(a.maximizers) == 1


# ------------------------------------------------------------ critical point


def test_critical_point_closed_forms():
    cp = mf.critical_point()
    assert cp.m_c == pytest.approx(M_C, abs=1e-12)
    assert cp.t_star == pytest.approx(T_STAR, abs=1e-12)
    assert cp.J_c == pytest.approx(J_C, abs=1e-12)
    assert cp.h_c == pytest.approx(H_C, abs=1e-12)
    assert cp.lambda_c == pytest.approx(LAMBDA_C, rel=1e-9)


def test_critical_point_certificates():
    cp = mf.critical_point()
    assert cp.m_c == mf.g(cp.t_star)
    assert abs(cp.m_c - mf.g((2 * cp.m_c - 1) * cp.J_c + cp.h_c)) < 1e-15
    assert abs(mf.psi_derivative(cp.m_c, cp.h_c, cp.J_c, 2)) < 1e-8
    assert abs(mf.psi_derivative(cp.m_c, cp.h_c, cp.J_c, 3)) < 1e-8
    assert cp.lambda_c < 0


def test_g_second_derivative_has_one_sign_change():
    t = np.linspace(-20, 20, 100_001)
    s = np.sign(mf.g_derivative(t, 2))
    assert np.count_nonzero(np.diff(s[s != 0])) == 1


# --------------------------------------------------------- coexistence curve


def test_no_coexistence_below_critical_coupling():
    with pytest.raises(mf.NoCoexistenceError, match="no coexistence below critical coupling"):
        mf.coexistence_h(1.0)


def test_gamma_continuous_at_critical_point():
    assert abs(mf.coexistence_h(J_C + 1e-3) - H_C) < 1e-3


@pytest.mark.parametrize("J", [2.0, 2 * J_C, 5.0])
def test_maximiser_jumps_across_gamma(J):
    h = mf.coexistence_h(J)
    below = mf.analyze(h - 0.01, J)
    above = mf.analyze(h + 0.01, J)
    assert below.classification == above.classification == "unique"
    assert below.m_star < 0.5 < above.m_star


def test_gamma_slope_at_critical_point():
    assert mf.gamma_slope_at_critical() == pytest.approx(GAMMA_SLOPE, abs=1e-6)


def test_trace_gamma_rows():
    pts = mf.trace_gamma(J_C + 0.05, 5 * J_C, 8)
    for p in pts:
        assert p.m1 < p.m2 and p.rho1 + p.rho2 == pytest.approx(1.0)
    hs = [p.h for p in pts]
    # monotonicity is recorded only; the curve here happens to decrease
    assert all(np.isfinite(hs))


def test_mixture_weight_ratio_large_coupling():
    h = mf.coexistence_h(20.0)
    _, _, r1, r2 = mf.mixture_from_branches(h, 20.0)
    assert r1 / r2 == pytest.approx(1 / SQRT2, abs=0.02)


# -------------------------------------------------------- critical exponents


@pytest.mark.parametrize(
    "direction, expected",
    [("tangent", 0.5), ("nontangent_j", 1 / 3), ("nontangent_h", 1 / 3)],
)
def test_exponent_fits(direction, expected):
    fit = mf.critical_exponents(direction)
    assert abs(fit.exponent - expected) < 0.05
    assert not fit.warning


def test_fixed_field_curve_approaches_one_third_slowly():
    fit = mf.critical_exponents("nontangent_j", slope=0.0, residual_threshold=1.0)
    local = np.diff(np.log(fit.deviations)) / np.diff(np.log(fit.offsets))
    assert np.all(np.diff(local) > 0)
    assert 0.32 < local[-1] < 1 / 3


def test_exponent_direction_validated():
    with pytest.raises(ValueError):
        mf.critical_exponents("sideways")
