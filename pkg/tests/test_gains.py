import dataclasses
import math
from math import comb

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from etadrc.errors import DimensionError, DomainError, NoSolutionError, NumericalFailure, PreconditionError
from etadrc.gains import (
    DesignGains,
    build_H,
    build_J,
    certify_r_star,
    default_noise_moments,
    dwell_product,
    dwell_times,
    eigenvalues,
    is_hurwitz,
    lambda_coefficients,
    solve_lyapunov,
    theta_threshold,
    validate_design,
)
from etadrc.presets import linear_n2_system, paper_sec5_system

from oracles import dwell_mp, lambdas_mp, lyapunov_quadrature

SEC5 = DesignGains(lambdas=(6, 12, 8), cs=(-1, -2), r=50, theta=7, eps1=1, kappa1=1, eps2=1, kappa2=1)


@pytest.fixture(scope="module")
def spec():
    return paper_sec5_system()


# companion matrices

def test_build_H_structure():
    H = build_H([6, 12, 8])
    np.testing.assert_array_equal(H, [[-6, 1, 0], [-12, 0, 1], [-8, 0, 0]])


def test_H_triple_eigenvalue():
    np.testing.assert_allclose(eigenvalues(build_H([6, 12, 8])), [-2, -2, -2], atol=1e-8, rtol=0)


def test_H_zero_gains_not_hurwitz():
    H = build_H([0, 0])
    # characteristic polynomial s^2
    assert np.allclose(np.poly(H), [1, 0, 0])
    assert not is_hurwitz(H)


def test_H_unit_binomial_against_polynomial_roots():
    s = sympy.symbols("s")
    assert sympy.roots(s ** 3 + 3 * s ** 2 + 3 * s + 1, s) == {-1: 3}
    ev = eigenvalues(build_H([3, 3, 1]))
    np.testing.assert_allclose(ev, [-1, -1, -1], atol=1e-12)


@pytest.mark.parametrize("bad", [[], [1.0]])
def test_build_H_rejects_short(bad):
    with pytest.raises(DimensionError):
        build_H(bad)


def test_build_J():
    J = build_J([-1, -2])
    np.testing.assert_array_equal(J, [[0, 1], [-1, -2]])
    np.testing.assert_allclose(eigenvalues(J), [-1, -1], atol=1e-12)
    np.testing.assert_array_equal(build_J([0]), [[0.0]])
    with pytest.raises(DimensionError):
        build_J([])


def test_build_J_distinct_roots():
    # s^2 + 3 s + 2 = (s + 1)(s + 2)
    disc = math.sqrt(3 ** 2 - 4 * 2)
    expected = sorted([(-3 - disc) / 2, (-3 + disc) / 2])
    np.testing.assert_allclose(eigenvalues(build_J([-2, -3])), expected, atol=1e-12)


def test_is_hurwitz_cases():
    assert is_hurwitz(build_H([6, 12, 8]))
    assert not is_hurwitz(np.eye(3))
    # s^2 - s - 1 has the root (1 + sqrt 5) / 2
    assert not is_hurwitz(build_J([1, 1]))
    with pytest.raises(DimensionError):
        is_hurwitz(np.ones((2, 3)))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("a", [1, 2, 3])
def test_pole_placement_identity(n, a):
    lambdas = [comb(n + 1, k) * a ** k for k in range(1, n + 2)]
    np.testing.assert_allclose(eigenvalues(build_H(lambdas)), [-a] * (n + 1), atol=1e-8, rtol=0)


# Lyapunov

def test_lyapunov_Q1_closed_form():
    sol = solve_lyapunov(build_J([-1, -2]))
    np.testing.assert_allclose(sol.Q, [[1.5, 0.5], [0.5, 0.5]], atol=1e-10, rtol=0)
    assert sol.lambda_max == pytest.approx(1 + math.sqrt(2) / 2, abs=1e-12)
    assert abs(sol.lambda_max - 1.7071) <= 1e-4


def test_lyapunov_diagonal():
    sol = solve_lyapunov(-np.eye(2))
    np.testing.assert_allclose(sol.Q, np.eye(2) / 2, atol=1e-14)


def test_lyapunov_Q2_against_quadrature():
    A = build_H([6, 12, 8])
    sol = solve_lyapunov(A)
    assert sol.residual_norm < 1e-10
    np.testing.assert_allclose(sol.Q, lyapunov_quadrature(A), rtol=1e-8, atol=1e-10)


def test_lyapunov_against_scipy():
    from scipy.linalg import solve_continuous_lyapunov

    A = build_H([6, 12, 8])
    ref = solve_continuous_lyapunov(A.T, -np.eye(3))
    np.testing.assert_allclose(solve_lyapunov(A).Q, ref, rtol=1e-10, atol=1e-12)


def test_lyapunov_rejects_unstable():
    with pytest.raises(NoSolutionError):
        solve_lyapunov(build_J([1, 1]))


@st.composite
def stable_companion(draw, max_n=6, lo=0.2, hi=5.0):
    n = draw(st.integers(1, max_n))
    re = draw(st.lists(st.floats(lo, hi), min_size=n + 1, max_size=n + 1))
    coeffs = np.poly([-v for v in re])[1:]   # monic polynomial with the chosen stable roots
    return build_H(coeffs)


@settings(max_examples=60, deadline=None)
@given(stable_companion(max_n=4, lo=0.5, hi=2.0))
def test_lyapunov_property(A):
    sol = solve_lyapunov(A)
    assert sol.residual_norm <= 1e-10
    assert sol.lambda_min > 0
    assert np.max(np.abs(sol.Q - sol.Q.T)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(stable_companion())
def test_lyapunov_fails_only_near_precision_floor(A):
    from scipy.linalg import solve_continuous_lyapunov

    try:
        sol = solve_lyapunov(A)
    except NumericalFailure:
        # rounding Q to doubles alone leaves a residual of order eps |Q| |A|
        Q = solve_continuous_lyapunov(A.T, -np.eye(A.shape[0]))
        assert np.finfo(float).eps * np.linalg.norm(Q) * np.linalg.norm(A) > 1e-11
    else:
        assert sol.residual_norm <= 1e-10 and sol.lambda_min > 0


# dwell times

def test_dwell_sec5():
    tau, ups = dwell_times(50, 2, 1, 1)
    assert tau == pytest.approx(50 ** -5.5, rel=1e-14)
    assert ups == pytest.approx(50 ** (-7 / 3), rel=1e-14)


def test_dwell_unit():
    assert dwell_times(1, 1, 1, 1) == (1.0, 1.0)


def test_dwell_high_precision():
    tau, ups = dwell_times(100, 2, 2, 3)
    tmp, ump = dwell_mp(100, 2, 2, 3)
    assert tau == pytest.approx(float(tmp), rel=1e-14)
    assert ups == pytest.approx(float(ump), rel=1e-14)


@pytest.mark.parametrize("args", [(0, 2, 1, 1), (-1, 2, 1, 1), (1, 0, 1, 1), (1, 2, 0, 1), (1, 2, 1, -1)])
def test_dwell_domain(args):
    with pytest.raises(DomainError):
        dwell_times(*args)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 1e3), st.floats(1.01, 10), st.integers(1, 5), st.floats(0.1, 10), st.floats(0.1, 10),
       st.floats(0.1, 10))
def test_dwell_monotone_and_homogeneous(r, factor, n, e1, e2, scale):
    t1, u1 = dwell_times(r, n, e1, e2)
    t2, u2 = dwell_times(r * factor, n, e1, e2)
    assert t2 < t1 and u2 < u1
    ts, us = dwell_times(r, n, e1 * scale, e2 * scale)
    assert ts == pytest.approx(scale * t1, rel=1e-12)
    assert us == pytest.approx(scale * u1, rel=1e-12)


# validation

def test_validate_sec5_passes(spec):
    rep = validate_design(SEC5, spec)
    assert rep.passed
    assert [c.name for c in rep.checks] == ["H_hurwitz", "J_hurwitz", "theta_condition", "dwell_product"]
    assert theta_threshold(SEC5, spec) == pytest.approx(4 * (1 + math.sqrt(2) / 2), rel=1e-12)
    assert abs(rep["theta_condition"].threshold - 6.8284) <= 1e-4
    assert dwell_product(SEC5) == pytest.approx(50 ** (-7 / 3) * 49 * 2, rel=1e-12)


def test_validate_theta_one_fails(spec):
    rep = validate_design(dataclasses.replace(SEC5, theta=1.0), spec)
    assert not rep.passed
    assert not rep["theta_condition"].passed
    assert rep["H_hurwitz"].passed and rep["J_hurwitz"].passed


def test_validate_large_dwell_fails(spec):
    rep = validate_design(SEC5, spec, upsilon=0.05)
    assert rep["dwell_product"].value == pytest.approx(0.05 * 49 * 2)
    assert not rep["dwell_product"].passed


def test_validate_reports_non_hurwitz(spec):
    rep = validate_design(dataclasses.replace(SEC5, lambdas=(0, 0, 0)), spec)
    assert not rep["H_hurwitz"].passed
    assert not rep.passed


def test_design_invariants():
    with pytest.raises(DomainError):
        dataclasses.replace(SEC5, r=0)
    with pytest.raises(DomainError):
        dataclasses.replace(SEC5, theta=0.5)
    with pytest.raises(DomainError):
        dataclasses.replace(SEC5, kappa2=0)
    with pytest.raises(DimensionError):
        DesignGains(lambdas=(1, 2), cs=(-1, -2), r=1, theta=1, eps1=1, kappa1=1, eps2=1, kappa2=1)


# sampling-error coefficients

SEC5_LAMBDAS = (0.020820431596709571, 0.051025379870771706, 299.13321653462156,
                0.0034700719327849283, 2029.9249403284475, 101.01523982667459)


def _sec5_moments(spec):
    return default_noise_moments(1.5, 1.5, 0.0, spec, alpha5=5.0)


def test_lambda_coefficients_regression(spec):
    tau, ups = dwell_times(50, 2)
    lc = lambda_coefficients(ups, tau, 50, SEC5, spec, _sec5_moments(spec))
    np.testing.assert_allclose(lc.as_tuple(), SEC5_LAMBDAS, rtol=1e-12)


def test_lambda_coefficients_match_high_precision(spec):
    nm = _sec5_moments(spec)
    for r in (20.0, 50.0, 200.0):
        tau, ups = dwell_times(r, 2)
        lc = lambda_coefficients(ups, tau, r, SEC5, spec, nm)
        ref = lambdas_mp(ups, tau, r, SEC5.lambdas, SEC5.cs, SEC5.theta, spec.L, spec.alphas, SEC5.kappa1,
                         nm.w2_sq_sup, nm.phi1_sq_sup)
        np.testing.assert_allclose(lc.as_tuple(), [float(v) for v in ref], rtol=1e-12)


def test_lambda_vanishing_dwell(spec):
    nm = _sec5_moments(spec)
    big = np.array(lambda_coefficients(1e-6, 1e-12, 50, SEC5, spec, nm).as_tuple())
    small = np.array(lambda_coefficients(1e-12, 1e-12, 50, SEC5, spec, nm).as_tuple())
    # every coefficient carries at least one factor of upsilon
    assert np.all(small >= 0)
    assert np.all(small <= 1.0001e-6 * big)
    assert small.max() < 1e-4


def test_lambda_kappa1_homogeneity(spec):
    nm = _sec5_moments(spec)
    tau, ups = dwell_times(50, 2)
    base = lambda_coefficients(ups, tau, 50, SEC5, spec, nm)
    no_k = lambda_coefficients(ups, tau, 50, dataclasses.replace(SEC5, kappa1=1e-300), spec, nm)
    double = lambda_coefficients(ups, tau, 50, dataclasses.replace(SEC5, kappa1=2.0), spec, nm)
    term1 = base.lambda6 - no_k.lambda6
    term2 = double.lambda6 - no_k.lambda6
    assert term2 == pytest.approx(4 * term1, rel=1e-10)
    assert base.as_tuple()[:5] == double.as_tuple()[:5]


def test_lambda_monotone_in_dwell(spec):
    nm = _sec5_moments(spec)
    grid = np.geomspace(1e-7, 5e-3, 30)
    values = np.array([lambda_coefficients(u, 1e-10, 50, SEC5, spec, nm).as_tuple() for u in grid])
    assert np.all(np.diff(values, axis=0) >= 0)


def test_lambda_precondition(spec):
    with pytest.raises(PreconditionError):
        lambda_coefficients(0.05, 1e-10, 50, SEC5, spec, _sec5_moments(spec))


# certification

def _oracle_certify(design, spec, betas, mus, cap=2.0 ** 60):
    """Brute-force reading of the closed-loop inequalities over r = 2**k."""
    b1, b2, b3, b4, b5 = betas
    m1, m2, m3, m4 = mus
    n, th = len(design.cs), design.theta
    q1 = np.linalg.eigvalsh(lyapunov_quadrature(build_J(design.cs))).max()
    q2 = np.linalg.eigvalsh(lyapunov_quadrature(build_H(design.lambdas))).max()
    sL = sum(spec.L)
    cext = list(design.cs) + [1.0]
    cmax = max(abs(c) for c in cext)
    g2 = 1 - m3 * q2 ** 2 * sum(abs(v) for v in design.lambdas) ** 2
    ff = sum(cext[i] * th ** (n - i) for i in range(n + 1))
    gs = th ** (2 * n) / m2 * cmax ** 2 + m4 * q2 ** 2 * b4
    grid = [2.0 ** k for k in range(61) if 2.0 ** k <= cap]

    def dw(r):
        return design.eps1 * r ** (-(2 * n + 1.5)), design.eps2 * r ** (-(2 * n / 3 + 1))

    def g1(r):
        tau, ups = dw(r)
        return th - 2 * q1 * sL - 2 * ups - 2 * tau - (m1 + m2) * q1 ** 2 - m4 * q2 ** 2 * b2

    if g2 <= 0:
        return None
    r1 = next((r for r in grid if g1(r) > 0 and g2 * r / 2 - ff ** 2 / m1 - 2 * q2 * sL - m4 * q2 ** 2 * b3
               - 1 / m4 - dw(r)[1] > 0), None)
    if r1 is None:
        return None
    for r in grid:
        tau, ups = dw(r)
        if ups * th ** n * cmax >= 1:
            continue
        L = lambdas_mp(ups, tau, r, design.lambdas, design.cs, th, spec.L, spec.alphas, design.kappa1, 0, 0)
        L = [float(v) for v in L]
        if (g1(r1) - gs * L[0] > 0 and 1 - gs * L[1] > 0 and 1 - design.eps1 / (m3 * math.sqrt(r)) > 0
                and 1 - gs * L[2] > 0 and 1 - gs * L[4] > 0):
            return max(4 * gs / g2 * L[3], design.eps1 ** 2 / m3 ** 2, r1, r)
    return None


def test_certify_success_matches_oracle():
    spec = linear_n2_system()
    design = dataclasses.replace(SEC5, theta=2.0, eps2=1e-6)
    betas, mus = [0.1] * 5, [0.1, 0.5, 1e-4, 0.1]
    rep = certify_r_star(design, spec, betas, mus)
    ref = _oracle_certify(design, spec, betas, mus)
    assert rep.success and ref is not None
    assert rep.r_star == pytest.approx(ref, rel=1e-9)
    assert rep.r_star_grid >= rep.r_star
    assert all(v > 0 for k, v in rep.gammas.items() if k != "gamma1_limit")


def test_certify_sec5_tiny_constants_agrees_with_oracle(spec):
    # the gamma7 condition needs r far beyond the grid cap for this design
    betas, mus = [1e-4] * 5, [1e-4] * 4
    rep = certify_r_star(SEC5, spec, betas, mus)
    assert _oracle_certify(SEC5, spec, betas, mus) is None
    assert not rep.success
    assert "gamma7" in rep.flagged


def test_certify_gamma2_flag(spec):
    rep = certify_r_star(SEC5, spec, [0.1] * 5, [1e-4, 1e-4, 1.0, 1e-4])
    assert not rep.success
    assert rep.flagged == ["gamma2"]
    assert rep.gammas["gamma2"] <= 0


def test_certify_gamma1_flag(spec):
    # theta just above its threshold leaves no room for the mu-weighted terms
    rep = certify_r_star(dataclasses.replace(SEC5, theta=6.9), spec, [0.1] * 5, [1.0, 1.0, 1e-6, 1e-3])
    assert not rep.success
    assert "gamma1" in rep.flagged


def test_certify_requires_valid_design(spec):
    with pytest.raises(PreconditionError):
        certify_r_star(dataclasses.replace(SEC5, theta=1.0), spec, [0.1] * 5, [0.1] * 4)
