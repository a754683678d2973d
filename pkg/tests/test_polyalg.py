"""Kernel family construction, basis changes, shift and differentiation maps."""

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

import iikit as ik
from iikit.errors import DomainError, ParameterError, RankError

TAU = sp.symbols("tau")


def sympy_legendre(d, a, b):
    """Independent symbolic expansion of the shifted Legendre polynomial."""
    u = (TAU - b) / (b - a)
    expr = sum(
        sp.binomial(d, k) * sp.binomial(d + k, k) * u**k for k in range(d + 1)
    )
    return sp.Poly(sp.expand(expr), TAU).all_coeffs()[::-1]


def sympy_jacobi(d, alpha, beta, a, b):
    """Independent symbolic expansion of the shifted Jacobi polynomial."""
    u = (TAU - b) / (b - a)
    g = sp.gamma
    expr = (
        g(d + 1 + alpha)
        / (sp.factorial(d) * g(d + 1 + alpha + beta))
        * sum(
            sp.binomial(d, k) * g(d + k + 1 + alpha + beta) / g(k + 1 + alpha) * u**k
            for k in range(d + 1)
        )
    )
    return sp.Poly(sp.expand(expr), TAU).all_coeffs()[::-1]


def assert_coeffs(poly, expected, tol=1e-12):
    got = poly.coeffs
    want = np.array([float(c) for c in expected])
    assert len(got) == len(want)
    np.testing.assert_allclose(got, want, rtol=tol, atol=tol)


# -- Legendre ---------------------------------------------------------------


def test_legendre_dmax_zero_is_constant_one():
    fam = ik.legendre_family(0, 0.0, 1.0)
    assert fam.size == 1
    assert_coeffs(fam.polys[0], [1])


def test_legendre_frozen_coefficients_on_unit_interval():
    fam = ik.legendre_family(2, 0.0, 1.0)
    assert_coeffs(fam.polys[0], [1])
    assert_coeffs(fam.polys[1], [-1, 2])
    assert_coeffs(fam.polys[2], [1, -6, 6])


@pytest.mark.parametrize("a,b", [(0, 1), (-1, 1), (sp.Rational(1, 2), 3)])
def test_legendre_matches_symbolic_expansion(a, b):
    fam = ik.legendre_family(4, float(a), float(b))
    for d in range(5):
        assert_coeffs(fam.polys[d], sympy_legendre(d, a, b), tol=1e-11)


def test_legendre_degenerate_interval_rejected():
    with pytest.raises(DomainError):
        ik.legendre_family(2, 1.0, 1.0)
    with pytest.raises(DomainError):
        ik.legendre_family(2, 2.0, 1.0)


def test_legendre_closed_form_norms():
    fam = ik.legendre_family(2, 0.0, 1.0)
    np.testing.assert_allclose(fam.sq_norms, [1.0, 1 / 3, 1 / 5], rtol=1e-14)


# -- Jacobi -----------------------------------------------------------------


def test_jacobi_degree_zero_is_one_for_any_parameters():
    for alpha, beta in [(0.5, 0.0), (2.0, 1.0), (-0.5, -0.9)]:
        fam = ik.jacobi_family(0, alpha, beta, 0.0, 1.0)
        assert_coeffs(fam.polys[0], [1])


def test_jacobi_zero_parameters_reduce_to_legendre():
    jac = ik.jacobi_family(1, 0.0, 0.0, 0.0, 1.0)
    leg = ik.legendre_family(1, 0.0, 1.0)
    for j, l in zip(jac.polys, leg.polys):
        np.testing.assert_allclose(j.coeffs, l.coeffs, atol=1e-13)


def test_jacobi_matches_symbolic_expansion():
    for alpha, beta in [(1, 0), (0, 2), (2, 3)]:
        fam = ik.jacobi_family(3, alpha, beta, 0.0, 1.0)
        for d in range(4):
            assert_coeffs(
                fam.polys[d], sympy_jacobi(d, alpha, beta, 0, 1), tol=1e-11
            )


def test_jacobi_first_degree_frozen():
    # with alpha=1, beta=0 on [0,1] the degree-1 member expands to 3 tau - 1
    fam = ik.jacobi_family(1, 1.0, 0.0, 0.0, 1.0)
    assert_coeffs(fam.polys[1], [-1, 3])


def test_jacobi_norm_k0_is_half_for_alpha_one():
    fam = ik.jacobi_family(0, 1.0, 0.0, 0.0, 1.0)
    assert fam.sq_norms[0] == pytest.approx(0.5, abs=1e-15)


def test_jacobi_invalid_parameters_rejected():
    with pytest.raises(ParameterError):
        ik.jacobi_family(1, -1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ParameterError):
        ik.jacobi_family(1, 0.0, -2.0, 0.0, 1.0)


def test_jacobi_orthogonality_against_quadrature():
    # integer parameters in [0, 3], dmax <= 8: quadrature Gram is diagonal
    # and the diagonal matches the closed-form norms to 1e-10 relative
    for alpha in range(4):
        for beta in range(4):
            fam = ik.jacobi_family(8, float(alpha), float(beta), 0.0, 1.0)
            gp = ik.gram_matrix(fam, method="quadrature")
            diag = np.diag(gp.gram)
            np.testing.assert_allclose(diag, fam.sq_norms, rtol=1e-10)
            off = gp.gram - np.diag(diag)
            assert np.max(np.abs(off)) < 1e-10 * np.max(diag)


# -- Laguerre / Hermite -----------------------------------------------------


def test_hermite_norms_and_coefficients():
    fam = ik.classical_family("hermite", 2)
    rp = math.sqrt(math.pi)
    np.testing.assert_allclose(fam.sq_norms, [rp, 2 * rp, 8 * rp], rtol=1e-14)
    assert_coeffs(fam.polys[0], [1])
    assert_coeffs(fam.polys[1], [0, 2])
    assert_coeffs(fam.polys[2], [-2, 0, 4])


def test_hermite_dmax_zero():
    fam = ik.classical_family("hermite", 0)
    assert fam.size == 1
    assert fam.sq_norms[0] == pytest.approx(math.sqrt(math.pi), rel=1e-15)


def test_laguerre_norms_and_coefficients():
    fam = ik.classical_family("laguerre", 1, alpha=0.0)
    np.testing.assert_allclose(fam.sq_norms, [1.0, 1.0], rtol=1e-14)
    assert_coeffs(fam.polys[0], [1])
    assert_coeffs(fam.polys[1], [1, -1])
    deg2 = ik.classical_family("laguerre", 2, alpha=0.0).polys[2]
    assert_coeffs(deg2, [1, -2, sp.Rational(1, 2)])


def test_laguerre_general_alpha_norm_formula():
    fam = ik.classical_family("laguerre", 4, alpha=2.0)
    expected = [math.gamma(d + 3.0) / math.factorial(d) for d in range(5)]
    np.testing.assert_allclose(fam.sq_norms, expected, rtol=1e-13)


def test_classical_bad_parameters():
    with pytest.raises(ParameterError):
        ik.classical_family("laguerre", 1, alpha=-1.0)
    with pytest.raises(ParameterError):
        ik.classical_family("chebyshev", 1)


def test_degree_cap_enforced():
    with pytest.raises(ParameterError):
        ik.legendre_family(13, 0.0, 1.0)
    with pytest.raises(ParameterError):
        ik.jacobi_family(14, 0.0, 0.0, 0.0, 1.0)
    assert ik.legendre_family(12, 0.0, 1.0).size == 13


# -- basis_change -----------------------------------------------------------


def test_basis_change_identity_on_same_family():
    fam = ik.legendre_family(3, 0.0, 1.0)
    G = ik.basis_change(fam, fam)
    np.testing.assert_allclose(G, np.eye(4), atol=1e-10)


def test_basis_change_legendre_to_monomials_frozen():
    leg = ik.legendre_family(2, 0.0, 1.0)
    mono = ik.monomial_family(2, 0.0, 1.0)
    G = ik.basis_change(leg, mono)
    np.testing.assert_allclose(
        G, [[1, 0, 0], [-1, 2, 0], [1, -6, 6]], atol=1e-12
    )
    back = ik.basis_change(mono, leg)
    np.testing.assert_allclose(back, np.linalg.inv(G), atol=1e-12)


def test_basis_change_round_trip_property():
    rng = np.random.default_rng(5)
    leg = ik.legendre_family(5, 0.0, 1.0)
    jac = ik.jacobi_family(5, 1.0, 2.0, 0.0, 1.0)
    G1 = ik.basis_change(leg, jac)
    G2 = ik.basis_change(jac, leg)
    np.testing.assert_allclose(G1 @ G2, np.eye(6), atol=1e-10)
    taus = rng.uniform(0, 1, 40)
    np.testing.assert_allclose(
        G1 @ jac.evaluate(taus), leg.evaluate(taus), atol=1e-10
    )


def test_basis_change_rank_errors():
    mono1 = ik.monomial_family(1, 0.0, 1.0)
    mono3 = ik.monomial_family(3, 0.0, 1.0)
    with pytest.raises(RankError):
        ik.basis_change(mono3, mono1)  # tau^3 not in span{1, tau}
    dup = ik.PolyFamily(
        (mono1.polys[0], mono1.polys[0]), mono1.domain, mono1.weight
    )
    with pytest.raises(RankError):
        ik.basis_change(mono1, dup)  # rank-deficient target


# -- weight_shift_matrix ----------------------------------------------------


def test_weight_shift_frozen_unit_interval():
    P = ik.weight_shift_matrix(1, 0, 0.0, 1.0)
    np.testing.assert_allclose(P, [[0.5, 0.5]], atol=1e-13)


def test_weight_shift_symmetric_interval():
    # on [-1, 1] the factor is (tau + 1), so (tau+1) * 1 = l0 + l1
    P = ik.weight_shift_matrix(1, 0, -1.0, 1.0)
    np.testing.assert_allclose(P, [[1.0, 1.0]], atol=1e-13)


@pytest.mark.parametrize("a,b", [(0.0, 1.0), (-1.0, 1.0), (1.0, 2.5)])
@pytest.mark.parametrize("p,dmax", [(1, 0), (1, 3), (2, 2), (3, 4)])
def test_weight_shift_pointwise_identity(a, b, p, dmax):
    P = ik.weight_shift_matrix(p, dmax, a, b)
    assert P.shape == (dmax + 1, dmax + p + 1)
    low = ik.legendre_family(dmax, a, b)
    high = ik.legendre_family(dmax + p, a, b)
    taus = np.random.default_rng(31).uniform(a, b, 100)
    lhs = (taus - a) ** p * low.evaluate(taus)
    rhs = P @ high.evaluate(taus)
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * max(1.0, np.max(np.abs(lhs)))


def test_weight_shift_small_case_tight():
    # for the smallest instance the identity holds to near machine precision
    P = ik.weight_shift_matrix(1, 0, 0.0, 1.0)
    taus = np.linspace(0.0, 1.0, 50)
    high = ik.legendre_family(1, 0.0, 1.0)
    assert np.max(np.abs(taus - P @ high.evaluate(taus))) < 1e-12


def test_weight_shift_bad_power():
    with pytest.raises(ParameterError):
        ik.weight_shift_matrix(0, 2, 0.0, 1.0)


# -- diff_matrix ------------------------------------------------------------


def test_diff_matrix_reduced_frozen_rows():
    fam1 = ik.legendre_family(1, 0.0, 1.0)
    L = ik.diff_matrix(fam1, reduced=True)
    np.testing.assert_allclose(L, [[0.0], [2.0]], atol=1e-12)
    fam2 = ik.legendre_family(2, 0.0, 1.0)
    L2 = ik.diff_matrix(fam2, reduced=True)
    np.testing.assert_allclose(L2[0], [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(L2[2], [0.0, 6.0], atol=1e-12)


def test_diff_matrix_shapes():
    fam = ik.legendre_family(3, 0.0, 1.0)
    assert ik.diff_matrix(fam).shape == (4, 4)
    assert ik.diff_matrix(fam, reduced=True).shape == (4, 3)


@pytest.mark.parametrize("reduced", [False, True])
def test_diff_matrix_consistency_at_random_points(reduced):
    rng = np.random.default_rng(17)
    fam = ik.jacobi_family(5, 1.0, 0.0, 0.0, 2.0)
    L = ik.diff_matrix(fam, reduced=reduced)
    taus = rng.uniform(0.0, 2.0, 100)
    basis = fam.prefix(fam.size - 1) if reduced else fam
    approx = L @ basis.evaluate(taus)
    exact = np.stack([p.derivative()(taus) for p in fam.polys])
    assert np.max(np.abs(approx - exact)) < 1e-10 * max(1.0, np.max(np.abs(exact)))


def test_diff_matrix_rank_error_on_degree_gap():
    # derivatives of {1, tau^2} need degree 1, which the family cannot express
    dom = ik.Domain.finite(0.0, 1.0)
    fam = ik.PolyFamily(
        (ik.Polynomial([1.0]), ik.Polynomial([0.0, 0.0, 1.0])),
        dom,
        ik.WeightSpec.unit(dom),
    )
    with pytest.raises(RankError):
        ik.diff_matrix(fam)


# -- eval_family ------------------------------------------------------------


def test_eval_family_frozen_values():
    fam = ik.legendre_family(2, 0.0, 1.0)
    np.testing.assert_allclose(ik.eval_family(fam, 1.0), [1, 1, 1], atol=1e-13)
    np.testing.assert_allclose(
        ik.eval_family(fam, 0.5), [1, 0, -0.5], atol=1e-13
    )


def test_eval_family_constant_member():
    fam = ik.jacobi_family(2, 1.0, 1.0, -1.0, 0.0)
    for t in (-1.0, -0.3, 0.0):
        assert ik.eval_family(fam, t)[0] == pytest.approx(1.0, abs=1e-14)


def test_eval_family_outside_domain():
    fam = ik.legendre_family(2, 0.0, 1.0)
    with pytest.raises(DomainError):
        ik.eval_family(fam, 1.5)


@settings(max_examples=40, deadline=None)
@given(
    coeffs=st.lists(
        st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=1, max_size=7
    )
)
def test_degree_bound_interpolation_recovers_polynomial(coeffs):
    # a degree-d polynomial is pinned down by d+1 samples of eval_family
    poly = ik.Polynomial(np.array(coeffs))
    d = poly.degree
    dom = ik.Domain.finite(0.0, 1.0)
    fam = ik.PolyFamily((poly,), dom, ik.WeightSpec.unit(dom))
    nodes = 0.5 + 0.5 * np.cos(np.pi * (np.arange(d + 1) + 0.5) / (d + 1))
    samples = ik.eval_family(fam, nodes)[0]
    V = np.vander(nodes, d + 1, increasing=True)
    recovered = np.linalg.solve(V, samples)
    probes = np.linspace(0.0, 1.0, 23)
    scale = max(1.0, np.max(np.abs(samples)))
    np.testing.assert_allclose(
        np.polynomial.polynomial.polyval(probes, recovered),
        poly(probes),
        atol=1e-9 * scale,
    )


def test_family_prefix_and_transform():
    fam = ik.legendre_family(3, 0.0, 1.0)
    pre = fam.prefix(2)
    assert pre.size == 2
    np.testing.assert_allclose(pre.sq_norms, fam.sq_norms[:2])
    G = np.array([[1.0, 1.0], [0.0, 2.0]])
    tf = pre.transformed(G)
    assert tf.sq_norms is None
    taus = np.linspace(0, 1, 9)
    np.testing.assert_allclose(tf.evaluate(taus), G @ pre.evaluate(taus), atol=1e-13)
