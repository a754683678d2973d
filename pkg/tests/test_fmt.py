"""Slack-matrix bounds: assembly, feasibility, optimality, dominance."""

import numpy as np
import pytest

import iikit as ik
from iikit.errors import NotPositiveDefiniteError, ParameterError
from iikit.fmt import FmtProbeWarning

DOM01 = ik.Domain.finite(0.0, 1.0)
U1 = ik.CostMatrix.identity(1)


def make_slack(rng, d, n, rho, U, eps=1e-4, scale=1.0):
    """Feasible-by-construction slack via the Schur parameterization."""
    blocks = [scale * rng.standard_normal((n, rho * n)) for _ in range(d)]
    X = np.hstack(blocks)
    S = rng.standard_normal((rho * d * n, rho * d * n)) * 0.1
    Y = X.T @ np.linalg.solve(U.matrix, X) + eps * np.eye(rho * d * n) + S.T @ S
    return ik.FmtSlack(rho, tuple(blocks), Y)


# -- FmtSlack ----------------------------------------------------------------


def test_slack_shapes_and_stacks():
    rng = np.random.default_rng(0)
    slack = make_slack(rng, d=3, n=2, rho=2, U=ik.CostMatrix.identity(2))
    assert slack.d == 3 and slack.n == 2
    assert slack.X.shape == (2, 12)
    assert slack.X_hat.shape == (6, 4)
    np.testing.assert_allclose(slack.X_hat[2:4], slack.X_blocks[1])


def test_slack_validation():
    with pytest.raises(ParameterError):
        ik.FmtSlack(0, (np.zeros((1, 1)),), np.zeros((1, 1)))
    with pytest.raises(ParameterError):
        ik.FmtSlack(1, (np.zeros((1, 2)),), np.zeros((1, 1)))
    with pytest.raises(ParameterError):
        ik.FmtSlack(1, (np.zeros((1, 1)),), np.array([[0.0, 1.0], [0.0, 0.0]]))


# -- build_W -----------------------------------------------------------------


def test_build_w_identity_gives_trace():
    fam = ik.legendre_family(2, 0.0, 1.0)
    rho, n = 2, 1
    W = ik.build_W(np.eye(3 * rho * n), fam, rho, n)
    trace = 1.0 + 1 / 3 + 1 / 5
    np.testing.assert_allclose(W, trace * np.eye(rho * n), rtol=1e-12)


def test_build_w_zero():
    fam = ik.legendre_family(1, 0.0, 1.0)
    W = ik.build_W(np.zeros((4, 4)), fam, 2, 1)
    np.testing.assert_allclose(W, np.zeros((2, 2)), atol=1e-15)


def test_build_w_single_constant_kernel_passthrough():
    fam = ik.legendre_family(0, 0.0, 1.0)
    Y = np.array([[2.0, 0.5], [0.5, 3.0]])
    W = ik.build_W(Y, fam, 2, 1)
    np.testing.assert_allclose(W, Y, rtol=1e-13)


@pytest.mark.parametrize("d,rho,n", [(1, 1, 1), (2, 2, 1), (3, 1, 3), (2, 3, 2)])
def test_build_w_agrees_with_direct_quadrature(d, rho, n):
    rng = np.random.default_rng(d * 10 + rho + n)
    fam = ik.jacobi_family(d - 1, 1.0, 0.0, 0.0, 1.0)
    m = rho * n
    S = rng.standard_normal((d * m, d * m))
    Y = 0.5 * (S + S.T)
    W = ik.build_W(Y, fam, rho, n)

    def integrand(t):
        fk = np.kron(fam.evaluate(t).reshape(-1, 1), np.eye(m))
        return fk.T @ Y @ fk

    direct = ik.integrate(integrand, fam.weight, poly_degree=2 * fam.max_degree)
    np.testing.assert_allclose(W, direct, rtol=1e-10, atol=1e-12)


def test_build_w_shape_error():
    fam = ik.legendre_family(1, 0.0, 1.0)
    with pytest.raises(ParameterError):
        ik.build_W(np.eye(3), fam, 1, 1)


# -- feasibility ---------------------------------------------------------------


def test_feasibility_block_identity():
    slack = ik.FmtSlack(1, (np.zeros((1, 1)),), np.eye(1))
    res = ik.feasibility_check(U1, slack)
    assert res.feasible
    assert res.margin == pytest.approx(1.0, rel=1e-12)


def test_feasibility_scalar_boundary_case():
    slack = ik.FmtSlack(1, (np.array([[1.0]]),), np.array([[1.0]]))
    res = ik.feasibility_check(U1, slack)
    assert not res.feasible
    assert res.margin == pytest.approx(0.0, abs=1e-12)


def test_feasibility_matches_schur_complement():
    rng = np.random.default_rng(5)
    n, d, rho = 2, 2, 1
    U = ik.CostMatrix(np.array([[2.0, 0.3], [0.3, 1.0]]))
    for _ in range(40):
        blocks = tuple(rng.standard_normal((n, rho * n)) for _ in range(d))
        S = rng.standard_normal((rho * d * n, rho * d * n)) * 0.5
        Y = 0.8 * np.eye(rho * d * n) + 0.5 * (S + S.T)
        if np.min(np.linalg.eigvalsh(Y)) <= 0:
            continue
        slack = ik.FmtSlack(rho, blocks, Y)
        res = ik.feasibility_check(U, slack)
        schur = Y - slack.X.T @ np.linalg.solve(U.matrix, slack.X)
        schur_pd = np.min(np.linalg.eigvalsh(schur)) > 0
        assert res.feasible == schur_pd


def test_feasibility_dimension_mismatch():
    slack = ik.FmtSlack(1, (np.zeros((2, 2)),), np.eye(2))
    with pytest.raises(ParameterError):
        ik.feasibility_check(U1, slack)


# -- bounds at given slack ------------------------------------------------------


def test_fmt_bound_zero_vector():
    slack = ik.FmtSlack(1, (np.array([[0.5]]),), np.array([[1.0]]))
    res = ik.fmt_bound(np.array([0.5]), slack, np.array([[0.5]]), np.array([0.0]))
    assert res.lb == pytest.approx(0.0, abs=1e-15)


def test_fmt_bound_scalar_frozen():
    slack = ik.FmtSlack(1, (np.array([[0.5]]),), np.array([[0.5]]))
    theta = np.array([0.5])
    W = np.array([[0.5]])
    at_one = ik.fmt_bound(theta, slack, W, np.array([1.0]))
    assert at_one.lb == pytest.approx(0.0, abs=1e-14)
    z_star = ik.optimal_z(slack.X_hat, W, theta)
    np.testing.assert_allclose(z_star, [0.5], rtol=1e-13)
    at_star = ik.fmt_bound(theta, slack, W, z_star)
    assert at_star.lb == pytest.approx(1 / 8, rel=1e-12)


def test_optimal_z_identity_metric():
    rng = np.random.default_rng(7)
    X_hat = rng.standard_normal((6, 2))
    theta = rng.standard_normal(6)
    z = ik.optimal_z(X_hat, np.eye(2), theta)
    np.testing.assert_allclose(z, X_hat.T @ theta, rtol=1e-12)


def test_optimal_z_rejects_indefinite_w():
    with pytest.raises(NotPositiveDefiniteError):
        ik.optimal_z(np.eye(2), -np.eye(2), np.ones(2))


def test_optimal_z_beats_random_and_gradient_vanishes():
    rng = np.random.default_rng(8)
    fam = ik.legendre_family(2, 0.0, 1.0)
    n, rho = 2, 1
    U = ik.CostMatrix.identity(n)
    x = ik.Signal.poly(rng.standard_normal((n, 5)), DOM01)
    theta = ik.moment_vector(fam, x)
    slack = make_slack(rng, fam.size, n, rho, U)
    W = ik.build_W(slack.Y, fam, rho, n)
    z_star = ik.optimal_z(slack.X_hat, W, theta)
    best = ik.fmt_bound(theta, slack, W, z_star).lb
    for _ in range(100):
        z = z_star + rng.standard_normal(z_star.shape) * rng.uniform(0.01, 2.0)
        assert ik.fmt_bound(theta, slack, W, z).lb <= best + 1e-10 * max(1.0, abs(best))
    h = 1e-6
    for i in range(len(z_star)):
        dz = np.zeros_like(z_star)
        dz[i] = h
        up = ik.fmt_bound(theta, slack, W, z_star + dz).lb
        dn = ik.fmt_bound(theta, slack, W, z_star - dz).lb
        assert abs(up - dn) / (2 * h) < 1e-8


# -- affine form ----------------------------------------------------------------


def test_affine_form_zero_case():
    slack = ik.FmtSlack(1, (np.array([[0.5]]),), np.array([[1.0]]))
    res = ik.fmt_bound_affine(
        np.array([[1.0]]), np.array([0.0]), slack, np.array([[1.0]]), np.array([0.0])
    )
    assert res.lb == pytest.approx(0.0, abs=1e-15)


def test_affine_form_reduces_to_z_form():
    rng = np.random.default_rng(9)
    fam = ik.legendre_family(1, 0.0, 1.0)
    n, rho = 2, 2
    d = fam.size
    U = ik.CostMatrix.identity(n)
    x = ik.Signal.poly(rng.standard_normal((n, 4)), DOM01)
    theta = ik.moment_vector(fam, x)
    slack = make_slack(rng, d, n, rho, U)
    W = ik.build_W(slack.Y, fam, rho, n)
    # build an upsilon whose range contains theta, then pick y with
    # upsilon @ y = theta; the affine value must match the z-form at z = y
    upsilon = rng.standard_normal((d * n, rho * n))
    y = np.linalg.lstsq(upsilon, theta, rcond=None)[0]
    theta_feasible = upsilon @ y
    affine = ik.fmt_bound_affine(upsilon, y, slack, W, theta_feasible)
    plain = ik.fmt_bound(theta_feasible, slack, W, y)
    assert affine.lb == pytest.approx(plain.lb, rel=1e-10, abs=1e-12)


def test_affine_form_consistency_error():
    slack = ik.FmtSlack(1, (np.array([[0.5]]),), np.array([[1.0]]))
    with pytest.raises(ParameterError):
        ik.fmt_bound_affine(
            np.array([[1.0]]),
            np.array([1.0]),
            slack,
            np.array([[1.0]]),
            np.array([2.0]),
        )


# -- soundness and dominance -----------------------------------------------------


def test_every_feasible_slack_is_sound_and_dominated():
    rng = np.random.default_rng(10)
    fam = ik.jacobi_family(2, 1.0, 0.0, 0.0, 1.0)
    d = fam.size
    for _ in range(25):
        n = int(rng.integers(1, 3))
        rho = int(rng.integers(1, 3))
        U = ik.CostMatrix(
            (lambda A: A @ A.T + 0.5 * np.eye(n))(rng.standard_normal((n, n)))
        )
        x = ik.Signal.poly(rng.standard_normal((n, 6)), DOM01)
        rep = ik.lower_bound(fam, x, U)
        theta = rep.theta
        slack = make_slack(rng, d, n, rho, U, eps=10 ** rng.uniform(-6, -1))
        assert ik.feasibility_check(U, slack).feasible
        W = ik.build_W(slack.Y, fam, rho, n)
        z = ik.optimal_z(slack.X_hat, W, theta)
        lb = ik.fmt_bound(theta, slack, W, z).lb
        assert lb <= rep.upper + 1e-9 * max(1.0, rep.upper)
        assert lb <= rep.lower + 1e-8 * max(1.0, abs(rep.lower))


# -- equivalence probe ------------------------------------------------------------


def test_probe_scalar_jensen_reaches_the_moment_bound():
    fam = ik.legendre_family(0, 0.0, 1.0)
    x = ik.Signal.poly([[0.0, 1.0]], DOM01)
    probe = ik.equivalence_probe(fam, x, U1, rho=1, budget=3, seed=1)
    assert probe.projection_lb == pytest.approx(0.25, abs=1e-12)
    assert probe.ratio >= 1.0 - 1e-6
    assert probe.ratio <= 1.0 + 1e-8
    assert not probe.warning_issued


def test_probe_on_span_member_never_exceeds_the_integral():
    fam = ik.legendre_family(1, 0.0, 1.0)
    coeffs = np.array([[1.0, 2.0]])  # inside the span of {1, 2t-1}
    x = ik.Signal.poly(coeffs, DOM01)
    upper = ik.upper_bound(x, U1, fam.weight)
    probe = ik.equivalence_probe(fam, x, U1, budget=4, seed=3)
    assert probe.best_fmt_lb <= probe.projection_lb + 1e-8
    assert probe.best_fmt_lb <= upper + 1e-9 * max(1.0, upper)
    assert probe.projection_lb == pytest.approx(upper, rel=1e-10)


def test_probe_warning_when_search_is_crippled():
    # rho different from d disables the closed-form restart; with no ascent
    # and heavy slack noise a single draw cannot approach the moment bound
    fam = ik.legendre_family(0, 0.0, 1.0)
    x = ik.Signal.poly([[0.0, 1.0]], DOM01)
    with pytest.warns(FmtProbeWarning):
        probe = ik.equivalence_probe(
            fam, x, U1, rho=2, budget=1, seed=5, max_iters=0, noise_scale=50.0
        )
    assert probe.warning_issued
    assert probe.ratio < 0.99


def test_probe_deterministic_under_seed():
    fam = ik.legendre_family(1, 0.0, 1.0)
    x = ik.Signal.poly([[0.5, 1.0]], DOM01)
    a = ik.equivalence_probe(fam, x, U1, budget=3, seed=11)
    b = ik.equivalence_probe(fam, x, U1, budget=3, seed=11)
    assert a.best_fmt_lb == b.best_fmt_lb
    assert a.ratio == b.ratio
