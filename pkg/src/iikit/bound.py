"""Weighted quadratic integral bounds from finite kernel moments.

The central objects: the moment vector of a signal against a kernel
family, the integral upper bound, and the moment lower bound together
with its least-squares diagnostics (optimal coefficients, residual
energy, orthogonality defects).  On top of that sit the invariance check
under invertible kernel transforms, monotone hierarchy sweeps over nested
families, the nested-vs-weighted repeated-integration identity, and the
reduction of weighted moments to unweighted Legendre moments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import quad
from .domain import Domain
from .errors import (
    DomainError,
    NotPositiveDefiniteError,
    ParameterError,
    RankError,
    SingularGramError,
)
from .gram import gram_matrix
from .polyalg import PolyFamily, jacobi_family, legendre_family, weight_shift_matrix
from .quad import WeightSpec

DEFAULT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Signal:
    """Vector-valued function on a domain: polynomial rows or a black box.

    Polynomial signals evaluate exactly by Horner and route through exact
    Gauss rules downstream.  Black-box signals on infinite domains must
    certify square-integrability against the weight they will meet
    (``decay_certified``); polynomials against the classical exponential
    weights need no certificate.
    """

    n: int
    domain: Domain
    coeffs: np.ndarray | None = None
    evaluator: Callable | None = None
    derivative: Callable | None = None
    decay_certified: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"signal dimension must be >= 1, got {self.n}")
        if (self.coeffs is None) == (self.evaluator is None):
            raise ParameterError("provide exactly one of coeffs or evaluator")
        if self.coeffs is not None:
            c = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
            if c.shape[0] != self.n:
                raise ParameterError(
                    f"coefficient rows ({c.shape[0]}) must match n={self.n}"
                )
            object.__setattr__(self, "coeffs", c)
        elif not self.domain.is_finite and not self.decay_certified:
            raise ParameterError(
                "black-box signals on infinite domains need decay_certified=True"
            )

    @classmethod
    def poly(cls, coeffs, domain: Domain) -> "Signal":
        c = np.atleast_2d(np.asarray(coeffs, dtype=float))
        return cls(n=c.shape[0], domain=domain, coeffs=c)

    @classmethod
    def from_callable(
        cls,
        fn: Callable,
        n: int,
        domain: Domain,
        derivative: Callable | None = None,
        decay_certified: bool = False,
    ) -> "Signal":
        return cls(
            n=n,
            domain=domain,
            evaluator=fn,
            derivative=derivative,
            decay_certified=decay_certified,
        )

    @property
    def is_poly(self) -> bool:
        return self.coeffs is not None

    @property
    def degree(self) -> int:
        if not self.is_poly:
            raise ParameterError("black-box signals carry no degree")
        return self.coeffs.shape[1] - 1

    def evaluate(self, tau) -> np.ndarray:
        """Shape (n,) at a scalar, (n, m) at an array of points."""
        if self.is_poly:
            return npoly.polyval(np.asarray(tau, dtype=float), self.coeffs.T)
        if np.isscalar(tau):
            return np.asarray(self.evaluator(float(tau)), dtype=float).reshape(self.n)
        cols = [
            np.asarray(self.evaluator(float(t)), dtype=float).reshape(self.n)
            for t in np.asarray(tau, dtype=float)
        ]
        return np.stack(cols, axis=1)


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Symmetric positive definite cost; definiteness is checked upfront."""

    matrix: np.ndarray

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if U.shape[0] != U.shape[1]:
            raise ParameterError(f"cost matrix must be square, got {U.shape}")
        if not np.allclose(U, U.T, atol=1e-12 * max(1.0, np.max(np.abs(U)))):
            raise NotPositiveDefiniteError("cost matrix must be symmetric")
        try:
            chol = np.linalg.cholesky(U)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("cost matrix must be positive definite") from exc
        object.__setattr__(self, "matrix", 0.5 * (U + U.T))
        object.__setattr__(self, "_sqrt", chol.T)

    @classmethod
    def identity(cls, n: int) -> "CostMatrix":
        return cls(np.eye(n))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def sqrt(self) -> np.ndarray:
        """Factor C with U = C' C (transpose of the Cholesky factor)."""
        return self._sqrt


@dataclass(frozen=True, eq=False)
class BoundReport:
    """Both bounds for one instance plus least-squares diagnostics.

    ``theta`` stacks the weighted kernel moments of the signal as d blocks
    of size n; ``lam`` holds the optimal approximation coefficients; the
    residual norm is the weighted energy of the approximation error,
    recomputed by quadrature so that ``residual_norm**2`` independently
    reproduces the gap.
    """

    upper: float
    lower: float
    gap: float
    relative_gap: float
    theta: np.ndarray
    lam: np.ndarray
    residual_norm: float
    orthogonality_defects: np.ndarray


class LeastSquaresDiagnostics(NamedTuple):
    lam: np.ndarray
    kappa: np.ndarray
    residual_norm: float
    orthogonality_defects: np.ndarray


class TransformedBound(NamedTuple):
    lb_original: float
    lb_transformed: float


class CauchyCheck(NamedTuple):
    nested_value: np.ndarray
    weighted_value: np.ndarray
    discrepancy: float


class ReductionCheck(NamedTuple):
    lb_jacobi: float
    lb_reduced: float
    discrepancy: float


# ---------------------------------------------------------------------------
# Moments and bounds
# ---------------------------------------------------------------------------


def _require_same_domain(family: PolyFamily, x: Signal) -> None:
    if family.domain != x.domain:
        raise DomainError(
            f"family domain {family.domain.describe()} differs from "
            f"signal domain {x.domain.describe()}"
        )


def _weight_poly_degree(weight: WeightSpec) -> int:
    if weight.kind == quad.JACOBI:
        return int(np.ceil(max(weight.alpha, 0.0) + max(weight.beta, 0.0)))
    return 0


def _theta_matrix(family: PolyFamily, x: Signal, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Block moments as a (d, n) matrix; row i is the weighted moment of x
    against kernel i."""
    _require_same_domain(family, x)
    w = family.weight
    if x.is_poly and w.is_classical:
        deg = family.max_degree + x.degree + _weight_poly_degree(w)
        rule = quad.gauss_rule(w, deg // 2 + 2)
        V = family.evaluate(rule.nodes)
        X = x.evaluate(rule.nodes)
        return (V * rule.weights) @ X.T
    vec = quad.integrate(
        lambda t: np.kron(family.evaluate(t), x.evaluate(t)), w, tol
    )
    return vec.reshape(family.size, x.n)


def moment_vector(family: PolyFamily, x: Signal, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Stacked weighted moments of the signal: d blocks of size n."""
    return _theta_matrix(family, x, tol).reshape(-1)


def upper_bound(
    x: Signal, U: CostMatrix, weight: WeightSpec, tol: float = DEFAULT_TOL
) -> float:
    """Weighted integral of the quadratic form x' U x."""
    if x.n != U.n:
        raise ParameterError(f"signal dimension {x.n} does not match cost size {U.n}")
    Um = U.matrix
    if x.is_poly and weight.is_classical:
        deg = 2 * x.degree + _weight_poly_degree(weight)
        rule = quad.gauss_rule(weight, deg // 2 + 2)
        X = x.evaluate(rule.nodes)
        return float(np.einsum("im,ij,jm,m->", X, Um, X, rule.weights))
    value = quad.integrate(
        lambda t: (v := x.evaluate(t)) @ Um @ v, weight, tol
    )
    return float(value)


def _residual_signal(family: PolyFamily, x: Signal, lam_matrix: np.ndarray) -> Signal:
    """x minus its kernel-span approximation with the given coefficients."""
    if x.is_poly:
        width = max(x.degree, family.max_degree) + 1
        coeffs = np.zeros((x.n, width))
        coeffs[:, : x.degree + 1] = x.coeffs
        coeffs -= lam_matrix.T @ family.coeff_matrix(width)
        return Signal.poly(coeffs, x.domain)

    def eps(t: float) -> np.ndarray:
        return x.evaluate(t) - lam_matrix.T @ family.evaluate(t)

    return Signal.from_callable(
        eps, x.n, x.domain, decay_certified=x.decay_certified
    )


def _stationary_lower(
    theta_m: np.ndarray, lam_m: np.ndarray, gram: np.ndarray, Um: np.ndarray
) -> float:
    # objective 2 theta'(I (x) U) w - w'(gram (x) U) w at w = lam; being the
    # stationary point, first-order solve error in lam cancels out
    lam_u = lam_m @ Um
    return float(2.0 * np.sum(theta_m * lam_u) - np.sum((gram @ lam_m) * lam_u))


def _projection_bounds(
    family: PolyFamily, x: Signal, U: CostMatrix
) -> tuple[float, float]:
    """Upper and lower bound for polynomial signals under classical weights.

    Both are norms in the node space of one exact rule: the upper bound is
    the full weighted energy of U^{1/2} x, the lower bound the energy of
    its orthogonal projection onto the kernel span (Householder QR).  The
    projection is basis-independent, so badly conditioned kernel
    representations do not contaminate the value.
    """
    w = family.weight
    deg = max(family.max_degree, x.degree)
    rule = quad.gauss_rule(w, deg + _weight_poly_degree(w) // 2 + 2)
    sw = np.sqrt(rule.weights)
    Y = (U.sqrt @ x.evaluate(rule.nodes)) * sw  # (n, m)
    A = (family.evaluate(rule.nodes) * sw).T  # (m, d)
    Q, _ = np.linalg.qr(A, mode="reduced")
    upper = float(np.sum(Y * Y))
    proj = Q.T @ Y.T
    return upper, float(np.sum(proj * proj))


def lower_bound(
    family: PolyFamily,
    x: Signal,
    U: CostMatrix,
    tol: float = DEFAULT_TOL,
    pd_tol: float = 1e-12,
) -> BoundReport:
    """Moment lower bound with full diagnostics.

    Requires the family to pass the independence criterion; propagates
    :class:`SingularGramError` otherwise.
    """
    if x.n != U.n:
        raise ParameterError(f"signal dimension {x.n} does not match cost size {U.n}")
    gp = gram_matrix(family, pd_tol=pd_tol)
    theta_m = _theta_matrix(family, x, tol)
    lam_m = gp.solve(theta_m)
    if x.is_poly and family.weight.is_classical:
        upper, lower = _projection_bounds(family, x, U)
    else:
        lower = _stationary_lower(theta_m, lam_m, gp.gram, U.matrix)
        upper = upper_bound(x, U, family.weight, tol)
    gap = upper - lower
    relative_gap = gap / max(upper, 1e-300)

    eps = _residual_signal(family, x, lam_m)
    residual_sq = upper_bound(eps, U, family.weight, tol)
    defect_m = _theta_matrix(family, eps, tol)
    return BoundReport(
        upper=upper,
        lower=lower,
        gap=gap,
        relative_gap=relative_gap,
        theta=theta_m.reshape(-1),
        lam=lam_m.reshape(-1),
        residual_norm=float(np.sqrt(max(residual_sq, 0.0))),
        orthogonality_defects=np.linalg.norm(defect_m, axis=1),
    )


def bound_objective(
    theta: np.ndarray, gram: np.ndarray, U: CostMatrix, omega: np.ndarray
) -> float:
    """Completion-of-squares objective at arbitrary coefficients omega.

    Maximized exactly at the least-squares coefficients, where it equals
    the moment lower bound; every other omega gives a smaller value.
    """
    d = gram.shape[0]
    n = U.n
    theta_m = np.asarray(theta, dtype=float).reshape(d, n)
    omega_m = np.asarray(omega, dtype=float).reshape(d, n)
    omega_u = omega_m @ U.matrix
    return float(
        2.0 * np.sum(theta_m * omega_u) - np.sum((gram @ omega_m) * omega_u)
    )


def least_squares_diagnostics(
    family: PolyFamily, x: Signal, U: CostMatrix, tol: float = DEFAULT_TOL
) -> LeastSquaresDiagnostics:
    """Optimal coefficients from the normal equations, plus error measures.

    ``kappa`` has one row per signal component: component j is approximated
    by kappa[j] @ f.  The orthogonality defects are the weighted inner
    products of the residual with each kernel, all of which vanish at the
    least-squares optimum.
    """
    gp = gram_matrix(family)
    theta_m = _theta_matrix(family, x, tol)
    lam_m = gp.solve(theta_m)
    eps = _residual_signal(family, x, lam_m)
    residual_sq = upper_bound(eps, U, family.weight, tol)
    defect_m = _theta_matrix(family, eps, tol)
    return LeastSquaresDiagnostics(
        lam=lam_m.reshape(-1),
        kappa=lam_m.T.copy(),
        residual_norm=float(np.sqrt(max(residual_sq, 0.0))),
        orthogonality_defects=np.linalg.norm(defect_m, axis=1),
    )


def transformed_bound(
    family: PolyFamily,
    G: np.ndarray,
    x: Signal,
    U: CostMatrix,
    tol: float = DEFAULT_TOL,
) -> TransformedBound:
    """Lower bound before and after replacing the kernels by G @ f.

    Both values are computed from scratch (own Gram matrix, own moments);
    invariance of the bound under invertible G is a property to verify,
    not an identity assumed here.
    """
    G = np.asarray(G, dtype=float)
    d = family.size
    if G.shape != (d, d):
        raise RankError(f"transform must be {d}x{d}, got {G.shape}")
    sv = np.linalg.svd(G, compute_uv=False)
    if sv[-1] <= d * np.finfo(float).eps * sv[0]:
        raise RankError("transform matrix is singular")
    lb_orig = lower_bound(family, x, U, tol).lower
    # congruence by G widens the Gram eigenvalue spread by at most cond(G)^2;
    # G is invertible here, so relax the independence threshold accordingly
    cond_g = float(sv[0] / sv[-1])
    pd_tol = 1e-12 / cond_g**2
    lb_trans = lower_bound(family.transformed(G), x, U, tol, pd_tol=pd_tol).lower
    return TransformedBound(lb_orig, lb_trans)


def hierarchy_sweep(
    nested_family_builder: Callable[[int], PolyFamily],
    x: Signal,
    U: CostMatrix,
    d_range: Iterable[int],
    tol: float = DEFAULT_TOL,
) -> list[BoundReport]:
    """Lower bounds along a chain of nested kernel families.

    ``nested_family_builder(d)`` must return the d-member prefix of one
    growing family; prefix structure is enforced so that the monotonicity
    guarantee applies.  A singular Gram at any level aborts the sweep with
    the offending d in the error.
    """
    ds = [int(d) for d in d_range]
    if not ds:
        raise ParameterError("d_range must be nonempty")
    if any(d < 1 for d in ds) or any(b <= a for a, b in zip(ds, ds[1:])):
        raise ParameterError("d_range must be strictly increasing and >= 1")
    families = []
    for d in ds:
        fam = nested_family_builder(d)
        if fam.size != d:
            raise ParameterError(
                f"builder returned {fam.size} members for requested d={d}"
            )
        families.append(fam)
    width = max(f.max_degree for f in families) + 1
    for small, big in zip(families, families[1:]):
        same_members = np.array_equal(
            small.coeff_matrix(width), big.coeff_matrix(width)[: small.size]
        )
        if not same_members or small.weight != big.weight:
            raise ParameterError(
                "builder families are not nested prefixes of one growing family"
            )
    reports = []
    for d, fam in zip(ds, families):
        try:
            reports.append(lower_bound(fam, x, U, tol))
        except SingularGramError as exc:
            raise SingularGramError(
                f"independence fails at level d={d}: {exc}",
                min_eigenvalue=exc.min_eigenvalue,
            ) from exc
    return reports


def cauchy_identity_check(
    x: Signal, p: int, side: str, tol: float = DEFAULT_TOL
) -> CauchyCheck:
    """Nested repeated integral versus the single weighted integral.

    The p-fold nested integral of the signal (scaled by p!) must agree
    with the integral against the polynomial weight (b-tau)^p for the
    lower nesting and (tau-a)^p for the upper nesting.
    """
    if not x.domain.is_finite:
        raise DomainError("the repeated-integration identity needs a finite interval")
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    a, b = x.domain.a, x.domain.b
    nested = quad.repeated_integral(x.evaluate, p, side, a, b, tol=tol)
    if side == quad.LOWER:
        w = WeightSpec.jacobi(float(p), 0.0, x.domain)
    elif side == quad.UPPER:
        w = WeightSpec.jacobi(0.0, float(p), x.domain)
    else:
        raise ParameterError(f"side must be 'lower' or 'upper', got {side!r}")
    if x.is_poly:
        rule = quad.gauss_rule(w, (x.degree + p) // 2 + 2)
        weighted = (x.evaluate(rule.nodes) * rule.weights).sum(axis=1)
    else:
        weighted = np.atleast_1d(quad.integrate(x.evaluate, w, tol))
    return CauchyCheck(nested, weighted, float(np.max(np.abs(nested - weighted))))


def weighted_moment_reduction(
    p: int,
    d: int,
    a: float,
    b: float,
    x: Signal,
    U: CostMatrix,
    tol: float = DEFAULT_TOL,
) -> ReductionCheck:
    """Same lower bound by two routes: weighted Jacobi moments versus
    unweighted Legendre moments of order d+p pushed through the
    basis-change and weight-shift matrices.

    The kernel is the Jacobi family with exponents (0, p) under the
    weight (tau-a)^p; the reduced route only ever integrates the signal
    against the plain Legendre family.
    """
    if p < 1:
        raise ParameterError(f"p must be >= 1, got {p}")
    if d < 0:
        raise ParameterError(f"d must be >= 0, got {d}")
    jac = jacobi_family(d, 0.0, float(p), a, b)
    direct = lower_bound(jac, x, U, tol)

    leg_high = legendre_family(d + p, a, b)
    moments = _theta_matrix(leg_high, x, tol)
    leg_low = legendre_family(d, a, b)
    J = jac.coeff_matrix()
    L = leg_low.coeff_matrix()
    jacobi_from_legendre = np.linalg.solve(L.T, J.T).T
    P = weight_shift_matrix(p, d, a, b)
    reduction = jacobi_from_legendre @ P
    theta_m = reduction @ moments

    D = gram_matrix(jac).inverse
    lb_reduced = float(np.sum(theta_m * (D @ theta_m @ U.matrix)))
    return ReductionCheck(
        direct.lower, lb_reduced, abs(direct.lower - lb_reduced)
    )
