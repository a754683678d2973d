"""Polynomial kernel families and the linear algebra that connects them.

Families are stored as monomial coefficient rows.  The classical
constructions (Legendre, Jacobi, Laguerre, Hermite) attach their
closed-form squared weighted norms, which downstream Gram assembly can
use as a diagonal shortcut.  The monomial representation is capped at
degree 12; beyond that it is too ill-conditioned to trust.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .domain import Domain
from .errors import DomainError, ParameterError, RankError
from .quad import WeightSpec, gauss_rule

DMAX_CAP = 12

LAGUERRE = "laguerre"
HERMITE = "hermite"


def _rising(z: float, k: int) -> float:
    """Rising factorial z (z+1) ... (z+k-1); exact for integer arguments."""
    out = 1.0
    for j in range(k):
        out *= z + j
    return out


def _check_dmax(dmax: int) -> None:
    if dmax < 0:
        raise ParameterError(f"dmax must be >= 0, got {dmax}")
    if dmax > DMAX_CAP:
        raise ParameterError(
            f"dmax={dmax} exceeds the monomial-representation cap {DMAX_CAP}"
        )


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Real polynomial in the monomial basis; coeffs[i] multiplies tau^i."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1:
            raise ParameterError("coefficients must form a 1-d vector")
        # enforce a nonzero leading coefficient (the zero polynomial is [0.])
        nz = np.nonzero(c)[0]
        c = c[: nz[-1] + 1] if nz.size else np.zeros(1)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, tau):
        return npoly.polyval(np.asarray(tau, dtype=float), self.coeffs)

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial(np.zeros(1))
        return Polynomial(npoly.polyder(self.coeffs))


@dataclass(frozen=True, eq=False)
class PolyFamily:
    """Ordered kernel functions sharing one domain and one weight.

    ``sq_norms`` holds the closed-form diagonal of the weighted Gram matrix
    when the family is a recognized classical orthogonal family; it is
    dropped whenever the members or the weight are altered.
    """

    polys: tuple[Polynomial, ...]
    domain: Domain
    weight: WeightSpec
    sq_norms: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if len(self.polys) < 1:
            raise ParameterError("a family needs at least one member")
        if self.weight.domain != self.domain:
            raise DomainError("weight domain differs from family domain")
        if self.sq_norms is not None:
            object.__setattr__(
                self, "sq_norms", np.asarray(self.sq_norms, dtype=float)
            )

    @property
    def size(self) -> int:
        return len(self.polys)

    @property
    def max_degree(self) -> int:
        return max(p.degree for p in self.polys)

    def coeff_matrix(self, width: int | None = None) -> np.ndarray:
        """Rows of monomial coefficients, zero-padded to a common width."""
        w = self.max_degree + 1 if width is None else width
        out = np.zeros((self.size, w))
        for i, p in enumerate(self.polys):
            out[i, : len(p.coeffs)] = p.coeffs
        return out

    def evaluate(self, tau) -> np.ndarray:
        """Stacked member values: shape (d,) for scalar tau, (d, m) for arrays."""
        t = np.asarray(tau, dtype=float)
        vals = npoly.polyval(t, self.coeff_matrix().T)
        return vals

    def prefix(self, k: int) -> "PolyFamily":
        if not 1 <= k <= self.size:
            raise ParameterError(f"prefix length {k} out of range 1..{self.size}")
        norms = None if self.sq_norms is None else self.sq_norms[:k]
        return PolyFamily(self.polys[:k], self.domain, self.weight, norms)

    def with_weight(self, weight: WeightSpec) -> "PolyFamily":
        """Same members under a different weight; closed-form norms no longer apply."""
        if weight == self.weight:
            return self
        return PolyFamily(self.polys, self.domain, weight, None)

    def transformed(self, G: np.ndarray) -> "PolyFamily":
        """Members replaced by G @ f; weight and domain are kept."""
        G = np.asarray(G, dtype=float)
        C = self.coeff_matrix()
        if G.ndim != 2 or G.shape[1] != self.size:
            raise ParameterError(
                f"transform must have {self.size} columns, got shape {G.shape}"
            )
        rows = G @ C
        polys = tuple(Polynomial(r) for r in rows)
        return PolyFamily(polys, self.domain, self.weight, None)


def _linear_power_rows(c0: float, c1: float, dmax: int) -> list[np.ndarray]:
    """Coefficient vectors of (c0 + c1*tau)^k for k = 0..dmax."""
    rows = [np.array([1.0])]
    base = np.array([c0, c1])
    for _ in range(dmax):
        rows.append(npoly.polymul(rows[-1], base))
    return rows


def legendre_family(dmax: int, a: float, b: float) -> PolyFamily:
    """Shifted Legendre polynomials of degrees 0..dmax on [a, b], unit weight.

    Squared norms are (b - a) / (2k + 1).
    """
    _check_dmax(dmax)
    domain = Domain.finite(a, b)
    upows = _linear_power_rows(-b / (b - a), 1.0 / (b - a), dmax)
    polys = []
    for d in range(dmax + 1):
        c = np.zeros(d + 1)
        for k in range(d + 1):
            c[: k + 1] += math.comb(d, k) * math.comb(d + k, k) * upows[k]
        polys.append(Polynomial(c))
    norms = (b - a) / (2.0 * np.arange(dmax + 1) + 1.0)
    return PolyFamily(tuple(polys), domain, WeightSpec.unit(domain), norms)


def jacobi_family(
    dmax: int, alpha: float, beta: float, a: float, b: float
) -> PolyFamily:
    """Shifted Jacobi polynomials on [a, b], orthogonal under (b-t)^alpha (t-a)^beta.

    The standard normalization is kept, so the squared norms are
    (b-a)^(alpha+beta+1) G(k+alpha+1) G(k+beta+1)
    / (k! (2k+alpha+beta+1) G(k+alpha+beta+1)) with G the gamma function.
    """
    _check_dmax(dmax)
    if alpha <= -1.0 or beta <= -1.0:
        raise ParameterError(
            f"jacobi family needs alpha, beta > -1, got ({alpha}, {beta})"
        )
    domain = Domain.finite(a, b)
    upows = _linear_power_rows(-b / (b - a), 1.0 / (b - a), dmax)
    polys = []
    for d in range(dmax + 1):
        c = np.zeros(d + 1)
        dfact = math.factorial(d)
        for k in range(d + 1):
            # comb(d,k) * G(d+1+alpha)/G(k+1+alpha) * G(d+k+1+alpha+beta)/G(d+1+alpha+beta) / d!
            # written with rising factorials so fractional parameters near -1 stay finite
            coef = (
                math.comb(d, k)
                * _rising(k + 1.0 + alpha, d - k)
                * _rising(d + 1.0 + alpha + beta, k)
                / dfact
            )
            c[: k + 1] += coef * upows[k]
        polys.append(Polynomial(c))
    ks = np.arange(dmax + 1)
    norms = np.array(
        [
            (b - a) ** (alpha + beta + 1.0)
            * math.gamma(k + alpha + 1.0)
            * math.gamma(k + beta + 1.0)
            / (
                math.factorial(k)
                * (2.0 * k + alpha + beta + 1.0)
                * math.gamma(k + alpha + beta + 1.0)
            )
            for k in ks
        ]
    )
    return PolyFamily(
        tuple(polys), domain, WeightSpec.jacobi(alpha, beta, domain), norms
    )


def classical_family(kind: str, dmax: int, alpha: float = 0.0) -> PolyFamily:
    """Standard Laguerre (half line) or Hermite (real line) family.

    Laguerre squared norms are Gamma(d+alpha+1)/d!; Hermite norms are
    2^d d! sqrt(pi).
    """
    _check_dmax(dmax)
    if kind == LAGUERRE:
        if alpha <= -1.0:
            raise ParameterError(f"laguerre family needs alpha > -1, got {alpha}")
        polys = []
        for d in range(dmax + 1):
            c = np.zeros(d + 1)
            for i in range(d + 1):
                c[i] = (
                    (-1.0) ** i
                    / math.factorial(i)
                    * _rising(alpha + i + 1.0, d - i)
                    / math.factorial(d - i)
                )
            polys.append(Polynomial(c))
        norms = np.array(
            [
                math.gamma(d + alpha + 1.0) / math.factorial(d)
                for d in range(dmax + 1)
            ]
        )
        weight = WeightSpec.laguerre(alpha)
        return PolyFamily(tuple(polys), weight.domain, weight, norms)
    if kind == HERMITE:
        rows = [np.array([1.0]), np.array([0.0, 2.0])]
        for k in range(1, dmax):
            rows.append(
                npoly.polysub(
                    npoly.polymul(np.array([0.0, 2.0]), rows[k]), 2.0 * k * rows[k - 1]
                )
            )
        polys = tuple(Polynomial(r) for r in rows[: dmax + 1])
        norms = np.array(
            [
                2.0**d * math.factorial(d) * math.sqrt(math.pi)
                for d in range(dmax + 1)
            ]
        )
        weight = WeightSpec.hermite()
        return PolyFamily(polys, weight.domain, weight, norms)
    raise ParameterError(f"unknown classical family kind {kind!r}")


def monomial_family(
    dmax: int,
    a: float | None = None,
    b: float | None = None,
    *,
    domain: Domain | None = None,
    weight: WeightSpec | None = None,
) -> PolyFamily:
    """The raw monomials 1, tau, ..., tau^dmax.

    Defaults to the finite interval [a, b] with unit weight; on infinite
    domains a compatible weight must be supplied.
    """
    _check_dmax(dmax)
    if domain is None:
        domain = Domain.finite(a, b)
    polys = tuple(
        Polynomial(np.eye(dmax + 1)[k, : k + 1]) for k in range(dmax + 1)
    )
    w = WeightSpec.unit(domain) if weight is None else weight
    return PolyFamily(polys, domain, w, None)


# ---------------------------------------------------------------------------
# Linear maps between families
# ---------------------------------------------------------------------------


def basis_change(source: PolyFamily, target: PolyFamily) -> np.ndarray:
    """Matrix G with source(tau) = G @ target(tau) identically.

    Raises :class:`RankError` when the target members are linearly
    dependent or the source is not contained in their span.
    """
    width = max(source.max_degree, target.max_degree) + 1
    S = source.coeff_matrix(width)
    T = target.coeff_matrix(width)
    sv = np.linalg.svd(T, compute_uv=False)
    if sv[-1] <= max(T.shape) * np.finfo(float).eps * sv[0]:
        raise RankError("target family is rank-deficient in the monomial basis")
    G = np.linalg.lstsq(T.T, S.T, rcond=None)[0].T
    residual = np.max(np.abs(G @ T - S))
    scale = max(1.0, np.max(np.abs(S)))
    if residual > 1e-8 * scale:
        raise RankError(
            f"source is not contained in the target span (residual {residual:.3e})"
        )
    return G


def weight_shift_matrix(p: int, dmax: int, a: float, b: float) -> np.ndarray:
    """Matrix P with (tau - a)^p * leg_d(tau) = P @ leg_(d+p)(tau) on [a, b].

    Shape (dmax+1) x (dmax+p+1): multiplying a Legendre member by the
    degree-p weight lands in the span of the higher Legendre family.
    """
    if p < 1:
        raise ParameterError(f"shift power must be >= 1, got {p}")
    _check_dmax(dmax + p)
    high = legendre_family(dmax + p, a, b)
    # project onto the orthogonal high family with an exact rule, evaluating
    # the Legendre values by recurrence: a monomial coefficient solve (or
    # Horner values) would lose digits on wide or shifted intervals
    rule = gauss_rule(high.weight, dmax + p + 2)
    values = _legendre_values(dmax + p, a, b, rule.nodes)
    shifted_low = (rule.nodes - a) ** p * values[: dmax + 1]
    inner = (shifted_low * rule.weights) @ values.T
    return inner / high.sq_norms


def _legendre_values(dmax: int, a: float, b: float, taus: np.ndarray) -> np.ndarray:
    """Shifted Legendre values by the stable three-term recurrence."""
    t = (2.0 * taus - a - b) / (b - a)
    out = np.ones((dmax + 1, len(t)))
    if dmax >= 1:
        out[1] = t
    for k in range(1, dmax):
        out[k + 1] = ((2 * k + 1) * t * out[k] - k * out[k - 1]) / (k + 1)
    return out


def diff_matrix(family: PolyFamily, reduced: bool = False) -> np.ndarray:
    """Matrix mapping family values to the values of the derivative family.

    Full form: d/dtau f(tau) = L @ f(tau), shape (d, d).  Reduced form
    expresses the derivatives in the degree-reduced prefix (the first
    d-1 members), shape (d, d-1).
    """
    width = family.max_degree + 1
    C = family.coeff_matrix(width)
    D = np.zeros_like(C)
    for i, poly in enumerate(family.polys):
        dc = poly.derivative().coeffs
        D[i, : len(dc)] = dc
    basis = C[:-1] if reduced else C
    if basis.shape[0] == 0:
        return np.zeros((family.size, 0))
    sol, _, rank, _ = np.linalg.lstsq(basis.T, D.T, rcond=None)
    L = sol.T
    residual = np.max(np.abs(L @ basis - D))
    scale = max(1.0, np.max(np.abs(D)))
    if residual > 1e-8 * scale:
        raise RankError(
            "family does not span the degrees required for its derivatives"
        )
    return L


def eval_family(family: PolyFamily, tau) -> np.ndarray:
    """Member values at tau (Horner evaluation); tau must lie in the domain."""
    family.domain.require(tau)
    return family.evaluate(tau)
