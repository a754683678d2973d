"""Weighted numerical integration.

Gauss rules for the classical weights are generated from the symmetric
tridiagonal form of the three-term recurrence (Golub-Welsch, via
``scipy.linalg.eigh_tridiagonal``).  An m-point rule integrates polynomial
integrands of degree up to 2m-1 exactly against its weight.  Black-box
integrands against custom weights fall back to an adaptive composite
Gauss-Legendre scheme; integrals over infinite domains of custom weights
are mapped to (0, 1) or (-1, 1) first and require the caller to certify
integrability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .domain import FINITE, HALF_LINE, REAL_LINE, Domain
from .errors import NonConvergenceError, ParameterError

UNIT = "unit"
JACOBI = "jacobi"
LAGUERRE = "laguerre"
HERMITE = "hermite"
CUSTOM = "custom"

CLASSICAL_KINDS = (UNIT, JACOBI, LAGUERRE, HERMITE)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_REFINEMENTS = 20
MAX_RULE_SIZE = 4096


@dataclass(frozen=True)
class WeightSpec:
    """Nonnegative weight function over a domain.

    ``unit``, ``jacobi``, ``laguerre`` and ``hermite`` admit exact Gauss
    rules; ``custom`` weights are evaluated pointwise and integrated
    adaptively.  Custom weights on infinite domains must set
    ``integrable_certified`` (the caller asserts the weighted integrals
    it will request are finite; there is no automatic tail detection).
    """

    kind: str
    domain: Domain
    alpha: float = 0.0
    beta: float = 0.0
    evaluator: Callable | None = None
    integrable_certified: bool = False

    def __post_init__(self):
        if self.kind == UNIT:
            if not self.domain.is_finite:
                raise ParameterError("unit weight requires a finite interval")
        elif self.kind == JACOBI:
            if not self.domain.is_finite:
                raise ParameterError("jacobi weight requires a finite interval")
            if self.alpha <= -1.0 or self.beta <= -1.0:
                raise ParameterError(
                    f"jacobi weight needs alpha, beta > -1, got ({self.alpha}, {self.beta})"
                )
        elif self.kind == LAGUERRE:
            if self.domain.kind != HALF_LINE:
                raise ParameterError("laguerre weight lives on the half line")
            if self.alpha <= -1.0:
                raise ParameterError(f"laguerre weight needs alpha > -1, got {self.alpha}")
        elif self.kind == HERMITE:
            if self.domain.kind != REAL_LINE:
                raise ParameterError("hermite weight lives on the real line")
        elif self.kind == CUSTOM:
            if self.evaluator is None:
                raise ParameterError("custom weight requires an evaluator")
            if not self.domain.is_finite and not self.integrable_certified:
                raise ParameterError(
                    "custom weight on an infinite domain requires integrable_certified=True"
                )
            self._spot_check_sign()
        else:
            raise ParameterError(f"unknown weight kind {self.kind!r}")

    def _spot_check_sign(self):
        # Guards against sign violations at sample points only; pathological
        # zero sets are the caller's responsibility.
        if self.domain.kind == FINITE:
            a, b = self.domain.a, self.domain.b
            probes = a + (b - a) * np.linspace(0.02, 0.98, 25)
        elif self.domain.kind == HALF_LINE:
            probes = np.geomspace(1e-3, 1e3, 25)
        else:
            probes = np.linspace(-20.0, 20.0, 25)
        values = np.array([float(self.evaluator(t)) for t in probes])
        if np.any(values < -1e-12):
            raise ParameterError("custom weight is negative at a sample point")

    # -- constructors ------------------------------------------------------

    @classmethod
    def unit(cls, domain: Domain) -> "WeightSpec":
        return cls(UNIT, domain)

    @classmethod
    def jacobi(cls, alpha: float, beta: float, domain: Domain) -> "WeightSpec":
        """(b - tau)^alpha * (tau - a)^beta on [a, b]."""
        return cls(JACOBI, domain, alpha=float(alpha), beta=float(beta))

    @classmethod
    def laguerre(cls, alpha: float = 0.0) -> "WeightSpec":
        """tau^alpha * exp(-tau) on [0, inf)."""
        return cls(LAGUERRE, Domain.half_line(), alpha=float(alpha))

    @classmethod
    def hermite(cls) -> "WeightSpec":
        """exp(-tau^2) on the real line."""
        return cls(HERMITE, Domain.real_line())

    @classmethod
    def custom(
        cls,
        evaluator: Callable,
        domain: Domain,
        integrable_certified: bool = False,
    ) -> "WeightSpec":
        return cls(CUSTOM, domain, evaluator=evaluator,
                   integrable_certified=integrable_certified)

    # -- behaviour ---------------------------------------------------------

    @property
    def is_classical(self) -> bool:
        return self.kind in CLASSICAL_KINDS

    def evaluate(self, tau):
        t = np.asarray(tau, dtype=float)
        if self.kind == UNIT:
            return np.ones_like(t)
        if self.kind == JACOBI:
            a, b = self.domain.a, self.domain.b
            return np.maximum(b - t, 0.0) ** self.alpha * np.maximum(t - a, 0.0) ** self.beta
        if self.kind == LAGUERRE:
            return np.maximum(t, 0.0) ** self.alpha * np.exp(-t)
        if self.kind == HERMITE:
            return np.exp(-t * t)
        if np.isscalar(tau):
            return float(self.evaluator(tau))
        return np.array([float(self.evaluator(x)) for x in t])

    def cache_key(self):
        if not self.is_classical:
            return None
        dom = self.domain
        return (self.kind, self.alpha, self.beta, dom.a, dom.b)


@dataclass(frozen=True)
class QuadRule:
    """Nodes and strictly positive weights of a Gauss-type rule."""

    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def apply(self, f: Callable) -> np.ndarray:
        """Sum of weights[i] * f(nodes[i]); f may return scalars or arrays."""
        total = None
        for x, w in zip(self.nodes, self.weights):
            fx = np.asarray(f(float(x)), dtype=float)
            total = w * fx if total is None else total + w * fx
        return total


# ---------------------------------------------------------------------------
# Recurrence coefficients (monic polynomials; b[0] carries the weight mass)
# ---------------------------------------------------------------------------


def _recurrence_legendre(m: int):
    k = np.arange(m, dtype=float)
    a = np.zeros(m)
    b = np.empty(m)
    b[0] = 2.0
    if m > 1:
        kk = k[1:]
        b[1:] = kk * kk / (4.0 * kk * kk - 1.0)
    return a, b


def _recurrence_jacobi(m: int, al: float, be: float):
    a = np.zeros(m)
    b = np.zeros(m)
    s = al + be
    a[0] = (be - al) / (s + 2.0)
    b[0] = 2.0 ** (s + 1.0) * math.gamma(al + 1.0) * math.gamma(be + 1.0) / math.gamma(s + 2.0)
    if m > 1:
        b[1] = 4.0 * (al + 1.0) * (be + 1.0) / ((s + 2.0) ** 2 * (s + 3.0))
    for k in range(1, m):
        two_k = 2.0 * k + s
        a[k] = (be * be - al * al) / (two_k * (two_k + 2.0))
        if k >= 2:
            b[k] = (
                4.0 * k * (k + al) * (k + be) * (k + s)
                / (two_k * two_k * (two_k + 1.0) * (two_k - 1.0))
            )
    return a, b


def _recurrence_laguerre(m: int, al: float):
    k = np.arange(m, dtype=float)
    a = 2.0 * k + al + 1.0
    b = k * (k + al)
    b[0] = math.gamma(al + 1.0)
    return a, b


def _recurrence_hermite(m: int):
    k = np.arange(m, dtype=float)
    a = np.zeros(m)
    b = k / 2.0
    b[0] = math.sqrt(math.pi)
    return a, b


_RULE_CACHE: dict[tuple, QuadRule] = {}


def gauss_rule(weight: WeightSpec, m: int) -> QuadRule:
    """m-point Gauss rule for a classical weight, exact through degree 2m-1."""
    if m < 1:
        raise ParameterError(f"rule size must be >= 1, got {m}")
    if not weight.is_classical:
        raise ParameterError("custom weights have no Gauss rule; use integrate()")
    key = weight.cache_key() + (m,)
    hit = _RULE_CACHE.get(key)
    if hit is not None:
        return hit

    if weight.kind in (UNIT, JACOBI):
        if weight.kind == UNIT:
            rec_a, rec_b = _recurrence_legendre(m)
            mass_scale = None
        else:
            rec_a, rec_b = _recurrence_jacobi(m, weight.alpha, weight.beta)
            mass_scale = weight.alpha + weight.beta + 1.0
        nodes, wts = _nodes_weights(rec_a, rec_b)
        a, b = weight.domain.a, weight.domain.b
        half = 0.5 * (b - a)
        nodes = a + half * (nodes + 1.0)
        wts = wts * (half if mass_scale is None else half**mass_scale)
    elif weight.kind == LAGUERRE:
        nodes, wts = _nodes_weights(*_recurrence_laguerre(m, weight.alpha))
    else:
        nodes, wts = _nodes_weights(*_recurrence_hermite(m))

    rule = QuadRule(nodes=nodes, weights=wts, exact_degree=2 * m - 1)
    _RULE_CACHE[key] = rule
    return rule


def _nodes_weights(rec_a: np.ndarray, rec_b: np.ndarray):
    m = len(rec_a)
    if m == 1:
        return np.array([rec_a[0]]), np.array([rec_b[0]])
    nodes, vecs = eigh_tridiagonal(rec_a, np.sqrt(rec_b[1:]))
    weights = rec_b[0] * vecs[0, :] ** 2
    return nodes, weights


def _legendre_rule(a: float, b: float, m: int) -> QuadRule:
    return gauss_rule(WeightSpec.unit(Domain.finite(a, b)), m)


# ---------------------------------------------------------------------------
# Weighted integration of black-box integrands
# ---------------------------------------------------------------------------


def integrate(
    f: Callable,
    weight: WeightSpec,
    tol: float = DEFAULT_TOL,
    *,
    poly_degree: int | None = None,
    max_refinements: int = DEFAULT_MAX_REFINEMENTS,
) -> np.ndarray:
    """Entrywise weighted integral of a scalar/vector/matrix-valued function.

    With ``poly_degree`` declared, a single Gauss rule of sufficient order
    is used (exact for polynomial integrands).  Otherwise the rule order is
    doubled until two successive values agree within ``tol`` (absolute,
    entrywise); custom weights go through the adaptive composite scheme.
    Raises :class:`NonConvergenceError` after ``max_refinements`` rounds.
    """
    if tol <= 0.0:
        raise ParameterError("tol must be positive")
    if weight.is_classical:
        if poly_degree is not None:
            rule = gauss_rule(weight, poly_degree // 2 + 2)
            return rule.apply(f)
        m = 8
        prev = gauss_rule(weight, m).apply(f)
        for _ in range(max_refinements):
            m *= 2
            if m > MAX_RULE_SIZE:
                break
            cur = gauss_rule(weight, m).apply(f)
            if np.max(np.abs(cur - prev)) <= tol:
                return cur
            prev = cur
        # order doubling stalls on non-smooth integrands (convergence is
        # only algebraic there); retry with the composite panels
    g = _fold_weight(f, weight)
    if weight.domain.is_finite:
        value, err, _ = _composite_adaptive(
            g, weight.domain.a, weight.domain.b, tol, max_refinements
        )
    else:
        h, lo, hi = _compactify(g, weight.domain)
        value, err, _ = _composite_adaptive(h, lo, hi, tol, max_refinements)
    if not np.isfinite(err) or err > tol or not np.all(np.isfinite(value)):
        raise NonConvergenceError(
            f"adaptive estimate {err:.3e} above tol {tol:.3e} after refinement cap"
        )
    return value


def _fold_weight(f: Callable, weight: WeightSpec) -> Callable:
    def g(t: float):
        return float(weight.evaluate(t)) * np.asarray(f(t), dtype=float)

    return g


def _compactify(g: Callable, domain: Domain):
    """Map an integral over an infinite domain onto a finite open interval."""
    if domain.kind == HALF_LINE:
        def h(s: float):
            u = 1.0 - s
            return g(s / u) / (u * u)

        return h, 0.0, 1.0

    def h(s: float):
        u = 1.0 - s * s
        return g(s / u) * (1.0 + s * s) / (u * u)

    return h, -1.0, 1.0


_PANEL_LOW = 10
_PANEL_HIGH = 20


def _panel_estimate(g: Callable, lo: float, hi: float):
    # non-finite values mean the panel failed outright; overflow inside the
    # integrand is diagnosed through the error estimate, not a warning storm
    with np.errstate(all="ignore"):
        coarse = _legendre_rule(lo, hi, _PANEL_LOW).apply(g)
        fine = _legendre_rule(lo, hi, _PANEL_HIGH).apply(g)
        err = float(np.max(np.abs(fine - coarse)))
    if not (np.isfinite(err) and np.all(np.isfinite(fine))):
        err = np.inf
    return fine, err


_INF_SPLIT_LIMIT = 6


def _composite_adaptive(g, lo, hi, tol, max_refinements, max_panels=4096):
    """Panel subdivision driven by an embedded low/high order error estimate.

    Panels whose estimates stay non-finite after several splits mark a
    divergent or overflowing integrand and stop the refinement early.
    Returns (value, error_estimate, history of total estimates per round).
    """
    panels = [(lo, hi, *_panel_estimate(g, lo, hi), 0)]
    history = []
    for _ in range(max_refinements):
        total_err = sum(p[3] for p in panels)
        history.append(total_err)
        if total_err <= tol:
            break
        if len(panels) >= max_panels:
            break
        if any(not np.isfinite(p[3]) and p[4] >= _INF_SPLIT_LIMIT for p in panels):
            break
        share = tol / len(panels)
        refreshed = []
        for pa, pb, val, err, depth in panels:
            if err > share and len(panels) + len(refreshed) < max_panels:
                mid = 0.5 * (pa + pb)
                refreshed.append((pa, mid, *_panel_estimate(g, pa, mid), depth + 1))
                refreshed.append((mid, pb, *_panel_estimate(g, mid, pb), depth + 1))
            else:
                refreshed.append((pa, pb, val, err, depth))
        panels = refreshed
    value = panels[0][2]
    for p in panels[1:]:
        value = value + p[2]
    err = sum(p[3] for p in panels)
    history.append(err)
    return value, err, history


# ---------------------------------------------------------------------------
# Nested repeated integrals
# ---------------------------------------------------------------------------

LOWER = "lower"
UPPER = "upper"


def repeated_integral(
    f: Callable,
    order: int,
    side: str,
    a: float,
    b: float,
    tol: float = 1e-9,
    max_refinements: int = DEFAULT_MAX_REFINEMENTS,
) -> np.ndarray:
    """order!-scaled nested integral of a vector-valued function over [a, b].

    ``lower`` nests inner integrals from ``a`` up to the running variable,
    ``upper`` from the running variable up to ``b``; the leading factorial
    of ``order`` is included.  Each level is evaluated by its own
    order-doubling Gauss-Legendre quadrature (direct nesting, no closed
    form is exploited).
    """
    if order < 1:
        raise ParameterError(f"order must be >= 1, got {order}")
    if side not in (LOWER, UPPER):
        raise ParameterError(f"side must be 'lower' or 'upper', got {side!r}")
    if not b > a:
        raise ParameterError(f"need b > a, got [{a}, {b}]")

    inner_tol = tol / (100.0 * order)

    def level(k: int) -> Callable:
        if k == 0:
            return lambda t: np.atleast_1d(np.asarray(f(t), dtype=float))
        below = level(k - 1)
        if side == LOWER:
            return lambda t: _gl_doubling(below, a, t, inner_tol, max_refinements)
        return lambda t: _gl_doubling(below, t, b, inner_tol, max_refinements)

    outer = _gl_doubling(level(order), a, b, tol, max_refinements)
    return float(math.factorial(order)) * outer


def _gl_doubling(fn, lo, hi, tol, max_refinements):
    if hi <= lo:
        return np.zeros_like(np.atleast_1d(np.asarray(fn(lo), dtype=float)))
    m = 8
    prev = _legendre_rule(lo, hi, m).apply(fn)
    for _ in range(max_refinements):
        m *= 2
        if m > MAX_RULE_SIZE:
            break
        cur = _legendre_rule(lo, hi, m).apply(fn)
        if np.max(np.abs(cur - prev)) <= tol:
            return cur
        prev = cur
    raise NonConvergenceError("nested quadrature did not stabilize")
