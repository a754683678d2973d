"""Slack-matrix lower bounds and the probe of their maximal value.

The slack form trades the Gram inverse for free matrices X, Y constrained
by a block positive-definiteness condition.  Any feasible slack yields a
valid lower bound on the weighted quadratic integral; maximized over the
slack, the bound meets the moment lower bound (never exceeding it), which
the equivalence probe explores numerically by seeded restarts and a
feasibility-respecting ascent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg as sla

from .bound import CostMatrix, Signal, lower_bound, moment_vector
from .errors import NotPositiveDefiniteError, ParameterError
from .gram import gram_matrix
from .polyalg import PolyFamily

DEFAULT_EPS = 1e-6


class FmtProbeWarning(UserWarning):
    """The slack search ended noticeably below the moment lower bound."""


@dataclass(frozen=True, eq=False)
class FmtSlack:
    """Free matrices of the slack bound.

    ``X_blocks`` holds d matrices of shape (n, rho*n); stacked row-wise
    they form X, stacked column-wise X_hat.  ``Y`` is symmetric of size
    rho*d*n.  Feasibility means the block matrix [[U, -X], [-X', Y]] is
    positive definite.
    """

    rho: int
    X_blocks: tuple[np.ndarray, ...]
    Y: np.ndarray

    def __post_init__(self):
        if self.rho < 1:
            raise ParameterError(f"rho must be >= 1, got {self.rho}")
        blocks = tuple(np.atleast_2d(np.asarray(b, dtype=float)) for b in self.X_blocks)
        if not blocks:
            raise ParameterError("at least one X block is required")
        n = blocks[0].shape[0]
        for b in blocks:
            if b.shape != (n, self.rho * n):
                raise ParameterError(
                    f"every X block must be {n}x{self.rho * n}, got {b.shape}"
                )
        Y = np.asarray(self.Y, dtype=float)
        m = self.rho * len(blocks) * n
        if Y.shape != (m, m):
            raise ParameterError(f"Y must be {m}x{m}, got {Y.shape}")
        if not np.allclose(Y, Y.T, atol=1e-12 * max(1.0, np.max(np.abs(Y)))):
            raise ParameterError("Y must be symmetric")
        object.__setattr__(self, "X_blocks", blocks)
        object.__setattr__(self, "Y", 0.5 * (Y + Y.T))

    @property
    def d(self) -> int:
        return len(self.X_blocks)

    @property
    def n(self) -> int:
        return self.X_blocks[0].shape[0]

    @property
    def X(self) -> np.ndarray:
        """Row concatenation, shape (n, rho*d*n)."""
        return np.hstack(self.X_blocks)

    @property
    def X_hat(self) -> np.ndarray:
        """Column stack, shape (d*n, rho*n)."""
        return np.vstack(self.X_blocks)


@dataclass(frozen=True, eq=False)
class FmtBoundResult:
    lb: float
    W: np.ndarray
    z_used: np.ndarray
    feasible: bool


class FeasibilityResult(NamedTuple):
    feasible: bool
    margin: float


@dataclass(frozen=True, eq=False)
class ProbeResult:
    """Outcome of the slack-maximization probe."""

    best_fmt_lb: float
    projection_lb: float
    ratio: float
    restarts: int
    warning_issued: bool


def build_W(Y: np.ndarray, family: PolyFamily, rho: int, n: int) -> np.ndarray:
    """Weighted compression of Y by the kernel family.

    Because the integrand is bilinear in the kernels, the integral
    collapses to the Gram-weighted block sum
    W = sum_ij gram[i, j] * Y_block[i, j], each block of size rho*n.
    """
    if rho < 1 or n < 1:
        raise ParameterError("rho and n must be >= 1")
    d = family.size
    m = rho * n
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (d * m, d * m):
        raise ParameterError(f"Y must be {d * m}x{d * m}, got {Y.shape}")
    gram = gram_matrix(family).gram
    blocks = Y.reshape(d, m, d, m)
    W = np.einsum("ij,imjn->mn", gram, blocks)
    return 0.5 * (W + W.T)


def _block_matrix(U: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    n = U.shape[0]
    m = Y.shape[0]
    out = np.empty((n + m, n + m))
    out[:n, :n] = U
    out[:n, n:] = -X
    out[n:, :n] = -X.T
    out[n:, n:] = Y
    return out


def feasibility_check(U: CostMatrix, slack: FmtSlack) -> FeasibilityResult:
    """Smallest eigenvalue of the slack block condition; feasible iff > 0."""
    if slack.n != U.n:
        raise ParameterError(
            f"slack blocks are sized for n={slack.n}, cost has n={U.n}"
        )
    M = _block_matrix(U.matrix, slack.X, slack.Y)
    margin = float(np.linalg.eigvalsh(M)[0])
    return FeasibilityResult(margin > 0.0, margin)


def fmt_bound(
    theta: np.ndarray,
    slack: FmtSlack,
    W: np.ndarray,
    z: np.ndarray,
    feasible: bool = True,
) -> FmtBoundResult:
    """Slack lower bound 2 theta' X_hat z - z' W z at a given z.

    Validity requires a feasible slack; checking is the caller's contract
    (run :func:`feasibility_check`) and the verdict is recorded on the
    result unchanged.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    X_hat = slack.X_hat
    if theta.shape[0] != X_hat.shape[0]:
        raise ParameterError(
            f"theta length {theta.shape[0]} does not match X_hat rows {X_hat.shape[0]}"
        )
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape != (X_hat.shape[1],) * 2 or z.shape[0] != X_hat.shape[1]:
        raise ParameterError("W and z must match the X_hat column dimension")
    lb = 2.0 * theta @ X_hat @ z - z @ W @ z
    return FmtBoundResult(float(lb), W, z, bool(feasible))


def fmt_bound_affine(
    upsilon: np.ndarray,
    y: np.ndarray,
    slack: FmtSlack,
    W: np.ndarray,
    theta: np.ndarray,
    consistency_tol: float = 1e-8,
    feasible: bool = True,
) -> FmtBoundResult:
    """Affine variant y' (Sy(upsilon' X_hat) - W) y, valid when upsilon @ y
    reproduces the moment vector."""
    upsilon = np.atleast_2d(np.asarray(upsilon, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    mismatch = np.linalg.norm(upsilon @ y - theta)
    if mismatch > consistency_tol * max(1.0, np.linalg.norm(theta)):
        raise ParameterError(
            f"upsilon @ y does not reproduce theta (mismatch {mismatch:.3e})"
        )
    X_hat = slack.X_hat
    W = np.atleast_2d(np.asarray(W, dtype=float))
    core = upsilon.T @ X_hat
    lb = y @ (core + core.T - W) @ y
    return FmtBoundResult(float(lb), W, y, bool(feasible))


def optimal_z(X_hat: np.ndarray, W: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Unique maximizer of the slack bound over z, requiring W > 0."""
    X_hat = np.atleast_2d(np.asarray(X_hat, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    theta = np.asarray(theta, dtype=float).reshape(-1)
    try:
        chol = sla.cho_factor(W, lower=True)
    except sla.LinAlgError as exc:
        raise NotPositiveDefiniteError("W must be positive definite") from exc
    return sla.cho_solve(chol, X_hat.T @ theta)


# ---------------------------------------------------------------------------
# Equivalence probe
# ---------------------------------------------------------------------------


def _probe_objective_factory(theta: np.ndarray, W: np.ndarray):
    chol = sla.cho_factor(W, lower=True)

    def objective(X_hat: np.ndarray) -> float:
        v = X_hat.T @ theta
        return float(v @ sla.cho_solve(chol, v))

    return objective


def _margin_of(U: np.ndarray, Y: np.ndarray, X_hat: np.ndarray, n: int) -> float:
    d = X_hat.shape[0] // n
    X = np.hstack([X_hat[i * n : (i + 1) * n, :] for i in range(d)])
    return float(np.linalg.eigvalsh(_block_matrix(U, X, Y))[0])


def _ascend(X_hat, objective, margin_fn, floor, max_iters):
    """Gradient ascent toward the feasibility boundary.

    The objective is convex in X_hat, so each accepted step rides to the
    largest feasible move along the finite-difference gradient; stalls
    terminate early.
    """
    best_val = objective(X_hat)
    for _ in range(max_iters):
        h = 1e-6 * (1.0 + np.max(np.abs(X_hat)))
        grad = np.zeros_like(X_hat)
        base = objective(X_hat)
        for idx in np.ndindex(X_hat.shape):
            bumped = X_hat.copy()
            bumped[idx] += h
            grad[idx] = (objective(bumped) - base) / h
        gnorm = np.linalg.norm(grad)
        if gnorm == 0.0:
            break
        direction = grad / gnorm

        def margin_at(t: float) -> float:
            return margin_fn(X_hat + t * direction)

        t = _largest_feasible_step(margin_at, floor, 1.0 + np.max(np.abs(X_hat)))
        if t <= 0.0:
            break
        candidate = X_hat + t * direction
        val = objective(candidate)
        while val <= best_val and t > 1e-12:
            t *= 0.25
            candidate = X_hat + t * direction
            val = objective(candidate)
        if val <= best_val:
            break
        X_hat, best_val = candidate, val
    return X_hat, best_val


def _largest_feasible_step(margin_at, floor, t0):
    if margin_at(0.0) <= floor:
        return 0.0
    t = t0
    if margin_at(t) > floor:
        for _ in range(60):
            if margin_at(2.0 * t) <= floor:
                break
            t *= 2.0
        else:
            return t
        lo, hi = t, 2.0 * t
    else:
        lo, hi = 0.0, t
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if margin_at(mid) > floor:
            lo = mid
        else:
            hi = mid
    return lo


def equivalence_probe(
    family: PolyFamily,
    x: Signal,
    U: CostMatrix,
    rho: int | None = None,
    budget: int = 8,
    *,
    seed: int = 0,
    eps: float = DEFAULT_EPS,
    noise_scale: float = 1e-2,
    max_iters: int = 40,
    warn_ratio: float = 0.99,
) -> ProbeResult:
    """Maximize the slack bound over seeded feasible slack draws.

    Each restart draws X blocks, builds Y = X'U^{-1}X + eps*I (plus PSD
    noise on random restarts), compresses it to W, and ascends over the
    X blocks with the optimal z in closed form while keeping the
    feasibility margin strictly positive.  Reports the best value and its
    ratio to the moment lower bound; a ratio below ``warn_ratio`` issues
    a warning, never an error.
    """
    if budget < 1:
        raise ParameterError(f"budget must be >= 1, got {budget}")
    d = family.size
    n = U.n
    rho = d if rho is None else int(rho)
    if rho < 1:
        raise ParameterError(f"rho must be >= 1, got {rho}")
    rng = np.random.default_rng(seed)

    gp = gram_matrix(family)
    theta = moment_vector(family, x)
    projection_lb = lower_bound(family, x, U).lower
    Um = U.matrix
    U_chol = sla.cho_factor(Um, lower=True)
    m = rho * n

    best = -np.inf
    for restart in range(budget):
        canonical = restart == 0 and rho == d
        if canonical:
            X_hat = np.kron(gp.inverse, Um)
            noise = 0.0
        else:
            X_hat = rng.standard_normal((d * n, m))
            noise = noise_scale
        X = np.hstack([X_hat[i * n : (i + 1) * n, :] for i in range(d)])
        base = X.T @ sla.cho_solve(U_chol, X)
        Y = base + eps * np.eye(d * m)
        if noise > 0.0:
            S = rng.standard_normal((d * m, d * m))
            Y = Y + (noise * (1.0 + np.trace(base) / (d * m)) / (d * m)) * (S.T @ S)
        W = build_W(Y, family, rho, n)
        objective = _probe_objective_factory(theta, W)
        floor = 1e-11 * (1.0 + max(np.max(np.abs(Um)), np.max(np.abs(Y))))

        def margin_fn(Xh, _Y=Y):
            return _margin_of(Um, _Y, Xh, n)

        if margin_fn(X_hat) <= floor:
            # scale the draw down until the block condition holds
            for _ in range(60):
                X_hat = 0.5 * X_hat
                if margin_fn(X_hat) > floor:
                    break
            else:
                continue
        _, val = _ascend(X_hat, objective, margin_fn, floor, max_iters)
        best = max(best, val)

    ratio = best / max(projection_lb, 1e-300)
    if ratio > 1.0 + 1e-8:
        raise RuntimeError(
            f"slack bound {best} exceeded the moment lower bound {projection_lb}; "
            "this indicates a defect in the bound assembly"
        )
    warned = False
    if ratio < warn_ratio:
        warnings.warn(
            f"probe ended at ratio {ratio:.6f} < {warn_ratio}; "
            "budget may be too small for this instance",
            FmtProbeWarning,
            stacklevel=2,
        )
        warned = True
    return ProbeResult(
        best_fmt_lb=float(best),
        projection_lb=float(projection_lb),
        ratio=float(ratio),
        restarts=budget,
        warning_issued=warned,
    )
