"""Gram matrix assembly, the independence criterion, Kronecker lifts, and
the completion-of-squares bound."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg as sla

from . import quad
from .errors import NotPositiveDefiniteError, ParameterError, SingularGramError
from .polyalg import PolyFamily

PD_TOL = 1e-12
CONDITION_WARNING_THRESHOLD = 1e12


class IllConditionedGramWarning(UserWarning):
    """The Gram matrix is invertible but numerically fragile."""


@dataclass(frozen=True, eq=False)
class GramPair:
    """Weighted Gram matrix of a kernel family together with its inverse.

    ``gram`` is the matrix of weighted inner products; ``inverse`` is the
    matrix that enters the lower-bound quadratic form.  ``chol`` keeps the
    lower Cholesky factor of ``gram`` for stable solves downstream.
    """

    gram: np.ndarray
    inverse: np.ndarray
    min_eigenvalue: float
    condition_number: float
    chol: np.ndarray = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return self.gram.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solution of gram @ X = rhs via the cached Cholesky factor."""
        return sla.cho_solve((self.chol, True), rhs)


class GramianVerdict(NamedTuple):
    independent: bool
    min_eigenvalue: float


def quadrature_order(family: PolyFamily) -> int:
    """Rule size guaranteeing exactness for products of two family members."""
    w = family.weight
    wdeg = 0
    if w.kind == quad.JACOBI:
        wdeg = int(np.ceil(max(w.alpha, 0.0) + max(w.beta, 0.0)))
    return int(np.ceil((2 * family.max_degree + wdeg + 1) / 2)) + 2


def gram_matrix(
    family: PolyFamily, pd_tol: float = PD_TOL, method: str = "auto"
) -> GramPair:
    """Assemble the weighted Gram matrix of a family and invert it.

    ``method="auto"`` uses the closed-form diagonal whenever the family is
    a recognized classical orthogonal family, otherwise an exact Gauss
    rule (or the adaptive integrator for custom weights).  Raises
    :class:`SingularGramError` when the smallest relative eigenvalue drops
    below ``pd_tol``, i.e. when the kernels are linearly dependent.
    """
    if method not in ("auto", "closed_form", "quadrature"):
        raise ParameterError(f"unknown gram method {method!r}")
    if method == "closed_form" or (method == "auto" and family.sq_norms is not None):
        if family.sq_norms is None:
            raise ParameterError("family carries no closed-form norms")
        gram = np.diag(family.sq_norms)
    elif family.weight.is_classical:
        rule = quad.gauss_rule(family.weight, quadrature_order(family))
        V = family.evaluate(rule.nodes)
        gram = (V * rule.weights) @ V.T
    else:
        gram = quad.integrate(
            lambda t: np.outer(v := family.evaluate(t), v), family.weight
        )
    gram = 0.5 * (gram + gram.T)

    eigs = np.linalg.eigvalsh(gram)
    min_eig, max_eig = float(eigs[0]), float(eigs[-1])
    if min_eig <= pd_tol * max(max_eig, 0.0):
        raise SingularGramError(
            f"kernel family fails the independence criterion "
            f"(min eigenvalue {min_eig:.3e})",
            min_eigenvalue=min_eig,
        )
    try:
        chol = sla.cholesky(gram, lower=True)
    except sla.LinAlgError as exc:  # borderline indefiniteness
        raise SingularGramError(str(exc), min_eigenvalue=min_eig) from exc
    inverse = sla.cho_solve((chol, True), np.eye(gram.shape[0]))
    inverse = 0.5 * (inverse + inverse.T)
    cond = max_eig / min_eig
    if cond > CONDITION_WARNING_THRESHOLD:
        warnings.warn(
            f"Gram condition number {cond:.3e}; lower bounds may lose accuracy",
            IllConditionedGramWarning,
            stacklevel=2,
        )
    return GramPair(gram, inverse, min_eig, cond, chol)


def gramian_check(gram: np.ndarray, pd_tol: float = PD_TOL) -> GramianVerdict:
    """Independence verdict for a symmetric Gram matrix.

    Independent iff the smallest eigenvalue exceeds ``pd_tol`` times the
    largest; the reported margin is the smallest eigenvalue itself.
    """
    G = np.asarray(gram, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ParameterError(f"gram matrix must be square, got shape {G.shape}")
    if not np.allclose(G, G.T, atol=1e-12 * max(1.0, np.max(np.abs(G)))):
        raise ParameterError("gram matrix must be symmetric")
    eigs = np.linalg.eigvalsh(0.5 * (G + G.T))
    min_eig, max_eig = float(eigs[0]), float(eigs[-1])
    return GramianVerdict(min_eig > pd_tol * max(max_eig, 0.0), min_eig)


def kron_lift(A: np.ndarray, n: int) -> np.ndarray:
    """A tensored with the n x n identity."""
    if n < 1:
        raise ParameterError(f"identity size must be >= 1, got {n}")
    return np.kron(np.asarray(A, dtype=float), np.eye(n))


class CompletionBound(NamedTuple):
    rhs: np.ndarray
    gap: np.ndarray


def completion_bound(C: np.ndarray, B: np.ndarray, M: np.ndarray) -> CompletionBound:
    """Completion-of-squares inequality pieces for positive definite C.

    Returns ``rhs = M'B + B'M - M'CM`` and the positive semidefinite
    slack ``gap = B'C^{-1}B - rhs``; the gap vanishes at M = C^{-1} B.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    try:
        chol = sla.cho_factor(C, lower=True)
    except sla.LinAlgError as exc:
        raise NotPositiveDefiniteError("C must be positive definite") from exc
    rhs = M.T @ B + B.T @ M - M.T @ C @ M
    rhs = 0.5 * (rhs + rhs.T)
    tight = B.T @ sla.cho_solve(chol, B)
    gap = 0.5 * (tight + tight.T) - rhs
    return CompletionBound(rhs, 0.5 * (gap + gap.T))
