"""One-dimensional integration domains: a finite interval, the half line, or the real line."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

FINITE = "finite"
HALF_LINE = "half_line"
REAL_LINE = "real_line"

_KINDS = (FINITE, HALF_LINE, REAL_LINE)


@dataclass(frozen=True)
class Domain:
    """Integration domain. Only the finite kind carries endpoints."""

    kind: str
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if self.kind == FINITE:
            if self.a is None or self.b is None:
                raise DomainError("finite domain requires both endpoints")
            if not (np.isfinite(self.a) and np.isfinite(self.b)):
                raise DomainError("finite domain endpoints must be finite numbers")
            if not self.b > self.a:
                raise DomainError(f"degenerate interval: b={self.b} must exceed a={self.a}")
        elif self.a is not None or self.b is not None:
            raise DomainError(f"{self.kind} domain carries no endpoints")

    @classmethod
    def finite(cls, a: float, b: float) -> "Domain":
        return cls(FINITE, float(a), float(b))

    @classmethod
    def half_line(cls) -> "Domain":
        """[0, inf)"""
        return cls(HALF_LINE)

    @classmethod
    def real_line(cls) -> "Domain":
        return cls(REAL_LINE)

    @property
    def is_finite(self) -> bool:
        return self.kind == FINITE

    def contains(self, tau) -> np.ndarray:
        """Pointwise membership with a small relative slack for rounding."""
        t = np.asarray(tau, dtype=float)
        if self.kind == FINITE:
            slack = 1e-12 * (self.b - self.a)
            return (t >= self.a - slack) & (t <= self.b + slack)
        if self.kind == HALF_LINE:
            return t >= -1e-12
        return np.isfinite(t)

    def require(self, tau) -> None:
        if not np.all(self.contains(tau)):
            raise DomainError(f"point outside {self.describe()}")

    def describe(self) -> str:
        if self.kind == FINITE:
            return f"[{self.a}, {self.b}]"
        return "[0, inf)" if self.kind == HALF_LINE else "(-inf, inf)"
