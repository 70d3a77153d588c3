"""Complex-valued functions on affine spaces, stored densely in canonical order."""

from __future__ import annotations

import numpy as np

from .space import AffineSpace

BOUND_TOL = 1e-12


class UnboundedError(ValueError):
    """A function asserted to satisfy |f| <= 1 does not."""


class SpaceFunction:
    def __init__(self, domain: AffineSpace, values, bounded: bool = False):
        v = np.asarray(values, dtype=complex).reshape(-1)
        if v.size != domain.size:
            raise ValueError(f"expected {domain.size} values, got {v.size}")
        if bounded and np.any(np.abs(v) > 1 + BOUND_TOL):
            raise UnboundedError("function exceeds 1 in magnitude")
        v.setflags(write=False)
        self.domain = domain
        self.values = v
        self.bounded = bounded

    @classmethod
    def indicator(cls, domain: AffineSpace, member) -> "SpaceFunction":
        """Indicator of a set given as a boolean mask over the domain."""
        return cls(domain, np.asarray(member, dtype=float), bounded=True)

    @classmethod
    def constant(cls, domain: AffineSpace, value: complex) -> "SpaceFunction":
        return cls(domain, np.full(domain.size, value, dtype=complex), bounded=abs(value) <= 1)

    @property
    def p(self) -> int:
        return self.domain.p

    def is_real(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.values.imag) <= tol))

    def mean(self) -> complex:
        return complex(self.values.mean())

    def restrict(self, sub: AffineSpace) -> "SpaceFunction":
        idx = self.domain.index_of(sub.points())
        return SpaceFunction(sub, self.values[idx], self.bounded)

    def _new(self, values):
        return SpaceFunction(self.domain, values)

    def _check(self, other: "SpaceFunction"):
        if self.domain != other.domain or not np.array_equal(self.domain.basis, other.domain.basis) \
                or not np.array_equal(self.domain.translate, other.domain.translate):
            raise ValueError("functions live on different domains (or orderings)")

    def __add__(self, other):
        self._check(other)
        return self._new(self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return self._new(self.values - other.values)

    def __mul__(self, other):
        if isinstance(other, SpaceFunction):
            self._check(other)
            return self._new(self.values * other.values)
        return self._new(self.values * other)

    __rmul__ = __mul__

    def conj(self) -> "SpaceFunction":
        return SpaceFunction(self.domain, np.conj(self.values), self.bounded)

    def as_bounded(self) -> "SpaceFunction":
        return SpaceFunction(self.domain, self.values, bounded=True)

    def __repr__(self):
        return f"SpaceFunction(dim={self.domain.dim}, p={self.p})"
