"""Characters and Fourier analysis on F_p^d.

The forward transform is expectation-normalized,
``fhat(xi) = E_x f(x) e_p(-xi . x)``, so ``fhat(0)`` is the mean and
``f(x) = sum_xi fhat(xi) e_p(xi . x)``.  Arrays over F_p^d use the
little-endian canonical index of :mod:`fourap.space`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def character(a, p: int):
    """``e_p(a) = exp(2 pi i a / p)``; accepts ints or integer arrays."""
    return np.exp(2j * np.pi * (np.asarray(a) % p) / p)


@lru_cache(maxsize=64)
def _roots(p: int) -> np.ndarray:
    r = np.exp(2j * np.pi * np.arange(p) / p)
    r.setflags(write=False)
    return r


def roots_of_unity(p: int) -> np.ndarray:
    return _roots(p)


def dimension_of(length: int, p: int) -> int:
    d, m = 0, 1
    while m < length:
        m *= p
        d += 1
    if m != length:
        raise ValueError(f"length {length} is not a power of {p}")
    return d


def _cube_transform(values: np.ndarray, p: int, fn) -> np.ndarray:
    # values has shape (..., p**d); view the last axis as a cube whose axis j is digit j
    d = dimension_of(values.shape[-1], p)
    if d == 0:
        return values.copy()
    lead = values.shape[:-1]
    cube = values.reshape(lead + (p,) * d, order="F")
    axes = tuple(range(len(lead), len(lead) + d))
    return fn(cube, axes=axes).reshape(lead + (p**d,), order="F")


def dft(values, p: int) -> np.ndarray:
    """Expectation-normalized DFT over F_p^d along the last axis.

    ``fhat(xi) = E_x f(x) e_p(-xi . x)``: an FFT of length p along each of the
    d digit axes, divided by p^d.
    """
    values = np.asarray(values, dtype=complex)
    return _cube_transform(values, p, lambda c, axes: np.fft.fftn(c, axes=axes, norm="forward"))


def idft(coeffs, p: int) -> np.ndarray:
    """Inverse of :func:`dft`: ``f(x) = sum_xi c(xi) e_p(xi . x)``."""
    coeffs = np.asarray(coeffs, dtype=complex)
    return _cube_transform(coeffs, p, lambda c, axes: np.fft.ifftn(c, axes=axes, norm="forward"))


def naive_dft(values, p: int) -> np.ndarray:
    """O(N^2) reference transform straight from the definition."""
    from .space import digits

    values = np.asarray(values, dtype=complex)
    n = values.size
    d = dimension_of(n, p)
    pts = digits(np.arange(n), p, d)
    phase = (pts @ pts.T) % p
    return (np.conj(_roots(p)[phase]) @ values) / n


def negate_index(p: int, d: int) -> np.ndarray:
    """Index permutation sending xi to -xi."""
    return scale_index(p, d, -1)


def scale_index(p: int, d: int, s: int) -> np.ndarray:
    """Index permutation (or map, if s = 0 mod p) sending xi to s * xi."""
    from .space import digits, undigits

    dig = digits(np.arange(p**d), p, d)
    return undigits((dig * s) % p, p)


@dataclass(frozen=True)
class FourierCoefficients:
    values: np.ndarray
    p: int
    normalization: str = "expectation"

    @classmethod
    def of(cls, f, p: int) -> "FourierCoefficients":
        return cls(dft(f, p), p)

    def inverse(self) -> np.ndarray:
        return idft(self.values, self.p)

    def to_json(self) -> list[list[float]]:
        return [[float(z.real), float(z.imag)] for z in self.values]


# ---------------------------------------------------------------------------
# exact arithmetic in Z[zeta_p]


class CyclotomicInt:
    """``sum_a counts[a] * zeta_p**a`` with integer counts.

    Vectors differing by a constant represent the same number
    (``1 + zeta + ... + zeta**(p-1) = 0``); the canonical form has minimum
    entry 0.
    """

    __slots__ = ("counts", "p")

    def __init__(self, counts):
        c = [int(v) for v in counts]
        if len(c) < 2:
            raise ValueError("need p >= 2 coefficients")
        self.counts = tuple(c)
        self.p = len(c)

    @classmethod
    def from_exponents(cls, exps, p: int) -> "CyclotomicInt":
        """Sum of ``zeta**e`` over the given exponents."""
        return cls(np.bincount(np.asarray(exps, dtype=np.int64) % p, minlength=p))

    @classmethod
    def integer(cls, v: int, p: int) -> "CyclotomicInt":
        return cls([v] + [0] * (p - 1))

    def canonical(self) -> "CyclotomicInt":
        m = min(self.counts)
        return CyclotomicInt([c - m for c in self.counts])

    def __eq__(self, other):
        if not isinstance(other, CyclotomicInt):
            return NotImplemented
        return self.p == other.p and self.canonical().counts == other.canonical().counts

    def __hash__(self):
        return hash(self.canonical().counts)

    def __add__(self, other: "CyclotomicInt") -> "CyclotomicInt":
        return CyclotomicInt([a + b for a, b in zip(self.counts, other.counts)])

    def __mul__(self, other: "CyclotomicInt") -> "CyclotomicInt":
        p = self.p
        out = [0] * p
        for i, a in enumerate(self.counts):
            if a:
                for j, b in enumerate(other.counts):
                    out[(i + j) % p] += a * b
        return CyclotomicInt(out)

    def conjugate(self) -> "CyclotomicInt":
        c = self.counts
        return CyclotomicInt([c[(-a) % self.p] for a in range(self.p)])

    def rational_value(self) -> int | None:
        """The value as an integer if it lies in Z, else None."""
        c = self.canonical().counts
        if len(set(c[1:])) != 1:
            return None
        return c[0] - c[1]

    def norm_squared(self) -> int:
        """``|z|**2`` as an exact integer."""
        v = (self * self.conjugate()).rational_value()
        if v is None:
            raise ArithmeticError("z * conj(z) is not rational; counts are corrupt")
        return v

    def to_complex(self) -> complex:
        return complex(np.dot(np.asarray(self.counts, dtype=float), _roots(self.p)))

    def __repr__(self):
        return f"CyclotomicInt({list(self.counts)})"


def exact_character_sum(form, space=None) -> CyclotomicInt:
    """``sum_{x in W} zeta_p**phi(x)`` exactly, by tallying the values of phi."""
    space = form.domain if space is None else space
    counts = np.zeros(space.p, dtype=np.int64)
    for vals in form.iter_values(space):
        counts += np.bincount(vals, minlength=space.p)
    return CyclotomicInt(counts)
