"""Prime-field arithmetic and affine subspaces of F_p^n.

Points of an affine space ``W = w + span(b_0, ..., b_{k-1})`` are indexed
little-endian in their basis coefficients: index ``i`` has coefficient
digits ``c_j = (i // p**j) % p`` and is the point ``w + sum_j c_j b_j``.
Every dense array over a space in this package uses that order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

MAX_PRIME = 31
DEFAULT_MAX_POINTS = 2**24


class FieldError(ValueError):
    """Invalid field operation (zero inverse, mixed moduli, bad prime)."""


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % q for q in range(2, int(p**0.5) + 1))


def check_prime(p: int) -> int:
    """Validate a field characteristic and return it as an int."""
    if isinstance(p, bool) or int(p) != p:
        raise FieldError(f"p must be an integer, got {p!r}")
    p = int(p)
    if not is_prime(p) or p < 5:
        raise FieldError(f"p must be prime >= 5, got {p}")
    if p > MAX_PRIME:
        raise FieldError(f"p must be at most {MAX_PRIME}, got {p}")
    return p


def inv_mod(a: int, p: int) -> int:
    a %= p
    if a == 0:
        raise FieldError("inverse of zero")
    return pow(a, p - 2, p)


@dataclass(frozen=True)
class FieldElement:
    """An element of F_p. Arithmetic with plain ints coerces them into the field."""

    value: int
    p: int

    def __post_init__(self):
        object.__setattr__(self, "value", int(self.value) % self.p)

    def _coerce(self, other) -> "FieldElement":
        if isinstance(other, FieldElement):
            if other.p != self.p:
                raise FieldError(f"moduli differ: {self.p} vs {other.p}")
            return other
        if isinstance(other, (int, np.integer)):
            return FieldElement(int(other), self.p)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.value + other.value, self.p)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.value - other.value, self.p)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement(other.value - self.value, self.p)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.value * other.value, self.p)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value, self.p)

    def inverse(self) -> "FieldElement":
        return FieldElement(inv_mod(self.value, self.p), self.p)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} (mod {self.p})"


# ---------------------------------------------------------------------------
# linear algebra mod p


def row_reduce(a, p: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form of ``a`` over F_p.

    Returns:
        (R, pivots): R has the same shape as ``a``; ``pivots`` lists the
        pivot column of each nonzero row, so ``len(pivots)`` is the rank.
    """
    r = np.array(a, dtype=np.int64) % p
    if r.ndim != 2:
        raise ValueError("row_reduce expects a 2-d array")
    m, n = r.shape
    pivots: list[int] = []
    row = 0
    for col in range(n):
        if row == m:
            break
        nz = np.nonzero(r[row:, col])[0]
        if nz.size == 0:
            continue
        piv = row + nz[0]
        if piv != row:
            r[[row, piv]] = r[[piv, row]]
        r[row] = (r[row] * inv_mod(int(r[row, col]), p)) % p
        others = np.nonzero(r[:, col])[0]
        for i in others:
            if i != row:
                r[i] = (r[i] - r[i, col] * r[row]) % p
        pivots.append(col)
        row += 1
    return r, pivots


def rank_mod(a, p: int) -> int:
    a = np.asarray(a)
    if a.size == 0:
        return 0
    return len(row_reduce(a, p)[1])


def nullspace_mod(a, p: int, n: int | None = None) -> np.ndarray:
    """Basis (as rows) of ``{x : a @ x = 0}`` over F_p."""
    a = np.asarray(a, dtype=np.int64)
    if n is None:
        n = a.shape[1]
    if a.size == 0:
        return np.eye(n, dtype=np.int64)
    rref, pivots = row_reduce(a.reshape(-1, n), p)
    free = [j for j in range(n) if j not in pivots]
    basis = np.zeros((len(free), n), dtype=np.int64)
    for t, j in enumerate(free):
        basis[t, j] = 1
        for i, pc in enumerate(pivots):
            basis[t, pc] = (-rref[i, j]) % p
    return basis


def solve_mod(a, b, p: int) -> np.ndarray | None:
    """One solution of ``a @ x = b`` over F_p, or None if inconsistent."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64).reshape(-1, 1)
    m, n = a.shape
    rref, pivots = row_reduce(np.hstack([a, b]), p)
    if n in pivots:
        return None
    x = np.zeros(n, dtype=np.int64)
    for i, pc in enumerate(pivots):
        x[pc] = rref[i, n]
    return x


def inv_matrix_mod(a, p: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    k = a.shape[0]
    rref, pivots = row_reduce(np.hstack([a, np.eye(k, dtype=np.int64)]), p)
    if pivots[:k] != list(range(k)):
        raise FieldError("matrix is singular mod p")
    return rref[:, k:]


def batch_rank_mod(mats, p: int) -> np.ndarray:
    """Ranks over F_p of a stack of matrices with shape (batch, m, n)."""
    a = np.array(mats, dtype=np.int64) % p
    if a.ndim != 3:
        raise ValueError("expected a (batch, m, n) array")
    batch, m, n = a.shape
    inv_table = np.zeros(p, dtype=np.int64)
    inv_table[1:] = [inv_mod(v, p) for v in range(1, p)]
    rank = np.zeros(batch, dtype=np.int64)
    bidx = np.arange(batch)
    rows = np.arange(m)
    for col in range(n):
        active = rank < m
        # first nonzero entry at or below the current rank row
        nz = (a[:, :, col] != 0) & (rows[None, :] >= rank[:, None]) & active[:, None]
        has = nz.any(axis=1)
        if not has.any():
            continue
        piv = np.argmax(nz, axis=1)
        sel = bidx[has]
        r_sel = rank[has]
        p_sel = piv[has]
        # swap pivot row into position rank
        tmp = a[sel, r_sel].copy()
        a[sel, r_sel] = a[sel, p_sel]
        a[sel, p_sel] = tmp
        prow = a[sel, r_sel]
        prow = (prow * inv_table[prow[:, col]][:, None]) % p
        a[sel, r_sel] = prow
        factors = a[sel, :, col].copy()
        factors[np.arange(sel.size), r_sel] = 0
        a[sel] = (a[sel] - factors[:, :, None] * prow[:, None, :]) % p
        rank[has] += 1
    return rank


def digits(indices, p: int, k: int) -> np.ndarray:
    """Little-endian base-p digits of each index, shape (len, k)."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    powers = p ** np.arange(k, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % p


def undigits(dig, p: int) -> np.ndarray:
    dig = np.asarray(dig, dtype=np.int64)
    k = dig.shape[-1]
    return dig @ (p ** np.arange(k, dtype=np.int64))


# ---------------------------------------------------------------------------
# affine spaces


class AffineSpace:
    """A coset ``translate + span(basis)`` inside F_p^n.

    Immutable. ``basis`` is a (dim, n) array of linearly independent rows.
    """

    def __init__(self, p: int, translate, basis=None, *, check: bool = True,
                 max_points: int = DEFAULT_MAX_POINTS):
        p = check_prime(p) if check else int(p)
        w = np.asarray(translate, dtype=np.int64).reshape(-1) % p
        n = w.size
        if basis is None:
            b = np.zeros((0, n), dtype=np.int64)
        else:
            b = np.asarray(basis, dtype=np.int64)
            b = (b.reshape(-1, n) if n else b.reshape(b.shape[0] if b.ndim == 2 else 0, 0)) % p
        if check:
            if rank_mod(b, p) != b.shape[0]:
                raise ValueError("basis vectors are not linearly independent")
            if p ** b.shape[0] > max_points:
                raise ValueError(f"|W| = {p}^{b.shape[0]} exceeds the cap of {max_points} points")
        w.setflags(write=False)
        b.setflags(write=False)
        self.p = p
        self.translate = w
        self.basis = b

    @classmethod
    def full(cls, p: int, n: int, **kw) -> "AffineSpace":
        return cls(p, np.zeros(n, dtype=np.int64), np.eye(n, dtype=np.int64), **kw)

    @classmethod
    def point_space(cls, p: int, x) -> "AffineSpace":
        return cls(p, x, None)

    @classmethod
    def from_constraints(cls, p: int, normals, values, n: int | None = None) -> "AffineSpace | None":
        """Solution set of ``normals @ x = values``, or None when empty."""
        normals = np.asarray(normals, dtype=np.int64)
        if n is None:
            n = normals.shape[1]
        normals = normals.reshape(-1, n)
        values = np.asarray(values, dtype=np.int64).reshape(-1)
        if normals.shape[0] == 0:
            return cls.full(p, n)
        x0 = solve_mod(normals, values, p)
        if x0 is None:
            return None
        return cls(p, x0, nullspace_mod(normals, p, n))

    # -- basic attributes -------------------------------------------------

    @property
    def ambient_dim(self) -> int:
        return self.translate.size

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def size(self) -> int:
        return self.p ** self.dim

    def __len__(self) -> int:
        return self.size

    def codim_in(self, parent: "AffineSpace") -> int:
        if not parent.contains_space(self):
            raise ValueError("space is not contained in the parent")
        return parent.dim - self.dim

    def __repr__(self):
        return (f"AffineSpace(p={self.p}, n={self.ambient_dim}, dim={self.dim}, "
                f"translate={self.translate.tolist()})")

    # -- point <-> index ---------------------------------------------------

    def point(self, i: int) -> np.ndarray:
        if not 0 <= i < self.size:
            raise IndexError(i)
        c = digits([i], self.p, self.dim)[0]
        return (self.translate + c @ self.basis) % self.p

    def points(self, start: int = 0, stop: int | None = None) -> np.ndarray:
        """Points with canonical indices in [start, stop), shape (count, n)."""
        stop = self.size if stop is None else min(stop, self.size)
        c = digits(np.arange(start, stop), self.p, self.dim)
        return (self.translate[None, :] + c @ self.basis) % self.p

    def enumerate(self) -> Iterator[tuple[int, ...]]:
        chunk = 1 << 16
        for start in range(0, self.size, chunk):
            for row in self.points(start, start + chunk):
                yield tuple(int(v) for v in row)

    @cached_property
    def _coord_map(self) -> tuple[list[int], np.ndarray]:
        if self.dim == 0:
            return [], np.zeros((0, 0), dtype=np.int64)
        _, pivots = row_reduce(self.basis, self.p)
        sub = self.basis[:, pivots]
        return pivots, inv_matrix_mod(sub, self.p)

    def coordinates(self, x) -> np.ndarray:
        """Basis coefficients of the rows of ``x`` (shape (m, n) or (n,)).

        Raises ValueError if some row is not in the space.
        """
        x = np.asarray(x, dtype=np.int64)
        single = x.ndim == 1
        x = x.reshape(-1, self.ambient_dim) % self.p
        pivots, inv = self._coord_map
        diff = (x - self.translate[None, :]) % self.p
        c = (diff[:, pivots] @ inv) % self.p if self.dim else np.zeros((x.shape[0], 0), np.int64)
        if not np.array_equal((c @ self.basis) % self.p, diff):
            raise ValueError("point not in space")
        return c[0] if single else c

    def index(self, x) -> int:
        return int(undigits(self.coordinates(np.asarray(x).reshape(-1)), self.p))

    def index_of(self, x) -> np.ndarray:
        return undigits(self.coordinates(np.asarray(x).reshape(-1, self.ambient_dim)), self.p)

    def contains(self, x) -> bool:
        try:
            self.coordinates(np.asarray(x).reshape(-1))
        except ValueError:
            return False
        return True

    def contains_space(self, other: "AffineSpace") -> bool:
        if other.p != self.p or other.ambient_dim != self.ambient_dim:
            return False
        if not self.contains(other.translate):
            return False
        if other.dim == 0:
            return True
        stacked = np.vstack([self.basis, other.basis])
        return rank_mod(stacked, self.p) == self.dim

    # -- equality as point sets -------------------------------------------

    @cached_property
    def _canonical(self) -> tuple:
        if self.dim:
            rref, pivots = row_reduce(self.basis, self.p)
            w = self.translate.copy()
            for i, pc in enumerate(pivots):
                w = (w - w[pc] * rref[i]) % self.p
        else:
            rref, w = self.basis, self.translate
        return (self.p, self.ambient_dim, tuple(map(tuple, rref.tolist())), tuple(w.tolist()))

    def __eq__(self, other):
        if not isinstance(other, AffineSpace):
            return NotImplemented
        return self._canonical == other._canonical

    def __hash__(self):
        return hash(self._canonical)

    # -- coordinates of subspaces ------------------------------------------

    def embed(self, coord_space: "AffineSpace") -> "AffineSpace":
        """Map an affine subspace of coefficient space F_p^dim into this space."""
        if coord_space.ambient_dim != self.dim:
            raise ValueError("coordinate space has the wrong ambient dimension")
        w = (self.translate + coord_space.translate @ self.basis) % self.p
        b = (coord_space.basis @ self.basis) % self.p
        return AffineSpace(self.p, w, b, check=False)

    def coordinate_subspace(self, sub: "AffineSpace") -> "AffineSpace":
        """Inverse of :meth:`embed`: describe ``sub`` in this space's coefficients."""
        if not self.contains_space(sub):
            raise ValueError("not a subspace")
        w = self.coordinates(sub.translate)
        if sub.dim:
            b = self.coordinates(((sub.basis + self.translate[None, :]) % self.p))
        else:
            b = None
        return AffineSpace(self.p, w, b, check=False)

    def rebase(self, change, shift=None) -> "AffineSpace":
        """Same point set, new basis ``change @ basis`` and translate moved by ``shift @ basis``."""
        change = np.asarray(change, dtype=np.int64)
        b = (change @ self.basis) % self.p
        w = self.translate
        if shift is not None:
            w = (w + np.asarray(shift, dtype=np.int64) @ self.basis) % self.p
        out = AffineSpace(self.p, w, b, check=False)
        if rank_mod(b, self.p) != self.dim:
            raise ValueError("change of basis is singular")
        return out

    def linear_functional(self, normal) -> tuple[np.ndarray, int]:
        """Coefficients ``a_j = <normal, b_j>`` and offset ``<normal, w>``."""
        normal = np.asarray(normal, dtype=np.int64).reshape(-1) % self.p
        return (self.basis @ normal) % self.p, int(normal @ self.translate) % self.p

    def intersect_with_hyperplane(self, normal, value: int) -> "AffineSpace | None":
        """``W ∩ {x : <normal, x> = value}``; None stands for the empty set."""
        a, c0 = self.linear_functional(normal)
        value = int(value) % self.p
        nz = np.nonzero(a)[0]
        if nz.size == 0:
            return self if c0 == value else None
        j0 = int(nz[0])
        inv = inv_mod(int(a[j0]), self.p)
        t = ((value - c0) * inv) % self.p
        w = (self.translate + t * self.basis[j0]) % self.p
        rest = [j for j in range(self.dim) if j != j0]
        b = (self.basis[rest] - ((a[rest] * inv) % self.p)[:, None] * self.basis[j0][None, :]) % self.p
        return AffineSpace(self.p, w, b, check=False)

    def radical_coords(self, matrix) -> np.ndarray:
        """Rows spanning ``{u : u^T B M B^T = 0}`` in basis coefficients."""
        m = np.asarray(matrix, dtype=np.int64) % self.p
        g = (self.basis @ m @ self.basis.T) % self.p
        return nullspace_mod(g, self.p, self.dim)

    def kernel_subspace(self, matrix) -> "AffineSpace":
        """``w + ker(M restricted to the homogeneous part)``.

        ``matrix`` is a symmetric n x n matrix in ambient coordinates.
        """
        null = self.radical_coords(matrix)
        return AffineSpace(self.p, self.translate, (null @ self.basis) % self.p, check=False)

    def cosets(self, sub_coords) -> list["AffineSpace"]:
        """Cosets of the linear span of ``sub_coords`` (rows in basis coefficients).

        Cosets are ordered by their complement coefficients, little-endian.
        """
        if self.dim == 0:
            return [self]
        sub_coords = np.asarray(sub_coords, dtype=np.int64).reshape(-1, self.dim) % self.p
        _, pivots = row_reduce(sub_coords, self.p) if sub_coords.shape[0] else (None, [])
        comp = [j for j in range(self.dim) if j not in pivots]
        sub_amb = (sub_coords @ self.basis) % self.p
        out = []
        for i in range(self.p ** len(comp)):
            c = np.zeros(self.dim, dtype=np.int64)
            if comp:
                c[comp] = digits([i], self.p, len(comp))[0]
            w = (self.translate + c @ self.basis) % self.p
            out.append(AffineSpace(self.p, w, sub_amb, check=False))
        return out

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {"p": self.p, "ambient_dim": self.ambient_dim,
                "basis": self.basis.tolist(), "translate": self.translate.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AffineSpace":
        n = d["ambient_dim"]
        basis = d["basis"] if d["basis"] else np.zeros((0, n), dtype=np.int64)
        return cls(d["p"], d["translate"], basis)


def span_contains(rows: Sequence, v, p: int) -> bool:
    rows = np.asarray(rows, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64).reshape(1, -1)
    if rows.size == 0:
        return not np.any(v % p)
    return rank_mod(np.vstack([rows, v]), p) == rank_mod(rows, p)
