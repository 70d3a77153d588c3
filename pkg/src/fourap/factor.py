"""Factors (finite partitions), conditional expectation, quadratic factors.

A :class:`Factor` stores a dense ``atom_of`` array over the canonical point
order of its domain. Quadratic factors partition by the level sets of
``Phi(x) = (phi_1(x), ..., phi_d(x))``; local quadratic factors glue a
quadratic factor onto each piece of a partition into affine subspaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .functions import SpaceFunction
from .quadratic import QuadraticForm
from .space import AffineSpace, batch_rank_mod, digits, undigits

DEFAULT_COMPLEXITY_CAP = 8
MEASURABLE_TOL = 1e-12


class NotMeasurableError(ValueError):
    def __init__(self, atom: int, spread: float):
        super().__init__(f"function is not constant on atom {atom} (spread {spread:.3g})")
        self.atom = atom
        self.spread = spread


class ComplexityCapError(ValueError):
    pass


class Factor:
    """A partition of the points ``0..size-1`` of a domain into atoms."""

    def __init__(self, domain: AffineSpace, atom_of, atom_count: int | None = None):
        a = np.asarray(atom_of, dtype=np.int64).reshape(-1)
        if a.size != domain.size:
            raise ValueError("atom_of has the wrong length")
        if atom_count is None:
            atom_count = int(a.max()) + 1 if a.size else 0
        if a.size and (a.min() < 0 or a.max() >= atom_count):
            raise ValueError("atom ids out of range")
        a.setflags(write=False)
        self.domain = domain
        self.atom_of = a
        self.atom_count = atom_count

    @classmethod
    def from_labels(cls, domain: AffineSpace, labels) -> "Factor":
        """Relabel arbitrary integer labels densely, preserving their order."""
        uniq, inv = np.unique(np.asarray(labels).reshape(-1), return_inverse=True)
        return cls(domain, inv, len(uniq))

    @classmethod
    def trivial(cls, domain: AffineSpace) -> "Factor":
        return cls(domain, np.zeros(domain.size, dtype=np.int64), 1)

    @classmethod
    def discrete(cls, domain: AffineSpace) -> "Factor":
        return cls(domain, np.arange(domain.size), domain.size)

    @cached_property
    def atom_sizes(self) -> np.ndarray:
        return np.bincount(self.atom_of, minlength=self.atom_count)

    def is_dense(self) -> bool:
        return bool(np.all(self.atom_sizes > 0))

    def refines(self, other: "Factor") -> bool:
        """True iff every atom of ``other`` is a union of atoms of ``self``."""
        if other.atom_of.size != self.atom_of.size:
            return False
        pairs = self.atom_of * other.atom_count + other.atom_of
        return np.unique(pairs).size == np.unique(self.atom_of).size

    def same_partition(self, other: "Factor") -> bool:
        return self.refines(other) and other.refines(self)

    def is_measurable(self, f: SpaceFunction, tol: float = MEASURABLE_TOL) -> bool:
        return _max_spread(f.values, self.atom_of, self.atom_count)[0] <= tol

    def to_dict(self) -> dict:
        return {"atom_count": self.atom_count, "atom_of": self.atom_of.tolist()}


def _atom_means(values: np.ndarray, atom_of: np.ndarray, count: int) -> np.ndarray:
    sizes = np.bincount(atom_of, minlength=count)
    re = np.bincount(atom_of, weights=values.real, minlength=count)
    im = np.bincount(atom_of, weights=values.imag, minlength=count)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(sizes > 0, (re + 1j * im) / np.maximum(sizes, 1), 0)


def _max_spread(values: np.ndarray, atom_of: np.ndarray, count: int) -> tuple[float, int]:
    means = _atom_means(values, atom_of, count)
    dev = np.abs(values - means[atom_of])
    if dev.size == 0:
        return 0.0, -1
    worst = int(np.argmax(dev))
    return float(dev[worst]), int(atom_of[worst])


def conditional_expectation(f: SpaceFunction, B: Factor) -> SpaceFunction:
    """Replace ``f`` by its mean on each atom of ``B``."""
    means = _atom_means(f.values, B.atom_of, B.atom_count)
    return SpaceFunction(f.domain, means[B.atom_of], bounded=f.bounded)


def energy(f: SpaceFunction, B: Factor) -> float:
    """``||E(f|B)||_{L^2}^2``."""
    g = conditional_expectation(f, B).values
    return float(np.mean(np.abs(g) ** 2))


def join(B: Factor, B2: Factor) -> Factor:
    """Common refinement whose atoms are the nonempty intersections."""
    if B.atom_of.size != B2.atom_of.size:
        raise ValueError("factors live on different domains")
    return Factor.from_labels(B.domain, B.atom_of * B2.atom_count + B2.atom_of)


# ---------------------------------------------------------------------------
# quadratic factors


class RankCheck(NamedTuple):
    passed: bool
    witness: tuple[int, ...] | None
    witness_rank: int | None
    min_rank: int | None


def projective_points(p: int, d: int) -> np.ndarray:
    """One representative per line of F_p^d, first nonzero coordinate 1."""
    blocks = []
    for lead in range(d):
        tail = d - lead - 1
        rest = digits(np.arange(p**tail), p, tail)
        block = np.zeros((p**tail, d), dtype=np.int64)
        block[:, lead] = 1
        block[:, lead + 1:] = rest
        blocks.append(block)
    if not blocks:
        return np.zeros((0, d), dtype=np.int64)
    return np.vstack(blocks)


def combination_ranks(grams: np.ndarray, p: int, lambdas: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """Rank of ``sum_i lambda_i G_i`` for each row of ``lambdas``."""
    out = np.empty(len(lambdas), dtype=np.int64)
    for s in range(0, len(lambdas), chunk):
        lam = lambdas[s:s + chunk]
        mats = np.tensordot(lam, grams, axes=([1], [0])) % p
        out[s:s + chunk] = batch_rank_mod(mats, p)
    return out


class QuadraticFactor:
    """The factor cut out by quadratic functions ``phi_1..phi_d`` on a common domain."""

    def __init__(self, forms: Sequence[QuadraticForm], domain: AffineSpace | None = None,
                 claimed_rank: int | None = None):
        forms = tuple(forms)
        if domain is None:
            if not forms:
                raise ValueError("a complexity-0 factor needs an explicit domain")
            domain = forms[0].domain
        for f in forms:
            if f.domain != domain:
                raise ValueError("all forms must share the factor's domain")
        # re-home forms on this exact domain object so orderings agree
        self.forms = tuple(f if f.domain is domain else QuadraticForm(f.M, f.r, f.c, domain) for f in forms)
        self.domain = domain
        self.claimed_rank = claimed_rank

    @property
    def d(self) -> int:
        return len(self.forms)

    complexity = d

    @property
    def p(self) -> int:
        return self.domain.p

    def __repr__(self):
        return f"QuadraticFactor(d={self.d}, dim={self.domain.dim}, claimed_rank={self.claimed_rank})"

    @cached_property
    def config_values(self) -> np.ndarray:
        """``Phi`` evaluated at every point, shape (|W|, d)."""
        if self.d == 0:
            return np.zeros((self.domain.size, 0), dtype=np.int64)
        return np.stack([f.values_on() for f in self.forms], axis=1)

    @cached_property
    def config_index(self) -> np.ndarray:
        """Canonical index of ``Phi(x)`` in F_p^d for every point."""
        return undigits(self.config_values, self.p) if self.d else np.zeros(self.domain.size, np.int64)

    @cached_property
    def factor(self) -> Factor:
        return Factor.from_labels(self.domain, self.config_index)

    def configuration_map(self, x) -> tuple[int, ...]:
        return tuple(f.evaluate(x) for f in self.forms)

    @cached_property
    def grams(self) -> np.ndarray:
        k = self.domain.dim
        if self.d == 0:
            return np.zeros((0, k, k), dtype=np.int64)
        return np.stack([f.gram for f in self.forms])

    def rank_separation_check(self, r: int, cap: int = DEFAULT_COMPLEXITY_CAP) -> RankCheck:
        """Check ``rank(sum lambda_i phi_i) >= r`` for all nonzero lambda.

        On failure the witness is a minimum-rank combination.
        """
        if self.d > cap:
            raise ComplexityCapError(f"complexity {self.d} exceeds the cap {cap}")
        if self.d == 0:
            return RankCheck(True, None, None, None)
        lams = projective_points(self.p, self.d)
        ranks = combination_ranks(self.grams, self.p, lams)
        j = int(np.argmin(ranks))
        lo = int(ranks[j])
        if lo >= r:
            return RankCheck(True, None, None, lo)
        return RankCheck(False, tuple(int(v) for v in lams[j]), lo, lo)

    def min_combination_rank(self, cap: int = DEFAULT_COMPLEXITY_CAP) -> int | None:
        return self.rank_separation_check(0, cap).min_rank

    def verified_rank(self, r: int | None = None) -> int:
        """Raise unless the claimed (or given) rank level holds."""
        r = self.claimed_rank if r is None else r
        if r is None:
            raise ValueError("no rank level to verify")
        chk = self.rank_separation_check(r)
        if not chk.passed:
            raise RankSeparationError(r, chk)
        return r

    def restrict(self, sub: AffineSpace) -> "QuadraticFactor":
        return QuadraticFactor([f.restrict(sub) for f in self.forms], domain=sub)

    def join(self, other: "QuadraticFactor") -> "QuadraticFactor":
        if other.domain != self.domain:
            raise ValueError("factors live on different domains")
        return QuadraticFactor(self.forms + other.forms, domain=self.domain)

    def to_dict(self) -> dict:
        return {"domain": self.domain.to_dict(), "forms": [f.to_dict() for f in self.forms],
                "claimed_rank": self.claimed_rank}


class RankSeparationError(ValueError):
    def __init__(self, r: int, check: RankCheck):
        super().__init__(f"rank separation fails at level {r}: lambda={check.witness} has rank {check.witness_rank}")
        self.check = check


def rank_separation_check(Q: QuadraticFactor, r: int, cap: int = DEFAULT_COMPLEXITY_CAP) -> RankCheck:
    return Q.rank_separation_check(r, cap)


def configuration_map(Q: QuadraticFactor, x) -> tuple[int, ...]:
    return Q.configuration_map(x)


@dataclass(frozen=True)
class FactorFunction:
    """A function on configuration space F_p^d, canonical order."""

    values: np.ndarray
    p: int
    d: int

    def pullback(self, Q: QuadraticFactor) -> SpaceFunction:
        return SpaceFunction(Q.domain, self.values[Q.config_index])

    def is_real(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(np.imag(self.values)) <= tol))

    def mean(self) -> complex:
        return complex(np.mean(self.values))


def push_to_configuration(f: SpaceFunction, Q: QuadraticFactor, tol: float = MEASURABLE_TOL) -> FactorFunction:
    """The function on F_p^d with ``f = ff o Phi``; zero on unoccupied points."""
    n_cfg = Q.p ** Q.d
    spread, atom = _max_spread(f.values, Q.config_index, n_cfg)
    if spread > tol:
        raise NotMeasurableError(atom, spread)
    vals = _atom_means(f.values, Q.config_index, n_cfg)
    return FactorFunction(np.asarray(vals, dtype=complex), Q.p, Q.d)


# ---------------------------------------------------------------------------
# local quadratic factors


class LocalQuadraticFactor:
    """Pieces ``W'`` partitioning ``W``, each carrying a quadratic factor on ``W'``."""

    def __init__(self, domain: AffineSpace, pieces: Sequence[tuple[AffineSpace, QuadraticFactor]]):
        self.domain = domain
        self.pieces = [(sp, q) for sp, q in pieces]
        for sp, q in self.pieces:
            if q.domain is not sp and q.domain != sp:
                raise ValueError("piece factor lives on a different space")

    @classmethod
    def trivial(cls, domain: AffineSpace) -> "LocalQuadraticFactor":
        return cls(domain, [(domain, QuadraticFactor([], domain=domain))])

    def __len__(self):
        return len(self.pieces)

    @cached_property
    def piece_indices(self) -> list[np.ndarray]:
        """For each piece, the indices in ``domain`` of its points (piece order)."""
        if len(self.pieces) == 1 and self.pieces[0][0] is self.domain:
            return [np.arange(self.domain.size)]
        return [self.domain.index_of(sp.points()) for sp, _ in self.pieces]

    @cached_property
    def piece_of(self) -> np.ndarray:
        out = np.full(self.domain.size, -1, dtype=np.int64)
        for i, idx in enumerate(self.piece_indices):
            if np.any(out[idx] >= 0):
                raise ValueError("pieces overlap")
            out[idx] = i
        if np.any(out < 0):
            raise ValueError("pieces do not cover the domain")
        return out

    @cached_property
    def b1(self) -> Factor:
        return Factor(self.domain, self.piece_of, len(self.pieces))

    @cached_property
    def b2(self) -> Factor:
        labels = np.empty(self.domain.size, dtype=np.int64)
        for (_, q), idx in zip(self.pieces, self.piece_indices):
            labels[idx] = q.factor.atom_of
        width = max(q.factor.atom_count for _, q in self.pieces)
        return Factor.from_labels(self.domain, self.piece_of * width + labels)

    @property
    def codim(self) -> int:
        return max(self.domain.dim - sp.dim for sp, _ in self.pieces)

    @property
    def complexity(self) -> int:
        return max(q.d for _, q in self.pieces)

    def rank_ok(self, r: int) -> bool:
        return all(q.rank_separation_check(r).passed for _, q in self.pieces)

    def validate(self) -> None:
        """Check the partition and that every piece lies inside the domain."""
        for sp, _ in self.pieces:
            if not self.domain.contains_space(sp):
                raise ValueError("piece outside the domain")
        _ = self.piece_of

    def to_dict(self) -> dict:
        return {"domain": self.domain.to_dict(),
                "pieces": [{"space": sp.to_dict(), "forms": [f.to_dict() for f in q.forms]}
                           for sp, q in self.pieces]}
