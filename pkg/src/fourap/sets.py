"""Point sets in an affine space: generators, 4-AP detection and the set-file format.

A set file is a one-line JSON header followed by one canonical point index
per line::

    {"count":62,"density":0.496,"generator":"random","n":3,"p":5}
    0
    3
    ...
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .quadratic import QuadraticForm, random_form
from .space import AffineSpace, check_prime, digits, undigits

GENERATORS = ("random", "subspace", "quad-level-set", "ap-free-greedy", "union-subspaces")


@dataclass
class PointSet:
    """A subset of ``domain`` stored as a boolean mask in canonical order."""

    domain: AffineSpace
    mask: np.ndarray
    generator: str = "explicit"

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool).reshape(-1)
        if self.mask.size != self.domain.size:
            raise ValueError("mask length does not match the domain")

    @classmethod
    def from_indices(cls, domain: AffineSpace, indices, generator: str = "explicit") -> "PointSet":
        mask = np.zeros(domain.size, dtype=bool)
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= domain.size):
            raise ValueError("point index out of range")
        mask[idx] = True
        return cls(domain, mask, generator)

    @classmethod
    def from_points(cls, domain: AffineSpace, points, generator: str = "explicit") -> "PointSet":
        pts = np.asarray(points, dtype=np.int64).reshape(-1, domain.ambient_dim)
        return cls.from_indices(domain, domain.index_of(pts), generator)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    @property
    def density(self) -> float:
        return self.count / self.domain.size

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def restrict(self, sub: AffineSpace) -> "PointSet":
        idx = self.domain.index_of(sub.points())
        return PointSet(sub, self.mask[idx], self.generator)

    def header(self) -> dict:
        return {"p": self.domain.p, "n": self.domain.ambient_dim, "count": self.count,
                "density": self.density, "generator": self.generator}

    def dumps(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True, separators=(",", ":"))]
        lines += [str(int(i)) for i in self.indices]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "PointSet":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty set file")
        head = json.loads(lines[0])
        p, n = int(head["p"]), int(head["n"])
        check_prime(p)
        dom = AffineSpace.full(p, n)
        out = cls.from_indices(dom, [int(s) for s in lines[1:]], head.get("generator", "file"))
        if "count" in head and int(head["count"]) != out.count:
            raise ValueError(f"header count {head['count']} does not match {out.count} indices")
        return out

    @classmethod
    def load(cls, path) -> "PointSet":
        return cls.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# 4-term progressions


def _coeff_digits(domain: AffineSpace) -> np.ndarray:
    return digits(np.arange(domain.size), domain.p, domain.dim)


def progression_count(ps: PointSet, nontrivial: bool = True) -> int:
    """Number of pairs (x, h) with x + i h in the set for i = 0..3.

    Counts every ordered pair; with ``nontrivial`` the h = 0 pairs are dropped.
    """
    dom, p = ps.domain, ps.domain.p
    pts = _coeff_digits(dom)[ps.mask]
    if len(pts) == 0:
        return 0
    total = 0
    # enumerate x, x+h in A; then test the two later terms
    for x in pts:
        h = (pts - x[None, :]) % p
        ok = ps.mask[undigits((x + 2 * h) % p, p)] & ps.mask[undigits((x + 3 * h) % p, p)]
        total += int(np.count_nonzero(ok))
    return total - (ps.count if nontrivial else 0)


def is_ap_free(ps: PointSet) -> bool:
    return progression_count(ps) == 0


def _completes_progression(mask: np.ndarray, dig: np.ndarray, i: int, p: int) -> bool:
    """Would adding point ``i`` create a nontrivial 4-AP inside ``mask | {i}``?"""
    x = dig[i]
    members = dig[mask]
    if len(members) == 0:
        return False
    # i as the first term: members give x+h; i at position j in {0..3}, another member at position t.
    for j in range(4):
        for t in range(4):
            if t == j:
                continue
            # x_t = x + (t - j) h  =>  h = (x_t - x) / (t - j)
            inv = pow((t - j) % p, p - 2, p)
            h = ((members - x[None, :]) * inv) % p
            nz = np.any(h != 0, axis=1)
            ok = nz.copy()
            for s in range(4):
                if s in (j, t):
                    continue
                ok &= mask[undigits((x[None, :] + (s - j) * h) % p, p)]
            if np.any(ok):
                return True
    return False


AP_FREE_ORDERS = ("random", "index", "level-set")


def _greedy_pass(domain: AffineSpace, dig: np.ndarray, seq) -> np.ndarray:
    mask = np.zeros(domain.size, dtype=bool)
    for i in seq:
        if not _completes_progression(mask, dig, int(i), domain.p):
            mask[i] = True
    return mask


def ap_free_greedy(domain: AffineSpace, rng: np.random.Generator, order: str = "random",
                   restarts: int = 1) -> PointSet:
    """Greedy maximal 4-AP-free set.

    ``order`` is the scan order: ``"random"``, ``"index"`` (lexicographic in
    canonical order) or ``"level-set"`` (the zero set of a random full-rank
    quadratic first, each part shuffled). The largest of ``restarts``
    independent scans is kept.
    """
    if order not in AP_FREE_ORDERS:
        raise ValueError(f"unknown order {order!r}; choose from {', '.join(AP_FREE_ORDERS)}")
    dig = _coeff_digits(domain)
    best = None
    for _ in range(max(1, restarts)):
        if order == "index":
            seq = np.arange(domain.size)
        elif order == "level-set":
            zero = random_form(rng, domain, rank=domain.dim).values_on(domain) == 0
            seq = np.concatenate([rng.permutation(np.flatnonzero(zero)), rng.permutation(np.flatnonzero(~zero))])
        else:
            seq = rng.permutation(domain.size)
        mask = _greedy_pass(domain, dig, seq)
        if best is None or mask.sum() > best.sum():
            best = mask
    return PointSet(domain, best, "ap-free-greedy")


# ---------------------------------------------------------------------------
# generators


def random_set(domain: AffineSpace, alpha: float, rng: np.random.Generator) -> PointSet:
    return PointSet(domain, rng.random(domain.size) < alpha, "random")


def subspace_set(domain: AffineSpace, codim: int, rng: np.random.Generator) -> PointSet:
    """A random affine subspace of the given codimension."""
    if not 0 <= codim <= domain.dim:
        raise ValueError("codim out of range")
    sub = random_subspace(domain, codim, rng)
    return PointSet.from_points(domain, sub.points(), "subspace")


def random_subspace(domain: AffineSpace, codim: int, rng: np.random.Generator) -> AffineSpace:
    from .space import rank_mod

    k, p = domain.dim, domain.p
    while True:
        normals = rng.integers(0, p, (codim, k))
        if rank_mod(normals, p) == codim:
            break
    values = rng.integers(0, p, codim)
    coord = AffineSpace.from_constraints(p, normals, values, n=k)
    return domain.embed(coord)


def quad_level_set(domain: AffineSpace, rng: np.random.Generator, form: QuadraticForm | None = None,
                   value: int = 0, rank: int | None = None) -> PointSet:
    """``{x : phi(x) = value}``; a random form of full rank unless one is given."""
    if form is None:
        form = random_form(rng, domain, rank=domain.dim if rank is None else rank)
    return PointSet(domain, form.values_on(domain) == value % domain.p, "quad-level-set")


def union_subspaces(domain: AffineSpace, k: int, rng: np.random.Generator, codim: int = 1) -> PointSet:
    """Union of ``k`` random affine subspaces of the given codimension."""
    mask = np.zeros(domain.size, dtype=bool)
    for _ in range(k):
        mask |= subspace_set(domain, codim, rng).mask
    return PointSet(domain, mask, "union-subspaces")


def generate(name: str, p: int, n: int, rng: np.random.Generator, **kw) -> PointSet:
    """Dispatch by generator name (see ``GENERATORS``)."""
    dom = AffineSpace.full(p, n)
    if name == "random":
        return random_set(dom, float(kw.get("alpha", 0.5)), rng)
    if name == "subspace":
        return subspace_set(dom, int(kw.get("codim", 1)), rng)
    if name == "quad-level-set":
        return quad_level_set(dom, rng, value=int(kw.get("value", 0)), rank=kw.get("rank"))
    if name == "ap-free-greedy":
        return ap_free_greedy(dom, rng, kw.get("order") or "random", int(kw.get("restarts") or 1))
    if name == "union-subspaces":
        return union_subspaces(dom, int(kw.get("k", 2)), rng, int(kw.get("codim", 1)))
    raise ValueError(f"unknown generator {name!r}; choose from {', '.join(GENERATORS)}")
