"""Quadratic functions ``phi(x) = x^T M x + r^T x + c`` on affine spaces over F_p."""

from __future__ import annotations

from functools import cached_property
from typing import Iterator, Mapping, Sequence

import numpy as np

from .space import AffineSpace, inv_mod, nullspace_mod, rank_mod, solve_mod
from .transform import CyclotomicInt, exact_character_sum, roots_of_unity


class QuadraticForm:
    """A quadratic function stored in ambient coordinates, with a domain.

    ``M`` is symmetric. The rank is that of the homogeneous part expressed
    in the domain's basis, ``B M B^T``.
    """

    def __init__(self, M, r=None, c: int = 0, domain: AffineSpace | None = None, p: int | None = None):
        M = np.asarray(M, dtype=np.int64)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("M must be square")
        n = M.shape[0]
        if domain is None:
            if p is None:
                raise ValueError("give a domain or a prime p")
            domain = AffineSpace.full(p, n)
        p = domain.p
        if domain.ambient_dim != n:
            raise ValueError("M does not match the domain's ambient dimension")
        M = M % p
        if not np.array_equal(M, M.T):
            raise ValueError("M must be symmetric")
        r = np.zeros(n, dtype=np.int64) if r is None else np.asarray(r, dtype=np.int64).reshape(n) % p
        M.setflags(write=False)
        r.setflags(write=False)
        self.M = M
        self.r = r
        self.c = int(c) % p
        self.domain = domain
        self.p = p

    @classmethod
    def from_monomials(cls, quad: Mapping[tuple[int, int], int], linear=None, c: int = 0,
                       *, p: int, n: int, domain: AffineSpace | None = None) -> "QuadraticForm":
        """Build from ``{(i, j): coeff}`` meaning ``coeff * x_i * x_j``.

        Off-diagonal coefficients are split evenly using 2^{-1} mod p.
        """
        half = inv_mod(2, p)
        M = np.zeros((n, n), dtype=np.int64)
        for (i, j), a in quad.items():
            if i == j:
                M[i, i] += a
            else:
                M[i, j] += a * half
                M[j, i] += a * half
        return cls(M % p, linear, c, domain=domain, p=p)

    @classmethod
    def constant(cls, c: int, domain: AffineSpace) -> "QuadraticForm":
        n = domain.ambient_dim
        return cls(np.zeros((n, n), dtype=np.int64), None, c, domain)

    @classmethod
    def from_coordinates(cls, G, lin, c: int, domain: AffineSpace) -> "QuadraticForm":
        """The form on ``domain`` whose :meth:`coordinate_form` is ``(G, lin, c)``."""
        from .space import inv_matrix_mod, row_reduce

        p, n, k = domain.p, domain.ambient_dim, domain.dim
        G = np.asarray(G, dtype=np.int64) % p
        lin = np.asarray(lin, dtype=np.int64).reshape(k) % p
        M = _lift_gram(G, domain)
        r = np.zeros(n, dtype=np.int64)
        w = domain.translate
        if k:
            _, piv = row_reduce(domain.basis, p)
            target = (lin - domain.basis @ (2 * M @ w)) % p
            # B r = target with r supported on the pivot columns
            r[piv] = (inv_matrix_mod(domain.basis[:, piv], p) @ target) % p
        c_amb = (int(c) - int(w @ M @ w) - int(r @ w)) % p
        return cls(M, r, c_amb, domain)

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def __repr__(self):
        return f"QuadraticForm(p={self.p}, M={self.M.tolist()}, r={self.r.tolist()}, c={self.c})"

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, x) -> int:
        x = np.asarray(x, dtype=np.int64).reshape(-1)
        return int((x @ self.M @ x + self.r @ x + self.c) % self.p)

    def __call__(self, x) -> int:
        return self.evaluate(x)

    def values(self, points) -> np.ndarray:
        """Values at the rows of ``points``."""
        X = np.asarray(points, dtype=np.int64)
        return ((((X @ self.M) % self.p) * X).sum(axis=1) + X @ self.r + self.c) % self.p

    def iter_values(self, space: AffineSpace | None = None, chunk: int = 1 << 18) -> Iterator[np.ndarray]:
        space = self.domain if space is None else space
        for start in range(0, space.size, chunk):
            yield self.values(space.points(start, start + chunk))

    def values_on(self, space: AffineSpace | None = None) -> np.ndarray:
        """Values over ``space`` (default: the domain) in canonical order."""
        space = self.domain if space is None else space
        if space.size <= 1 << 18:
            return self.values(space.points())
        return np.concatenate(list(self.iter_values(space)))

    # -- coordinates ---------------------------------------------------------

    @cached_property
    def gram(self) -> np.ndarray:
        """Homogeneous part in domain-basis coordinates, ``B M B^T``."""
        B = self.domain.basis
        g = (B @ self.M @ B.T) % self.p
        g.setflags(write=False)
        return g

    def coordinate_form(self) -> "QuadraticForm":
        """The same function pulled back to the domain's coefficient space F_p^dim."""
        B, w = self.domain.basis, self.domain.translate
        lin = (B @ ((2 * self.M @ w + self.r) % self.p)) % self.p
        return QuadraticForm(self.gram, lin, self.evaluate(w), p=self.p)

    @cached_property
    def rank(self) -> int:
        return rank_mod(self.gram, self.p)

    def restrict(self, sub: AffineSpace) -> "QuadraticForm":
        if not self.domain.contains_space(sub):
            raise ValueError("subspace is not contained in the domain")
        return QuadraticForm(self.M, self.r, self.c, domain=sub)

    def linear_part_in_image(self) -> bool:
        """Whether the linear part (in domain coordinates) lies in the image of the Gram matrix."""
        cf = self.coordinate_form()
        if self.domain.dim == 0:
            return True
        return solve_mod(cf.M, cf.r, self.p) is not None

    # -- algebra -------------------------------------------------------------

    def _same_domain(self, other: "QuadraticForm"):
        if self.domain != other.domain:
            raise ValueError("forms live on different domains")

    def __add__(self, other: "QuadraticForm") -> "QuadraticForm":
        self._same_domain(other)
        return QuadraticForm(self.M + other.M, self.r + other.r, self.c + other.c, self.domain)

    def __sub__(self, other: "QuadraticForm") -> "QuadraticForm":
        self._same_domain(other)
        return QuadraticForm(self.M - other.M, self.r - other.r, self.c - other.c, self.domain)

    def scale(self, lam: int) -> "QuadraticForm":
        return QuadraticForm(self.M * lam, self.r * lam, self.c * lam, self.domain)

    def __neg__(self):
        return self.scale(-1)

    # -- character sums ------------------------------------------------------

    def character_mean(self) -> complex:
        """``E_{x in W} e_p(phi(x))`` in floating point."""
        counts = np.zeros(self.p, dtype=np.int64)
        for vals in self.iter_values():
            counts += np.bincount(vals, minlength=self.p)
        return complex(counts @ roots_of_unity(self.p)) / self.domain.size

    def exact_sum(self) -> CyclotomicInt:
        return exact_character_sum(self)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {"M": self.M.tolist(), "r": self.r.tolist(), "c": self.c}

    @classmethod
    def from_dict(cls, d: dict, domain: AffineSpace) -> "QuadraticForm":
        return cls(d["M"], d["r"], d["c"], domain)


def combination(forms: Sequence[QuadraticForm], lambdas) -> QuadraticForm:
    """``sum_i lambdas[i] * forms[i]`` on their common domain."""
    if not forms:
        raise ValueError("empty combination")
    dom = forms[0].domain
    n, p = forms[0].n, forms[0].p
    M = np.zeros((n, n), dtype=np.int64)
    r = np.zeros(n, dtype=np.int64)
    c = 0
    for lam, f in zip(lambdas, forms):
        if f.domain != dom:
            raise ValueError("forms live on different domains")
        M += int(lam) * f.M
        r += int(lam) * f.r
        c += int(lam) * f.c
    return QuadraticForm(M % p, r % p, c % p, dom)


def evaluate(phi: QuadraticForm, x) -> int:
    return phi.evaluate(x)


def restrict(phi: QuadraticForm, sub: AffineSpace) -> QuadraticForm:
    return phi.restrict(sub)


def quad_rank(phi: QuadraticForm) -> int:
    return phi.rank


def gauss_sum_magnitude(phi: QuadraticForm, exact: bool = False) -> float:
    """``|E_{x in W} e_p(phi(x))|``, by direct summation or via Z[zeta_p]."""
    if exact:
        return float(np.sqrt(phi.exact_sum().norm_squared())) / phi.domain.size
    return abs(phi.character_mean())


def gauss_bound(phi: QuadraticForm) -> float:
    """The rank bound ``p**(-rank/2)``."""
    return float(phi.p) ** (-phi.rank / 2)


# ---------------------------------------------------------------------------
# closed-form quadratic exponential sums


def diagonalize(A, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Congruence diagonalization of a symmetric matrix over F_p, p odd.

    Returns ``(D, S)`` with ``S`` invertible and ``S^T A S = diag(D)``.
    """
    A = np.array(A, dtype=np.int64) % p
    m = A.shape[0]
    S = np.eye(m, dtype=np.int64)

    def apply(E):
        nonlocal A, S
        A = (E.T @ A @ E) % p
        S = (S @ E) % p

    for i in range(m):
        if A[i, i] == 0:
            diag = [j for j in range(i + 1, m) if A[j, j] != 0]
            if diag:
                E = np.eye(m, dtype=np.int64)
                E[:, [i, diag[0]]] = E[:, [diag[0], i]]
                apply(E)
            else:
                off = [j for j in range(i + 1, m) if A[i, j] != 0]
                if not off:
                    continue
                # e_i <- e_i + e_j makes the diagonal 2 A[i, j] != 0
                E = np.eye(m, dtype=np.int64)
                E[off[0], i] = 1
                apply(E)
        inv = inv_mod(int(A[i, i]), p)
        E = np.eye(m, dtype=np.int64)
        for j in range(i + 1, m):
            if A[i, j]:
                E[i, j] = (-A[i, j] * inv) % p
        apply(E)
    return np.diag(A).copy(), S


def exponential_sum(A, b, c: int, p: int) -> complex:
    """``sum_{z in F_p^m} e_p(z^T A z + b^T z + c)`` in closed form.

    Diagonalizes ``A`` by congruence; each coordinate then contributes a
    one-variable Gauss sum ``(D/p) g_p e_p(-beta^2 / 4D)``, or ``p`` / ``0``
    when ``D = 0``.
    """
    A = np.asarray(A, dtype=np.int64) % p
    m = A.shape[0]
    if m == 0:
        return complex(np.exp(2j * np.pi * (c % p) / p))
    b = np.asarray(b, dtype=np.int64).reshape(m) % p
    D, S = diagonalize(A, p)
    beta = (S.T @ b) % p
    g = np.sqrt(p) if p % 4 == 1 else 1j * np.sqrt(p)
    total = complex(1.0)
    phase = c % p
    for Di, bi in zip(D, beta):
        Di, bi = int(Di), int(bi)
        if Di == 0:
            if bi:
                return 0j
            total *= p
        else:
            leg = 1 if pow(Di, (p - 1) // 2, p) == 1 else -1
            total *= leg * g
            phase -= bi * bi * inv_mod(4 * Di, p)
    return total * np.exp(2j * np.pi * (phase % p) / p)


def random_form(rng: np.random.Generator, domain: AffineSpace, rank: int | None = None) -> QuadraticForm:
    """A random quadratic function on ``domain``; optionally with a prescribed rank."""
    p, n, k = domain.p, domain.ambient_dim, domain.dim
    if rank is None:
        A = rng.integers(0, p, (n, n))
        M = (A + A.T) % p
        return QuadraticForm(M, rng.integers(0, p, n), int(rng.integers(p)), domain)
    if not 0 <= rank <= k:
        raise ValueError("rank must lie in [0, dim]")
    # G = P^T diag(d) P in coefficient space, with P random invertible
    while True:
        P = rng.integers(0, p, (k, k))
        if rank_mod(P, p) == k:
            break
    d = np.zeros(k, dtype=np.int64)
    d[:rank] = rng.integers(1, p, rank)
    G = (P.T @ np.diag(d) @ P) % p
    # lift to ambient coordinates: B^T-dual via a right inverse of B
    M = _lift_gram(G, domain)
    return QuadraticForm(M, rng.integers(0, p, n), int(rng.integers(p)), domain)


def _lift_gram(G, domain: AffineSpace) -> np.ndarray:
    # find ambient symmetric M with B M B^T = G using pivot columns of B
    from .space import inv_matrix_mod, row_reduce

    p, n, k = domain.p, domain.ambient_dim, domain.dim
    if k == 0:
        return np.zeros((n, n), dtype=np.int64)
    _, piv = row_reduce(domain.basis, p)
    Binv = inv_matrix_mod(domain.basis[:, piv], p)
    # x = B^T y restricted to pivot coords gives y = Binv^T x_piv
    sub = (Binv @ G @ Binv.T) % p
    M = np.zeros((n, n), dtype=np.int64)
    M[np.ix_(piv, piv)] = sub
    return M


def kernel_of(phi: QuadraticForm) -> AffineSpace:
    """``w + radical`` of the homogeneous part on the domain."""
    null = nullspace_mod(phi.gram, phi.p, phi.domain.dim)
    dom = phi.domain
    return AffineSpace(dom.p, dom.translate, (null @ dom.basis) % dom.p, check=False)
