"""Gowers norms, the 4-AP operator T_W, and checks of the counting inequalities.

All computations run in basis coefficients: a function on ``W`` is an array
over F_p^k (k = dim W) and ``x + h`` for ``h`` in the homogeneous part is
coefficient addition mod p.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .factor import FactorFunction, QuadraticFactor, RankSeparationError, push_to_configuration
from .functions import SpaceFunction, UnboundedError
from .quadratic import exponential_sum
from .records import CheckRecord
from .space import digits, undigits
from .transform import dft, roots_of_unity, scale_index

__all__ = [
    "SpaceFunction", "t_count", "u2_norm", "u3_norm", "u3_norm_naive", "u3_norm_literal",
    "gvn_bound_check", "telescoping_bound_check", "fourier_ap_count", "phase_average",
    "counting_lemma_check", "averaging_lemma_check", "positivity_check",
    "progression_configuration_counts", "t_count_measurable", "nontrivial_progressions",
]

NAIVE_MAX_POINTS = 5**4
LITERAL_MAX_POINTS = 5**3
DIRECT_T_MAX_POINTS = 5**6
_CHUNK_ELEMS = 1 << 21


class _Shifts:
    """Index arithmetic on F_p^k in canonical order."""

    _TABLE_MAX = 5**4

    def __init__(self, p: int, k: int):
        self.p, self.k, self.N = p, k, p**k
        self.dig = digits(np.arange(self.N), p, k)
        self.pow = p ** np.arange(k, dtype=np.int64)
        self._tables: dict[int, np.ndarray] = {}

    def shifted(self, h_idx: np.ndarray, m: int = 1) -> np.ndarray:
        """``idx(x + m h)`` for every h in ``h_idx`` (rows) and every x (cols)."""
        if self.N <= self._TABLE_MAX:
            if m not in self._tables:
                self._tables[m] = self._compute(np.arange(self.N), m)
            return self._tables[m][h_idx]
        return self._compute(h_idx, m)

    def _compute(self, h_idx, m):
        hd = self.dig[h_idx]
        s = (self.dig[None, :, :] + m * hd[:, None, :]) % self.p
        return s @ self.pow

    def chunks(self):
        step = max(1, _CHUNK_ELEMS // max(self.N, 1))
        for s in range(0, self.N, step):
            yield np.arange(s, min(s + step, self.N))


@lru_cache(maxsize=16)
def _shifts(p: int, k: int) -> _Shifts:
    return _Shifts(p, k)


def _common_domain(*fs: SpaceFunction):
    dom = fs[0].domain
    for f in fs[1:]:
        if f.domain != dom or not np.array_equal(f.domain.basis, dom.basis) \
                or not np.array_equal(f.domain.translate, dom.translate):
            raise ValueError("functions must share one domain (with the same basis)")
    return dom


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, SpaceFunction) else np.asarray(f, dtype=complex)


def t_count(f0, f1=None, f2=None, f3=None) -> complex:
    """``E_{x in W, h in W-dot} f0(x) f1(x+h) f2(x+2h) f3(x+3h)``, h = 0 included."""
    if f1 is None:
        f1 = f2 = f3 = f0
    dom = _common_domain(f0, f1, f2, f3)
    if dom.size > DIRECT_T_MAX_POINTS:
        raise ValueError(f"|W| = {dom.size} too large for the direct count; use t_count_measurable")
    v = [_values(f) for f in (f0, f1, f2, f3)]
    sh = _shifts(dom.p, dom.dim)
    partial = []
    for hs in sh.chunks():
        prod = v[0][None, :] * v[1][sh.shifted(hs, 1)] * v[2][sh.shifted(hs, 2)] * v[3][sh.shifted(hs, 3)]
        partial.append(prod.sum(axis=1))
    return complex(np.concatenate(partial).sum() / (sh.N * sh.N))


def nontrivial_progressions(member: np.ndarray, domain) -> int:
    """Number of (x, h) with h != 0 and x, x+h, x+2h, x+3h all in the set."""
    f = SpaceFunction.indicator(domain, member)
    total = t_count(f).real * domain.size**2
    return int(round(total)) - int(np.count_nonzero(member))


def u2_norm(f: SpaceFunction) -> float:
    """``||f||_{U^2} = (sum_xi |fhat(xi)|^4)^(1/4)``."""
    s = float(np.sum(np.abs(dft(f.values, f.p)) ** 4))
    return max(s, 0.0) ** 0.25


def u3_norm(f: SpaceFunction) -> float:
    """Fast path: ``||f||^8 = E_h ||Delta_h f||_{U^2}^4`` with ``||g||_{U^2}^4 = sum |ghat|^4``."""
    v = f.values
    sh = _shifts(f.p, f.domain.dim)
    acc = []
    for hs in sh.chunks():
        delta = v[None, :] * np.conj(v[sh.shifted(hs, 1)])
        acc.append(np.sum(np.abs(dft(delta, f.p)) ** 4, axis=1))
    total = float(np.concatenate(acc).sum()) / sh.N
    return max(total, 0.0) ** 0.125


def u3_norm_naive(f: SpaceFunction) -> float:
    """Physical-space evaluation, no transforms.

    Summing the defining 8-fold average over the last shift first gives
    ``E_{h1,h2} |E_x f(x) conj f(x+h1) conj f(x+h2) f(x+h1+h2)|^2``.
    """
    N = f.domain.size
    if N > NAIVE_MAX_POINTS:
        raise ValueError(f"naive U3 is limited to |W| <= {NAIVE_MAX_POINTS}")
    v = f.values
    sh = _shifts(f.p, f.domain.dim)
    all_h = np.arange(N)
    x_plus_h = sh.shifted(all_h, 1)  # [h, x] -> idx(x + h)
    total = 0.0
    for h1 in range(N):
        a = v * np.conj(v[x_plus_h[h1]])  # depends on x only
        # x + h1 + h2 for all h2: shift the row x+h2 by h1
        b = np.conj(v[x_plus_h]) * v[x_plus_h[h1][x_plus_h]]
        s = b @ a
        total += float(np.sum(np.abs(s) ** 2))
    val = total / N**4
    return max(val, 0.0) ** 0.125


def u3_norm_literal(f: SpaceFunction) -> float:
    """The defining 8-fold average evaluated term by term (tiny spaces only)."""
    N = f.domain.size
    if N > LITERAL_MAX_POINTS:
        raise ValueError(f"literal U3 is limited to |W| <= {LITERAL_MAX_POINTS}")
    v = f.values
    sh = _shifts(f.p, f.domain.dim)
    add = sh.shifted(np.arange(N), 1)  # add[h, x] = idx(x + h)
    total = 0j
    x = np.arange(N)
    for h1 in range(N):
        x1 = add[h1][x]  # x + h1
        X2 = add[:, x]  # [h2, x] -> x + h2
        X12 = add[:, x1]  # x + h1 + h2
        # axes: (h2, h3, x)
        X3 = add[:, x][None, :, :]
        X23 = add[:, X2.reshape(-1)].reshape(N, N, N).transpose(1, 0, 2)  # x + h2 + h3
        X13 = add[:, x1][None, :, :]
        X123 = add[:, X12.reshape(-1)].reshape(N, N, N).transpose(1, 0, 2)
        term = (v[x][None, None, :] * np.conj(v[x1])[None, None, :] * np.conj(v[X2])[:, None, :]
                * np.conj(v[X3]) * v[X12][:, None, :] * v[X23] * v[X13] * np.conj(v[X123]))
        total += term.sum()
    val = (total / N**4).real
    return max(val, 0.0) ** 0.125


def _require_bounded(*fs: SpaceFunction):
    for f in fs:
        if np.any(np.abs(_values(f)) > 1 + 1e-12):
            raise UnboundedError("inputs must be bounded by 1 in magnitude")


def gvn_bound_check(f0, f1, f2, f3, tol: float = 1e-9, naive: bool = False) -> CheckRecord:
    """``|T_W(f0..f3)| <= min_i ||f_i||_{U^3}``."""
    _require_bounded(f0, f1, f2, f3)
    t = t_count(f0, f1, f2, f3)
    norms = [u3_norm(f) for f in (f0, f1, f2, f3)]
    extra = {"u3": norms}
    if naive:
        slow = [u3_norm_naive(f) for f in (f0, f1, f2, f3)]
        extra["u3_naive"] = slow
        extra["fast_naive_gap"] = max(abs(a - b) for a, b in zip(norms, slow))
    rec = CheckRecord("gvn", {"p": f0.p, "dim": f0.domain.dim}, abs(t), min(norms), "<=", tol, extra)
    rec.passed = rec.holds() and extra.get("fast_naive_gap", 0.0) <= 1e-8
    return rec


def telescoping_bound_check(f: SpaceFunction, g: SpaceFunction, tol: float = 1e-9,
                            identity_tol: float = 1e-10) -> CheckRecord:
    """Four-term telescoping identity and ``|T(f) - T(g)| <= 4 ||f - g||_{U^3}``."""
    _require_bounded(f, g)
    d = f - g
    lhs_id = t_count(f) - t_count(g)
    rhs_id = t_count(d, g, g, g) + t_count(f, d, g, g) + t_count(f, f, d, g) + t_count(f, f, f, d)
    ident_err = abs(lhs_id - rhs_id)
    rec = CheckRecord("telescoping", {"p": f.p, "dim": f.domain.dim}, abs(lhs_id), 4 * u3_norm(d),
                      "<=", tol, {"identity_error": ident_err, "identity_tol": identity_tol})
    rec.passed = rec.holds() and ident_err <= identity_tol
    return rec


def fourier_ap_count(ff: FactorFunction) -> float:
    """``sum_xi |ffhat(xi)|^2 |ffhat(3 xi)|^2`` for real ``ff`` on F_p^d."""
    if not ff.is_real():
        raise ValueError("fourier_ap_count needs a real-valued configuration function")
    fh = dft(np.real(ff.values).astype(complex), ff.p)
    triple = scale_index(ff.p, ff.d, 3)
    a = np.abs(fh) ** 2
    return float(np.sum(a * a[triple]))


def sigma_tuple(xi, p: int) -> np.ndarray:
    """The tuple (xi, -3 xi, 3 xi, -xi) annihilating Phi(x+ih) weighted sums."""
    xi = np.asarray(xi, dtype=np.int64)
    return np.stack([xi, -3 * xi, 3 * xi, -xi]) % p


def in_sigma(xis, p: int) -> bool:
    xis = np.asarray(xis, dtype=np.int64) % p
    return bool(np.array_equal(sigma_tuple(xis[0], p), xis))


def phase_average(Q: QuadraticFactor, xis) -> complex:
    """``m(xi_0..xi_3) = E_{x, h} e_p(sum_i xi_i . Phi(x + i h))``."""
    xis = np.asarray(xis, dtype=np.int64).reshape(4, Q.d) % Q.p
    dom = Q.domain
    sh = _shifts(dom.p, dom.dim)
    # weighted phase per point for each i
    phases = (Q.config_values @ xis.T) % Q.p  # (N, 4)
    roots = roots_of_unity(Q.p)
    acc = []
    for hs in sh.chunks():
        tot = phases[:, 0][None, :].copy()
        for i in (1, 2, 3):
            tot = tot + phases[sh.shifted(hs, i), i]
        acc.append(roots[tot % Q.p].sum(axis=1))
    return complex(np.concatenate(acc).sum() / (sh.N * sh.N))


def _verify_rank(Q: QuadraticFactor, r: int):
    chk = Q.rank_separation_check(r)
    if not chk.passed:
        raise RankSeparationError(r, chk)


def averaging_lemma_check(Q: QuadraticFactor, f: SpaceFunction, r: int, tol: float = 1e-9) -> CheckRecord:
    """``|E_W f - E_{F^d} ff| <= p^((d - r)/2)`` for measurable bounded f."""
    _verify_rank(Q, r)
    _require_bounded(f)
    ff = push_to_configuration(f, Q)
    lhs = abs(f.mean() - ff.mean())
    return CheckRecord("averaging", {"p": Q.p, "dim": Q.domain.dim, "d": Q.d, "r": r}, lhs,
                       float(Q.p) ** ((Q.d - r) / 2), "<=", tol)


def counting_lemma_check(Q: QuadraticFactor, f: SpaceFunction, r: int,
                         rng: np.random.Generator | None = None, spot_checks: int = 50,
                         tol: float = 1e-9, sigma_tol: float = 1e-10) -> CheckRecord:
    """``|T_W(f) - sum_xi |ffhat(xi)|^2 |ffhat(3xi)|^2| <= p^((4d - r)/2)``.

    Also spot-checks the phase averages: ``|m| <= p^(-r/2)`` off the
    constraint set and ``m = 1`` on it.
    """
    _verify_rank(Q, r)
    _require_bounded(f)
    if not f.is_real():
        raise ValueError("counting lemma check needs a real-valued function")
    ff = push_to_configuration(f, Q)
    t = t_count(f).real
    formula = fourier_ap_count(ff)
    p, d = Q.p, Q.d
    extra = {"T": t, "fourier": formula}
    ok_spots = True
    if d > 0 and spot_checks:
        rng = np.random.default_rng(0) if rng is None else rng
        off_max, on_dev = 0.0, 0.0
        n_off = 0
        while n_off < spot_checks:
            xis = rng.integers(0, p, (4, d))
            if in_sigma(xis, p):
                continue
            off_max = max(off_max, abs(phase_average(Q, xis)))
            n_off += 1
        for _ in range(min(5, spot_checks)):
            xi = rng.integers(0, p, d)
            on_dev = max(on_dev, abs(phase_average(Q, sigma_tuple(xi, p)) - 1))
        extra.update(m_off_max=off_max, m_off_bound=float(p) ** (-r / 2), m_on_max_dev=on_dev)
        ok_spots = off_max <= float(p) ** (-r / 2) + tol and on_dev <= sigma_tol
    rec = CheckRecord("counting", {"p": p, "dim": Q.domain.dim, "d": d, "r": r}, abs(t - formula),
                      float(p) ** ((4 * d - r) / 2), "<=", tol, extra)
    rec.passed = rec.holds() and ok_spots
    return rec


# ---------------------------------------------------------------------------
# progression statistics of a quadratic factor, exactly


def progression_configuration_counts(Q: QuadraticFactor) -> np.ndarray:
    """Exact counts ``N(y0, y1, y2) = #{(x, h) : Phi(x + i h) = y_i, i = 0, 1, 2}``.

    Indexed canonically on F_p^{3d} with y0 in the lowest digits. Computed
    from closed-form Gauss sums over (x, h), so it needs no enumeration of W.
    ``Phi(x + 3h)`` is then determined as ``y0 - 3 y1 + 3 y2``.
    """
    p, d, k = Q.p, Q.d, Q.domain.dim
    if d == 0:
        return np.array([p ** (2 * k)], dtype=np.int64)
    coords = [f.coordinate_form() for f in Q.forms]
    G = np.stack([c.M for c in coords])
    L = np.stack([c.r for c in coords])
    C = np.array([c.c for c in coords], dtype=np.int64)
    ts = digits(np.arange(p ** (3 * d)), p, 3 * d)
    S = np.empty(len(ts), dtype=complex)
    for i, t in enumerate(ts):
        t0, t1, t2 = t[:d], t[d:2 * d], t[2 * d:]
        a = (t0 + t1 + t2) % p
        b = (t1 + 2 * t2) % p
        c2 = (t1 + 4 * t2) % p
        A = np.block([[np.tensordot(a, G, 1), np.tensordot(b, G, 1)],
                      [np.tensordot(b, G, 1), np.tensordot(c2, G, 1)]]) % p
        lin = np.concatenate([a @ L, b @ L]) % p
        S[i] = exponential_sum(A, lin, int(a @ C), p)
    # N(y) = p^{-3d} sum_t S(t) e(-t.y), which is the normalized forward transform
    counts = dft(S, p)
    rounded = np.rint(counts.real)
    scale = float(p ** (2 * k))
    if np.max(np.abs(counts - rounded)) > 1e-6 * max(scale, 1.0) or rounded.min() < 0:
        raise ArithmeticError("configuration counts are not integral")
    out = rounded.astype(np.int64)
    if int(out.sum()) != p ** (2 * k):
        raise ArithmeticError("configuration counts do not sum to |W|^2")
    return out


def t_count_measurable(Q: QuadraticFactor, ff: FactorFunction, counts: np.ndarray | None = None) -> complex:
    """``T_W(ff o Phi)`` from the exact progression statistics of ``Q``."""
    p, d = Q.p, Q.d
    counts = progression_configuration_counts(Q) if counts is None else counts
    vals = np.asarray(ff.values, dtype=complex)
    if d == 0:
        return complex(vals[0] ** 4)
    y = digits(np.arange(p ** (3 * d)), p, 3 * d)
    y0, y1, y2 = y[:, :d], y[:, d:2 * d], y[:, 2 * d:]
    y3 = (y0 - 3 * y1 + 3 * y2) % p
    idx = [undigits(v, p) for v in (y0, y1, y2, y3)]
    prod = vals[idx[0]] * vals[idx[1]] * vals[idx[2]] * vals[idx[3]]
    return complex(np.sum(counts * prod) / float(p ** (2 * Q.domain.dim)))


def positivity_check(Q: QuadraticFactor, member: np.ndarray, alpha: float, tol: float = 1e-9) -> CheckRecord:
    """``T_W(E(1_A|B)) >= alpha^4 - 5 p^(-3d)`` for a factor of rank >= 10 d.

    Small spaces evaluate ``T`` directly and via the progression statistics;
    large ones use the progression statistics alone.
    """
    d, p = Q.d, Q.p
    _verify_rank(Q, 10 * d)
    member = np.asarray(member, dtype=bool).reshape(-1)
    density = float(np.count_nonzero(member)) / Q.domain.size
    if density < alpha - 1e-12:
        raise ValueError(f"set density {density} is below alpha = {alpha}")
    n_cfg = p**d
    sizes = np.bincount(Q.config_index, minlength=n_cfg)
    hits = np.bincount(Q.config_index, weights=member.astype(float), minlength=n_cfg)
    ff = FactorFunction(np.where(sizes > 0, hits / np.maximum(sizes, 1), 0.0).astype(complex), p, d)
    t = t_count_measurable(Q, ff).real
    extra = {"density": density, "T_configuration": t}
    if Q.domain.size <= DIRECT_T_MAX_POINTS:
        direct = t_count(ff.pullback(Q)).real
        extra["T_direct"] = direct
        extra["path_gap"] = abs(direct - t)
    rhs = alpha**4 - 5 * float(p) ** (-3 * d)
    rec = CheckRecord("positivity", {"p": p, "dim": Q.domain.dim, "d": d, "alpha": alpha},
                      t, rhs, ">=", tol, extra)
    rec.passed = rec.holds() and extra.get("path_gap", 0.0) <= 1e-10
    return rec
