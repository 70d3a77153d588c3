"""Rank reduction, inverse-U3 oracles, the local Koopman-von Neumann iteration
and the rich-subspace pipeline built on it."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .factor import (DEFAULT_COMPLEXITY_CAP, ComplexityCapError, LocalQuadraticFactor, QuadraticFactor,
                     combination_ranks, conditional_expectation, energy, projective_points,
                     push_to_configuration)
from .functions import SpaceFunction
from .gowers import (NAIVE_MAX_POINTS, fourier_ap_count, positivity_check,
                     t_count, t_count_measurable, u3_norm, u3_norm_naive)
from .quadratic import QuadraticForm, combination
from .records import CheckRecord
from .sets import PointSet, progression_count
from .space import AffineSpace, digits, inv_mod, rank_mod, solve_mod, undigits
from .transform import dft, roots_of_unity

EXHAUSTIVE_MAX_FORMS = 5**10


# ---------------------------------------------------------------------------
# errors


class KvnError(RuntimeError):
    """The regularization could not certify its outcome; ``log`` holds the run so far."""

    def __init__(self, message: str, log: list | None = None):
        super().__init__(message)
        self.log = list(log or [])


class IterationCapError(KvnError):
    pass


class EnergyStallError(KvnError):
    pass


class TheoryViolationError(KvnError):
    pass


class OracleCapError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# rank reduction


def rank_reduce(B: QuadraticFactor, r: int, cap: int = DEFAULT_COMPLEXITY_CAP) -> LocalQuadraticFactor:
    """Split ``W`` into affine pieces on which the surviving forms have rank >= r.

    While some combination ``psi`` of the surviving forms has small rank on the
    current subspace ``K``, pass to the radical of ``psi`` on ``K`` (codimension
    ``rank psi``) and drop the pivot form: on every coset of the radical ``psi`` is
    affine-linear, so the dropped form is recovered from the survivors and the
    level of ``psi``. The threshold is ``r + 2m`` after ``m`` removals because
    each of the ``m`` final level-set cuts may lower a rank by two. Pieces are
    the cosets of the final ``K`` cut by the level sets of every removed ``psi``.
    """
    if B.d > cap:
        raise ComplexityCapError(f"complexity {B.d} exceeds the cap {cap}")
    W, p = B.domain, B.p
    surv = list(B.forms)
    K = W
    removed: list[QuadraticForm] = []
    while surv:
        threshold = r + 2 * len(removed)
        grams = np.stack([(K.basis @ f.M @ K.basis.T) % p for f in surv]) if K.dim else \
            np.zeros((len(surv), 0, 0), dtype=np.int64)
        lams = projective_points(p, len(surv))
        ranks = combination_ranks(grams, p, lams)
        j = int(np.argmin(ranks))
        if int(ranks[j]) >= threshold:
            break
        lam = lams[j]
        pivot = int(np.flatnonzero(lam)[0])
        psi = combination(surv, lam)
        K = K.kernel_subspace(psi.M)
        removed.append(psi)
        del surv[pivot]

    pieces: list[tuple[AffineSpace, QuadraticFactor]] = []
    sub_coords = W.coordinate_subspace(K).basis if K.dim else np.zeros((0, W.dim), dtype=np.int64)
    for V in W.cosets(sub_coords):
        parts = [V]
        for psi in removed:
            parts = [q for part in parts for q in _level_cuts(psi.restrict(part))]
        for part in parts:
            pieces.append((part, QuadraticFactor([f.restrict(part) for f in surv], domain=part,
                                                 claimed_rank=r)))
    return LocalQuadraticFactor(W, pieces)


def _level_cuts(psi: QuadraticForm) -> list[AffineSpace]:
    """Level sets of a form that is affine-linear on its domain."""
    dom = psi.domain
    cf = psi.coordinate_form()
    if np.any(cf.M):
        raise ArithmeticError("form is not affine-linear on this piece")
    if not np.any(cf.r):
        return [dom]
    full = AffineSpace.full(dom.p, dom.dim)
    out = []
    for t in range(dom.p):
        sub = full.intersect_with_hyperplane(cf.r, (t - cf.c) % dom.p)
        out.append(dom.embed(sub))
    return out


def validate_rank_reduce(B: QuadraticFactor, L: LocalQuadraticFactor, r: int) -> dict:
    """Post-hoc checks: partition, refinement of ``B``, codimension bound and per-piece rank."""
    L.validate()
    d = B.d
    codim = L.codim
    refines = L.b2.refines(B.factor)
    rank_ok = L.rank_ok(r)
    bound = d * r + d * d + d
    return {"refines": bool(refines), "codim": int(codim), "codim_bound": bound,
            "rank_ok": bool(rank_ok), "pieces": len(L),
            "passed": bool(refines and rank_ok and codim <= bound)}


# ---------------------------------------------------------------------------
# inverse U3 oracles


@dataclass
class OracleResult:
    """Pieces partitioning the input space, one quadratic phase per piece."""

    pieces: list  # of (AffineSpace, QuadraticForm)
    score: float
    method: str
    extra: dict = field(default_factory=dict)

    def validate(self, domain: AffineSpace) -> None:
        LocalQuadraticFactor(domain, [(sp, QuadraticFactor([phi], domain=sp)) for sp, phi in self.pieces]).validate()

    def to_dict(self) -> dict:
        return {"method": self.method, "score": self.score,
                "pieces": [{"space": sp.to_dict(), "form": phi.to_dict()} for sp, phi in self.pieces]}


def _sym_matrices(p: int, k: int) -> np.ndarray:
    """All symmetric k x k matrices over F_p, shape (p^(k(k+1)/2), k, k)."""
    iu = np.triu_indices(k)
    m = len(iu[0])
    ent = digits(np.arange(p**m), p, m)
    out = np.zeros((p**m, k, k), dtype=np.int64)
    out[:, iu[0], iu[1]] = ent
    out[:, iu[1], iu[0]] = ent
    return out


def correlation(v: np.ndarray, p: int, G, lin) -> complex:
    """``E_x v(x) e_p(-(x^T G x + lin . x))`` over coefficient space."""
    k = int(round(np.log(len(v)) / np.log(p))) if len(v) > 1 else 0
    X = digits(np.arange(len(v)), p, k)
    q = (np.einsum("ni,ij,nj->n", X, np.asarray(G) % p, X) + X @ (np.asarray(lin) % p)) % p
    return complex(np.mean(v * np.conj(roots_of_unity(p))[q]))


def exhaustive_search(v: np.ndarray, p: int, k: int, batch_elems: int = 1 << 22):
    """Maximize ``|E_x v(x) e_p(-(x^T M x + r . x))|`` over every symmetric M and every r.

    Splits ``x = (x', t)`` along the last coordinate. For fixed top-left block M',
    one transform over ``x'`` per value of ``t`` gives every correlation: the
    cross terms ``2 t m . x'`` only shift the frequency, and the ``t`` sum is a
    small matrix product. Returns ``(score, M, r)`` in coefficient coordinates.
    """
    v = np.asarray(v, dtype=complex)
    if k == 0:
        return abs(v[0]), np.zeros((0, 0), np.int64), np.zeros(0, np.int64)
    kp = k - 1
    Np = p**kp
    omega_c = np.conj(roots_of_unity(p))
    rows = v.reshape(p, Np)  # rows[t, x']
    Xp = digits(np.arange(Np), p, kp)
    Mps = _sym_matrices(p, kp)
    qp = np.einsum("ni,aij,nj->an", Xp, Mps, Xp) % p if kp else np.zeros((1, 1), np.int64)
    # gather table: T[m, r', t] = t * Np + idx(r' + 2 t m)
    ms = digits(np.arange(Np), p, kp)
    t = np.arange(p)
    shifted = (Xp[None, :, None, :] + 2 * t[None, None, :, None] * ms[:, None, None, :]) % p
    shift_idx = undigits(shifted.reshape(-1, kp), p).reshape(Np, Np, p) if kp else np.zeros((1, 1, p), np.int64)
    T = t[None, None, :] * Np + shift_idx
    # kernel over t for (m_kk, r_k): e(-(m_kk t^2 + r_k t)) / p
    mk, rk = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
    K = omega_c[(mk.reshape(1, -1) * (t * t)[:, None] + rk.reshape(1, -1) * t[:, None]) % p] / p
    per = Np * Np * p * p
    bsz = max(1, batch_elems // per)

    def transforms(idx):
        return dft(rows[None, :, :] * omega_c[qp[idx]][:, None, :], p)  # (b, p, Np)

    # |corr| <= (1/p) sum_t max_eta |F(t, eta)| bounds every M sharing the block M';
    # visiting blocks by decreasing bound lets the search stop early (exactly)
    ub = np.concatenate([np.abs(transforms(np.arange(s, min(s + 4096, len(Mps))))).max(axis=2).mean(axis=1)
                         for s in range(0, len(Mps), 4096)])
    order = np.argsort(-ub, kind="stable")
    best = (-1.0, None)
    for s in range(0, len(order), bsz):
        idx = order[s:s + bsz]
        idx = idx[ub[idx] > best[0] + 1e-12]
        if len(idx) == 0:
            break
        F = transforms(idx).reshape(len(idx), -1)
        R = np.abs(F[:, T] @ K)  # (b, m, r', p*p)
        j = int(np.argmax(R))
        if R.flat[j] > best[0] + 1e-12:
            b, mi, ri, kk = np.unravel_index(j, R.shape)
            best = (float(R.flat[j]), (int(idx[b]), mi, ri, kk))
    score, (a, mi, ri, kk) = best
    M = np.zeros((k, k), dtype=np.int64)
    M[:kp, :kp] = Mps[a]
    M[kp, :kp] = M[:kp, kp] = ms[mi]
    M[kp, kp] = kk // p
    rvec = np.concatenate([Xp[ri], [kk % p]]).astype(np.int64)
    return score, M, rvec


def exhaustive_search_direct(v: np.ndarray, p: int, k: int):
    """Reference enumeration: for each M, one full transform over F_p^k."""
    X = digits(np.arange(p**k), p, k)
    omega_c = np.conj(roots_of_unity(p))
    best = (-1.0, None, None)
    for M in _sym_matrices(p, k):
        q = np.einsum("ni,ij,nj->n", X, M, X) % p
        F = np.abs(dft(v * omega_c[q], p))
        j = int(np.argmax(F))
        if F[j] > best[0] + 1e-12:
            best = (float(F[j]), M, X[j])
    return best


def inverse_u3_exhaustive(f: SpaceFunction, W: AffineSpace | None = None) -> OracleResult:
    """Best quadratic phase on ``W`` itself (codimension 0), globally optimal."""
    W = f.domain if W is None else W
    if W != f.domain:
        f = SpaceFunction(W, f.values[f.domain.index_of(W.points())])
    p, k = W.p, W.dim
    if p ** (k * (k + 1) // 2) > EXHAUSTIVE_MAX_FORMS:
        raise OracleCapError(f"exhaustive oracle needs p^(k(k+1)/2) <= 5^10 (p={p}, dim={k}); "
                             "use the derivative-fit oracle")
    score, M, r = exhaustive_search(f.values, p, k)
    phi = QuadraticForm.from_coordinates(M, r, 0, W)
    return OracleResult([(W, phi)], score, "exhaustive")


def _pure_fit(v: np.ndarray, p: int, k: int, rng: np.random.Generator, trials: int):
    """Fit ``xi(h) = L h`` from the peaks of the derivative transforms."""
    N = p**k
    omega_c = np.conj(roots_of_unity(p))
    X = digits(np.arange(N), p, k)
    if k == 0:
        return abs(v[0]), np.zeros((0, 0), np.int64), np.zeros(0, np.int64)
    hs = np.arange(1, N) if N - 1 <= trials else rng.choice(np.arange(1, N), size=trials, replace=False)
    H = X[hs]
    shifted = undigits((X[None, :, :] + H[:, None, :]) % p, p)
    D = v[None, :] * np.conj(v[shifted])
    Xi = X[np.argmax(np.abs(dft(D, p)), axis=1)]
    best_L, best_votes = np.zeros((k, k), np.int64), -1
    for _ in range(max(trials, 8)):
        pick = rng.choice(len(hs), size=min(k, len(hs)), replace=False)
        Hs = H[pick]
        if len(pick) < k or rank_mod(Hs, p) < k:
            continue
        Lt = np.stack([solve_mod(Hs, Xi[pick][:, j], p) for j in range(k)], axis=1)  # H Lt = Xi
        votes = int(np.sum(np.all((H @ Lt) % p == Xi, axis=1)))
        if votes > best_votes:
            best_L, best_votes = Lt.T % p, votes
    half = inv_mod(2, p)
    Mraw = (-half * best_L) % p
    M = (half * (Mraw + Mraw.T)) % p
    q = np.einsum("ni,ij,nj->n", X, M, X) % p
    F = np.abs(dft(v * omega_c[q], p))
    j = int(np.argmax(F))
    return float(F[j]), M, X[j]


def inverse_u3_derivative_fit(f: SpaceFunction, W: AffineSpace | None = None, trials: int = 32,
                              rng: np.random.Generator | None = None, depth_cap: int = 2,
                              weak: float = 0.5) -> OracleResult:
    """Heuristic oracle: recover ``M`` from the linear dependence of ``argmax |(Delta_h f)^|`` on h.

    When the best phase correlates weakly (below ``weak``), ``W`` is cut into the
    level sets of the strongest linear character and each piece is fitted
    separately, up to ``depth_cap`` levels; the split is kept only if it scores
    higher. The score is the size-weighted mean of the per-piece correlations.
    """
    W = f.domain if W is None else W
    if W != f.domain:
        f = SpaceFunction(W, f.values[f.domain.index_of(W.points())])
    rng = np.random.default_rng(0) if rng is None else rng
    pieces, score = _fit_recursive(W, np.asarray(f.values), rng, trials, depth_cap, weak)
    return OracleResult(pieces, score, "derivative-fit", {"pieces": len(pieces)})


def _fit_recursive(W: AffineSpace, v: np.ndarray, rng, trials, depth, weak):
    p, k = W.p, W.dim
    score, M, r = _pure_fit(v, p, k, rng, trials)
    whole = ([(W, QuadraticForm.from_coordinates(M, r, 0, W))], score)
    if score >= weak or depth <= 0 or k == 0:
        return whole
    F = np.abs(dft(v, p))
    F[0] = -1.0
    xi = digits([int(np.argmax(F))], p, k)[0]
    full = AffineSpace.full(p, k)
    pieces, total = [], 0.0
    for t in range(p):
        sub = full.intersect_with_hyperplane(xi, t)
        idx = undigits(sub.points(), p)
        part, s = _fit_recursive(W.embed(sub), v[idx], rng, trials, depth - 1, weak)
        pieces += part
        total += s / p
    return (pieces, total) if total > score else whole


ORACLES: dict[str, Callable] = {"exhaustive": inverse_u3_exhaustive,
                                "derivative-fit": inverse_u3_derivative_fit}


# ---------------------------------------------------------------------------
# local Koopman-von Neumann iteration


@dataclass
class KvnParams:
    epsilon: float = 0.25
    eta: float = 0.25
    rank_target: int = 1
    complexity_cap: int = DEFAULT_COMPLEXITY_CAP
    iteration_cap: int = 64
    min_energy_increment: float = 1e-6
    oracle: str = "auto"
    oracle_trials: int = 32
    oracle_depth: int = 2
    seed: int = 0

    def validate(self) -> "KvnParams":
        if not 0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 1/2)")
        if not 0 < self.eta <= 0.5:
            raise ValueError("eta must lie in (0, 1/2]")
        if self.rank_target < 1:
            raise ValueError("rank target must be at least 1")
        if self.complexity_cap < 1 or self.iteration_cap < 1 or self.oracle_trials < 1:
            raise ValueError("caps must be positive")
        if not self.min_energy_increment > 0:
            raise ValueError("min_energy_increment must be positive")
        if self.oracle not in ("auto", *ORACLES):
            raise ValueError(f"unknown oracle {self.oracle!r}")
        return self

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class KvnOutcome:
    space: AffineSpace
    factor: QuadraticFactor
    density: float
    approximation_error: float
    alpha: float
    piece_id: int
    log: list
    local_factor: LocalQuadraticFactor | None = None

    def check_invariants(self, params: KvnParams) -> dict:
        rank = self.factor.rank_separation_check(params.rank_target, params.complexity_cap)
        out = {"approximation": self.approximation_error <= params.eta + 1e-12,
               "density": self.density >= self.alpha - params.epsilon - 1e-12,
               "rank": bool(rank.passed)}
        out["passed"] = all(out.values())
        return out

    def to_dict(self) -> dict:
        return {"space": self.space.to_dict(), "factor": self.factor.to_dict(), "density": self.density,
                "approximation_error": self.approximation_error, "alpha": self.alpha,
                "piece_id": self.piece_id, "complexity": self.factor.d, "log": self.log}


def _oracle_call(params: KvnParams, g: SpaceFunction, rng) -> OracleResult:
    name = params.oracle
    if name == "auto":
        k, p = g.domain.dim, g.p
        name = "exhaustive" if p ** (k * (k + 1) // 2) <= 5**6 else "derivative-fit"
    if name == "exhaustive":
        return inverse_u3_exhaustive(g)
    return inverse_u3_derivative_fit(g, trials=params.oracle_trials, rng=rng, depth_cap=params.oracle_depth)


def _piece_residuals(ind: SpaceFunction, L: LocalQuadraticFactor):
    E = conditional_expectation(ind, L.b2)
    resid = ind.values - E.values
    return E, [SpaceFunction(sp, resid[idx]) for (sp, _), idx in zip(L.pieces, L.piece_indices)]


def kvn_run(A: PointSet, params: KvnParams | None = None, emit: Callable[[dict], None] | None = None) -> KvnOutcome:
    """Refine a local quadratic factor until most of ``W`` is covered by regular pieces.

    A piece ``W'`` is regular when ``||1_A - E(1_A | B2)||_{U3(W')} <= eta``. Each
    round sends the residual on every irregular piece to the oracle, appends the
    returned phase to that piece's forms and restores the rank with
    :func:`rank_reduce`. The outcome is a regular piece of density at least
    ``alpha - epsilon`` together with the very factor used to approximate on it.
    """
    params = (params or KvnParams()).validate()
    rng = np.random.default_rng(params.seed)
    W = A.domain
    alpha = A.density
    if alpha <= 0:
        raise PreconditionError("the set is empty")
    ind = SpaceFunction.indicator(W, A.mask)
    L = LocalQuadraticFactor.trivial(W)
    log: list[dict] = []
    prev_energy = None
    naive_gap = 0.0
    for it in range(params.iteration_cap + 1):
        E, resid = _piece_residuals(ind, L)
        en = energy(ind, L.b2)
        sizes = np.array([sp.size for sp, _ in L.pieces], dtype=float) / W.size
        norms = []
        for i, g in enumerate(resid):
            u = u3_norm(g)
            if i % 20 == 0 and g.domain.size <= min(NAIVE_MAX_POINTS, 125):
                naive_gap = max(naive_gap, abs(u - u3_norm_naive(g)))
            norms.append(u)
        regular = np.array(norms) <= params.eta
        mass = float(sizes[regular].sum())
        entry = {"iteration": it, "atom_count": len(L), "regular_mass": mass, "energy": en,
                 "max_codim": L.codim, "complexity": L.complexity}
        log.append(entry)
        if emit:
            emit(entry)
        if naive_gap > 1e-8:
            raise TheoryViolationError(f"fast and naive U3 disagree by {naive_gap:.3g}", log)
        if prev_energy is not None and en - prev_energy < params.min_energy_increment:
            raise EnergyStallError(f"energy rose by {en - prev_energy:.3g} < {params.min_energy_increment}", log)
        prev_energy = en
        if mass >= 1 - params.epsilon / 2:
            break
        if it == params.iteration_cap:
            raise IterationCapError(f"no convergence after {params.iteration_cap} iterations", log)
        new_pieces = []
        for i, ((sp, Q), g) in enumerate(zip(L.pieces, resid)):
            if regular[i]:
                new_pieces.append((sp, Q))
                continue
            res = _oracle_call(params, g, rng)
            for S, phi in res.pieces:
                forms = [f.restrict(S) for f in Q.forms] + [phi.restrict(S)]
                try:
                    sub = rank_reduce(QuadraticFactor(forms, domain=S), params.rank_target,
                                      params.complexity_cap)
                except ComplexityCapError as exc:
                    raise TheoryViolationError(str(exc), log) from exc
                new_pieces.extend(sub.pieces)
        L = LocalQuadraticFactor(W, new_pieces)

    dens = np.array([float(A.mask[idx].mean()) for idx in L.piece_indices])
    cand = [i for i in range(len(L)) if regular[i] and dens[i] >= alpha - params.epsilon - 1e-12]
    if not cand:
        raise TheoryViolationError("no regular piece reaches density alpha - epsilon", log)
    best = max(cand, key=lambda i: (dens[i], -i))
    sp, Q = L.pieces[best]
    # recompute the approximation from scratch on the selected piece and its own factor
    loc = SpaceFunction.indicator(sp, A.mask[L.piece_indices[best]])
    err = u3_norm(loc - conditional_expectation(loc, Q.factor))
    Q = QuadraticFactor(Q.forms, domain=sp, claimed_rank=params.rank_target)
    out = KvnOutcome(sp, Q, float(dens[best]), float(err), alpha, best, log, L)
    chk = out.check_invariants(params)
    if not chk["passed"]:
        raise TheoryViolationError(f"outcome invariants fail: {chk}", log)
    return out


# ---------------------------------------------------------------------------
# the rich-subspace pipeline


@dataclass
class RichSubspace:
    space: AffineSpace
    count: int
    certificate: list  # of CheckRecord
    outcome: KvnOutcome
    alpha: float
    epsilon: float

    @property
    def passed(self) -> bool:
        return all(rec.passed for rec in self.certificate if not rec.extra.get("informational"))

    def to_dict(self) -> dict:
        return {"space": self.space.to_dict(), "dim": self.space.dim, "count": self.count,
                "alpha": self.alpha, "epsilon": self.epsilon, "pass": self.passed,
                "certificate": [rec.to_dict() for rec in self.certificate],
                "outcome": self.outcome.to_dict()}


def find_rich_subspace(A: PointSet, epsilon: float, alpha: float | None = None,
                       params: KvnParams | None = None, eta: float | None = None,
                       rank_target: int | None = None, emit=None) -> RichSubspace:
    """Find ``W'`` with many 4-APs in ``A`` and certify the count.

    Uses ``eta = epsilon`` and ``r = 10 * complexity_cap`` unless overridden;
    the other fields of ``params`` (caps, oracle, seed) are used as given. The
    certificate evaluates each step of the lower bound
    ``T(1_A) >= T(E) - 4 err >= (alpha - eps)^4 - 5 p^(-3d) - 4 eta``.
    """
    kw = (params or KvnParams()).to_dict()
    kw["epsilon"] = epsilon
    kw["eta"] = epsilon if eta is None else eta
    kw["rank_target"] = 10 * kw["complexity_cap"] if rank_target is None else rank_target
    P = KvnParams(**kw).validate()
    alpha = A.density if alpha is None else alpha
    if A.count == 0:
        raise PreconditionError("the set is empty")
    if alpha > A.density + 1e-12:
        raise PreconditionError(f"alpha = {alpha} exceeds the density {A.density}")
    out = kvn_run(A, P, emit)
    W1, Q = out.space, out.factor
    p, d, r = W1.p, Q.d, P.rank_target
    loc = A.restrict(W1)
    ind = SpaceFunction.indicator(W1, loc.mask)
    E = conditional_expectation(ind, Q.factor)
    t_a = t_count(ind).real
    t_e = t_count(E).real
    count = int(round(t_a * W1.size**2))
    params_rec = {"p": p, "dim": W1.dim, "d": d, "r": r, "eta": P.eta, "epsilon": epsilon}
    cert = []
    cert.append(CheckRecord("approximation", params_rec, out.approximation_error, P.eta, "<=", 1e-12))
    err = u3_norm(ind - E)
    tel = CheckRecord("telescoping", params_rec, abs(t_a - t_e), 4 * err, "<=", 1e-9,
                      {"T_A": t_a, "T_E": t_e, "u3_error": err})
    cert.append(tel)
    ff = push_to_configuration(E, Q, tol=1e-9)
    four = fourier_ap_count(ff)
    cfg = t_count_measurable(Q, ff).real
    cnt = CheckRecord("counting", params_rec, abs(t_e - four), float(p) ** ((4 * d - r) / 2), "<=", 1e-9,
                      {"fourier": four, "T_E_configuration": cfg, "T_E_direct": t_e})
    cnt.passed = cnt.holds() and abs(cfg - t_e) <= 1e-9
    cert.append(cnt)
    a_used = max(alpha - epsilon, 0.0)
    lower = a_used**4 - 5 * float(p) ** (-3 * d)
    positivity_ok = r >= 10 * d
    if positivity_ok:
        pos = positivity_check(Q, loc.mask, min(a_used, loc.density), 1e-9)
        pos.extra["alpha_minus_epsilon"] = a_used
        cert.append(pos)
    final = CheckRecord("final", params_rec, t_a, lower - 4 * P.eta, ">=", 1e-9,
                        {"count": count, "size": W1.size, "count_over_size_sq": t_a})
    if not positivity_ok:
        final.extra["informational"] = True
    cert.append(final)
    target = CheckRecord("target", params_rec, t_a, alpha**4 - epsilon, ">=", 0.0, {"informational": True})
    cert.append(target)
    res = RichSubspace(W1, count, cert, out, alpha, epsilon)
    return res


def deduce_ap_free_bound(A: PointSet, params: KvnParams | None = None, eta: float | None = None,
                         rank_target: int | None = None, emit=None) -> dict:
    """Run the pipeline on a 4-AP-free set with ``epsilon = alpha^4 / 2`` and report the size bound."""
    if progression_count(A) != 0:
        raise PreconditionError("the set contains a nontrivial 4-term progression")
    alpha = A.density
    eps = alpha**4 / 2
    rich = find_rich_subspace(A, eps, params=params, eta=eta, rank_target=rank_target, emit=emit)
    W1 = rich.space
    in_w = int(np.count_nonzero(A.restrict(W1).mask))
    nontrivial = rich.count - in_w
    premise = rich.count >= 0.5 * alpha**4 * W1.size**2 - 1e-9
    bound = 2 / alpha**4
    implied_ok = (W1.size <= bound + 1e-9) if premise else None
    consistent = nontrivial == 0 and implied_ok is not False
    return {"alpha": alpha, "epsilon": eps, "subspace_size": W1.size, "dim": W1.dim,
            "count": rich.count, "trivial": in_w, "nontrivial": nontrivial,
            "premise_count_ge_half_alpha4": bool(premise), "size_bound": bound,
            "implied_inequality_holds": implied_ok, "consistent": bool(consistent),
            "certificate_pass": rich.passed, "rich": rich}
