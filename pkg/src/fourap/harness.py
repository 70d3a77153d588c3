"""Verification suites: seeded random instances checked against each inequality.

Every suite is a function ``(p, n, rng, scale) -> list[CheckRecord]``. The
generator for suite ``i`` is ``default_rng([seed, i])`` with ``i`` its position
in :data:`SUITES`, so a suite produces the same records alone or inside
``all``. Records carry ``suite``, ``trial`` and ``seed`` so any single check
can be regenerated.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

from .factor import Factor, QuadraticFactor, conditional_expectation, energy, join
from .functions import SpaceFunction
from .gowers import (averaging_lemma_check, counting_lemma_check, gvn_bound_check, positivity_check,
                     telescoping_bound_check)
from .quadratic import QuadraticForm, exponential_sum, random_form
from .records import CheckRecord
from .regularize import (inverse_u3_derivative_fit, inverse_u3_exhaustive, rank_reduce,
                         validate_rank_reduce)
from .sets import random_subspace
from .space import DEFAULT_MAX_POINTS, AffineSpace
from .transform import dft, idft, naive_dft, roots_of_unity

SMALL_POINTS = 625


def _dim_for(p: int, want: int, max_points: int = SMALL_POINTS) -> int:
    m = max(1, want)
    while m > 1 and p**m > max_points:
        m -= 1
    return m


def _count(base: int, scale: float) -> int:
    return max(1, int(round(base * scale)))


def _bounded(rng, size) -> np.ndarray:
    """Random complex values in the closed unit disk."""
    return np.sqrt(rng.random(size)) * np.exp(2j * np.pi * rng.random(size))


def _phase(phi: QuadraticForm) -> np.ndarray:
    return roots_of_unity(phi.p)[phi.values_on()]


# ---------------------------------------------------------------------------
# suites


def suite_gauss(p, n, rng, scale=1.0):
    """``|E e(phi)| <= p^(-rank/2)``; exact ``|S|^2 = p^(2 dim - rank)`` when the linear part is in the image."""
    out = []
    nmax = min(n, 4)
    for trial in range(_count(500, scale)):
        amb = int(rng.integers(1, nmax + 1))
        if amb > 1 and rng.random() < 0.3:
            dom = random_subspace(AffineSpace.full(p, amb), int(rng.integers(1, amb)), rng)
        else:
            dom = AffineSpace.full(p, amb)
        rank = int(rng.integers(0, dom.dim + 1)) if rng.random() < 0.5 else None
        phi = random_form(rng, dom, rank=rank)
        if rng.random() < 0.3:  # force the linear part into the image
            cf = phi.coordinate_form()
            y = rng.integers(0, p, dom.dim)
            phi = QuadraticForm.from_coordinates(cf.M, (2 * cf.M @ y) % p, cf.c, dom)
        mag = abs(phi.character_mean())
        norm_sq = phi.exact_sum().norm_squared()
        in_image = phi.linear_part_in_image()
        expected = p ** (2 * dom.dim - phi.rank) if in_image else 0
        cf = phi.coordinate_form()
        closed = abs(exponential_sum(cf.M, cf.r, cf.c, p)) / dom.size
        rec = CheckRecord("gauss", {"trial": trial, "dim": dom.dim, "ambient": amb, "rank": phi.rank,
                                    "form": phi.to_dict(), "domain": dom.to_dict()},
                          mag, float(p) ** (-phi.rank / 2), "<=", 1e-9,
                          {"exact_norm_sq": norm_sq, "expected_norm_sq": expected, "in_image": in_image,
                           "closed_form_gap": abs(closed - mag)})
        rec.passed = rec.holds() and norm_sq == expected and abs(closed - mag) <= 1e-9
        out.append(rec)
    return out


def _random_bounded_fn(dom, rng) -> SpaceFunction:
    kind = rng.integers(4)
    if kind == 0:
        return SpaceFunction(dom, _phase(random_form(rng, dom)))
    if kind == 1:
        return SpaceFunction(dom, (rng.random(dom.size) < rng.random()).astype(float))
    if kind == 2:
        v = _bounded(rng, dom.size)
        c = v.mean() * rng.random()  # pull the mean towards zero, staying in the disk
        return SpaceFunction(dom, (v - c) / (1 + abs(c)))
    return SpaceFunction(dom, _bounded(rng, dom.size))


def suite_gvn(p, n, rng, scale=1.0):
    """Generalized von Neumann bound, fast U3 checked against the physical-space path."""
    out = []
    plan = [(_dim_for(p, 2), _count(200, scale))]
    if n >= 3:
        plan.append((_dim_for(p, 3), _count(50, scale)))
    for dim, trials in plan:
        dom = AffineSpace.full(p, dim)
        for trial in range(trials):
            fs = [_random_bounded_fn(dom, rng) for _ in range(4)]
            if rng.random() < 0.25:
                fs[1:] = [SpaceFunction.constant(dom, 1.0)] * 3
            rec = gvn_bound_check(*fs, naive=True)
            rec.inputs.update(trial=trial)
            out.append(rec)
    return out


def suite_telescoping(p, n, rng, scale=1.0):
    out = []
    dom = AffineSpace.full(p, _dim_for(p, 2))
    for trial in range(_count(100, scale)):
        f = _random_bounded_fn(dom, rng)
        g = _random_bounded_fn(dom, rng) if trial % 10 else f
        rec = telescoping_bound_check(f, g)
        rec.inputs.update(trial=trial)
        out.append(rec)
    return out


def _verified_factor(dom, d, rng) -> QuadraticFactor:
    """Random forms whose every combination has positive rank; ``claimed_rank`` is the verified minimum."""
    while True:
        forms = [random_form(rng, dom, rank=int(rng.integers(max(1, dom.dim - 1), dom.dim + 1)))
                 for _ in range(d)]
        Q = QuadraticFactor(forms, domain=dom)
        r = Q.min_combination_rank()
        if r and r > 0:
            return QuadraticFactor(forms, domain=dom, claimed_rank=r)


def _factor_population(p, n, rng, scale):
    dom = AffineSpace.full(p, _dim_for(p, min(n, 4)))
    return [(_verified_factor(dom, 1 + trial % 2, rng), trial) for trial in range(_count(50, scale))]


def suite_averaging(p, n, rng, scale=1.0):
    out = []
    for Q, trial in _factor_population(p, n, rng, scale):
        vals = _bounded(rng, p**Q.d)
        if trial % 5 == 0:
            vals = np.ones(p**Q.d)
        f = SpaceFunction(Q.domain, vals[Q.config_index])
        rec = averaging_lemma_check(Q, f, Q.claimed_rank)
        rec.inputs.update(trial=trial, forms=[phi.to_dict() for phi in Q.forms])
        out.append(rec)
    return out


def suite_counting(p, n, rng, scale=1.0):
    out = []
    for Q, trial in _factor_population(p, n, rng, scale):
        vals = rng.random(p**Q.d) if trial % 2 else 2 * rng.random(p**Q.d) - 1
        f = SpaceFunction(Q.domain, vals[Q.config_index])
        rec = counting_lemma_check(Q, f, Q.claimed_rank, rng=rng)
        rec.inputs.update(trial=trial, forms=[phi.to_dict() for phi in Q.forms])
        out.append(rec)
    return out


def _exact_density_mask(size, alpha, rng) -> np.ndarray:
    mask = np.zeros(size, dtype=bool)
    mask[rng.permutation(size)[:math.ceil(alpha * size - 1e-9)]] = True
    return mask


def suite_positivity(p, n, rng, scale=1.0, large: bool = True):
    """Trivial factors on small spaces and, when it fits, a rank-10 form on F_p^10."""
    out = []
    dom = AffineSpace.full(p, _dim_for(p, min(n, 4)))
    alphas = (0.2, 0.5, 0.8)
    for trial in range(_count(10, scale)):
        for alpha in alphas:
            Q = QuadraticFactor([], domain=dom, claimed_rank=0)
            rec = positivity_check(Q, _exact_density_mask(dom.size, alpha, rng), alpha)
            rec.inputs.update(trial=trial)
            out.append(rec)
    if large and p**10 <= DEFAULT_MAX_POINTS:
        big = AffineSpace.full(p, 10)
        Q = QuadraticFactor([random_form(rng, big, rank=10)], domain=big, claimed_rank=10)
        for alpha in alphas:
            rec = positivity_check(Q, _exact_density_mask(big.size, alpha, rng), alpha)
            rec.inputs.update(trial="rank10", form=Q.forms[0].to_dict())
            out.append(rec)
    return out


def _degenerate_factor(dom, d, rng) -> QuadraticFactor:
    p = dom.p
    forms = [random_form(rng, dom, rank=int(rng.integers(0, dom.dim + 1))) for _ in range(d)]
    kind = rng.integers(3)
    if d >= 2 and kind == 0:  # phi_2 = lambda phi_1 + linear
        lam = int(rng.integers(1, p))
        lin = rng.integers(0, p, dom.ambient_dim)
        forms[1] = QuadraticForm(forms[0].M * lam, forms[0].r * lam + lin, int(rng.integers(p)), dom)
    elif kind == 1:  # a purely linear form
        forms[0] = random_form(rng, dom, rank=0)
    return QuadraticFactor(forms, domain=dom)


def suite_rank_reduce(p, n, rng, scale=1.0):
    out = []
    dom = AffineSpace.full(p, _dim_for(p, min(n, 4)))
    for trial in range(_count(50, scale)):
        d = int(rng.integers(1, 4))
        r = int(rng.integers(1, dom.dim + 1))
        B = _degenerate_factor(dom, d, rng)
        L = rank_reduce(B, r)
        v = validate_rank_reduce(B, L, r)
        rec = CheckRecord("rank_reduce", {"trial": trial, "d": d, "r": r, "dim": dom.dim,
                                          "forms": [f.to_dict() for f in B.forms]},
                          v["codim"], v["codim_bound"], "<=", 0.0,
                          {"refines": v["refines"], "rank_ok": v["rank_ok"], "pieces": v["pieces"]})
        rec.passed = v["passed"]
        out.append(rec)
    return out


def suite_refine(p, n, rng, scale=1.0):
    """Energy grows under refinement, by exactly the squared L2 distance (Pythagoras)."""
    out = []
    dom = AffineSpace.full(p, _dim_for(p, min(n, 3)))
    for trial in range(_count(50, scale)):
        f = SpaceFunction(dom, _bounded(rng, dom.size))
        B = Factor.from_labels(dom, rng.integers(0, int(rng.integers(1, 6)), dom.size))
        B2 = Factor.from_labels(dom, rng.integers(0, int(rng.integers(1, 6)), dom.size))
        J = join(B, B2)
        e0, e1 = energy(f, B), energy(f, J)
        gap = float(np.mean(np.abs(conditional_expectation(f, J).values
                                   - conditional_expectation(f, B).values) ** 2))
        rec = CheckRecord("refine", {"trial": trial, "dim": dom.dim, "atoms": [B.atom_count, J.atom_count]},
                          e0, e1, "<=", 1e-12, {"pythagoras_gap": abs(e1 - e0 - gap), "refines": J.refines(B)})
        rec.passed = rec.holds() and abs(e1 - e0 - gap) <= 1e-12 and J.refines(B)
        out.append(rec)
    return out


def suite_oracle(p, n, rng, scale=1.0):
    out = []
    for trial in range(_count(20, scale)):
        dim = 2 + trial % 2
        dom = AffineSpace.full(p, dim)
        psi = random_form(rng, dom)
        res = inverse_u3_exhaustive(SpaceFunction(dom, _phase(psi)))
        phi = res.pieces[0][1]
        const = np.unique((psi.values_on() - phi.values_on()) % p).size == 1
        rec = CheckRecord("oracle_exhaustive", {"trial": trial, "dim": dim, "form": psi.to_dict()},
                          res.score, 1.0, ">=", 1e-9, {"difference_constant": bool(const)})
        rec.passed = rec.holds() and const
        out.append(rec)
    dom = AffineSpace.full(p, _dim_for(p, 3, 5**3 if p == 5 else 7**3))
    for trial in range(_count(20, scale)):
        psi = random_form(rng, dom, rank=int(rng.integers(2, dom.dim + 1)))
        res = inverse_u3_derivative_fit(SpaceFunction(dom, _phase(psi)), rng=rng)
        out.append(CheckRecord("oracle_derivative_fit", {"trial": trial, "dim": dom.dim, "form": psi.to_dict()},
                               res.score, 0.99, ">=", 0.0, {"pieces": len(res.pieces)}))
    return out


def suite_transform(p, n, rng, scale=1.0):
    """Fast transform against the defining sum; inversion; Parseval."""
    out = []
    for trial in range(_count(20, scale)):
        dim = int(rng.integers(1, _dim_for(p, min(n, 3)) + 1))
        v = rng.normal(size=p**dim) + 1j * rng.normal(size=p**dim)
        fh = dft(v, p)
        gap = float(np.max(np.abs(fh - naive_dft(v, p))))
        inv = float(np.max(np.abs(idft(fh, p) - v)))
        pars = abs(float(np.sum(np.abs(fh) ** 2)) - float(np.mean(np.abs(v) ** 2)))
        rec = CheckRecord("transform", {"trial": trial, "dim": dim}, gap, 0.0, "<=", 1e-9,
                          {"inverse_gap": inv, "parseval_gap": pars})
        rec.passed = rec.holds() and inv <= 1e-9 and pars <= 1e-9
        out.append(rec)
    return out


SUITES: dict[str, Callable] = {
    "gauss": suite_gauss,
    "gvn": suite_gvn,
    "telescoping": suite_telescoping,
    "averaging": suite_averaging,
    "counting": suite_counting,
    "positivity": suite_positivity,
    "rank_reduce": suite_rank_reduce,
    "refine": suite_refine,
    "oracle": suite_oracle,
    "transform": suite_transform,
}


def _run_one(name: str, p: int, n: int, seed: int, scale: float):
    rng = np.random.default_rng([seed, list(SUITES).index(name)])
    t0 = time.perf_counter()
    recs = SUITES[name](p, n, rng, scale)
    return recs, time.perf_counter() - t0


def run_suites(names, p: int, n: int, seed: int, scale: float = 1.0, timing: Callable | None = None,
               jobs: int = 1):
    """Yield ``(suite, record)`` in a fixed order.

    With ``jobs > 1`` the suites run in worker processes; each suite owns its
    generator, so the records are identical to a sequential run and are
    yielded in the order of ``names``.
    """
    names = list(names)
    if jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(names))) as pool:
            futures = [pool.submit(_run_one, name, p, n, seed, scale) for name in names]
            results = (fut.result() for fut in futures)
            yield from _emit(names, results, seed, p, timing)
    else:
        results = (_run_one(name, p, n, seed, scale) for name in names)
        yield from _emit(names, results, seed, p, timing)


def _emit(names, results, seed, p, timing):
    for name, (recs, seconds) in zip(names, results):
        if timing:
            timing(name, seconds, len(recs))
        for rec in recs:
            rec.inputs.setdefault("seed", seed)
            rec.inputs.setdefault("p", p)
            rec.inputs["suite"] = name
            yield name, rec


def summarize(records) -> dict:
    by = {}
    for name, rec in records:
        s = by.setdefault(name, {"checks": 0, "failures": 0})
        s["checks"] += 1
        s["failures"] += 0 if rec.passed else 1
    return by
