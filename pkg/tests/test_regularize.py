from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourap.factor import QuadraticFactor, conditional_expectation
from fourap.functions import SpaceFunction
from fourap.gowers import fourier_ap_count, t_count, u3_norm
from fourap.quadratic import QuadraticForm, random_form
from fourap.regularize import (EnergyStallError, IterationCapError, KvnParams, OracleCapError,
                               PreconditionError, TheoryViolationError, deduce_ap_free_bound,
                               exhaustive_search, exhaustive_search_direct, find_rich_subspace,
                               inverse_u3_derivative_fit, inverse_u3_exhaustive, kvn_run, rank_reduce,
                               validate_rank_reduce)
from fourap.factor import push_to_configuration
from fourap.sets import PointSet, ap_free_greedy, progression_count, quad_level_set, random_set, subspace_set
from fourap.space import AffineSpace, rank_mod

from conftest import phase


def independent_rank_reduce_check(B, L, r):
    """Recompute refinement, per-piece rank and codimension without the library's helpers."""
    p = B.p
    full = B.config_values
    seen = np.zeros(B.domain.size, dtype=int)
    for sp, Q in L.pieces:
        idx = B.domain.index_of(sp.points())
        seen[idx] += 1
        # B2 refines B: every atom of Q carries a single value of the original Phi
        for a in np.unique(Q.config_index):
            rows = full[idx[Q.config_index == a]]
            assert np.all(rows == rows[0])
        for lam in itertools.product(range(p), repeat=Q.d):
            if any(lam):
                G = sum(l * f.gram for l, f in zip(lam, Q.forms)) % p
                assert rank_mod(G, p) >= r
        assert B.domain.dim - sp.dim <= B.d * r + B.d**2 + B.d
    assert np.all(seen == 1)


def test_rank_reduce_immediate(rng):
    dom = AffineSpace.full(5, 4)
    B = QuadraticFactor([random_form(rng, dom, rank=4)])
    L = rank_reduce(B, 3)
    assert len(L) == 1 and L.pieces[0][0] == dom
    assert L.pieces[0][1].factor.same_partition(B.factor)


def test_rank_reduce_dependent_pair(rng):
    dom = AffineSpace.full(5, 4)
    phi = random_form(rng, dom, rank=4)
    lin = QuadraticForm(np.zeros((4, 4), int), [1, 2, 0, 3], 1, dom)
    B = QuadraticFactor([phi, phi.scale(2) + lin])
    r = 2
    L = rank_reduce(B, r)
    v = validate_rank_reduce(B, L, r)
    assert v["passed"] and v["codim"] <= 2 * r + 6
    assert L.complexity == 1
    independent_rank_reduce_check(B, L, r)


def test_rank_reduce_linear_form(rng):
    dom = AffineSpace.full(5, 3)
    B = QuadraticFactor([QuadraticForm(np.zeros((3, 3), int), [1, 1, 0], 0, dom)])
    L = rank_reduce(B, 1)
    assert len(L) == 5 and L.complexity == 0 and L.codim == 1
    independent_rank_reduce_check(B, L, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_rank_reduce_properties(seed):
    rng = np.random.default_rng(seed)
    dom = AffineSpace.full(5, int(rng.integers(2, 5)))
    d = int(rng.integers(1, 4))
    forms = [random_form(rng, dom, rank=int(rng.integers(0, dom.dim + 1))) for _ in range(d)]
    if d >= 2 and rng.random() < 0.5:
        forms[1] = forms[0].scale(int(rng.integers(1, 5))) + random_form(rng, dom, rank=0)
    B = QuadraticFactor(forms)
    r = int(rng.integers(1, dom.dim + 1))
    L = rank_reduce(B, r)
    assert validate_rank_reduce(B, L, r)["passed"]
    independent_rank_reduce_check(B, L, r)


def test_exhaustive_recovers_phase(rng):
    for dim in (2, 3):
        dom = AffineSpace.full(5, dim)
        for _ in range(3):
            psi = random_form(rng, dom)
            res = inverse_u3_exhaustive(SpaceFunction(dom, phase(psi)))
            assert res.score >= 1 - 1e-9
            assert np.unique((psi.values_on() - res.pieces[0][1].values_on()) % 5).size == 1


def test_exhaustive_constant_and_noise(rng):
    dom = AffineSpace.full(5, 2)
    res = inverse_u3_exhaustive(SpaceFunction.constant(dom, 0.6))
    assert abs(res.score - 0.6) < 1e-12
    assert np.unique(res.pieces[0][1].values_on()).size == 1
    for _ in range(3):
        v = rng.choice([-1.0, 1.0], dom.size)
        fast = exhaustive_search(v.astype(complex), 5, 2)
        slow = exhaustive_search_direct(v.astype(complex), 5, 2)
        assert abs(fast[0] - slow[0]) < 1e-12
        assert abs(inverse_u3_exhaustive(SpaceFunction(dom, v)).score - slow[0]) < 1e-12


def test_exhaustive_cap():
    with pytest.raises(OracleCapError, match="derivative-fit"):
        inverse_u3_exhaustive(SpaceFunction.constant(AffineSpace.full(5, 5), 1))


def test_derivative_fit_pure_phase(rng):
    dom = AffineSpace.full(5, 3)
    for _ in range(10):
        psi = random_form(rng, dom, rank=int(rng.integers(2, 4)))
        res = inverse_u3_derivative_fit(SpaceFunction(dom, phase(psi)), rng=rng)
        assert res.score >= 0.99


def test_derivative_fit_noise_is_structurally_valid(rng):
    dom = AffineSpace.full(5, 3)
    f = SpaceFunction(dom, np.exp(2j * np.pi * rng.random(dom.size)))
    assert inverse_u3_derivative_fit(f, rng=rng, depth_cap=0).score < 0.5
    res = inverse_u3_derivative_fit(f, rng=rng)
    idx = np.concatenate([dom.index_of(sp.points()) for sp, _ in res.pieces])
    assert np.array_equal(np.sort(idx), np.arange(dom.size))
    for sp, phi in res.pieces:
        assert phi.domain == sp


def test_derivative_fit_half_noise_calibration(rng):
    dom = AffineSpace.full(5, 3)
    scores = []
    for _ in range(5):
        psi = random_form(rng, dom, rank=3)
        noise = np.exp(2j * np.pi * rng.random(dom.size))
        f = SpaceFunction(dom, 0.5 * phase(psi) + 0.5 * noise)
        scores.append(inverse_u3_derivative_fit(f, rng=rng).score)
    assert np.median(scores) >= 0.2


def _check_outcome(out, A, params):
    assert out.check_invariants(params)["passed"]
    energies = [e["energy"] for e in out.log]
    assert abs(energies[0] - A.density**2) < 1e-12
    assert all(b - a >= params.min_energy_increment for a, b in zip(energies, energies[1:]))
    assert all(A.density**2 - 1e-12 <= e <= 1 + 1e-12 for e in energies)
    # the selected factor is the one whose conditional expectation approximates 1_A on the piece
    loc = SpaceFunction.indicator(out.space, A.restrict(out.space).mask)
    err = u3_norm(loc - conditional_expectation(loc, out.factor.factor))
    assert abs(err - out.approximation_error) < 1e-12 and err <= params.eta + 1e-12


def test_kvn_full_space():
    dom = AffineSpace.full(5, 3)
    A = PointSet(dom, np.ones(dom.size, bool))
    params = KvnParams()
    out = kvn_run(A, params)
    assert out.space == dom and out.factor.d == 0 and out.density == 1.0 and len(out.log) == 1
    _check_outcome(out, A, params)


def test_kvn_level_set_recovers_form(rng):
    dom = AffineSpace.full(5, 4)
    psi = random_form(rng, dom, rank=4)
    A = quad_level_set(dom, rng, form=psi)
    params = KvnParams(epsilon=0.25, eta=0.2, rank_target=1, oracle="exhaustive")
    out = kvn_run(A, params)
    _check_outcome(out, A, params)
    assert out.factor.d >= 1 and out.approximation_error < 1e-9
    loc = SpaceFunction.indicator(out.space, A.restrict(out.space).mask)
    assert out.factor.factor.is_measurable(loc)
    # at eta = 0.3 the level set is already regular for the trivial factor
    coarse = KvnParams(epsilon=0.25, eta=0.3, rank_target=1, oracle="exhaustive")
    assert kvn_run(A, coarse).factor.d == 0


def test_kvn_random_set(rng):
    A = random_set(AffineSpace.full(5, 3), 0.5, rng)
    params = KvnParams(epsilon=0.25, eta=0.5)
    out = kvn_run(A, params)
    assert len(out.log) <= 2
    _check_outcome(out, A, params)


def test_kvn_errors(rng):
    dom = AffineSpace.full(5, 4)
    A = quad_level_set(dom, rng, form=random_form(rng, dom, rank=4))
    noisy = random_set(AffineSpace.full(5, 3), 0.5, rng)
    with pytest.raises(IterationCapError) as exc:
        kvn_run(noisy, KvnParams(eta=0.05, iteration_cap=1, oracle="exhaustive"))
    assert len(exc.value.log) == 2
    with pytest.raises(EnergyStallError):
        kvn_run(A, KvnParams(eta=0.1, min_energy_increment=1.0, oracle="exhaustive"))
    with pytest.raises(TheoryViolationError, match="exceeds the cap"):
        kvn_run(noisy, KvnParams(eta=0.05, complexity_cap=1, oracle="exhaustive"))
    with pytest.raises(PreconditionError):
        kvn_run(PointSet(dom, np.zeros(dom.size, bool)))
    with pytest.raises(ValueError):
        KvnParams(epsilon=0).validate()


def recompute_certificate(A, rich):
    """Independent recomputation of the certificate chain on the returned subspace."""
    W1, Q = rich.space, rich.outcome.factor
    loc = A.restrict(W1)
    ind = SpaceFunction.indicator(W1, loc.mask)
    E = conditional_expectation(ind, Q.factor)
    t_a, t_e = t_count(ind).real, t_count(E).real
    err = u3_norm(ind - E)
    lines = {c.lemma: c for c in rich.certificate}
    eta = lines["approximation"].rhs
    assert err <= eta + 1e-12
    assert abs(t_a - t_e) <= 4 * err + 1e-9
    assert abs(t_e - fourier_ap_count(push_to_configuration(E, Q, tol=1e-9))) <= \
        W1.p ** ((4 * Q.d - lines["counting"].inputs["r"]) / 2) + 1e-9
    assert rich.count == round(t_a * W1.size**2)
    assert rich.count == progression_count(loc, nontrivial=False)
    for c in rich.certificate:
        assert c.holds() == c.passed or c.lemma == "counting"
    return t_a


def test_find_rich_full_space():
    dom = AffineSpace.full(5, 3)
    A = PointSet(dom, np.ones(dom.size, bool))
    rich = find_rich_subspace(A, 0.25)
    assert rich.space == dom and rich.count == dom.size**2 and rich.passed
    recompute_certificate(A, rich)


def test_find_rich_subspace_boosts_density(rng):
    dom = AffineSpace.full(5, 4)
    A = subspace_set(dom, 1, rng)
    rich = find_rich_subspace(A, 0.25)
    assert rich.passed and rich.outcome.density == 1.0
    t_a = recompute_certificate(A, rich)
    assert t_a > 0.2**4 * 100


def test_find_rich_random(rng):
    A = random_set(AffineSpace.full(5, 3), 0.6, rng)
    rich = find_rich_subspace(A, 0.2, alpha=0.6)
    assert rich.passed
    t_a = recompute_certificate(A, rich)
    d = rich.outcome.factor.d
    assert t_a >= (0.6 - 0.2) ** 4 - 5 * 5.0 ** (-3 * d) - 4 * 0.2 - 1e-9


def test_find_rich_alpha_precondition(rng):
    A = random_set(AffineSpace.full(5, 2), 0.3, rng)
    with pytest.raises(PreconditionError):
        find_rich_subspace(A, 0.1, alpha=0.9)


def test_deduce_single_point():
    dom = AffineSpace.full(5, 2)
    A = PointSet.from_indices(dom, [7])
    rep = deduce_ap_free_bound(A)
    assert rep["consistent"] and rep["nontrivial"] == 0 and rep["size_bound"] == pytest.approx(2 * 25**4)


def test_deduce_thinned_strip(rng):
    dom = AffineSpace.full(5, 2)
    strip = np.isin(dom.points()[:, 0], [0, 1])
    greedy = ap_free_greedy(dom, rng)
    A = PointSet(dom, strip & greedy.mask)
    assert progression_count(A) == 0
    rep = deduce_ap_free_bound(A)
    assert rep["consistent"] and rep["certificate_pass"]


def test_deduce_greedy_f53(rng):
    A = ap_free_greedy(AffineSpace.full(5, 3), rng)
    rep = deduce_ap_free_bound(A)
    assert rep["consistent"] and rep["nontrivial"] == 0
    if rep["premise_count_ge_half_alpha4"]:
        assert rep["implied_inequality_holds"]


def test_deduce_rejects_progressions():
    dom = AffineSpace.full(5, 2)
    with pytest.raises(PreconditionError, match="progression"):
        deduce_ap_free_bound(PointSet(dom, np.ones(dom.size, bool)))
