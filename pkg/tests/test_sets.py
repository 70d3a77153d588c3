from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourap.gowers import nontrivial_progressions
from fourap.sets import (PointSet, ap_free_greedy, generate, is_ap_free, progression_count, quad_level_set,
                         random_set, subspace_set, union_subspaces)
from fourap.space import AffineSpace, digits, undigits


def brute_progressions(ps):
    dom, p = ps.domain, ps.domain.p
    X = digits(np.arange(dom.size), p, dom.dim)
    count = 0
    for x in X:
        for h in X[1:]:
            if all(ps.mask[undigits((x + i * h) % p, p)] for i in range(4)):
                count += 1
    return count


def test_random_density(rng):
    dens = [random_set(AffineSpace.full(5, 3), 0.5, rng).density for _ in range(20)]
    assert all(abs(d - 0.5) <= 0.06 * 2.5 for d in dens)
    assert abs(np.mean(dens) - 0.5) <= 0.06


def test_subspace_density(rng):
    for n in (2, 3, 4):
        assert subspace_set(AffineSpace.full(5, n), 1, rng).density == pytest.approx(0.2)


def test_greedy_is_ap_free_and_maximal(rng):
    dom = AffineSpace.full(5, 2)
    ps = ap_free_greedy(dom, rng)
    assert brute_progressions(ps) == 0 and is_ap_free(ps)
    for i in np.flatnonzero(~ps.mask):
        mask = ps.mask.copy()
        mask[i] = True
        assert brute_progressions(PointSet(dom, mask)) > 0


@pytest.mark.parametrize("order", ["random", "index", "level-set"])
def test_greedy_orders_are_ap_free(order, rng):
    ps = ap_free_greedy(AffineSpace.full(5, 2), rng, order=order, restarts=3)
    assert brute_progressions(ps) == 0 and ps.count > 0


def test_greedy_restarts_keep_the_largest():
    dom = AffineSpace.full(5, 2)
    single = [ap_free_greedy(dom, np.random.default_rng(s)).count for s in range(4)]
    multi = ap_free_greedy(dom, np.random.default_rng(0), restarts=4).count
    assert multi >= single[0]
    with pytest.raises(ValueError, match="unknown order"):
        ap_free_greedy(dom, np.random.default_rng(0), order="spiral")


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 0.6))
def test_progression_count_matches_brute_force(seed, alpha):
    rng = np.random.default_rng(seed)
    ps = random_set(AffineSpace.full(5, 2), alpha, rng)
    n = brute_progressions(ps)
    assert progression_count(ps) == n
    assert nontrivial_progressions(ps.mask, ps.domain) == n


def test_level_set_and_union(rng):
    dom = AffineSpace.full(5, 3)
    ps = quad_level_set(dom, rng)
    assert 0 < ps.count < dom.size
    u = union_subspaces(dom, 3, rng)
    assert 25 <= u.count <= 75


def test_file_round_trip(tmp_path, rng):
    ps = random_set(AffineSpace.full(7, 2), 0.3, rng)
    path = tmp_path / "a.set"
    ps.save(path)
    back = PointSet.load(path)
    assert np.array_equal(back.mask, ps.mask) and back.generator == "random"
    text = path.read_text().splitlines()
    text[0] = text[0].replace(f'"count":{ps.count}', f'"count":{ps.count + 1}')
    with pytest.raises(ValueError, match="header count"):
        PointSet.loads("\n".join(text))


def test_generate_dispatch(rng):
    for name in ("random", "subspace", "quad-level-set", "ap-free-greedy", "union-subspaces"):
        ps = generate(name, 5, 2, rng)
        assert ps.generator == name and ps.domain.size == 25
    with pytest.raises(ValueError, match="unknown generator"):
        generate("nope", 5, 2, rng)
