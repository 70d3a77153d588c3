from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourap.space import (AffineSpace, FieldElement, FieldError, check_prime, digits, nullspace_mod,
                          rank_mod, solve_mod, undigits)
from fourap.sets import random_subspace

from conftest import brute_points


def test_field_arithmetic():
    assert (FieldElement(2, 5) + 3).value == 0
    assert FieldElement(2, 5).inverse().value == 3
    assert (FieldElement(3, 5) * FieldElement(4, 5)).value == 2
    assert (FieldElement(1, 5) / 2).value == 3
    assert (-FieldElement(1, 7)).value == 6
    with pytest.raises(FieldError):
        FieldElement(1, 5) + FieldElement(1, 7)


@pytest.mark.parametrize("p", [2, 3, 4, 9])
def test_check_prime_rejects(p):
    with pytest.raises(FieldError, match="p must be prime >= 5"):
        check_prime(p)


def test_check_prime_upper_limit():
    with pytest.raises(FieldError, match="at most 31"):
        check_prime(37)


@pytest.mark.parametrize("p", [5, 7, 11, 31])
def test_check_prime_accepts(p):
    assert check_prime(p) == p


def test_enumerate_full_plane():
    W = AffineSpace.full(5, 2)
    pts = list(W.enumerate())
    assert len(pts) == 25 and len(set(pts)) == 25
    assert pts[0] == (0, 0)


def test_enumerate_line():
    W = AffineSpace(5, [0, 3], [[1, 0]])
    assert set(W.enumerate()) == {(t, 3) for t in range(5)}
    assert next(iter(W.enumerate())) == (0, 3)


def test_enumerate_random_coset(rng):
    full = AffineSpace.full(5, 4)
    W = random_subspace(full, 2, rng)
    pts = W.points()
    assert len({tuple(x) for x in pts}) == 25
    assert {tuple(int(v) for v in x) for x in pts} == brute_points(5, W.translate, W.basis)
    diffs = (pts[:, None, :] - pts[None, :, :]).reshape(-1, 4) % 5
    # every difference solves the homogeneous system cut out by the normals of W
    normals = nullspace_mod(W.basis, 5, 4)
    assert not np.any((diffs @ normals.T) % 5)


def test_intersect_examples():
    W = AffineSpace.full(5, 2)
    L = W.intersect_with_hyperplane([1, 0], 2)
    assert L.dim == 1 and L.size == 5
    assert all(x[0] == 2 for x in L.points())
    line = AffineSpace(5, [0, 3], [[1, 0]])
    assert line.intersect_with_hyperplane([0, 1], 3) is line
    assert line.intersect_with_hyperplane([0, 1], 1) is None
    V = AffineSpace.full(5, 3).intersect_with_hyperplane([1, 2, 3], 4).intersect_with_hyperplane([0, 1, 1], 2)
    assert V.size == 5
    assert V.codim_in(AffineSpace.full(5, 3)) == 2
    assert np.all((V.points() @ np.array([[1, 2, 3], [0, 1, 1]]).T) % 5 == [4, 2])


def test_kernel_subspace_examples(rng):
    W = AffineSpace.full(5, 3)
    assert W.kernel_subspace(np.zeros((3, 3), int)) == W
    K = W.kernel_subspace(np.eye(3, dtype=int))
    assert K.dim == 0 and K.codim_in(W) == 3
    W4 = AffineSpace.full(5, 4)
    A = rng.integers(0, 5, (2, 4))
    M = (A.T @ A) % 5
    K = W4.kernel_subspace(M)
    assert K.codim_in(W4) == rank_mod(M, 5)
    assert not np.any((K.basis @ M) % 5)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([5, 7]), st.integers(1, 4), st.integers(0, 2**31))
def test_index_round_trip(p, n, seed):
    rng = np.random.default_rng(seed)
    full = AffineSpace.full(p, n)
    W = random_subspace(full, int(rng.integers(0, n + 1)), rng)
    idx = np.arange(W.size)
    assert np.array_equal(W.index_of(W.points()), idx)
    assert np.array_equal(undigits(digits(idx, p, W.dim), p), idx)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_codim_additive(seed):
    rng = np.random.default_rng(seed)
    W = AffineSpace.full(5, 4)
    W1 = random_subspace(W, int(rng.integers(0, 3)), rng)
    c2 = int(rng.integers(0, W1.dim + 1))
    sub = random_subspace(AffineSpace.full(5, W1.dim), c2, rng)
    W2 = W1.embed(sub)
    assert W1.contains_space(W2)
    assert W2.codim_in(W) == W2.codim_in(W1) + W1.codim_in(W)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31))
def test_hyperplane_size_by_brute_force(n, seed):
    rng = np.random.default_rng(seed)
    W = random_subspace(AffineSpace.full(5, n), int(rng.integers(0, n)), rng)
    normal = rng.integers(0, 5, n)
    value = int(rng.integers(5))
    H = W.intersect_with_hyperplane(normal, value)
    members = {tuple(int(v) for v in x) for x in W.points() if int(x @ normal) % 5 == value}
    if H is None:
        assert not members
    else:
        assert {tuple(int(v) for v in x) for x in H.points()} == members
        a, _ = W.linear_functional(normal)
        if np.any(a):
            assert H.size == W.size // 5


def test_linear_algebra_helpers(rng):
    for _ in range(20):
        A = rng.integers(0, 7, (3, 5))
        N = nullspace_mod(A, 7)
        assert N.shape[0] == 5 - rank_mod(A, 7)
        assert not np.any((A @ N.T) % 7)
        x = rng.integers(0, 7, 5)
        sol = solve_mod(A, (A @ x) % 7, 7)
        assert np.array_equal((A @ sol) % 7, (A @ x) % 7)


def test_serialization_round_trip(rng):
    W = random_subspace(AffineSpace.full(7, 3), 1, rng)
    assert AffineSpace.from_dict(W.to_dict()) == W


def test_cosets_partition(rng):
    W = AffineSpace.full(5, 3)
    sub = np.array([[1, 2, 0]])
    cos = W.cosets(sub)
    assert len(cos) == 25
    idx = np.concatenate([W.index_of(c.points()) for c in cos])
    assert np.array_equal(np.sort(idx), np.arange(125))


def test_cap_enforced():
    with pytest.raises(ValueError, match="exceeds the cap"):
        AffineSpace.full(31, 5)
