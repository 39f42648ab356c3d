import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import Matrix, ZZ
from sympy.matrices.normalforms import invariant_factors

from steinberg_bar.errors import InconsistentComplexError, MalformedInputError
from steinberg_bar.exactla import (
    FieldElement,
    IntMatrix,
    enumerate_subspaces,
    full_space,
    gaussian_binomial,
    homology_at,
    is_direct_sum,
    rank_mod,
    read_matrix_cache,
    rref,
    smith_normal_form,
    subspace_from_vectors,
    write_matrix_cache,
)


def span_set(vectors, q):
    """All linear combinations, by brute force."""
    n = len(vectors[0])
    out = set()
    for coeffs in itertools.product(range(q), repeat=len(vectors)):
        out.add(tuple(sum(c * v[i] for c, v in zip(coeffs, vectors)) % q for i in range(n)))
    return frozenset(out)


def brute_force_subspaces(n, q, d):
    nonzero = [v for v in itertools.product(range(q), repeat=n) if any(v)]
    if d == 0:
        return {frozenset({(0,) * n})}
    return {s for vs in itertools.combinations(nonzero, d) if len(s := span_set(vs, q)) == q**d}


def q_pascal(n, k, q):
    if k == 0 or k == n:
        return 1
    if k < 0 or k > n:
        return 0
    return q_pascal(n - 1, k - 1, q) + q**k * q_pascal(n - 1, k, q)


# ---- field elements and rref


def test_field_element_arithmetic():
    a, b = FieldElement(3, 7), FieldElement(5, 7)
    assert (a + b).value == 1
    assert (a * b).value == 1
    assert (a / b * b) == a
    assert (-a).value == 4
    with pytest.raises(MalformedInputError):
        a + FieldElement(1, 5)
    with pytest.raises(MalformedInputError):
        FieldElement(1, 4)


def test_rref_identity():
    m = [[FieldElement(1, 2), FieldElement(0, 2)], [FieldElement(0, 2), FieldElement(1, 2)]]
    red, rank, pivots = rref(m)
    assert red == ((1, 0), (0, 1))
    assert rank == 2 and pivots == (1, 2)


def test_rref_rows_of_worked_example():
    red, rank, pivots = rref([[1, 2, 3], [0, 1, 4]], 7)
    assert rank == 2 and pivots == (1, 2)
    # 1,2,3 - 2*(0,1,4) = (1,0,-5) = (1,0,2) mod 7
    assert red == ((1, 0, 2), (0, 1, 4))


def test_rref_zero():
    red, rank, pivots = rref([[0] * 3] * 3, 3)
    assert red == ((0, 0, 0),) * 3 and rank == 0 and pivots == ()


def test_rref_mixed_moduli():
    with pytest.raises(MalformedInputError):
        rref([[FieldElement(1, 2), FieldElement(1, 3)]])
    with pytest.raises(MalformedInputError):
        rref([[1, 2]])


matrices = st.sampled_from([2, 3, 5, 7]).flatmap(
    lambda q: st.tuples(
        st.just(q),
        st.integers(1, 5).flatmap(
            lambda r: st.integers(1, 5).flatmap(
                lambda c: st.lists(st.lists(st.integers(0, q - 1), min_size=c, max_size=c), min_size=r, max_size=r)
            )
        ),
    )
)


@given(matrices)
def test_rref_idempotent_and_row_space_preserved(qm):
    q, m = qm
    red, rank, pivots = rref(m, q)
    assert rref(red, q)[0] == red
    assert rank_mod(m, q) == rank == rank_mod(list(m) + list(red), q)
    for i, p in enumerate(pivots):
        assert red[i][p - 1] == 1
        assert all(red[k][p - 1] == 0 for k in range(len(red)) if k != i)
    assert list(pivots) == sorted(pivots)


@given(matrices, st.randoms(use_true_random=False))
def test_subspace_canonical_under_shuffle_and_idempotent(qm, rnd):
    q, m = qm
    n = len(m[0])
    w = subspace_from_vectors(m, n, q)
    shuffled = list(m)
    rnd.shuffle(shuffled)
    assert subspace_from_vectors(shuffled, n, q) == w
    assert subspace_from_vectors(w.basis, n, q) == w
    if w.dim:
        assert span_set(list(w.basis), q) == span_set(m, q)


def test_subspace_examples():
    w = subspace_from_vectors([(1, 2, 3), (0, 1, 4)], 3, 7)
    assert w.dim == 2 and w.n == 3
    v = subspace_from_vectors([(1, 1), (1, 1)], 2, 2)
    assert v.dim == 1 and v.basis == ((1, 1),)
    assert subspace_from_vectors([], 3, 2).dim == 0


def test_is_direct_sum():
    e = lambda i: subspace_from_vectors([tuple(int(i == j) for j in range(3))], 3, 2)
    assert is_direct_sum([e(0), e(1), e(2)], 3)
    l1 = subspace_from_vectors([(1, 0)], 2, 2)
    l2 = subspace_from_vectors([(1, 1)], 2, 2)
    assert is_direct_sum([l1, l2], 2)
    assert not is_direct_sum([l1, l1], 2)


@pytest.mark.parametrize("n,q,d,expected", [(2, 2, 1, 3), (3, 2, 2, 7)])
def test_enumerate_subspaces_examples(n, q, d, expected):
    subs = enumerate_subspaces(n, q, d)
    assert len(subs) == expected == len(brute_force_subspaces(n, q, d))
    assert {span_set(list(w.basis), q) for w in subs} == brute_force_subspaces(n, q, d)


def test_enumerate_zero_dimensional():
    for n, q in [(1, 2), (3, 3)]:
        (w,) = enumerate_subspaces(n, q, 0)
        assert w.dim == 0


@pytest.mark.parametrize("n", range(1, 5))
@pytest.mark.parametrize("q", [2, 3, 5])
def test_enumeration_counts_match_q_binomials(n, q):
    for d in range(n + 1):
        subs = enumerate_subspaces(n, q, d)
        assert len(subs) == q_pascal(n, d, q) == gaussian_binomial(n, d, q)
        assert len(set(subs)) == len(subs)
        keys = [w.basis for w in subs]
        assert keys == sorted(keys)


def test_enumeration_matches_brute_force_small():
    for n, q in [(2, 3), (3, 2), (3, 3), (4, 2)]:
        for d in range(n + 1):
            got = {span_set(list(w.basis), q) if w.dim else frozenset({(0,) * n}) for w in enumerate_subspaces(n, q, d)}
            assert got == brute_force_subspaces(n, q, d)


# ---- Smith normal form


def test_snf_small_examples():
    assert smith_normal_form(IntMatrix.identity(3)).diagonal == (1, 1, 1)
    # d1 = gcd of entries = 2, d1*d2 = |det| = 8
    r = smith_normal_form(IntMatrix.from_dense([[2, 4], [6, 8]]))
    assert r.diagonal == (2, 4) and r.rank == 2
    z = smith_normal_form(IntMatrix.zeros(3, 4))
    assert z.diagonal == (0, 0, 0) and z.rank == 0


def _check_snf(m, res):
    diag = [d for d in res.diagonal if d]
    assert all(b % a == 0 for a, b in zip(diag, diag[1:]))
    assert res.left @ m @ res.right == res.diagonal_matrix(m.rows, m.cols)
    assert abs(Matrix(res.left.to_dense()).det(method="bareiss")) == 1
    assert abs(Matrix(res.right.to_dense()).det(method="bareiss")) == 1


@pytest.mark.parametrize("seed", range(20))
def test_snf_transforms_and_sympy_agree(seed):
    rng = random.Random(seed)
    r, c = rng.randint(1, 8), rng.randint(1, 8)
    dense = [[rng.randint(-9, 9) for _ in range(c)] for _ in range(r)]
    m = IntMatrix.from_dense(dense)
    res = smith_normal_form(m, transforms=True)
    _check_snf(m, res)
    assert res.diagonal == tuple(int(x) for x in invariant_factors(Matrix(dense), domain=ZZ))
    assert smith_normal_form(m).diagonal == res.diagonal


@given(st.integers(1, 6).flatmap(lambda r: st.integers(1, 6).flatmap(
    lambda c: st.lists(st.lists(st.integers(-3, 3), min_size=c, max_size=c), min_size=r, max_size=r))))
@settings(max_examples=60, deadline=None)
def test_snf_sparse_path_matches_dense(dense):
    m = IntMatrix.from_dense(dense)
    full = smith_normal_form(m, transforms=True)
    _check_snf(m, full)
    assert smith_normal_form(m).diagonal == full.diagonal


# ---- homology


def test_homology_zero_boundaries():
    assert homology_at(IntMatrix.zeros(3, 2), IntMatrix.zeros(1, 3)) == (3, ())


def test_homology_z_mod_2():
    assert homology_at(IntMatrix.from_dense([[2]]), IntMatrix.zeros(0, 1)) == (0, (2,))


def test_homology_inconsistent():
    with pytest.raises(InconsistentComplexError):
        homology_at(IntMatrix.from_dense([[1]]), IntMatrix.from_dense([[1]]))


def test_homology_of_contractible_complex():
    # cone on a triangle boundary: C_1 = Z^3 edges, C_0 = Z^3 vertices, plus a
    # filling 2-cell; homology vanishes in degree 1.
    d1 = IntMatrix.from_dense([[-1, 0, 1], [1, -1, 0], [0, 1, -1]])
    d2 = IntMatrix.from_dense([[1], [1], [1]])
    assert homology_at(d2, d1) == (0, ())


# ---- cache files


def test_matrix_cache_roundtrip(tmp_path):
    m = IntMatrix.from_dense([[0, -3, 12345678901234567890], [0, 0, 0]])
    path = tmp_path / "m.txt"
    write_matrix_cache(path, (2, 3, 4), m)
    assert path.read_text().splitlines()[0] == "2 3 4 2 3"
    header, back = read_matrix_cache(path)
    assert header == (2, 3, 4) and back == m


def test_matrix_cache_empty_shapes(tmp_path):
    for rows, cols in [(0, 5), (4, 0)]:
        path = tmp_path / f"m{rows}{cols}.txt"
        write_matrix_cache(path, (1, 2, 1), IntMatrix.zeros(rows, cols))
        assert read_matrix_cache(path)[1] == IntMatrix.zeros(rows, cols)


def test_matrix_cache_truncated(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 2 2 2 2\n1 0\n")
    with pytest.raises(MalformedInputError):
        read_matrix_cache(path)


def test_full_space():
    w = full_space(3, 5)
    assert w.dim == 3 and w.pivots == (1, 2, 3)
