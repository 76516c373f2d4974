from fractions import Fraction

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given, strategies as st

from floquetex.tensor import (
    FieldMismatchError, Operator, SingularMatrixError, embed, format_scalar, invert, kron,
    nullspace, partial_trace_first, partial_transpose, random_rational, solve_exact, to_scalar,
)

small = st.fractions(min_value=-5, max_value=5, max_denominator=7)


def rational_op(vals, d, n=1):
    k = d ** n
    return Operator(np.array([mpq(v) for v in vals], dtype=object).reshape(k, k), d, n, True)


ops2 = st.lists(small, min_size=4, max_size=4).map(lambda v: rational_op(v, 2))
ops3 = st.lists(small, min_size=9, max_size=9).map(lambda v: rational_op(v, 3))


def test_to_scalar_refuses_floats_in_exact_mode():
    with pytest.raises(TypeError):
        to_scalar(0.5)
    assert to_scalar("3/4") == mpq(3, 4)
    assert to_scalar(Fraction(1, 3)) == mpq(1, 3)
    assert to_scalar("1/4", exact=False) == 0.25


def test_format_scalar():
    assert format_scalar(mpq(3, 4)) == "3/4"
    assert format_scalar(mpq(2)) == "2"
    assert format_scalar(0.25) == "0.25"


def test_mixing_fields_is_refused():
    a = Operator.identity(2, 1, True)
    b = Operator.identity(2, 1, False)
    with pytest.raises(FieldMismatchError):
        a @ b


def test_operator_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Operator(np.zeros((3, 3)), 2)


def test_permutation_swaps_sites():
    p = Operator.permutation(3)
    x = kron(Operator(np.diag([mpq(1), mpq(2), mpq(3)]).astype(object), 3), Operator.identity(3, 1))
    y = kron(Operator.identity(3, 1), Operator(np.diag([mpq(1), mpq(2), mpq(3)]).astype(object), 3))
    assert p @ x @ p == y


@given(ops2, ops2, ops2, ops2)
def test_kron_mixed_product(a, b, c, d):
    assert kron(a, b) @ kron(c, d) == kron(a @ c, b @ d)


@given(ops3, ops3)
def test_embed_matches_kron(a, b):
    two = kron(a, b)
    assert embed(a, [1], 2, 3) @ embed(b, [2], 2, 3) == two
    # reversed site order is the conjugate by the swap
    p = Operator.permutation(3)
    assert embed(two, [2, 1], 2, 3) == p @ two @ p


@given(ops2, ops2)
def test_partial_trace_of_product(a, b):
    assert partial_trace_first(kron(a, b)) == b.scale(a.trace())


@given(ops2, ops2)
def test_partial_transpose_involution(a, b):
    x = kron(a, b)
    assert partial_transpose(partial_transpose(x, 1), 1) == x
    assert partial_transpose(partial_transpose(x, 1), 2) == x.T


@given(ops3)
def test_invert_roundtrip(a):
    try:
        inv = invert(a)
    except SingularMatrixError:
        assert nullspace(a.data)
        return
    assert a @ inv == Operator.identity(3)


@given(st.lists(small, min_size=12, max_size=12))
def test_solve_exact_consistency(vals):
    a = np.array([mpq(v) for v in vals[:9]], dtype=object).reshape(3, 3)
    x0 = np.array([mpq(v) for v in vals[9:]], dtype=object)
    b = a.dot(x0)
    x, rank, ok = solve_exact(a, b)
    assert ok
    assert all(u == v for u, v in zip(a.dot(x), b))


def test_singular_inverse_raises():
    a = rational_op([1, 2, 2, 4], 2)
    with pytest.raises(SingularMatrixError):
        invert(a)


def test_float_mode_tolerance():
    a = Operator(np.eye(2), 2, exact=False)
    b = Operator(np.eye(2) + 1e-14, 2, exact=False)
    assert a.equals(b)
    assert not a.equals(Operator(np.eye(2) + 1e-9, 2, exact=False))


def test_random_rational_interval():
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = random_rational(rng, 50, lo=0, hi=1)
        assert 0 < v < 1
        assert random_rational(rng, 50, positive=True) > 0
