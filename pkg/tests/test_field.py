import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmlc.field import (
    FieldError,
    FieldSpec,
    add,
    default_modulus,
    default_points,
    inv,
    matmul_mod,
    mul,
    symbol_width,
    to_array,
)


def test_add_examples():
    F7, F11 = FieldSpec(7), FieldSpec(11)
    assert add(F7(3), F7(5)).value == 1
    assert add(F11(10), F11(10)).value == 9
    for x in F7.elements():
        assert add(F7(0), x) == x


def test_mul_examples():
    F7 = FieldSpec(7)
    assert mul(F7(3), F7(5)).value == 1
    for x in F7.elements():
        assert mul(F7(1), x) == x


def test_inverse_pairs_mod_13_by_search():
    F13 = FieldSpec(13)
    pairs = {a: b for a in range(1, 13) for b in range(1, 13) if a * b % 13 == 1}
    assert pairs[6] == 11
    assert mul(F13(6), F13(11)).value == 1
    for a, b in pairs.items():
        assert inv(F13(a)).value == b


def test_inv_examples():
    F7 = FieldSpec(7)
    assert inv(F7(1)).value == 1
    assert [b for b in range(7) if 3 * b % 7 == 1] == [5]
    assert inv(F7(3)).value == 5
    with pytest.raises(ZeroDivisionError):
        inv(F7(0))


def test_mismatched_moduli():
    with pytest.raises(FieldError):
        FieldSpec(7)(1) + FieldSpec(11)(1)
    with pytest.raises(FieldError):
        mul(FieldSpec(7)(2), FieldSpec(5)(2))


def test_non_prime_modulus_rejected():
    for q in (0, 1, 4, 9, 15, 256):
        with pytest.raises(FieldError):
            FieldSpec(q)


@pytest.mark.parametrize("q", [2, 3, 5, 7, 11, 13])
def test_field_axioms_exhaustive(q):
    F = FieldSpec(q)
    els = list(F.elements())
    for a, b in itertools.product(els, repeat=2):
        assert a + b == b + a
        assert a * b == b * a
    for a, b, c in itertools.product(els, repeat=3):
        assert (a + b) + c == a + (b + c)
        assert (a * b) * c == a * (b * c)
        assert a * (b + c) == a * b + a * c
    for a in els[1:]:
        assert inv(inv(a)) == a
        assert a * inv(a) == F.one


def test_default_points_examples():
    assert default_points(FieldSpec(11), N=6, K=3, T=1) == ((0, 1, 2, 3), (4, 5, 6, 7, 8, 9))
    assert default_points(FieldSpec(7), N=4, K=1, T=1) == ((0, 1), (2, 3, 4, 5))
    with pytest.raises(FieldError):
        default_points(FieldSpec(5), N=6, K=3, T=1)


@given(st.integers(1, 40), st.integers(1, 10), st.integers(1, 10))
def test_default_points_distinct(N, K, T):
    q = default_modulus(N, K, T)
    pts = default_points(q, N, K, T)
    values = sorted(pts.beta + pts.alpha)
    assert len(set(values)) == N + K + T
    assert len(pts.beta) == K + T and len(pts.alpha) == N


def test_default_modulus():
    assert default_modulus(6, 3, 1) == 257
    assert default_modulus(300, 3, 1) == 307


def test_symbol_width():
    assert symbol_width(2) == 1
    assert symbol_width(257) == 2
    assert symbol_width(65537) == 4
    assert symbol_width(2**31 - 1) == 4
    assert symbol_width(2**61 - 1) == 8


@given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=20))
def test_to_array_reduces(values):
    arr = to_array(values, 257)
    assert list(arr) == [v % 257 for v in values]


@pytest.mark.parametrize("q", [11, 2**31 - 1, 2**61 - 1])
def test_matmul_mod_matches_python_ints(q):
    rng = np.random.default_rng(q % 1000)
    a = [[int(v) for v in rng.integers(0, min(q, 2**62), 5)] for _ in range(3)]
    b = [[int(v) for v in rng.integers(0, min(q, 2**62), 4)] for _ in range(5)]
    a = [[v % q for v in row] for row in a]
    b = [[v % q for v in row] for row in b]
    expected = [[sum(a[i][k] * b[k][j] for k in range(5)) % q for j in range(4)] for i in range(3)]
    got = matmul_mod(to_array(a, q), to_array(b, q), q)
    assert [[int(v) for v in row] for row in got] == expected
