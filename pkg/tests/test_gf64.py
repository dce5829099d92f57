import numpy as np
import pytest

from gf64 import (
    EXP_TABLE,
    INV_TABLE,
    MUL_TABLE,
    ORDER,
    PRIMITIVE,
    SIZE,
    Gf64Error,
    gf_add,
    gf_div,
    gf_dot,
    gf_inv,
    gf_mul,
    gf_pow,
    poly_mul_reduce,
)


def test_tables_match_reference_multiplication():
    for a in range(SIZE):
        for b in range(SIZE):
            assert MUL_TABLE[a, b] == poly_mul_reduce(a, b)
            assert gf_mul(a, b) == poly_mul_reduce(a, b)


def test_field_axioms_exhaustive():
    e = np.arange(SIZE)
    a, b, c = np.meshgrid(e, e, e, indexing="ij")
    assert (MUL_TABLE == MUL_TABLE.T).all()
    assert (MUL_TABLE[:, 1] == e).all()
    assert (MUL_TABLE[a, b ^ c] == MUL_TABLE[a, b] ^ MUL_TABLE[a, c]).all()
    assert (MUL_TABLE[MUL_TABLE[a, b], c] == MUL_TABLE[a, MUL_TABLE[b, c]]).all()
    for x in range(SIZE):
        assert gf_add(x, 0) == x
        assert gf_add(x, x) == 0
        assert gf_mul(x, 0) == 0


def test_inverses():
    for a in range(1, SIZE):
        assert gf_mul(a, gf_inv(a)) == 1
        assert INV_TABLE[a] == gf_inv(a)
        assert gf_div(a, a) == 1


def test_inverse_of_zero_raises():
    with pytest.raises(Gf64Error):
        gf_inv(0)
    with pytest.raises(Gf64Error):
        gf_div(5, 0)


def test_alpha_is_primitive():
    powers = {gf_pow(PRIMITIVE, k) for k in range(ORDER)}
    assert len(powers) == ORDER
    assert gf_pow(PRIMITIVE, ORDER) == 1
    assert all(gf_pow(PRIMITIVE, k) != 1 for k in range(1, ORDER))
    # x^6 = x + 1
    assert EXP_TABLE[6] == 0b000011


def test_out_of_range_element():
    with pytest.raises(Gf64Error):
        gf_mul(64, 1)


def test_dot_product():
    assert gf_dot([1, 2, 3], [1, 1, 1]) == 1 ^ 2 ^ 3
    assert gf_dot([], []) == 0
