"""
GF(2^6) arithmetic
Field of 64 elements with primitive polynomial p(x) = 1 + x + x^6.

Element i is a 6-bit integer; bit k is the coefficient of x^k.
"""
import numpy as np

POLY = 0x43          # x^6 + x + 1
ORDER = 63           # size of the multiplicative group
SIZE = 64
PRIMITIVE = 2        # alpha = x

# First transmitted bit of a 6-bit group is the coefficient of x^5.
BITS_PER_SYMBOL = 6
MSB_FIRST = True


class Gf64Error(ArithmeticError):
    """Raised for undefined field operations (inverse of zero)."""


# ==================== TABLES ====================

def _build_tables():
    exp_table = np.zeros(2 * ORDER, dtype=np.uint8)
    log_table = np.full(SIZE, -1, dtype=np.int16)
    value = 1
    for k in range(ORDER):
        exp_table[k] = value
        log_table[value] = k
        value <<= 1
        if value & SIZE:
            value ^= POLY
    # doubled so exp[log a + log b] never needs a modulo
    exp_table[ORDER:] = exp_table[:ORDER]
    return exp_table, log_table


EXP_TABLE, LOG_TABLE = _build_tables()


def _build_mul_table():
    table = np.zeros((SIZE, SIZE), dtype=np.uint8)
    logs = LOG_TABLE[1:].astype(np.int64)
    table[1:, 1:] = EXP_TABLE[logs[:, None] + logs[None, :]]
    return table


MUL_TABLE = _build_mul_table()
INV_TABLE = np.zeros(SIZE, dtype=np.uint8)
INV_TABLE[1:] = EXP_TABLE[(ORDER - LOG_TABLE[1:].astype(np.int64)) % ORDER]

for _table in (EXP_TABLE, LOG_TABLE, MUL_TABLE, INV_TABLE):
    _table.setflags(write=False)


# ==================== SCALAR OPERATIONS ====================

def _check(a):
    if not 0 <= int(a) < SIZE:
        raise Gf64Error(f"{a} is not an element of GF(64)")
    return int(a)


def gf_add(a, b):
    """Field addition (XOR)."""
    return _check(a) ^ _check(b)


def gf_mul(a, b):
    """Field multiplication through the exp/log tables."""
    a, b = _check(a), _check(b)
    if a == 0 or b == 0:
        return 0
    return int(EXP_TABLE[LOG_TABLE[a] + LOG_TABLE[b]])


def gf_inv(a):
    """Multiplicative inverse; zero has none."""
    a = _check(a)
    if a == 0:
        raise Gf64Error("zero has no multiplicative inverse in GF(64)")
    return int(INV_TABLE[a])


def gf_div(a, b):
    return gf_mul(a, gf_inv(b))


def gf_pow(a, n):
    a = _check(a)
    if n == 0:
        return 1
    if a == 0:
        return 0
    return int(EXP_TABLE[(int(LOG_TABLE[a]) * n) % ORDER])


def poly_mul_reduce(a, b):
    """Carry-less product reduced mod p(x); slow reference for the tables."""
    a, b = _check(a), _check(b)
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a & SIZE:
            a ^= POLY
    return result


# ==================== VECTOR OPERATIONS ====================

def gf_mul_vec(a, b):
    """Element-wise product of two uint8 arrays."""
    return MUL_TABLE[np.asarray(a, dtype=np.uint8), np.asarray(b, dtype=np.uint8)]


def gf_dot(a, b):
    """Inner product sum(a_i * b_i) over GF(64)."""
    products = gf_mul_vec(a, b)
    return int(np.bitwise_xor.reduce(products)) if products.size else 0
